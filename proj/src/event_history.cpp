#include "ctmsm/event_history.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ctmsm {

char kind_code(EventKind k) {
    switch (k) {
        case EventKind::Outcome: return 'D';
        case EventKind::Treatment: return 'A';
        case EventKind::Covariate: return 'L';
        case EventKind::Censoring: return 'C';
    }
    return '?';
}

EventKind kind_from_code(char c) {
    switch (c) {
        case 'D': return EventKind::Outcome;
        case 'A': return EventKind::Treatment;
        case 'L': return EventKind::Covariate;
        case 'C': return EventKind::Censoring;
    }
    throw std::invalid_argument(std::string("unknown event kind code: ") + c);
}

int EventHistory::baseline_index(const std::string& name) const {
    for (std::size_t j = 0; j < baseline_names_.size(); ++j)
        if (baseline_names_[j] == name) return static_cast<int>(j);
    return -1;
}

double EventHistory::risk_exit(int subject, EventKind k) const {
    const auto& f = first_[static_cast<std::size_t>(subject)];
    double exit = std::min(f[static_cast<int>(EventKind::Outcome)],
                           f[static_cast<int>(EventKind::Censoring)]);
    return std::min(exit, f[static_cast<int>(k)]);
}

int EventHistory::at_risk(int subject, EventKind k, double t) const {
    if (subject < 0 || subject >= n_) throw std::invalid_argument("at_risk: unknown subject");
    return risk_exit(subject, k) >= t ? 1 : 0;
}

EventHistory build_history(std::vector<EventRecord> records,
                           std::vector<std::vector<double>> baseline,
                           std::vector<std::string> baseline_names,
                           double horizon) {
    if (!(horizon > 0.0)) throw std::invalid_argument("build_history: horizon must be positive");

    int n = static_cast<int>(baseline.size());
    for (const auto& r : records) {
        if (r.subject < 0) throw std::invalid_argument("build_history: negative subject id");
        if (baseline.empty()) n = std::max(n, r.subject + 1);
    }
    if (!baseline.empty()) {
        for (const auto& row : baseline)
            if (row.size() != baseline_names.size())
                throw std::invalid_argument("build_history: baseline row arity mismatch");
        for (const auto& r : records)
            if (r.subject >= n)
                throw std::invalid_argument("build_history: record subject not in baseline");
    } else {
        baseline.assign(static_cast<std::size_t>(n), {});
    }

    for (const auto& r : records) {
        if (std::isnan(r.time) || r.time < 0.0)
            throw std::invalid_argument("build_history: negative or NaN event time");
        if (r.time > horizon)
            throw std::invalid_argument("build_history: event time beyond horizon");
    }

    std::sort(records.begin(), records.end(), [](const EventRecord& a, const EventRecord& b) {
        if (a.time != b.time) return a.time < b.time;
        if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
        return a.subject < b.subject;
    });

    // Payload arity must be consistent within a kind.
    std::array<long, kNumEventKinds> arity;
    arity.fill(-1);
    for (const auto& r : records) {
        long a = static_cast<long>(r.payload.size());
        long& expected = arity[static_cast<int>(r.kind)];
        if (expected < 0) expected = a;
        else if (expected != a)
            throw std::invalid_argument("build_history: payload arity mismatch");
    }

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<std::array<double, kNumEventKinds>> first(
        static_cast<std::size_t>(n), {inf, inf, inf, inf});
    for (const auto& r : records) {
        double& t = first[static_cast<std::size_t>(r.subject)][static_cast<int>(r.kind)];
        if (std::isfinite(t))
            throw std::invalid_argument("build_history: duplicate " +
                                        std::string(1, kind_code(r.kind)) + " event for subject " +
                                        std::to_string(r.subject));
        t = r.time;
    }
    for (const auto& r : records) {
        const auto& f = first[static_cast<std::size_t>(r.subject)];
        double terminal = std::min(f[static_cast<int>(EventKind::Outcome)],
                                   f[static_cast<int>(EventKind::Censoring)]);
        if (r.time > terminal)
            throw std::invalid_argument("build_history: event after terminal event for subject " +
                                        std::to_string(r.subject));
    }

    EventHistory h;
    h.records_ = std::move(records);
    h.baseline_ = std::move(baseline);
    h.baseline_names_ = std::move(baseline_names);
    h.first_ = std::move(first);
    h.horizon_ = horizon;
    h.n_ = n;
    return h;
}

EventTimeline event_timeline(const EventHistory& history, EventKind kind) {
    EventTimeline tl;
    for (const auto& r : history.records()) {
        if (r.kind != kind) continue;
        if (tl.times.empty() || r.time > tl.times.back()) {
            tl.times.push_back(r.time);
            tl.subjects.emplace_back();
        }
        tl.subjects.back().push_back(r.subject);
    }
    return tl;
}

}  // namespace ctmsm
