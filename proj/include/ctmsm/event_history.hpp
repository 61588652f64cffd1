#pragma once

// Event-history data model: per-subject time-ordered records for the
// treatment (A), covariate (L), outcome (D) and censoring (C) processes,
// plus baseline variables.

#include <array>
#include <limits>
#include <string>
#include <vector>

namespace ctmsm {

// Tie-break priority at equal times is the enum order: D < A < L < C.
enum class EventKind : int { Outcome = 0, Treatment = 1, Covariate = 2, Censoring = 3 };

inline constexpr int kNumEventKinds = 4;

char kind_code(EventKind k);
EventKind kind_from_code(char c);

struct EventRecord {
    int subject = 0;
    double time = 0.0;
    EventKind kind = EventKind::Outcome;
    std::vector<double> payload;  // optional new covariate values
};

class EventHistory {
public:
    const std::vector<EventRecord>& records() const { return records_; }
    int n() const { return n_; }
    double horizon() const { return horizon_; }

    int baseline_dim() const { return static_cast<int>(baseline_names_.size()); }
    const std::vector<std::string>& baseline_names() const { return baseline_names_; }
    double baseline_value(int subject, int column) const {
        return baseline_[static_cast<std::size_t>(subject)][static_cast<std::size_t>(column)];
    }
    const std::vector<std::vector<double>>& baseline() const { return baseline_; }
    int baseline_index(const std::string& name) const;

    // First event time of `k` for a subject, +inf when the subject has none.
    double first_time(int subject, EventKind k) const {
        return first_[static_cast<std::size_t>(subject)][static_cast<int>(k)];
    }

    // End of the at-risk period for `k`: min(first k, first D, first C).
    double risk_exit(int subject, EventKind k) const;

    // Left-limit convention: 1 iff no k/D/C event strictly before t.
    int at_risk(int subject, EventKind k, double t) const;

    friend EventHistory build_history(std::vector<EventRecord> records,
                                      std::vector<std::vector<double>> baseline,
                                      std::vector<std::string> baseline_names,
                                      double horizon);

private:
    std::vector<EventRecord> records_;
    std::vector<std::vector<double>> baseline_;   // n rows
    std::vector<std::string> baseline_names_;
    std::vector<std::array<double, kNumEventKinds>> first_;
    double horizon_ = 0.0;
    int n_ = 0;
};

// Validates, sorts by (time, kind priority, subject) and indexes the records.
// n is baseline.size() when baseline rows are given, otherwise max subject + 1.
EventHistory build_history(std::vector<EventRecord> records,
                           std::vector<std::vector<double>> baseline,
                           std::vector<std::string> baseline_names,
                           double horizon);

// Distinct ascending event times of one kind with the subjects jumping at each.
struct EventTimeline {
    std::vector<double> times;
    std::vector<std::vector<int>> subjects;
};

EventTimeline event_timeline(const EventHistory& history, EventKind kind);

}  // namespace ctmsm
