#include "ctmsm/design.hpp"

#include <cmath>
#include <stdexcept>

namespace ctmsm {

namespace {

DesignFactor parse_factor(const std::string& token,
                          const std::vector<std::string>& baseline_names) {
    DesignFactor f;
    if (token == "1") {
        f.kind = DesignFactor::Kind::One;
        return f;
    }
    if (token.size() == 1 && (token[0] == 'A' || token[0] == 'L' || token[0] == 'D' || token[0] == 'C')) {
        f.kind = DesignFactor::Kind::Process;
        f.process = kind_from_code(token[0]);
        return f;
    }
    for (std::size_t j = 0; j < baseline_names.size(); ++j) {
        if (baseline_names[j] == token) {
            f.kind = DesignFactor::Kind::Baseline;
            f.baseline_col = static_cast<int>(j);
            return f;
        }
    }
    throw std::invalid_argument("design column references unknown variable: " + token);
}

}  // namespace

DesignSpec DesignSpec::parse(const std::vector<std::string>& exprs,
                             const std::vector<std::string>& baseline_names) {
    DesignSpec spec;
    for (const auto& expr : exprs) {
        DesignColumn col;
        col.label = expr;
        std::string token;
        for (std::size_t i = 0; i <= expr.size(); ++i) {
            if (i == expr.size() || expr[i] == '*') {
                if (token.empty())
                    throw std::invalid_argument("empty factor in design column: " + expr);
                col.factors.push_back(parse_factor(token, baseline_names));
                token.clear();
            } else if (expr[i] != ' ') {
                token += expr[i];
            }
        }
        spec.columns.push_back(std::move(col));
    }
    if (spec.columns.empty()) throw std::invalid_argument("empty design spec");
    return spec;
}

DesignSpec DesignSpec::intercept() {
    DesignSpec spec;
    spec.columns.push_back({"1", {DesignFactor{}}});
    return spec;
}

std::vector<std::string> DesignSpec::labels() const {
    std::vector<std::string> out;
    out.reserve(columns.size());
    for (const auto& c : columns) out.push_back(c.label);
    return out;
}

void design_row(const EventHistory& history, const DesignSpec& spec, int subject, double t,
                double* out) {
    for (std::size_t j = 0; j < spec.columns.size(); ++j) {
        double v = 1.0;
        for (const auto& f : spec.columns[j].factors) {
            switch (f.kind) {
                case DesignFactor::Kind::One:
                    break;
                case DesignFactor::Kind::Baseline:
                    v *= history.baseline_value(subject, f.baseline_col);
                    break;
                case DesignFactor::Kind::Process:
                    // left limit of the 0/1 indicator: jumped strictly before t
                    if (!(history.first_time(subject, f.process) < t)) v = 0.0;
                    break;
            }
            if (v == 0.0) break;
        }
        out[j] = v;
    }
}

std::vector<double> design_row(const EventHistory& history, const DesignSpec& spec, int subject,
                               double t) {
    std::vector<double> out(static_cast<std::size_t>(spec.size()));
    design_row(history, spec, subject, t, out.data());
    return out;
}

ExpandedTable expand_to_event_grid(const EventHistory& history, EventKind kind,
                                   const DesignSpec& spec, const WeightSet* weights) {
    if (weights && weights->n() != history.n())
        throw std::invalid_argument("expand_to_event_grid: weight set size mismatch");
    ExpandedTable table;
    table.design_labels = spec.labels();
    const EventTimeline tl = event_timeline(history, kind);
    const int n = history.n();
    for (std::size_t k = 0; k < tl.times.size(); ++k) {
        const double s = tl.times[k];
        for (int i = 0; i < n; ++i) {
            if (history.risk_exit(i, kind) < s) continue;
            table.times.push_back(s);
            table.subjects.push_back(i);
            int ev = 0;
            for (int j : tl.subjects[k]) ev |= (j == i);
            table.event.push_back(ev);
            table.weight.push_back(weights ? weights->left_limit(i, s) : 1.0);
            table.design.push_back(design_row(history, spec, i, s));
        }
    }
    return table;
}

}  // namespace ctmsm
