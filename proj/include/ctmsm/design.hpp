#pragma once

// Design specifications: map baseline variables, indicator processes and
// products of them onto regression columns, evaluated as left limits.

#include <string>
#include <vector>

#include "ctmsm/event_history.hpp"
#include "ctmsm/weight_set.hpp"

namespace ctmsm {

struct DesignFactor {
    enum class Kind { One, Baseline, Process };
    Kind kind = Kind::One;
    int baseline_col = -1;
    EventKind process = EventKind::Treatment;
};

struct DesignColumn {
    std::string label;
    std::vector<DesignFactor> factors;  // column value is the product of factors
};

struct DesignSpec {
    std::vector<DesignColumn> columns;

    int size() const { return static_cast<int>(columns.size()); }

    // Column expressions: "1", process codes "A"/"L"/"D"/"C", baseline column
    // names, and '*'-products of those, e.g. {"1", "A", "L", "A*L"}.
    static DesignSpec parse(const std::vector<std::string>& exprs,
                            const std::vector<std::string>& baseline_names);
    static DesignSpec intercept();

    std::vector<std::string> labels() const;
};

// Left-limit design row X^i_{t-}; out must hold spec.size() values.
void design_row(const EventHistory& history, const DesignSpec& spec, int subject, double t,
                double* out);
std::vector<double> design_row(const EventHistory& history, const DesignSpec& spec, int subject,
                               double t);

// One row per (at-risk subject x event time of `kind`), carrying left-limit
// design values and the weight evaluated just before the event time.
struct ExpandedTable {
    std::vector<double> times;
    std::vector<int> subjects;
    std::vector<int> event;            // 1 when this row's subject jumps at this time
    std::vector<double> weight;
    std::vector<std::vector<double>> design;  // row-major, one vector per row
    std::vector<std::string> design_labels;

    std::size_t rows() const { return times.size(); }
};

ExpandedTable expand_to_event_grid(const EventHistory& history, EventKind kind,
                                   const DesignSpec& spec,
                                   const WeightSet* weights = nullptr);

}  // namespace ctmsm
