#pragma once

// Per-subject weight paths. Values are nonnegative step functions of study
// time; downstream fitting always evaluates them as left limits.

#include <optional>
#include <vector>

#include "ctmsm/step_path.hpp"

namespace ctmsm {

enum class WeightProvenance {
    Unit,
    EstimatedTreatment,
    EstimatedCensoring,
    Baseline,
    Theoretical,
    Iptw,
    Combined,
};

const char* provenance_name(WeightProvenance p);

struct WeightSet {
    std::vector<StepPath> paths;
    std::optional<double> truncation_bound;
    WeightProvenance provenance = WeightProvenance::Unit;
    std::vector<int> flagged;      // subjects with a degenerate construction step
    long truncation_count = 0;     // path values clipped by the bound

    int n() const { return static_cast<int>(paths.size()); }
    double at(int subject, double t) const {
        return paths[static_cast<std::size_t>(subject)].at(t);
    }
    double left_limit(int subject, double t) const {
        return paths[static_cast<std::size_t>(subject)].left_limit(t);
    }

    static WeightSet unit(int n) {
        WeightSet w;
        w.paths.assign(static_cast<std::size_t>(n), StepPath(1.0));
        return w;
    }
};

}  // namespace ctmsm
