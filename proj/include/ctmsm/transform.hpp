#pragma once

// Plugin estimation of parameters that solve ODEs driven by cumulative
// hazards: eta_t = eta_0 + int_0^t F(eta_{s-}) dB_s. With a step-function
// integrator this is a finite recursion over the jump times.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctmsm/aalen.hpp"

namespace ctmsm {

// One integrator column: jump times with increments.
struct StepSeries {
    std::vector<double> times;
    std::vector<double> increments;
};

StepSeries column_series(const CumCoef& fit, int column);
StepSeries column_series(const CumCoef& fit, const std::string& label);
// Union of jump times, increments added (e.g. B^{A=1} = B^{A=0} + int beta^A).
StepSeries sum_series(const StepSeries& a, const StepSeries& b);

struct OdeSpec {
    int dim = 1;                           // state dimension d
    std::vector<double> eta0;
    int m = 1;                             // integrator arity
    // Fills the d x m matrix F(eta), row-major.
    std::function<void(const double* eta, double* f)> integrand;
    // Per integrator column: false = bound to a hazard series, true = dt column.
    std::vector<bool> time_column;
    std::optional<double> terminal_time;   // extra grid point (dt columns keep
                                           // integrating up to it)
    std::vector<std::string> state_names;

    int hazard_columns() const;
};

struct ParamPath {
    std::vector<double> times;
    std::vector<std::vector<double>> states;  // one d-vector per time
    std::vector<double> eta0;
    std::vector<std::string> state_names;

    // Right-continuous step evaluation; eta0 before the first jump.
    std::vector<double> at(double t) const;
    double at(double t, int component) const;
};

// hazards are consumed in column order by the non-dt integrator columns.
ParamPath solve_plugin(const OdeSpec& spec, const std::vector<StepSeries>& hazards);

OdeSpec survival_spec();
OdeSpec relative_survival_spec();
OdeSpec cumulative_incidence_spec();
OdeSpec rmst_spec(double horizon);

}  // namespace ctmsm
