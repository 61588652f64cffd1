#pragma once

// Aalen additive hazard regression. At each event time s of the target
// process the increment solves the weighted normal equations
//   (X'WX) dB = X'W dN
// over the at-risk rows, where X holds left-limit design values and W is
// diagonal with entries Y^i_s * R^i_{s-}. Cumulative coefficients are the
// prefix sums of the increments.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ctmsm/design.hpp"
#include "ctmsm/event_history.hpp"
#include "ctmsm/weight_set.hpp"

namespace ctmsm {

struct CumCoef {
    std::vector<double> times;      // all distinct event times of the target process
    Eigen::MatrixXd increments;     // times x p (zero rows at skipped times)
    Eigen::MatrixXd cumulative;     // prefix sums of increments
    std::vector<double> skipped_times;  // singular or ill-conditioned normal equations
    std::vector<std::string> columns;

    int p() const { return static_cast<int>(increments.cols()); }
    std::size_t size() const { return times.size(); }

    // Right-continuous step evaluation of cumulative column j.
    double cum_at(int j, double t) const;

    // Sum of two columns as a single cumulative series (e.g. treated arm).
    static CumCoef from_increments(std::vector<double> times, Eigen::MatrixXd increments,
                                   std::vector<std::string> columns);
};

// Gram matrices with a condition estimate above this are skipped.
inline constexpr double kConditionLimit = 1e12;
inline constexpr double kRankTolerance = 1e-12;

CumCoef fit_additive(const EventHistory& history, EventKind outcome, const DesignSpec& spec,
                     const WeightSet* weights = nullptr);

// Intercept-only special case.
CumCoef nelson_aalen(const EventHistory& history, EventKind kind,
                     const WeightSet* weights = nullptr);

namespace serial {
CumCoef fit_additive(const EventHistory& history, EventKind outcome, const DesignSpec& spec,
                     const WeightSet* weights = nullptr);
CumCoef nelson_aalen(const EventHistory& history, EventKind kind,
                     const WeightSet* weights = nullptr);
}  // namespace serial

}  // namespace ctmsm
