#pragma once

// Discrete-time stabilized IPTW baseline: person-period expansion over K
// equidistant intervals, pooled logistic regressions for the numerator
// (intercept + interval dummies) and denominator (+ covariates), and the
// cumulative product weight.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ctmsm/design.hpp"
#include "ctmsm/event_history.hpp"
#include "ctmsm/weight_set.hpp"

namespace ctmsm {

struct PersonPeriodTable {
    int K = 0;
    double horizon = 0.0;
    int n_subjects = 0;
    std::vector<int> subject;
    std::vector<int> interval;        // 1-based; interval k covers ((k-1)T/K, kT/K]
    std::vector<int> treated;         // treatment initiated in this interval
    std::vector<int> at_risk;         // 1 for every emitted row
    Eigen::MatrixXd covariates;       // rows x q, time-updated (interval-end left limits)
    std::vector<std::string> covariate_names;

    std::size_t rows() const { return subject.size(); }
};

// One row per subject per interval while untreated, alive and uncensored at
// the interval start; events on a boundary count toward the interval they
// close. Covariates carry the latest value realized within the interval.
PersonPeriodTable discretize(const EventHistory& history, int K, const DesignSpec& covariates);

struct LogisticFit {
    Eigen::VectorXd coef;
    std::vector<std::string> column_names;
    bool converged = false;
    int iterations = 0;
    double loglik = 0.0;
    std::vector<int> dropped_intervals;  // interval dummies without treatment events
    bool with_covariates = false;
};

// IRLS maximum likelihood on intercept + interval dummies (2..K, saturated)
// + optionally the table covariates. Rank-deficient columns are pinned to 0.
LogisticFit fit_pooled_logistic(const PersonPeriodTable& table, bool with_covariates);

// Predicted treatment probability per table row.
Eigen::VectorXd predict(const LogisticFit& fit, const PersonPeriodTable& table);

// Stabilized weight: step path constant within intervals, constant after
// treatment, with value prod_{j<=k} num_j / den_j over the subject's rows.
WeightSet stabilized_iptw(const LogisticFit& numerator_fit, const LogisticFit& denominator_fit,
                          const PersonPeriodTable& table);

inline constexpr double kIrlsGradientTol = 1e-8;
inline constexpr int kIrlsMaxIterations = 50;

}  // namespace ctmsm
