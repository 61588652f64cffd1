#pragma once

// Scripted simulation studies: cumulative treatment-effect comparison across
// weight estimators, mean-weight bias curves, the bandwidth bias/variance
// grid, and the dependent-censoring validation. Every run is deterministic
// given (seed, config) and writes CSV tables plus a manifest.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctmsm/sim.hpp"

namespace ctmsm {

std::vector<double> time_grid(double horizon, int points);  // equispaced, excludes 0

double sup_distance(const std::vector<double>& a, const std::vector<double>& b);

// --- cumulative treatment effect (B^{A=1} - B^{A=0}) comparison ---

struct EffectComparisonConfig {
    ConfoundedScenario scenario;
    std::vector<int> ns{500, 1000, 2000};
    std::vector<int> k_list{4, 8, 16};
    int reps = 50;
    int grid_points = 200;
    double kappa_scale = 0.5;  // kappa = kappa_scale * n^{1/3}
    uint64_t seed = 1;
    std::string outdir;
};

// named curves of one replication at one sample size, on the shared grid
using CurveMap = std::map<std::string, std::vector<double>>;

CurveMap effect_comparison_rep(const ConfoundedScenario& scenario, int n,
                               const std::vector<int>& k_list, double kappa_scale,
                               const std::vector<double>& grid, const MarginalHazard& marginal,
                               uint64_t rep_seed);

void run_effect_comparison(const EffectComparisonConfig& cfg);

// --- mean weight curves (weight bias) ---

struct MeanWeightConfig {
    ConfoundedScenario scenario;
    int n = 3000;
    int reps = 50;
    std::vector<int> k_list{4, 8, 16};
    int grid_points = 200;
    double kappa_scale = 0.5;
    uint64_t seed = 1;
    std::string outdir;
};

// Per-estimator sums of the weight over the subjects still at risk of the
// outcome at each grid time (the rows a weighted fit would consume), plus an
// "at_risk" count series. Sums, not means, so replications aggregate exactly.
CurveMap mean_weight_rep(const ConfoundedScenario& scenario, int n,
                         const std::vector<int>& k_list, double kappa_scale,
                         const std::vector<double>& grid, const MarginalHazard& marginal,
                         uint64_t rep_seed, CurveMap* sumsq = nullptr);

void run_mean_weight_bias(const MeanWeightConfig& cfg);

// --- bandwidth refinement strategies (bias/variance at t0) ---

struct StrategyGrid {
    double n0 = 250.0;
    double t0 = 1.0;                                   // kappa_{n0} = 1/t0 for all strategies
    std::vector<double> rates{0.5, 1.0 / 3.0, 0.2, 0.1};
    std::vector<int> ns{250, 500, 1000, 2000};
    int reps = 200;

    double kappa(int strategy, int n) const;
    void validate() const;  // warns when a rate violates kappa_n/sqrt(n) boundedness
};

struct BiasVarianceConfig {
    BaselineScenario scenario;
    StrategyGrid grid;
    uint64_t seed = 1;
    std::string outdir;
};

struct BiasVarRow {
    int strategy = 0;  // 1..4
    int n = 0;
    double bias = 0.0;      // mean estimated weight at t0 minus 1 (true mean)
    double abs_bias = 0.0;
    double variance = 0.0;  // variance of the per-subject estimation error, pooled over reps
    long count = 0;
};

std::vector<BiasVarRow> bias_variance_table(const BiasVarianceConfig& cfg);
void run_bias_variance(const BiasVarianceConfig& cfg);

// --- dependent censoring validation ---

struct CensoringConfig {
    ConfoundedScenario scenario;  // treatment-free; cens0/censl drive the study
    int n = 2000;
    int reps = 50;
    int oracle_n = 20000;
    int grid_points = 200;
    uint64_t seed = 1;
    std::string outdir;
};

struct CensoringRepResult {
    double dist_weighted = 0.0;    // sup-grid distance to the oracle curve
    double dist_unweighted = 0.0;
    double mean_ratio_terminal = 0.0;  // theoretical censoring ratio mean at horizon
};

std::vector<double> censoring_oracle_curve(const CensoringConfig& cfg,
                                           const std::vector<double>& grid);
CensoringRepResult censoring_rep(const CensoringConfig& cfg, const std::vector<double>& grid,
                                 const std::vector<double>& oracle,
                                 const MarginalHazard& marginal_cens, uint64_t rep_seed);
void run_censoring_validation(const CensoringConfig& cfg);

// manifest.json written alongside experiment outputs
void write_manifest(const std::string& outdir, const std::string& experiment,
                    const std::string& config_json, uint64_t seed);

}  // namespace ctmsm
