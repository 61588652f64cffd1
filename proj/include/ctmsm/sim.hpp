#pragma once

// Event-history generators with constant per-state hazards, the marginal
// (covariate-integrated) treatment hazard, and exact intensity functions for
// theoretical weight computation.

#include <cstdint>
#include <functional>

#include "ctmsm/event_history.hpp"
#include "ctmsm/weights.hpp"

namespace ctmsm {

// Time-dependent confounding scenario: L raises the treatment hazard and the
// outcome hazard; treatment feeds back on L. Optional censoring clock with
// hazard cens0 + censl * L_{t-} for the dependent-censoring study.
struct ConfoundedScenario {
    double alpha_d0 = 0.1;   // outcome hazard, untreated L=0
    double alpha_da = 0.05;  // added by treatment
    double alpha_dl = 0.1;   // added by L
    double alpha_dal = 0.0;  // treatment x L interaction
    double alpha_a0 = 0.1;   // treatment hazard, L=0
    double alpha_al = 0.3;   // added by L
    double alpha_l0 = 0.2;   // covariate hazard, untreated
    double alpha_la = 0.05;  // added by treatment
    double cens0 = 0.0;
    double censl = 0.0;
    double horizon = 10.0;
    int n = 1000;

    void validate() const;
};

// Treatment initiation depending on a binary baseline variable x only.
struct BaselineScenario {
    double alpha0 = 0.2;
    double alphaA = 0.4;
    double p = 0.5;
    double horizon = 5.0;
    int n = 1000;

    void validate() const;
};

EventHistory simulate_confounded(const ConfoundedScenario& scn, uint64_t seed);
EventHistory simulate_baseline_scenario(const BaselineScenario& scn, uint64_t seed);

// Marginal hazard of one process with the covariate integrated out, as a
// callable triple (rate, cumulative, inverse cumulative).
struct MarginalHazard {
    std::function<double(double)> rate;
    std::function<double(double)> cum;
    std::function<double(double)> cum_inverse;  // +inf when never reached
};

MarginalHazard marginal_treatment_hazard(const BaselineScenario& scn);
MarginalHazard marginal_treatment_hazard(const ConfoundedScenario& scn);
MarginalHazard marginal_censoring_hazard(const ConfoundedScenario& scn);

// The confounded generator with the treatment clock replaced by the marginal
// hazard, independent of L; all other clocks keep their form.
EventHistory simulate_hypothetical(const ConfoundedScenario& scn, const MarginalHazard& marginal,
                                   uint64_t seed);
// Same substitution applied to the censoring clock instead.
EventHistory simulate_censoring_randomized(const ConfoundedScenario& scn,
                                           const MarginalHazard& marginal, uint64_t seed);
// Baseline-scenario analogue: treatment time drawn from the marginal hazard,
// x kept for bookkeeping.
EventHistory simulate_baseline_hypothetical(const BaselineScenario& scn,
                                            const MarginalHazard& marginal, uint64_t seed);

// Exact intensities along observed data, for theoretical_weights.
IntensityFn treatment_intensity(const ConfoundedScenario& scn, const EventHistory& history);
IntensityFn treatment_intensity(const BaselineScenario& scn, const EventHistory& history);
IntensityFn censoring_intensity(const ConfoundedScenario& scn, const EventHistory& history);
IntensityFn marginal_intensity(const MarginalHazard& m, const EventHistory& history,
                               EventKind process);

namespace serial {
EventHistory simulate_confounded(const ConfoundedScenario& scn, uint64_t seed);
EventHistory simulate_baseline_scenario(const BaselineScenario& scn, uint64_t seed);
}  // namespace serial

}  // namespace ctmsm
