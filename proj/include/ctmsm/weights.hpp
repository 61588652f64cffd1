#pragma once

// Continuous-time likelihood-ratio weight estimation. The treatment weight
// solves dR = R_{s-} dK with the pure-jump integrator
//   K_t = int (theta_{s-} - 1) dN^A + int Y^A Z'_{s-} dH^(n) - int Y^A Zt'_{s-} dHt^(n),
// so R_t = R_0 * prod_{s<=t} (1 + dK_s). theta is a windowed ratio of the two
// fitted cumulative treatment hazards with bandwidth kappa.

#include <functional>
#include <optional>
#include <vector>

#include "ctmsm/aalen.hpp"
#include "ctmsm/design.hpp"
#include "ctmsm/event_history.hpp"
#include "ctmsm/weight_set.hpp"

namespace ctmsm {

enum class Theta0Policy {
    WindowAtBandwidth,  // backward extension of the window ratio at t = 1/kappa
    One,
};

struct ThetaPath {
    std::vector<StepPath> paths;  // per subject, right-continuous
    double kappa = 0.0;
    Theta0Policy policy = Theta0Policy::WindowAtBandwidth;
    std::vector<int> flagged;  // subjects that hit an empty/zero denominator window
};

ThetaPath estimate_theta(const EventHistory& history, const CumCoef& factual_fit,
                         const CumCoef& hypo_fit, const DesignSpec& factual_spec,
                         const DesignSpec& hypo_spec, double kappa,
                         Theta0Policy policy = Theta0Policy::WindowAtBandwidth);

// K assembled from a supplied theta path (exposed for composition and tests).
WeightSet assemble_weights(const EventHistory& history, const ThetaPath& theta,
                           const CumCoef& factual_fit, const CumCoef& hypo_fit,
                           const DesignSpec& factual_spec, const DesignSpec& hypo_spec,
                           const std::vector<double>* r0 = nullptr,
                           std::optional<double> truncation = std::nullopt);

WeightSet estimate_weights(const EventHistory& history, const CumCoef& factual_fit,
                           const CumCoef& hypo_fit, const DesignSpec& factual_spec,
                           const DesignSpec& hypo_spec, double kappa,
                           const std::vector<double>* r0 = nullptr,
                           std::optional<double> truncation = std::nullopt,
                           Theta0Policy policy = Theta0Policy::WindowAtBandwidth);

// Baseline propensity ratio R_0^i = numerator density / denominator density.
std::vector<double> baseline_weight(const std::vector<double>& numerator_density,
                                    const std::vector<double>& denominator_density);

// Censoring weights: same K construction without the jump term, driven by the
// two censoring-hazard fits.
WeightSet censoring_weights(const EventHistory& history, const CumCoef& factual_fit,
                            const CumCoef& hypo_fit, const DesignSpec& factual_spec,
                            const DesignSpec& hypo_spec,
                            std::optional<double> truncation = std::nullopt);

// Exact intensity of a counting process along the observed data, for
// simulated scenarios where the generating hazards are known.
struct IntensityFn {
    // lambda^i_t, evaluated with left-limit state (includes the at-risk factor)
    std::function<double(int subject, double t)> rate;
    // int_a^b lambda^i_s ds along the subject's observed path
    std::function<double(int subject, double a, double b)> cum;
};

// Exact likelihood-ratio path R_t = (prod theta^{dN}) exp(int lambda - lambda~),
// sampled at the subject's event times plus eval_times.
WeightSet theoretical_weights(const EventHistory& history, const IntensityFn& factual,
                              const IntensityFn& hypothetical,
                              EventKind jump_kind = EventKind::Treatment,
                              const std::vector<double>& eval_times = {});

// Pointwise product of weight sets; truncation applied last.
WeightSet combine_weights(const std::vector<const WeightSet*>& parts,
                          std::optional<double> truncation = std::nullopt);

// Default bandwidth: 1/kappa is the 10% quantile of the observed waiting
// times to the event (treatment gaps).
double default_bandwidth(const EventHistory& history, EventKind kind = EventKind::Treatment);

// kappa_n ∝ n^rate needs sup_n kappa_n / sqrt(n) < inf, i.e. rate <= 1/2.
bool bandwidth_rate_ok(double rate_exponent);

// Diagnostics emitted with estimated weight sets.
struct WeightDiagnostics {
    std::vector<int> flagged;
    long truncation_count = 0;
    std::vector<double> grid;
    std::vector<double> mean_curve;
};
WeightDiagnostics diagnose_weights(const WeightSet& ws, const std::vector<double>& grid);

namespace serial {
ThetaPath estimate_theta(const EventHistory& history, const CumCoef& factual_fit,
                         const CumCoef& hypo_fit, const DesignSpec& factual_spec,
                         const DesignSpec& hypo_spec, double kappa,
                         Theta0Policy policy = Theta0Policy::WindowAtBandwidth);
WeightSet estimate_weights(const EventHistory& history, const CumCoef& factual_fit,
                           const CumCoef& hypo_fit, const DesignSpec& factual_spec,
                           const DesignSpec& hypo_spec, double kappa,
                           const std::vector<double>* r0 = nullptr,
                           std::optional<double> truncation = std::nullopt,
                           Theta0Policy policy = Theta0Policy::WindowAtBandwidth);
WeightSet theoretical_weights(const EventHistory& history, const IntensityFn& factual,
                              const IntensityFn& hypothetical,
                              EventKind jump_kind = EventKind::Treatment,
                              const std::vector<double>& eval_times = {});
}  // namespace serial

}  // namespace ctmsm
