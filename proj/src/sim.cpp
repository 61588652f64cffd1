#include "ctmsm/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "ctmsm/rng.hpp"

namespace ctmsm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_nonneg(double v, const char* name) {
    if (!(v >= 0.0)) throw std::invalid_argument(std::string("scenario: ") + name + " must be >= 0");
}

// Competing constant-rate exponential clocks for one sojourn; clocks are
// drawn in a fixed order (D, A, L, C) so streams are reproducible.
struct Sojourn {
    double t_outcome, t_treatment, t_covariate, t_censoring;
};

Sojourn draw_sojourn(Philox& rng, double rd, double ra, double rl, double rc) {
    Sojourn s{};
    s.t_outcome = rng.next_exponential(rd);
    s.t_treatment = rng.next_exponential(ra);
    s.t_covariate = rng.next_exponential(rl);
    s.t_censoring = rng.next_exponential(rc);
    return s;
}

}  // namespace

void ConfoundedScenario::validate() const {
    require_nonneg(alpha_d0, "alpha_d0");
    require_nonneg(alpha_da, "alpha_da");
    require_nonneg(alpha_dl, "alpha_dl");
    require_nonneg(alpha_dal, "alpha_dal");
    require_nonneg(alpha_a0, "alpha_a0");
    require_nonneg(alpha_al, "alpha_al");
    require_nonneg(alpha_l0, "alpha_l0");
    require_nonneg(alpha_la, "alpha_la");
    require_nonneg(cens0, "cens0");
    require_nonneg(censl, "censl");
    if (!(horizon > 0.0)) throw std::invalid_argument("scenario: horizon must be positive");
    if (n <= 0) throw std::invalid_argument("scenario: n must be positive");
}

void BaselineScenario::validate() const {
    if (!(alpha0 > 0.0)) throw std::invalid_argument("scenario: alpha0 must be positive");
    require_nonneg(alphaA, "alphaA");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("scenario: p must be in [0,1]");
    if (!(horizon > 0.0)) throw std::invalid_argument("scenario: horizon must be positive");
    if (n <= 0) throw std::invalid_argument("scenario: n must be positive");
}

namespace {

// One subject of the confounded scenario. With `marginal` set, the clock of
// `marginal_process` (treatment or censoring) is replaced by the marginal
// hazard of study time, drawn once upfront by inversion; all other clocks
// keep their per-state form.
void confounded_subject(const ConfoundedScenario& scn, int subject, uint64_t seed,
                        const MarginalHazard* marginal, EventKind marginal_process,
                        std::vector<EventRecord>& out) {
    Philox rng(seed, static_cast<uint64_t>(subject));
    const bool marg_treat = marginal && marginal_process == EventKind::Treatment;
    const bool marg_cens = marginal && marginal_process == EventKind::Censoring;
    double t = 0.0;
    int A = 0, L = 0;
    double marginal_time = kInf;
    if (marginal) marginal_time = marginal->cum_inverse(-std::log(rng.next_uniform()));
    while (t <= scn.horizon) {
        const double rd = scn.alpha_d0 + scn.alpha_da * A + scn.alpha_dl * L + scn.alpha_dal * A * L;
        const double ra = A ? 0.0 : (scn.alpha_a0 + scn.alpha_al * L);
        const double rl = L ? 0.0 : (scn.alpha_l0 + scn.alpha_la * A);
        const double rc = scn.cens0 + scn.censl * L;
        Sojourn s = draw_sojourn(rng, rd, marg_treat ? 0.0 : ra, rl, marg_cens ? 0.0 : rc);
        const double t_treat = marg_treat ? (A ? kInf : marginal_time) : t + s.t_treatment;
        const double t_cens = marg_cens ? marginal_time : t + s.t_censoring;
        double t_next = std::min({t + s.t_outcome, t_treat, t + s.t_covariate, t_cens});
        if (!(t_next <= scn.horizon)) return;
        if (t_next == t + s.t_outcome) {
            out.push_back({subject, t_next, EventKind::Outcome, {}});
            return;
        }
        if (t_next == t_cens) {
            out.push_back({subject, t_next, EventKind::Censoring, {}});
            return;
        }
        if (t_next == t_treat) {
            out.push_back({subject, t_next, EventKind::Treatment, {}});
            A = 1;
        } else {
            out.push_back({subject, t_next, EventKind::Covariate, {}});
            L = 1;
        }
        t = t_next;
    }
}

template <bool Parallel>
EventHistory simulate_confounded_impl(const ConfoundedScenario& scn, uint64_t seed,
                                      const MarginalHazard* marginal,
                                      EventKind marginal_process) {
    scn.validate();
    std::vector<std::vector<EventRecord>> per_subject(static_cast<std::size_t>(scn.n));
#pragma omp parallel for schedule(static) if (Parallel)
    for (int i = 0; i < scn.n; ++i)
        confounded_subject(scn, i, seed, marginal, marginal_process,
                           per_subject[static_cast<std::size_t>(i)]);

    std::vector<EventRecord> records;
    for (auto& v : per_subject) records.insert(records.end(), v.begin(), v.end());
    std::vector<std::vector<double>> baseline(static_cast<std::size_t>(scn.n));
    return build_history(std::move(records), std::move(baseline), {}, scn.horizon);
}

void baseline_subject(const BaselineScenario& scn, int subject, uint64_t seed,
                      const MarginalHazard* marginal, std::vector<EventRecord>& out, double& x_out) {
    Philox rng(seed, static_cast<uint64_t>(subject));
    const double x = rng.next_bernoulli(scn.p) ? 1.0 : 0.0;
    x_out = x;
    double t_treat;
    if (marginal) {
        t_treat = marginal->cum_inverse(-std::log(rng.next_uniform()));
    } else {
        t_treat = rng.next_exponential(scn.alpha0 + scn.alphaA * x);
    }
    if (t_treat <= scn.horizon)
        out.push_back({subject, t_treat, EventKind::Treatment, {}});
}

template <bool Parallel>
EventHistory simulate_baseline_impl(const BaselineScenario& scn, uint64_t seed,
                                    const MarginalHazard* marginal) {
    scn.validate();
    std::vector<std::vector<EventRecord>> per_subject(static_cast<std::size_t>(scn.n));
    std::vector<std::vector<double>> baseline(static_cast<std::size_t>(scn.n),
                                              std::vector<double>(1, 0.0));
#pragma omp parallel for schedule(static) if (Parallel)
    for (int i = 0; i < scn.n; ++i)
        baseline_subject(scn, i, seed, marginal, per_subject[static_cast<std::size_t>(i)],
                         baseline[static_cast<std::size_t>(i)][0]);

    std::vector<EventRecord> records;
    for (auto& v : per_subject) records.insert(records.end(), v.begin(), v.end());
    return build_history(std::move(records), std::move(baseline), {"x"}, scn.horizon);
}

// Occupancy of the two at-risk states (L=0 / L=1) of a sub-chain with exit
// rates out0/out1 and transition rate trans (L jump). The marginal hazard is
// base + slope * P(L=1 | at risk). RK4 on a fine grid; the rate is then
// treated as piecewise linear so that cum is exact for it and cum_inverse is
// the exact inverse of cum.
struct OccupancyConfig {
    double out0, out1, trans, base, slope, horizon;
};

MarginalHazard occupancy_marginal(const OccupancyConfig& cfg) {
    const int cells = 8192;
    const double h = cfg.horizon / cells;
    auto deriv = [&](double p0, double p1, double& d0, double& d1) {
        d0 = -(cfg.out0 + cfg.trans) * p0;
        d1 = cfg.trans * p0 - cfg.out1 * p1;
    };
    auto grid = std::make_shared<std::vector<double>>();
    grid->reserve(cells + 1);
    double p0 = 1.0, p1 = 0.0;
    for (int k = 0; k <= cells; ++k) {
        double tot = p0 + p1;
        double frac = tot > 0.0 ? p1 / tot : 1.0;  // limit occupancy when exhausted
        grid->push_back(cfg.base + cfg.slope * frac);
        if (k == cells) break;
        double a0, a1, b0, b1, c0, c1, d0, d1;
        deriv(p0, p1, a0, a1);
        deriv(p0 + 0.5 * h * a0, p1 + 0.5 * h * a1, b0, b1);
        deriv(p0 + 0.5 * h * b0, p1 + 0.5 * h * b1, c0, c1);
        deriv(p0 + h * c0, p1 + h * c1, d0, d1);
        p0 += h / 6.0 * (a0 + 2 * b0 + 2 * c0 + d0);
        p1 += h / 6.0 * (a1 + 2 * b1 + 2 * c1 + d1);
    }
    auto cum_grid = std::make_shared<std::vector<double>>(grid->size(), 0.0);
    for (std::size_t k = 1; k < grid->size(); ++k)
        (*cum_grid)[k] = (*cum_grid)[k - 1] + 0.5 * h * ((*grid)[k - 1] + (*grid)[k]);

    const double horizon = cfg.horizon;
    MarginalHazard m;
    m.rate = [grid, h, horizon](double t) {
        if (t <= 0.0) return (*grid)[0];
        if (t >= horizon) return grid->back();
        double u = t / h;
        auto k = static_cast<std::size_t>(u);
        if (k >= grid->size() - 1) k = grid->size() - 2;
        double w = u - static_cast<double>(k);
        return (1.0 - w) * (*grid)[k] + w * (*grid)[k + 1];
    };
    m.cum = [grid, cum_grid, h, horizon](double t) {
        if (t <= 0.0) return 0.0;
        if (t >= horizon) return cum_grid->back() + grid->back() * (t - horizon);
        double u = t / h;
        auto k = static_cast<std::size_t>(u);
        if (k >= grid->size() - 1) k = grid->size() - 2;
        double dt = t - static_cast<double>(k) * h;
        double lam0 = (*grid)[k];
        double slope = ((*grid)[k + 1] - lam0) / h;
        return (*cum_grid)[k] + lam0 * dt + 0.5 * slope * dt * dt;
    };
    m.cum_inverse = [grid, cum_grid, h, horizon](double target) {
        if (!(target > 0.0)) return 0.0;
        if (target >= cum_grid->back()) {
            double tail = grid->back();
            if (!(tail > 0.0)) return kInf;
            return horizon + (target - cum_grid->back()) / tail;
        }
        std::size_t lo = 0, hi = cum_grid->size() - 1;
        while (lo + 1 < hi) {
            std::size_t mid = (lo + hi) / 2;
            if ((*cum_grid)[mid] < target) lo = mid; else hi = mid;
        }
        double rem = target - (*cum_grid)[lo];
        double lam0 = (*grid)[lo];
        double slope = ((*grid)[lo + 1] - lam0) / h;
        double dt;
        if (std::abs(slope) < 1e-300) {
            dt = lam0 > 0.0 ? rem / lam0 : h;
        } else {
            double disc = lam0 * lam0 + 2.0 * slope * rem;
            dt = (-lam0 + std::sqrt(std::max(disc, 0.0))) / slope;
        }
        dt = std::clamp(dt, 0.0, h);
        return static_cast<double>(lo) * h + dt;
    };
    return m;
}

}  // namespace

EventHistory simulate_confounded(const ConfoundedScenario& scn, uint64_t seed) {
    return simulate_confounded_impl<true>(scn, seed, nullptr, EventKind::Treatment);
}

EventHistory simulate_hypothetical(const ConfoundedScenario& scn, const MarginalHazard& marginal,
                                   uint64_t seed) {
    return simulate_confounded_impl<true>(scn, seed, &marginal, EventKind::Treatment);
}

EventHistory simulate_censoring_randomized(const ConfoundedScenario& scn,
                                           const MarginalHazard& marginal, uint64_t seed) {
    return simulate_confounded_impl<true>(scn, seed, &marginal, EventKind::Censoring);
}

EventHistory simulate_baseline_scenario(const BaselineScenario& scn, uint64_t seed) {
    return simulate_baseline_impl<true>(scn, seed, nullptr);
}

EventHistory simulate_baseline_hypothetical(const BaselineScenario& scn,
                                            const MarginalHazard& marginal, uint64_t seed) {
    return simulate_baseline_impl<true>(scn, seed, &marginal);
}

MarginalHazard marginal_treatment_hazard(const BaselineScenario& scn) {
    scn.validate();
    const double a0 = scn.alpha0, aA = scn.alphaA, p = scn.p;
    MarginalHazard m;
    // P(x=1 | untreated at t) = p e^{-aA t} / (p e^{-aA t} + 1 - p)
    m.rate = [a0, aA, p](double t) {
        double w = p * std::exp(-aA * t);
        return a0 + aA * w / (w + 1.0 - p);
    };
    m.cum = [a0, aA, p](double t) {
        return a0 * t - std::log(p * std::exp(-aA * t) + 1.0 - p);
    };
    m.cum_inverse = [m_cum = m.cum, a0](double target) {
        if (!(target > 0.0)) return 0.0;
        // monotone with slope >= a0: bracket then bisect/Newton
        double hi = target / a0 + 1.0;
        while (m_cum(hi) < target) hi *= 2.0;
        double lo = 0.0;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            if (m_cum(mid) < target) lo = mid; else hi = mid;
            if (hi - lo < 1e-14 * (1.0 + hi)) break;
        }
        return 0.5 * (lo + hi);
    };
    return m;
}

MarginalHazard marginal_treatment_hazard(const ConfoundedScenario& scn) {
    scn.validate();
    OccupancyConfig cfg{};
    cfg.out0 = scn.alpha_a0 + scn.alpha_d0 + scn.cens0;
    cfg.out1 = scn.alpha_a0 + scn.alpha_al + scn.alpha_d0 + scn.alpha_dl + scn.cens0 + scn.censl;
    cfg.trans = scn.alpha_l0;
    cfg.base = scn.alpha_a0;
    cfg.slope = scn.alpha_al;
    cfg.horizon = scn.horizon;
    return occupancy_marginal(cfg);
}

MarginalHazard marginal_censoring_hazard(const ConfoundedScenario& scn) {
    scn.validate();
    if (scn.alpha_a0 != 0.0 || scn.alpha_al != 0.0)
        throw std::invalid_argument(
            "marginal_censoring_hazard: needs a treatment-free scenario (alpha_a* = 0)");
    OccupancyConfig cfg{};
    cfg.out0 = scn.alpha_d0 + scn.cens0;
    cfg.out1 = scn.alpha_d0 + scn.alpha_dl + scn.cens0 + scn.censl;
    cfg.trans = scn.alpha_l0;
    cfg.base = scn.cens0;
    cfg.slope = scn.censl;
    cfg.horizon = scn.horizon;
    return occupancy_marginal(cfg);
}

namespace {

// Piecewise-constant subject intensity base + slope * L_{t-} clipped to the
// at-risk span of `process`.
IntensityFn state_intensity(const EventHistory& history, EventKind process, double base,
                            double slope) {
    const EventHistory* h = &history;
    IntensityFn fn;
    fn.rate = [h, process, base, slope](int subject, double t) {
        if (!(h->risk_exit(subject, process) >= t)) return 0.0;
        double L = h->first_time(subject, EventKind::Covariate) < t ? 1.0 : 0.0;
        return base + slope * L;
    };
    fn.cum = [h, process, base, slope](int subject, double a, double b) {
        double exit = h->risk_exit(subject, process);
        double hi = std::min(b, exit);
        if (hi <= a) return 0.0;
        double tl = h->first_time(subject, EventKind::Covariate);
        double lo_seg = std::min(hi, std::max(a, tl));  // start of the L=1 part
        return base * (hi - a) + slope * (hi - lo_seg);
    };
    return fn;
}

}  // namespace

IntensityFn treatment_intensity(const ConfoundedScenario& scn, const EventHistory& history) {
    return state_intensity(history, EventKind::Treatment, scn.alpha_a0, scn.alpha_al);
}

IntensityFn treatment_intensity(const BaselineScenario& scn, const EventHistory& history) {
    const EventHistory* h = &history;
    const double a0 = scn.alpha0, aA = scn.alphaA;
    IntensityFn fn;
    fn.rate = [h, a0, aA](int subject, double t) {
        if (!(h->risk_exit(subject, EventKind::Treatment) >= t)) return 0.0;
        return a0 + aA * h->baseline_value(subject, 0);
    };
    fn.cum = [h, a0, aA](int subject, double a, double b) {
        double hi = std::min(b, h->risk_exit(subject, EventKind::Treatment));
        if (hi <= a) return 0.0;
        return (a0 + aA * h->baseline_value(subject, 0)) * (hi - a);
    };
    return fn;
}

IntensityFn censoring_intensity(const ConfoundedScenario& scn, const EventHistory& history) {
    return state_intensity(history, EventKind::Censoring, scn.cens0, scn.censl);
}

IntensityFn marginal_intensity(const MarginalHazard& m, const EventHistory& history,
                               EventKind process) {
    const EventHistory* h = &history;  // history must outlive the intensity
    IntensityFn fn;
    fn.rate = [h, rate = m.rate, process](int subject, double t) {
        if (!(h->risk_exit(subject, process) >= t)) return 0.0;
        return rate(t);
    };
    fn.cum = [h, cum = m.cum, process](int subject, double a, double b) {
        double exit = h->risk_exit(subject, process);
        double hi = std::min(b, exit);
        double lo = std::min(a, exit);
        if (hi <= lo) return 0.0;
        return cum(hi) - cum(lo);
    };
    return fn;
}

namespace serial {

EventHistory simulate_confounded(const ConfoundedScenario& scn, uint64_t seed) {
    return simulate_confounded_impl<false>(scn, seed, nullptr, EventKind::Treatment);
}

EventHistory simulate_baseline_scenario(const BaselineScenario& scn, uint64_t seed) {
    return simulate_baseline_impl<false>(scn, seed, nullptr);
}

}  // namespace serial

}  // namespace ctmsm
