#include "ctmsm/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctmsm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_fit_spec(const CumCoef& fit, const DesignSpec& spec, const char* where) {
    if (fit.p() != spec.size())
        throw std::invalid_argument(std::string(where) + ": design spec does not match fit columns");
}

// Per-subject jump contributions of one fitted cumulative hazard:
// term[j] = Y^i_{s_j} * Z^i_{s_j-}' dH_j, with the at-risk factor zeroing
// terms after the subject's exit.
std::vector<double> fit_terms(const EventHistory& history, const CumCoef& fit,
                              const DesignSpec& spec, int subject, double exit) {
    const std::size_t m = fit.times.size();
    const int p = spec.size();
    if (fit.p() != p)
        throw std::invalid_argument("weights: design spec does not match fit columns");
    std::vector<double> terms(m, 0.0);
    std::vector<double> x(static_cast<std::size_t>(p));
    for (std::size_t j = 0; j < m; ++j) {
        const double s = fit.times[j];
        if (s > exit) break;  // times ascending; Y = 0 afterwards
        design_row(history, spec, subject, s, x.data());
        double dot = 0.0;
        for (int c = 0; c < p; ++c)
            dot += x[static_cast<std::size_t>(c)] * fit.increments(static_cast<Eigen::Index>(j), c);
        terms[j] = dot;
    }
    return terms;
}

std::vector<double> prefix_sums(const std::vector<double>& v) {
    std::vector<double> p(v.size() + 1, 0.0);
    for (std::size_t j = 0; j < v.size(); ++j) p[j + 1] = p[j] + v[j];
    return p;
}

// Window-ratio sweep state over the factual/hypothetical jump lists. The
// window (u - 1/kappa, u] is tracked by index counts, never by re-derived
// float bounds, so path values and left limits are reproducible.
struct WindowSweep {
    const std::vector<double>* ftimes;
    const std::vector<double>* htimes;
    std::vector<double> fprefix, hprefix;
    std::vector<double> fleave, hleave;  // times + window length
    std::size_t fhi = 0, flo = 0, hhi = 0, hlo = 0;

    WindowSweep(const CumCoef& factual, const CumCoef& hypo, const std::vector<double>& fterms,
                const std::vector<double>& hterms, double window)
        : ftimes(&factual.times), htimes(&hypo.times) {
        fprefix = prefix_sums(fterms);
        hprefix = prefix_sums(hterms);
        fleave.reserve(ftimes->size());
        for (double t : *ftimes) fleave.push_back(t + window);
        hleave.reserve(htimes->size());
        for (double t : *htimes) hleave.push_back(t + window);
    }

    // advance so the window is the state at time u (jumps <= u in, leaves <= u out)
    void advance_to(double u) {
        while (fhi < ftimes->size() && (*ftimes)[fhi] <= u) ++fhi;
        while (flo < fleave.size() && fleave[flo] <= u) ++flo;
        while (hhi < htimes->size() && (*htimes)[hhi] <= u) ++hhi;
        while (hlo < hleave.size() && hleave[hlo] <= u) ++hlo;
    }
    // advance so the state is the left limit at time u (strict comparisons)
    void advance_before(double u) {
        while (fhi < ftimes->size() && (*ftimes)[fhi] < u) ++fhi;
        while (flo < fleave.size() && fleave[flo] < u) ++flo;
        while (hhi < htimes->size() && (*htimes)[hhi] < u) ++hhi;
        while (hlo < hleave.size() && hleave[hlo] < u) ++hlo;
    }
    double ratio() const {
        double den = fprefix[fhi] - fprefix[flo];
        double num = hprefix[hhi] - hprefix[hlo];
        return num / den;
    }
};

struct ThetaResult {
    double theta0 = 1.0;
    double value_at_cutoff = 1.0;  // carried-forward value just before the cutoff
    bool flagged = false;
};

// Builds the theta path for one subject. When out_path is null only the left
// limit at `cutoff` is produced (used by the weight assembly fast path).
ThetaResult theta_subject(const EventHistory& history, const CumCoef& factual,
                          const CumCoef& hypo, const DesignSpec& fspec, const DesignSpec& hspec,
                          int subject, double kappa, Theta0Policy policy, double cutoff,
                          StepPath* out_path) {
    const double window = 1.0 / kappa;
    const double horizon = history.horizon();
    const double exit = history.risk_exit(subject, EventKind::Treatment);
    const std::vector<double> fterms = fit_terms(history, factual, fspec, subject, exit);
    const std::vector<double> hterms = fit_terms(history, hypo, hspec, subject, exit);

    ThetaResult res;

    WindowSweep sweep(factual, hypo, fterms, hterms, window);
    sweep.advance_to(window);
    {
        double v = sweep.ratio();
        if (policy == Theta0Policy::One) {
            res.theta0 = 1.0;
        } else if (std::isfinite(v)) {
            res.theta0 = v;
        } else {
            res.theta0 = 1.0;
            res.flagged = true;
        }
    }
    if (out_path) *out_path = StepPath(res.theta0);
    res.value_at_cutoff = res.theta0;
    if (cutoff <= window) return res;

    // boundary times: window entries and exits of either fit
    std::vector<double> bounds;
    bounds.reserve(2 * (factual.times.size() + hypo.times.size()) + 1);
    bounds.push_back(window);
    for (double t : factual.times) {
        bounds.push_back(t);
        bounds.push_back(t + window);
    }
    for (double t : hypo.times) {
        bounds.push_back(t);
        bounds.push_back(t + window);
    }
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

    double last = res.theta0;
    for (double u : bounds) {
        if (u < window) continue;  // theta is theta0 on [0, 1/kappa)
        if (u > horizon || u >= cutoff) break;
        sweep.advance_to(u);
        double v = sweep.ratio();
        if (!std::isfinite(v)) {
            res.flagged = true;
            v = last;  // carry the last finite value forward
        }
        if (v != last) {
            if (out_path) out_path->append(u, v);
            last = v;
        }
    }
    res.value_at_cutoff = last;
    return res;
}

template <bool Parallel>
ThetaPath estimate_theta_impl(const EventHistory& history, const CumCoef& factual,
                              const CumCoef& hypo, const DesignSpec& fspec,
                              const DesignSpec& hspec, double kappa, Theta0Policy policy) {
    if (!(kappa > 0.0)) throw std::invalid_argument("estimate_theta: kappa must be positive");
    check_fit_spec(factual, fspec, "estimate_theta");
    check_fit_spec(hypo, hspec, "estimate_theta");
    const int n = history.n();
    ThetaPath theta;
    theta.kappa = kappa;
    theta.policy = policy;
    theta.paths.resize(static_cast<std::size_t>(n));
    std::vector<char> flagged(static_cast<std::size_t>(n), 0);

#pragma omp parallel for schedule(dynamic, 64) if (Parallel)
    for (int i = 0; i < n; ++i) {
        ThetaResult r = theta_subject(history, factual, hypo, fspec, hspec, i, kappa, policy,
                                      kInf, &theta.paths[static_cast<std::size_t>(i)]);
        flagged[static_cast<std::size_t>(i)] = r.flagged;
    }
    for (int i = 0; i < n; ++i)
        if (flagged[static_cast<std::size_t>(i)]) theta.flagged.push_back(i);
    return theta;
}

struct KOptions {
    bool with_theta = true;
    EventKind process = EventKind::Treatment;
};

// R_t = R0 * prod_{s<=t} (1 + dK_s) for one subject. theta_left is the left
// limit of theta at the subject's own jump time (ignored without the jump
// term). Returns the truncation-clipped path.
StepPath weight_path_subject(const EventHistory& history, const CumCoef& factual,
                             const CumCoef& hypo, const DesignSpec& fspec,
                             const DesignSpec& hspec, int subject, double r0, double theta_left,
                             const KOptions& opt, std::optional<double> truncation, bool& flagged,
                             long& truncated) {
    const double exit = history.risk_exit(subject, opt.process);
    const double own_jump = history.first_time(subject, opt.process);
    const std::vector<double> fterms = fit_terms(history, factual, fspec, subject, exit);
    const std::vector<double> hterms = fit_terms(history, hypo, hspec, subject, exit);

    const double bound = truncation ? *truncation : kInf;
    StepPath path(std::min(r0, bound));
    if (r0 > bound) ++truncated;
    double r = r0;
    double stored = std::min(r0, bound);
    bool dead = false;

    const auto& ft = factual.times;
    const auto& ht = hypo.times;
    // counts of fit jumps within the at-risk span
    std::size_t fa_end = 0, hb_end = 0;
    while (fa_end < ft.size() && ft[fa_end] <= exit) ++fa_end;
    while (hb_end < ht.size() && ht[hb_end] <= exit) ++hb_end;

    std::size_t a = 0, b = 0;
    bool own_pending = opt.with_theta && std::isfinite(own_jump) && own_jump <= history.horizon();
    while (a < fa_end || b < hb_end || own_pending) {
        double ta = a < fa_end ? ft[a] : kInf;
        double tb = b < hb_end ? ht[b] : kInf;
        double tc = own_pending ? own_jump : kInf;
        double s = std::min({ta, tb, tc});
        if (!std::isfinite(s)) break;
        double dk = 0.0;
        if (ta == s) dk += fterms[a++];
        if (tb == s) dk -= hterms[b++];
        if (tc == s) {
            dk += theta_left - 1.0;
            own_pending = false;
        }
        if (!dead) {
            double factor = 1.0 + dk;
            if (factor <= 0.0) {
                // nonnegative weights by construction; a nonpositive factor is
                // floored and reported
                r = 0.0;
                flagged = true;
                dead = true;
            } else {
                r *= factor;
            }
            double v = r;
            if (v > bound) {
                v = bound;
                ++truncated;
            }
            if (v != stored) {
                path.append(s, v);
                stored = v;
            }
        }
    }
    return path;
}

template <bool Parallel>
WeightSet estimate_weights_impl(const EventHistory& history, const CumCoef& factual,
                                const CumCoef& hypo, const DesignSpec& fspec,
                                const DesignSpec& hspec, double kappa,
                                const std::vector<double>* r0, std::optional<double> truncation,
                                Theta0Policy policy) {
    if (!(kappa > 0.0)) throw std::invalid_argument("estimate_weights: kappa must be positive");
    check_fit_spec(factual, fspec, "estimate_weights");
    check_fit_spec(hypo, hspec, "estimate_weights");
    const int n = history.n();
    if (r0 && static_cast<int>(r0->size()) != n)
        throw std::invalid_argument("estimate_weights: r0 size mismatch");

    WeightSet ws;
    ws.provenance = WeightProvenance::EstimatedTreatment;
    ws.truncation_bound = truncation;
    ws.paths.resize(static_cast<std::size_t>(n));
    std::vector<char> flagged(static_cast<std::size_t>(n), 0);
    std::vector<long> truncs(static_cast<std::size_t>(n), 0);

#pragma omp parallel for schedule(dynamic, 64) if (Parallel)
    for (int i = 0; i < n; ++i) {
        double theta_left = 1.0;
        bool flag = false;
        const double own = history.first_time(i, EventKind::Treatment);
        if (std::isfinite(own) && own <= history.horizon()) {
            ThetaResult tr = theta_subject(history, factual, hypo, fspec, hspec, i, kappa,
                                           policy, own, nullptr);
            theta_left = tr.value_at_cutoff;
            flag = tr.flagged;
        }
        long trunc_count = 0;
        ws.paths[static_cast<std::size_t>(i)] = weight_path_subject(
            history, factual, hypo, fspec, hspec, i, r0 ? (*r0)[static_cast<std::size_t>(i)] : 1.0,
            theta_left, KOptions{}, truncation, flag, trunc_count);
        flagged[static_cast<std::size_t>(i)] = flag;
        truncs[static_cast<std::size_t>(i)] = trunc_count;
    }
    for (int i = 0; i < n; ++i) {
        if (flagged[static_cast<std::size_t>(i)]) ws.flagged.push_back(i);
        ws.truncation_count += truncs[static_cast<std::size_t>(i)];
    }
    return ws;
}

}  // namespace

ThetaPath estimate_theta(const EventHistory& history, const CumCoef& factual,
                         const CumCoef& hypo, const DesignSpec& fspec, const DesignSpec& hspec,
                         double kappa, Theta0Policy policy) {
    return estimate_theta_impl<true>(history, factual, hypo, fspec, hspec, kappa, policy);
}

WeightSet assemble_weights(const EventHistory& history, const ThetaPath& theta,
                           const CumCoef& factual, const CumCoef& hypo, const DesignSpec& fspec,
                           const DesignSpec& hspec, const std::vector<double>* r0,
                           std::optional<double> truncation) {
    const int n = history.n();
    if (theta.paths.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("assemble_weights: theta path size mismatch");
    if (r0 && static_cast<int>(r0->size()) != n)
        throw std::invalid_argument("assemble_weights: r0 size mismatch");
    check_fit_spec(factual, fspec, "assemble_weights");
    check_fit_spec(hypo, hspec, "assemble_weights");

    WeightSet ws;
    ws.provenance = WeightProvenance::EstimatedTreatment;
    ws.truncation_bound = truncation;
    ws.paths.resize(static_cast<std::size_t>(n));
    std::vector<char> flagged(static_cast<std::size_t>(n), 0);
    std::vector<long> truncs(static_cast<std::size_t>(n), 0);

#pragma omp parallel for schedule(dynamic, 64)
    for (int i = 0; i < n; ++i) {
        bool flag = false;
        long trunc_count = 0;
        double theta_left = 1.0;
        const double own = history.first_time(i, EventKind::Treatment);
        if (std::isfinite(own))
            theta_left = theta.paths[static_cast<std::size_t>(i)].left_limit(own);
        ws.paths[static_cast<std::size_t>(i)] = weight_path_subject(
            history, factual, hypo, fspec, hspec, i, r0 ? (*r0)[static_cast<std::size_t>(i)] : 1.0,
            theta_left, KOptions{}, truncation, flag, trunc_count);
        flagged[static_cast<std::size_t>(i)] = flag;
        truncs[static_cast<std::size_t>(i)] = trunc_count;
    }
    for (int i = 0; i < n; ++i) {
        if (flagged[static_cast<std::size_t>(i)] ||
            std::binary_search(theta.flagged.begin(), theta.flagged.end(), i))
            ws.flagged.push_back(i);
        ws.truncation_count += truncs[static_cast<std::size_t>(i)];
    }
    return ws;
}

WeightSet estimate_weights(const EventHistory& history, const CumCoef& factual,
                           const CumCoef& hypo, const DesignSpec& fspec, const DesignSpec& hspec,
                           double kappa, const std::vector<double>* r0,
                           std::optional<double> truncation, Theta0Policy policy) {
    return estimate_weights_impl<true>(history, factual, hypo, fspec, hspec, kappa, r0,
                                       truncation, policy);
}

std::vector<double> baseline_weight(const std::vector<double>& numerator_density,
                                    const std::vector<double>& denominator_density) {
    if (numerator_density.size() != denominator_density.size())
        throw std::invalid_argument("baseline_weight: size mismatch");
    std::vector<double> r0(numerator_density.size());
    for (std::size_t i = 0; i < r0.size(); ++i) {
        if (!(denominator_density[i] > 0.0))
            throw std::domain_error("baseline_weight: zero denominator density (positivity)");
        r0[i] = numerator_density[i] / denominator_density[i];
    }
    return r0;
}

WeightSet censoring_weights(const EventHistory& history, const CumCoef& factual,
                            const CumCoef& hypo, const DesignSpec& fspec, const DesignSpec& hspec,
                            std::optional<double> truncation) {
    check_fit_spec(factual, fspec, "censoring_weights");
    check_fit_spec(hypo, hspec, "censoring_weights");
    const int n = history.n();
    WeightSet ws;
    ws.provenance = WeightProvenance::EstimatedCensoring;
    ws.truncation_bound = truncation;
    ws.paths.resize(static_cast<std::size_t>(n));
    std::vector<char> flagged(static_cast<std::size_t>(n), 0);
    std::vector<long> truncs(static_cast<std::size_t>(n), 0);
    KOptions opt;
    opt.with_theta = false;
    opt.process = EventKind::Censoring;

#pragma omp parallel for schedule(dynamic, 64)
    for (int i = 0; i < n; ++i) {
        bool flag = false;
        long trunc_count = 0;
        ws.paths[static_cast<std::size_t>(i)] =
            weight_path_subject(history, factual, hypo, fspec, hspec, i, 1.0, 1.0, opt,
                                truncation, flag, trunc_count);
        flagged[static_cast<std::size_t>(i)] = flag;
        truncs[static_cast<std::size_t>(i)] = trunc_count;
    }
    for (int i = 0; i < n; ++i) {
        if (flagged[static_cast<std::size_t>(i)]) ws.flagged.push_back(i);
        ws.truncation_count += truncs[static_cast<std::size_t>(i)];
    }
    return ws;
}

namespace {

template <bool Parallel>
WeightSet theoretical_weights_impl(const EventHistory& history, const IntensityFn& factual,
                                   const IntensityFn& hypothetical, EventKind jump_kind,
                                   const std::vector<double>& eval_times) {
    const int n = history.n();
    const double horizon = history.horizon();
    std::vector<double> grid = eval_times;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    // subject event times, gathered once
    std::vector<std::vector<double>> own(static_cast<std::size_t>(n));
    for (const auto& r : history.records())
        own[static_cast<std::size_t>(r.subject)].push_back(r.time);

    WeightSet ws;
    ws.provenance = WeightProvenance::Theoretical;
    ws.paths.resize(static_cast<std::size_t>(n));
    bool positivity_violation = false;

#pragma omp parallel for schedule(dynamic, 64) if (Parallel)
    for (int i = 0; i < n; ++i) {
        std::vector<double> times;
        times.reserve(own[static_cast<std::size_t>(i)].size() + grid.size());
        std::merge(own[static_cast<std::size_t>(i)].begin(), own[static_cast<std::size_t>(i)].end(),
                   grid.begin(), grid.end(), std::back_inserter(times));
        times.erase(std::unique(times.begin(), times.end()), times.end());

        const double jump_time = history.first_time(i, jump_kind);
        StepPath path(1.0);
        double r = 1.0, stored = 1.0, prev = 0.0;
        for (double t : times) {
            if (t <= 0.0 || t > horizon) continue;
            r *= std::exp(factual.cum(i, prev, t) - hypothetical.cum(i, prev, t));
            if (t == jump_time) {
                double lam = factual.rate(i, t);
                if (!(lam > 0.0)) {
                    positivity_violation = true;
                    break;
                }
                r *= hypothetical.rate(i, t) / lam;
            }
            if (r != stored) {
                path.append(t, r);
                stored = r;
            }
            prev = t;
        }
        ws.paths[static_cast<std::size_t>(i)] = std::move(path);
    }
    if (positivity_violation)
        throw std::domain_error(
            "theoretical_weights: zero factual intensity at a jump (positivity)");
    return ws;
}

}  // namespace

WeightSet theoretical_weights(const EventHistory& history, const IntensityFn& factual,
                              const IntensityFn& hypothetical, EventKind jump_kind,
                              const std::vector<double>& eval_times) {
    return theoretical_weights_impl<true>(history, factual, hypothetical, jump_kind, eval_times);
}

WeightSet combine_weights(const std::vector<const WeightSet*>& parts,
                          std::optional<double> truncation) {
    if (parts.empty()) throw std::invalid_argument("combine_weights: no parts");
    const int n = parts.front()->n();
    for (const auto* p : parts)
        if (p->n() != n) throw std::invalid_argument("combine_weights: mismatched subject sets");

    WeightSet ws;
    ws.provenance = WeightProvenance::Combined;
    ws.truncation_bound = truncation;
    ws.paths.resize(static_cast<std::size_t>(n));
    const double bound = truncation ? *truncation : kInf;

    for (int i = 0; i < n; ++i) {
        std::vector<double> times;
        double init = 1.0;
        for (const auto* p : parts) {
            const auto& path = p->paths[static_cast<std::size_t>(i)];
            times.insert(times.end(), path.times().begin(), path.times().end());
            init *= path.initial_value();
        }
        std::sort(times.begin(), times.end());
        times.erase(std::unique(times.begin(), times.end()), times.end());
        StepPath path(std::min(init, bound));
        if (init > bound) ++ws.truncation_count;
        double stored = std::min(init, bound);
        for (double t : times) {
            double v = 1.0;
            for (const auto* p : parts) v *= p->paths[static_cast<std::size_t>(i)].at(t);
            if (v > bound) {
                v = bound;
                ++ws.truncation_count;
            }
            if (v != stored) {
                path.append(t, v);
                stored = v;
            }
        }
        ws.paths[static_cast<std::size_t>(i)] = std::move(path);
    }
    std::vector<int> flagged;
    for (const auto* p : parts) flagged.insert(flagged.end(), p->flagged.begin(), p->flagged.end());
    std::sort(flagged.begin(), flagged.end());
    flagged.erase(std::unique(flagged.begin(), flagged.end()), flagged.end());
    ws.flagged = std::move(flagged);
    return ws;
}

double default_bandwidth(const EventHistory& history, EventKind kind) {
    std::vector<double> waits;
    for (int i = 0; i < history.n(); ++i) {
        double t = history.first_time(i, kind);
        if (std::isfinite(t) && t > 0.0) waits.push_back(t);
    }
    if (waits.size() < 2) return 1.0 / history.horizon();
    std::sort(waits.begin(), waits.end());
    double q = waits[static_cast<std::size_t>(0.10 * static_cast<double>(waits.size() - 1))];
    if (!(q > 0.0)) return 1.0 / history.horizon();
    return 1.0 / q;
}

bool bandwidth_rate_ok(double rate_exponent) { return rate_exponent <= 0.5; }

WeightDiagnostics diagnose_weights(const WeightSet& ws, const std::vector<double>& grid) {
    WeightDiagnostics d;
    d.flagged = ws.flagged;
    d.truncation_count = ws.truncation_count;
    d.grid = grid;
    d.mean_curve.resize(grid.size(), 0.0);
    if (ws.n() == 0) return d;
    for (int i = 0; i < ws.n(); ++i)
        for (std::size_t k = 0; k < grid.size(); ++k)
            d.mean_curve[k] += ws.at(i, grid[k]);
    for (auto& v : d.mean_curve) v /= ws.n();
    return d;
}

const char* provenance_name(WeightProvenance p) {
    switch (p) {
        case WeightProvenance::Unit: return "unit";
        case WeightProvenance::EstimatedTreatment: return "estimated-treatment";
        case WeightProvenance::EstimatedCensoring: return "estimated-censoring";
        case WeightProvenance::Baseline: return "baseline";
        case WeightProvenance::Theoretical: return "theoretical";
        case WeightProvenance::Iptw: return "iptw";
        case WeightProvenance::Combined: return "combined";
    }
    return "?";
}

namespace serial {

ThetaPath estimate_theta(const EventHistory& history, const CumCoef& factual,
                         const CumCoef& hypo, const DesignSpec& fspec, const DesignSpec& hspec,
                         double kappa, Theta0Policy policy) {
    return estimate_theta_impl<false>(history, factual, hypo, fspec, hspec, kappa, policy);
}

WeightSet estimate_weights(const EventHistory& history, const CumCoef& factual,
                           const CumCoef& hypo, const DesignSpec& fspec, const DesignSpec& hspec,
                           double kappa, const std::vector<double>* r0,
                           std::optional<double> truncation, Theta0Policy policy) {
    return estimate_weights_impl<false>(history, factual, hypo, fspec, hspec, kappa, r0,
                                        truncation, policy);
}

WeightSet theoretical_weights(const EventHistory& history, const IntensityFn& factual,
                              const IntensityFn& hypothetical, EventKind jump_kind,
                              const std::vector<double>& eval_times) {
    return theoretical_weights_impl<false>(history, factual, hypothetical, jump_kind, eval_times);
}

}  // namespace serial

}  // namespace ctmsm
