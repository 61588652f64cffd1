#include "ctmsm/aalen.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctmsm {

double CumCoef::cum_at(int j, double t) const {
    // last event time <= t
    std::size_t lo = 0, hi = times.size();
    while (lo < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (times[mid] <= t) lo = mid + 1; else hi = mid;
    }
    return lo == 0 ? 0.0 : cumulative(static_cast<Eigen::Index>(lo - 1), j);
}

CumCoef CumCoef::from_increments(std::vector<double> times, Eigen::MatrixXd increments,
                                 std::vector<std::string> columns) {
    CumCoef c;
    c.times = std::move(times);
    c.increments = std::move(increments);
    c.columns = std::move(columns);
    c.cumulative = c.increments;
    for (Eigen::Index r = 1; r < c.cumulative.rows(); ++r)
        c.cumulative.row(r) += c.cumulative.row(r - 1);
    return c;
}

namespace {

// Solve the normal equations at one event time. Returns false when the Gram
// matrix is singular or too ill-conditioned to trust; bad_weight is set on a
// non-finite weight (reported after the event-time loop).
bool solve_event_time(const EventHistory& history, EventKind outcome, const DesignSpec& spec,
                      const WeightSet* weights, double s, const std::vector<int>& event_subjects,
                      Eigen::VectorXd& out, bool& bad_weight) {
    const int n = history.n();
    const int p = spec.size();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    std::vector<double> x(static_cast<std::size_t>(p));
    bool any = false;
    for (int i = 0; i < n; ++i) {
        if (history.risk_exit(i, outcome) < s) continue;
        double w = weights ? weights->left_limit(i, s) : 1.0;
        if (!std::isfinite(w)) {
            bad_weight = true;
            return false;
        }
        if (w == 0.0) continue;
        design_row(history, spec, i, s, x.data());
        for (int a = 0; a < p; ++a)
            for (int b = a; b < p; ++b) gram(a, b) += w * x[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(b)];
        any = true;
    }
    if (!any) return false;
    for (int a = 0; a < p; ++a)
        for (int b = 0; b < a; ++b) gram(a, b) = gram(b, a);
    for (int i : event_subjects) {
        if (history.risk_exit(i, outcome) < s) continue;
        double w = weights ? weights->left_limit(i, s) : 1.0;
        if (w == 0.0) continue;
        design_row(history, spec, i, s, x.data());
        for (int a = 0; a < p; ++a) rhs(a) += w * x[static_cast<std::size_t>(a)];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() < p) return false;
    const auto& rdiag = qr.matrixQR().diagonal();
    double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < rdiag.size(); ++k) {
        double a = std::abs(rdiag(k));
        dmax = std::max(dmax, a);
        dmin = std::min(dmin, a);
    }
    if (!(dmin > 0.0) || dmax / dmin > kConditionLimit) return false;
    out = qr.solve(rhs);
    return out.allFinite();
}

template <bool Parallel>
CumCoef fit_additive_impl(const EventHistory& history, EventKind outcome, const DesignSpec& spec,
                          const WeightSet* weights) {
    if (weights && weights->n() != history.n())
        throw std::invalid_argument("fit_additive: weight set size mismatch");
    const int p = spec.size();
    const EventTimeline tl = event_timeline(history, outcome);
    const auto T = static_cast<Eigen::Index>(tl.times.size());

    CumCoef fit;
    fit.times = tl.times;
    fit.columns = spec.labels();
    fit.increments = Eigen::MatrixXd::Zero(T, p);
    std::vector<char> skipped(tl.times.size(), 0);
    bool bad_weight = false;

#pragma omp parallel for schedule(dynamic, 16) if (Parallel)
    for (Eigen::Index k = 0; k < T; ++k) {
        Eigen::VectorXd inc;
        if (solve_event_time(history, outcome, spec, weights, tl.times[static_cast<std::size_t>(k)],
                             tl.subjects[static_cast<std::size_t>(k)], inc, bad_weight))
            fit.increments.row(k) = inc;
        else
            skipped[static_cast<std::size_t>(k)] = 1;
    }
    if (bad_weight) throw std::invalid_argument("fit_additive: non-finite weight");

    for (std::size_t k = 0; k < tl.times.size(); ++k)
        if (skipped[k]) fit.skipped_times.push_back(tl.times[k]);
    fit.cumulative = fit.increments;
    for (Eigen::Index r = 1; r < T; ++r) fit.cumulative.row(r) += fit.cumulative.row(r - 1);
    return fit;
}

}  // namespace

CumCoef fit_additive(const EventHistory& history, EventKind outcome, const DesignSpec& spec,
                     const WeightSet* weights) {
    return fit_additive_impl<true>(history, outcome, spec, weights);
}

CumCoef nelson_aalen(const EventHistory& history, EventKind kind, const WeightSet* weights) {
    return fit_additive(history, kind, DesignSpec::intercept(), weights);
}

namespace serial {

CumCoef fit_additive(const EventHistory& history, EventKind outcome, const DesignSpec& spec,
                     const WeightSet* weights) {
    return fit_additive_impl<false>(history, outcome, spec, weights);
}

CumCoef nelson_aalen(const EventHistory& history, EventKind kind, const WeightSet* weights) {
    return serial::fit_additive(history, kind, DesignSpec::intercept(), weights);
}

}  // namespace serial

}  // namespace ctmsm
