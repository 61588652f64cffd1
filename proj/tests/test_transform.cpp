#include <doctest.h>

#include <cmath>

#include "ctmsm/aalen.hpp"
#include "ctmsm/rng.hpp"
#include "ctmsm/sim.hpp"
#include "ctmsm/transform.hpp"
#include "test_util.hpp"

using namespace ctmsm;

namespace {

StepSeries make_series(std::vector<double> times, std::vector<double> incs) {
    return StepSeries{std::move(times), std::move(incs)};
}

// product-limit estimator with event/censoring counts, the classical form
std::vector<double> kaplan_meier_oracle(const EventHistory& h, const std::vector<double>& times) {
    std::vector<double> out;
    double s = 1.0;
    for (double t : times) {
        int deaths = 0, at_risk = 0;
        for (const auto& r : h.records())
            if (r.kind == EventKind::Outcome && r.time == t) ++deaths;
        for (int i = 0; i < h.n(); ++i) at_risk += h.at_risk(i, EventKind::Outcome, t);
        s *= 1.0 - static_cast<double>(deaths) / at_risk;
        out.push_back(s);
    }
    return out;
}

}  // namespace

TEST_CASE("identity integrand reproduces the integrator exactly") {
    OdeSpec spec;
    spec.dim = 2;
    spec.eta0 = {0.0, 0.0};
    spec.m = 2;
    spec.time_column = {false, false};
    spec.integrand = [](const double*, double* f) {
        f[0] = 1.0;
        f[1] = 0.0;
        f[2] = 0.0;
        f[3] = 1.0;
    };
    EventHistory h = testutil::random_history(71, 40);
    WeightSet w = testutil::random_weights(71, 40);
    CumCoef fit = fit_additive(h, EventKind::Outcome, DesignSpec::parse({"1", "A"}, {}), &w);
    ParamPath path = solve_plugin(spec, {column_series(fit, 0), column_series(fit, 1)});
    REQUIRE(path.times == fit.times);
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        CHECK(path.states[k][0] == fit.cumulative(static_cast<Eigen::Index>(k), 0));
        CHECK(path.states[k][1] == fit.cumulative(static_cast<Eigen::Index>(k), 1));
    }
}

TEST_CASE("survival recursion by hand: S = 0.9 then 0.72") {
    ParamPath p = solve_plugin(survival_spec(), {make_series({1.0, 2.0}, {0.1, 0.2})});
    CHECK(p.states[0][0] == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(p.states[1][0] == doctest::Approx(0.72).epsilon(1e-15));
}

TEST_CASE("survival with zero hazard stays at one") {
    ParamPath p = solve_plugin(survival_spec(), {make_series({1.0, 2.0, 3.0}, {0.0, 0.0, 0.0})});
    for (const auto& s : p.states) CHECK(s[0] == 1.0);
}

TEST_CASE("survival is non-increasing in [0,1] and equals the product oracle") {
    Philox rng(101, 0);
    std::vector<double> times, incs;
    double t = 0.0;
    for (int k = 0; k < 40; ++k) {
        t += rng.next_exponential(2.0);
        times.push_back(t);
        incs.push_back(rng.next_uniform() * 0.4);
    }
    ParamPath p = solve_plugin(survival_spec(), {make_series(times, incs)});
    double prod = 1.0, prev = 1.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        prod *= 1.0 - incs[k];
        CHECK(p.states[k][0] == doctest::Approx(prod).epsilon(1e-13));
        CHECK(p.states[k][0] <= prev + 1e-15);
        CHECK(p.states[k][0] >= 0.0);
        CHECK(p.states[k][0] <= 1.0);
        prev = p.states[k][0];
    }
}

TEST_CASE("survival of the Nelson-Aalen fit equals the Kaplan-Meier estimator") {
    ConfoundedScenario scn;
    scn.n = 150;
    scn.cens0 = 0.05;
    EventHistory h = simulate_confounded(scn, 9001);
    CumCoef na = nelson_aalen(h, EventKind::Outcome);
    ParamPath p = solve_plugin(survival_spec(), {column_series(na, 0)});
    auto km = kaplan_meier_oracle(h, na.times);
    REQUIRE(p.times == na.times);
    for (std::size_t k = 0; k < km.size(); ++k)
        CHECK(std::abs(p.states[k][0] - km[k]) <= 1e-12);
}

TEST_CASE("relative survival stays at one for identical coefficient columns") {
    StepSeries b = make_series({0.5, 1.5, 4.0}, {0.1, 0.05, 0.2});
    ParamPath p = solve_plugin(relative_survival_spec(), {b, b});
    for (const auto& s : p.states) CHECK(s[0] == 1.0);
}

TEST_CASE("relative survival single step by hand") {
    // dB_treated = 0.2, dB_untreated = 0.1 at t1: RS = 1 - 0.2 + 0.1 = 0.9
    ParamPath p = solve_plugin(relative_survival_spec(),
                               {make_series({1.0}, {0.2}), make_series({1.0}, {0.1})});
    CHECK(p.states[0][0] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("cumulative incidence: single cause complements survival") {
    StepSeries all = make_series({1.0, 2.0, 3.0}, {0.1, 0.25, 0.2});
    ParamPath p = solve_plugin(cumulative_incidence_spec(), {all, all});
    for (const auto& s : p.states) CHECK(s[0] + s[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("cumulative incidence with zero cause-1 hazard stays at zero") {
    StepSeries zero = make_series({1.0, 2.0}, {0.0, 0.0});
    StepSeries all = make_series({1.0, 2.0}, {0.2, 0.3});
    ParamPath p = solve_plugin(cumulative_incidence_spec(), {zero, all});
    for (const auto& s : p.states) CHECK(s[1] == 0.0);
}

TEST_CASE("cumulative incidence reproduces the Aalen-Johansen hand computation") {
    // 4 subjects: cause-1 deaths at 1 and 3, cause-2 death at 2, one survivor.
    // Cause-1 NA increments: 1/4 at t=1, 1/2 at t=3; all-cause: 1/4, 1/3, 1/2.
    StepSeries cause1 = make_series({1.0, 2.0, 3.0}, {0.25, 0.0, 0.5});
    StepSeries all = make_series({1.0, 2.0, 3.0}, {0.25, 1.0 / 3.0, 0.5});
    ParamPath p = solve_plugin(cumulative_incidence_spec(), {cause1, all});
    CHECK(p.states[0][1] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(p.states[1][1] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(p.states[2][1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(p.states[0][0] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(p.states[1][0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(p.states[2][0] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("rmst with zero hazard grows like t") {
    OdeSpec spec = rmst_spec(5.0);
    ParamPath p = solve_plugin(spec, {make_series({1.0, 2.5}, {0.0, 0.0})});
    CHECK(p.at(1.0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.at(2.5, 1) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(p.at(5.0, 1) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("rmst on a constant-hazard grid matches the quadrature oracle") {
    const double lambda = 0.3, horizon = 5.0;
    const int cells = 20000;
    std::vector<double> times, incs;
    for (int k = 1; k <= cells; ++k) {
        times.push_back(horizon * k / cells);
        incs.push_back(lambda * horizon / cells);
    }
    ParamPath p = solve_plugin(rmst_spec(horizon), {make_series(times, incs)});
    // Simpson quadrature of exp(-lambda t) on [0, horizon]
    const int qn = 2000;
    double quad = 0.0, hq = horizon / qn;
    for (int k = 0; k < qn; ++k) {
        double a = k * hq;
        quad += hq / 6.0 *
                (std::exp(-lambda * a) + 4.0 * std::exp(-lambda * (a + 0.5 * hq)) +
                 std::exp(-lambda * (a + hq)));
    }
    CHECK(p.at(horizon, 1) == doctest::Approx(quad).epsilon(2e-4));
    // mu non-decreasing and bounded by t
    double prev = 0.0;
    for (std::size_t k = 0; k < p.times.size(); k += 500) {
        CHECK(p.states[k][1] >= prev);
        CHECK(p.states[k][1] <= p.times[k] + 1e-12);
        prev = p.states[k][1];
    }
}

TEST_CASE("simultaneous jumps apply as one joint vector update") {
    // both columns jump at t=1; joint update differs from sequential application
    StepSeries b1 = make_series({1.0}, {0.5});
    StepSeries b2 = make_series({1.0}, {0.5});
    OdeSpec spec;
    spec.dim = 1;
    spec.eta0 = {1.0};
    spec.m = 2;
    spec.time_column = {false, false};
    spec.integrand = [](const double* eta, double* f) {
        f[0] = -eta[0];
        f[1] = -eta[0];
    };
    ParamPath p = solve_plugin(spec, {b1, b2});
    // joint: 1 - 1*0.5 - 1*0.5 = 0; sequential would give 0.25
    CHECK(p.states[0][0] == 0.0);
}

TEST_CASE("built-in specs respect the Lipschitz stability bound") {
    Philox rng(77, 3);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> times, incs;
        double t = 0.0, total_variation = 0.0;
        for (int k = 0; k < 30; ++k) {
            t += rng.next_exponential(1.0);
            double inc = (rng.next_uniform() - 0.3) * 0.3;
            times.push_back(t);
            incs.push_back(inc);
            total_variation += std::abs(inc);
        }
        StepSeries b = make_series(times, incs);
        const double delta = 1e-6;
        OdeSpec spec = survival_spec();
        ParamPath base = solve_plugin(spec, {b});
        spec.eta0 = {1.0 + delta};
        ParamPath bumped = solve_plugin(spec, {b});
        double diff = std::abs(bumped.states.back()[0] - base.states.back()[0]);
        // |F(a)-F(b)| = |a-b| for the survival integrand, so L = 1
        CHECK(diff <= std::exp(total_variation) * delta * (1.0 + 1e-9));
    }
}

TEST_CASE("solve_plugin validates its inputs and aborts on blow-up") {
    CHECK_THROWS_AS(solve_plugin(survival_spec(), {}), std::invalid_argument);
    OdeSpec bad = survival_spec();
    bad.integrand = [](const double* eta, double* f) { f[0] = eta[0] * 1e308; };
    CHECK_THROWS_AS(solve_plugin(bad, {make_series({1.0, 2.0}, {1e300, 1e300})}),
                    std::runtime_error);
}
