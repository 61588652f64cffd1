#include <doctest.h>

#include <cmath>
#include <vector>

#include "ctmsm/iptw.hpp"
#include "ctmsm/sim.hpp"
#include "test_util.hpp"

using namespace ctmsm;

namespace {

EventHistory example_history() {
    // s0 treated at 2.6; s1 dies at 0.4; s2 censored at 6.0; s3 event-free
    std::vector<EventRecord> recs{
        {0, 2.6, EventKind::Treatment, {}},
        {1, 0.4, EventKind::Outcome, {}},
        {2, 6.0, EventKind::Censoring, {}},
    };
    std::vector<std::vector<double>> baseline(4);
    return build_history(recs, baseline, {}, 10.0);
}

}  // namespace

TEST_CASE("discretize: interval arithmetic of the person-period table") {
    EventHistory h = example_history();
    PersonPeriodTable t = discretize(h, 4, DesignSpec::parse({"L"}, h.baseline_names()));

    // s0 treated at 2.6 with K=4, T=10: rows k=1,2; indicator set in k=2
    std::vector<std::pair<int, int>> s0_rows, s1_rows;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        if (t.subject[r] == 0) s0_rows.push_back({t.interval[r], t.treated[r]});
        if (t.subject[r] == 1) s1_rows.push_back({t.interval[r], t.treated[r]});
    }
    CHECK(s0_rows == std::vector<std::pair<int, int>>{{1, 0}, {2, 1}});
    // s1 dies at 0.4: single row k=1
    CHECK(s1_rows == std::vector<std::pair<int, int>>{{1, 0}});
    CHECK_THROWS_AS(discretize(h, 0, DesignSpec::parse({"L"}, h.baseline_names())),
                    std::invalid_argument);
}

TEST_CASE("discretize row counts match brute-force enumeration on a random sample") {
    EventHistory h = testutil::random_history(91, 10);
    const int K = 5;
    PersonPeriodTable t = discretize(h, K, DesignSpec::parse({"L"}, h.baseline_names()));
    std::size_t expected = 0;
    const double width = h.horizon() / K;
    for (int i = 0; i < h.n(); ++i) {
        double exit = h.risk_exit(i, EventKind::Treatment);
        for (int k = 1; k <= K; ++k)
            if (exit > (k - 1) * width) ++expected;
    }
    CHECK(t.rows() == expected);
    // covariates are time-updated: the left limit at the interval end
    for (std::size_t r = 0; r < t.rows(); ++r) {
        double end = t.interval[r] * width;
        double expected_l = h.first_time(t.subject[r], EventKind::Covariate) < end ? 1.0 : 0.0;
        CHECK(t.covariates(static_cast<Eigen::Index>(r), 0) == expected_l);
    }
}

TEST_CASE("pooled logistic fit matches a frozen maximum-likelihood solution") {
    // Person-period rows (interval, L, treated):
    // (1,0,0),(1,0,1),(1,1,0),(1,1,1),(2,0,0),(2,0,1),(2,1,1),(2,1,0),(1,1,1),(2,0,0)
    // Independent-solver MLE: coef = (0, -ln 2, ln 2), loglik = -6.5916737...
    PersonPeriodTable t;
    t.K = 2;
    t.horizon = 2.0;
    t.n_subjects = 10;
    int iv[] = {1, 1, 1, 1, 2, 2, 2, 2, 1, 2};
    double lv[] = {0, 0, 1, 1, 0, 0, 1, 1, 1, 0};
    int tv[] = {0, 1, 0, 1, 0, 1, 1, 0, 1, 0};
    t.covariates.resize(10, 1);
    for (int r = 0; r < 10; ++r) {
        t.subject.push_back(r);
        t.interval.push_back(iv[r]);
        t.treated.push_back(tv[r]);
        t.at_risk.push_back(1);
        t.covariates(r, 0) = lv[r];
    }
    t.covariate_names = {"L"};

    LogisticFit fit = fit_pooled_logistic(t, true);
    REQUIRE(fit.converged);
    REQUIRE(fit.coef.size() == 3);
    CHECK(fit.coef(0) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(fit.coef(1) == doctest::Approx(-std::log(2.0)).epsilon(1e-6));
    CHECK(fit.coef(2) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    CHECK(fit.loglik == doctest::Approx(-6.591673732008658).epsilon(1e-9));

    const double frozen_probs[10] = {0.5, 0.5, 2.0 / 3, 2.0 / 3, 1.0 / 3,
                                     1.0 / 3, 0.5, 0.5, 2.0 / 3, 1.0 / 3};
    Eigen::VectorXd p = predict(fit, t);
    for (int r = 0; r < 10; ++r) CHECK(p(r) == doctest::Approx(frozen_probs[r]).epsilon(1e-7));
}

TEST_CASE("all-zero covariate columns are pinned and the rest matches the reduced fit") {
    ConfoundedScenario scn;
    scn.n = 400;
    scn.alpha_l0 = 0.0;  // L never jumps
    scn.alpha_la = 0.0;
    EventHistory h = simulate_confounded(scn, 97);
    PersonPeriodTable t = discretize(h, 4, DesignSpec::parse({"L"}, h.baseline_names()));
    LogisticFit with_cov = fit_pooled_logistic(t, true);
    LogisticFit without = fit_pooled_logistic(t, false);
    REQUIRE(with_cov.coef.size() == without.coef.size() + 1);
    CHECK(with_cov.coef(with_cov.coef.size() - 1) == 0.0);  // pinned
    for (Eigen::Index j = 0; j < without.coef.size(); ++j)
        CHECK(with_cov.coef(j) == doctest::Approx(without.coef(j)).epsilon(1e-9));
}

TEST_CASE("saturated time model reproduces empirical event rates per interval") {
    ConfoundedScenario scn;
    scn.n = 500;
    EventHistory h = simulate_confounded(scn, 101);
    PersonPeriodTable t = discretize(h, 4, DesignSpec::parse({"L"}, h.baseline_names()));
    LogisticFit fit = fit_pooled_logistic(t, false);
    REQUIRE(fit.converged);
    Eigen::VectorXd p = predict(fit, t);
    for (int k = 1; k <= 4; ++k) {
        double events = 0.0, rows = 0.0, fitted = 0.0;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            if (t.interval[r] != k) continue;
            rows += 1.0;
            events += t.treated[r];
            fitted += p(static_cast<Eigen::Index>(r));
        }
        if (rows == 0.0) continue;
        CHECK(fitted / rows == doctest::Approx(events / rows).epsilon(1e-8));
    }
}

TEST_CASE("intervals without treatment events are dropped and recorded") {
    // all treatments in interval 1 of K=3
    std::vector<EventRecord> recs{
        {0, 0.5, EventKind::Treatment, {}},
        {1, 0.7, EventKind::Treatment, {}},
    };
    std::vector<std::vector<double>> baseline(3);
    EventHistory h = build_history(recs, baseline, {}, 9.0);
    PersonPeriodTable t = discretize(h, 3, DesignSpec::parse({"L"}, h.baseline_names()));
    LogisticFit fit = fit_pooled_logistic(t, false);
    CHECK(fit.dropped_intervals == std::vector<int>{2, 3});
    CHECK(fit.converged);
}

TEST_CASE("stabilized weights are one when numerator and denominator coincide") {
    ConfoundedScenario scn;
    scn.n = 300;
    EventHistory h = simulate_confounded(scn, 103);
    PersonPeriodTable t = discretize(h, 4, DesignSpec::parse({"L"}, h.baseline_names()));
    LogisticFit num = fit_pooled_logistic(t, false);
    LogisticFit num2 = fit_pooled_logistic(t, false);
    WeightSet ws = stabilized_iptw(num, num2, t);
    for (int i = 0; i < h.n(); ++i) {
        CHECK(ws.paths[static_cast<std::size_t>(i)].initial_value() == 1.0);
        for (double v : ws.paths[static_cast<std::size_t>(i)].values()) CHECK(v == 1.0);
    }
}

TEST_CASE("covariate-free data gives stabilized weights of one") {
    ConfoundedScenario scn;
    scn.n = 300;
    scn.alpha_l0 = 0.0;  // denominator reduces to the numerator model
    scn.alpha_la = 0.0;
    EventHistory h = simulate_confounded(scn, 107);
    PersonPeriodTable t = discretize(h, 4, DesignSpec::parse({"L"}, h.baseline_names()));
    LogisticFit num = fit_pooled_logistic(t, false);
    LogisticFit den = fit_pooled_logistic(t, true);
    WeightSet ws = stabilized_iptw(num, den, t);
    for (int i = 0; i < h.n(); ++i)
        for (double v : ws.paths[static_cast<std::size_t>(i)].values())
            CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("two-interval stabilized weight by hand") {
    // p_num = (0.1, 0.1), p_den = (0.2, 0.05), treated in interval 2:
    // weight after interval 2 = (0.9 * 0.1) / (0.8 * 0.05) = 2.25
    PersonPeriodTable t;
    t.K = 2;
    t.horizon = 2.0;
    t.n_subjects = 1;
    t.subject = {0, 0};
    t.interval = {1, 2};
    t.treated = {0, 1};
    t.at_risk = {1, 1};
    t.covariates.resize(2, 0);

    LogisticFit num, den;
    num.with_covariates = den.with_covariates = false;
    // logit coefficients reproducing the stated probabilities
    num.coef.resize(2);
    num.coef << std::log(0.1 / 0.9), 0.0;
    den.coef.resize(2);
    den.coef << std::log(0.2 / 0.8), std::log(0.05 / 0.95) - std::log(0.2 / 0.8);
    num.converged = den.converged = true;

    WeightSet ws = stabilized_iptw(num, den, t);
    CHECK(ws.at(0, 0.5) == doctest::Approx(0.9 / 0.8).epsilon(1e-12));
    CHECK(ws.at(0, 1.5) == doctest::Approx(2.25).epsilon(1e-12));
    CHECK(ws.at(0, 2.0) == doctest::Approx(2.25).epsilon(1e-12));
    // weights positive and piecewise constant on the interval grid
    CHECK(ws.paths[0].times() == std::vector<double>{1.0});
}

TEST_CASE("weights are positive and constant within intervals") {
    ConfoundedScenario scn;
    scn.n = 250;
    EventHistory h = simulate_confounded(scn, 109);
    const int K = 8;
    PersonPeriodTable t = discretize(h, K, DesignSpec::parse({"L"}, h.baseline_names()));
    LogisticFit num = fit_pooled_logistic(t, false);
    LogisticFit den = fit_pooled_logistic(t, true);
    WeightSet ws = stabilized_iptw(num, den, t);
    const double width = h.horizon() / K;
    for (int i = 0; i < h.n(); ++i) {
        const auto& path = ws.paths[static_cast<std::size_t>(i)];
        CHECK(path.initial_value() > 0.0);
        for (double v : path.values()) CHECK(v > 0.0);
        for (double tj : path.times()) {
            // jumps only on the interval grid
            double ratio = tj / width;
            CHECK(std::abs(ratio - std::round(ratio)) < 1e-9);
        }
    }
}
