#include <doctest.h>

#include <cmath>
#include <vector>

#include "ctmsm/aalen.hpp"
#include "ctmsm/rng.hpp"
#include "test_util.hpp"

using namespace ctmsm;

namespace {

// Brute-force weighted least squares oracle: builds the normal equations at
// one event time and solves them by Gauss-Jordan elimination with partial
// pivoting. Independent of the library's factorization path.
std::vector<double> brute_increment(const EventHistory& h, const DesignSpec& spec,
                                    const WeightSet* w, double s,
                                    const std::vector<int>& event_subjects) {
    const int p = spec.size();
    std::vector<std::vector<double>> m(static_cast<std::size_t>(p),
                                       std::vector<double>(static_cast<std::size_t>(p + 1), 0.0));
    for (int i = 0; i < h.n(); ++i) {
        if (!h.at_risk(i, EventKind::Outcome, s)) continue;
        double wi = w ? w->left_limit(i, s) : 1.0;
        auto x = design_row(h, spec, i, s);
        for (int a = 0; a < p; ++a)
            for (int b = 0; b < p; ++b)
                m[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] +=
                    wi * x[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(b)];
    }
    for (int i : event_subjects) {
        double wi = w ? w->left_limit(i, s) : 1.0;
        auto x = design_row(h, spec, i, s);
        for (int a = 0; a < p; ++a)
            m[static_cast<std::size_t>(a)][static_cast<std::size_t>(p)] +=
                wi * x[static_cast<std::size_t>(a)];
    }
    // Gauss-Jordan
    for (int c = 0; c < p; ++c) {
        int piv = c;
        for (int r = c + 1; r < p; ++r)
            if (std::abs(m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) >
                std::abs(m[static_cast<std::size_t>(piv)][static_cast<std::size_t>(c)]))
                piv = r;
        std::swap(m[static_cast<std::size_t>(c)], m[static_cast<std::size_t>(piv)]);
        double d = m[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
        if (d == 0.0) return {};  // singular
        for (int k = c; k <= p; ++k) m[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] /= d;
        for (int r = 0; r < p; ++r) {
            if (r == c) continue;
            double f = m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            for (int k = c; k <= p; ++k)
                m[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)] -=
                    f * m[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
        }
    }
    std::vector<double> out(static_cast<std::size_t>(p));
    for (int a = 0; a < p; ++a) out[static_cast<std::size_t>(a)] = m[static_cast<std::size_t>(a)][static_cast<std::size_t>(p)];
    return out;
}

}  // namespace

TEST_CASE("intercept-only fit is the Nelson-Aalen estimator by hand") {
    // 2 subjects, D at t=1 (s0) and t=2 (s1): increments 1/2 then 1/1
    std::vector<EventRecord> recs{
        {0, 1.0, EventKind::Outcome, {}},
        {1, 2.0, EventKind::Outcome, {}},
    };
    EventHistory h = build_history(recs, {}, {}, 10.0);
    CumCoef fit = fit_additive(h, EventKind::Outcome, DesignSpec::intercept());
    REQUIRE(fit.times == std::vector<double>{1.0, 2.0});
    CHECK(fit.increments(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(fit.increments(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(fit.cumulative(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(fit.cumulative(1, 0) == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(fit.skipped_times.empty());
}

TEST_CASE("nelson_aalen examples") {
    // 3 subjects all at risk, one A event at t=1: increment 1/3
    std::vector<EventRecord> recs{{0, 1.0, EventKind::Treatment, {}}};
    std::vector<std::vector<double>> baseline(3);
    EventHistory h = build_history(recs, baseline, {}, 10.0);
    CumCoef na = nelson_aalen(h, EventKind::Treatment);
    REQUIRE(na.times.size() == 1);
    CHECK(na.increments(0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-14));

    // weighted risk set (2,1,1), event from the weight-2 subject: 2/4
    WeightSet w = WeightSet::unit(3);
    w.paths[0] = StepPath(2.0);
    CumCoef naw = nelson_aalen(h, EventKind::Treatment, &w);
    CHECK(naw.increments(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("nelson_aalen equals intercept-only fit_additive bit-exactly") {
    EventHistory h = testutil::random_history(31, 50);
    WeightSet w = testutil::random_weights(31, 50);
    CumCoef a = nelson_aalen(h, EventKind::Outcome, &w);
    CumCoef b = fit_additive(h, EventKind::Outcome, DesignSpec::intercept(), &w);
    REQUIRE(a.times == b.times);
    for (Eigen::Index k = 0; k < a.increments.rows(); ++k) {
        CHECK(a.increments(k, 0) == b.increments(k, 0));
        CHECK(a.cumulative(k, 0) == b.cumulative(k, 0));
    }
}

TEST_CASE("unit weights reproduce the unweighted fit exactly") {
    EventHistory h = testutil::random_history(37, 40);
    DesignSpec spec = DesignSpec::parse({"1", "A"}, h.baseline_names());
    WeightSet unit = WeightSet::unit(h.n());
    CumCoef a = fit_additive(h, EventKind::Outcome, spec);
    CumCoef b = fit_additive(h, EventKind::Outcome, spec, &unit);
    for (Eigen::Index k = 0; k < a.increments.rows(); ++k)
        for (int j = 0; j < a.p(); ++j) CHECK(a.increments(k, j) == b.increments(k, j));
}

TEST_CASE("increments match the brute-force weighted least squares oracle") {
    for (uint64_t seed : {41ULL, 43ULL, 47ULL, 53ULL}) {
        EventHistory h = testutil::random_history(seed, 50);
        WeightSet w = testutil::random_weights(seed, 50);
        DesignSpec spec = DesignSpec::parse({"1", "A", "L", "A*L"}, h.baseline_names());
        CumCoef fit = fit_additive(h, EventKind::Outcome, spec, &w);
        EventTimeline tl = event_timeline(h, EventKind::Outcome);
        REQUIRE(fit.times == tl.times);
        for (std::size_t k = 0; k < tl.times.size(); ++k) {
            bool skipped = false;
            for (double s : fit.skipped_times) skipped |= s == tl.times[k];
            auto oracle = brute_increment(h, spec, &w, tl.times[k], tl.subjects[k]);
            if (skipped || oracle.empty()) continue;
            for (int j = 0; j < spec.size(); ++j)
                CHECK(fit.increments(static_cast<Eigen::Index>(k), j) ==
                      doctest::Approx(oracle[static_cast<std::size_t>(j)]).epsilon(1e-10));
        }
    }
}

TEST_CASE("5-subject instance with design (1, A) against the oracle") {
    std::vector<EventRecord> recs{
        {0, 0.5, EventKind::Treatment, {}}, {0, 2.0, EventKind::Outcome, {}},
        {1, 1.0, EventKind::Outcome, {}},   {2, 1.5, EventKind::Treatment, {}},
        {3, 3.0, EventKind::Outcome, {}},   {4, 2.5, EventKind::Censoring, {}},
    };
    EventHistory h = build_history(recs, {}, {}, 10.0);
    DesignSpec spec = DesignSpec::parse({"1", "A"}, h.baseline_names());
    CumCoef fit = fit_additive(h, EventKind::Outcome, spec);
    EventTimeline tl = event_timeline(h, EventKind::Outcome);
    for (std::size_t k = 0; k < tl.times.size(); ++k) {
        auto oracle = brute_increment(h, spec, nullptr, tl.times[k], tl.subjects[k]);
        bool skipped = false;
        for (double s : fit.skipped_times) skipped |= s == tl.times[k];
        if (skipped) continue;
        REQUIRE(!oracle.empty());
        for (int j = 0; j < 2; ++j)
            CHECK(fit.increments(static_cast<Eigen::Index>(k), j) ==
                  doctest::Approx(oracle[static_cast<std::size_t>(j)]).epsilon(1e-10));
    }
}

TEST_CASE("rescaling all weights leaves the estimate unchanged") {
    EventHistory h = testutil::random_history(59, 40);
    WeightSet w = testutil::random_weights(59, 40);
    WeightSet w2 = w;
    for (auto& p : w2.paths) {
        std::vector<double> v = p.values();
        for (auto& x : v) x *= 7.5;
        p = StepPath(p.initial_value() * 7.5, p.times(), v);
    }
    DesignSpec spec = DesignSpec::parse({"1", "A"}, h.baseline_names());
    CumCoef a = fit_additive(h, EventKind::Outcome, spec, &w);
    CumCoef b = fit_additive(h, EventKind::Outcome, spec, &w2);
    for (Eigen::Index k = 0; k < a.increments.rows(); ++k)
        for (int j = 0; j < 2; ++j)
            CHECK(a.increments(k, j) == doctest::Approx(b.increments(k, j)).epsilon(1e-12));
}

TEST_CASE("singular designs are skipped and recorded") {
    // column A*L is identically zero here: Gram matrix singular at every time
    std::vector<EventRecord> recs{
        {0, 1.0, EventKind::Outcome, {}},
        {1, 2.0, EventKind::Outcome, {}},
    };
    EventHistory h = build_history(recs, {}, {}, 10.0);
    DesignSpec spec = DesignSpec::parse({"1", "A*L"}, h.baseline_names());
    CumCoef fit = fit_additive(h, EventKind::Outcome, spec);
    CHECK(fit.skipped_times == std::vector<double>{1.0, 2.0});
    for (Eigen::Index k = 0; k < fit.increments.rows(); ++k) {
        CHECK(fit.increments(k, 0) == 0.0);
        CHECK(fit.increments(k, 1) == 0.0);
    }
}

TEST_CASE("all-zero weights leave an empty risk set, recorded as skipped") {
    std::vector<EventRecord> recs{{0, 1.0, EventKind::Outcome, {}}};
    std::vector<std::vector<double>> baseline(2);
    EventHistory h = build_history(recs, baseline, {}, 10.0);
    WeightSet w = WeightSet::unit(2);
    w.paths[0] = StepPath(0.0);
    w.paths[1] = StepPath(0.0);
    CumCoef fit = fit_additive(h, EventKind::Outcome, DesignSpec::intercept(), &w);
    CHECK(fit.skipped_times == std::vector<double>{1.0});
}

TEST_CASE("non-finite weights are rejected") {
    std::vector<EventRecord> recs{{0, 1.0, EventKind::Outcome, {}}};
    EventHistory h = build_history(recs, {}, {}, 10.0);
    WeightSet w = WeightSet::unit(1);
    w.paths[0] = StepPath(std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(fit_additive(h, EventKind::Outcome, DesignSpec::intercept(), &w),
                    std::invalid_argument);
}

TEST_CASE("parallel and serial fits agree bit-for-bit") {
    EventHistory h = testutil::random_history(61, 80);
    WeightSet w = testutil::random_weights(61, 80);
    DesignSpec spec = DesignSpec::parse({"1", "A", "L"}, h.baseline_names());
    CumCoef a = fit_additive(h, EventKind::Outcome, spec, &w);
    CumCoef b = serial::fit_additive(h, EventKind::Outcome, spec, &w);
    REQUIRE(a.times == b.times);
    CHECK(a.skipped_times == b.skipped_times);
    for (Eigen::Index k = 0; k < a.increments.rows(); ++k)
        for (int j = 0; j < a.p(); ++j) {
            CHECK(a.increments(k, j) == b.increments(k, j));
            CHECK(a.cumulative(k, j) == b.cumulative(k, j));
        }
}
