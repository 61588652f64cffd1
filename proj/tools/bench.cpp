// Benchmark of the OpenMP kernels against their serial reference
// implementations. Also verifies that both produce identical output.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include <omp.h>

#include "ctmsm/aalen.hpp"
#include "ctmsm/sim.hpp"
#include "ctmsm/weights.hpp"

using namespace ctmsm;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* kernel, int n, double serial_ms, double parallel_ms, double max_diff) {
    std::printf("%-22s n=%-6d serial %9.1f ms   parallel %9.1f ms   speedup %5.2fx   max|diff| %g\n",
                kernel, n, serial_ms, parallel_ms, serial_ms / parallel_ms, max_diff);
}

double fit_diff(const CumCoef& a, const CumCoef& b) {
    double d = 0.0;
    for (Eigen::Index r = 0; r < a.cumulative.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cumulative.cols(); ++c)
            d = std::max(d, std::abs(a.cumulative(r, c) - b.cumulative(r, c)));
    return d;
}

double weight_diff(const WeightSet& a, const WeightSet& b, double horizon) {
    double d = 0.0;
    for (int i = 0; i < a.n(); ++i)
        for (double t = 0.0; t <= horizon; t += horizon / 16)
            d = std::max(d, std::abs(a.at(i, t) - b.at(i, t)));
    return d;
}

}  // namespace

int main(int argc, char** argv) {
    int n = argc > 1 ? std::atoi(argv[1]) : 8000;
    std::printf("threads: %d\n", omp_get_max_threads());

    ConfoundedScenario scn;
    scn.n = n;

    auto t0 = std::chrono::steady_clock::now();
    EventHistory hs = serial::simulate_confounded(scn, 7);
    double sim_serial = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    EventHistory hp = simulate_confounded(scn, 7);
    double sim_parallel = ms_since(t0);
    double sim_diff = hs.records().size() == hp.records().size() ? 0.0 : 1.0;
    for (std::size_t k = 0; k < hs.records().size() && sim_diff == 0.0; ++k)
        if (hs.records()[k].time != hp.records()[k].time ||
            hs.records()[k].subject != hp.records()[k].subject)
            sim_diff = 1.0;
    report("simulate_confounded", n, sim_serial, sim_parallel, sim_diff);

    DesignSpec outcome = DesignSpec::parse({"1", "A", "L"}, hp.baseline_names());
    t0 = std::chrono::steady_clock::now();
    CumCoef fs = serial::fit_additive(hp, EventKind::Outcome, outcome);
    double fit_serial = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    CumCoef fp = fit_additive(hp, EventKind::Outcome, outcome);
    double fit_parallel = ms_since(t0);
    report("fit_additive", n, fit_serial, fit_parallel, fit_diff(fs, fp));

    DesignSpec factual = DesignSpec::parse({"1", "L"}, hp.baseline_names());
    DesignSpec hypo = DesignSpec::intercept();
    CumCoef ff = fit_additive(hp, EventKind::Treatment, factual);
    CumCoef hf = nelson_aalen(hp, EventKind::Treatment);
    double kappa = 0.5 * std::cbrt(static_cast<double>(n));
    t0 = std::chrono::steady_clock::now();
    WeightSet ws = serial::estimate_weights(hp, ff, hf, factual, hypo, kappa);
    double w_serial = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    WeightSet wp = estimate_weights(hp, ff, hf, factual, hypo, kappa);
    double w_parallel = ms_since(t0);
    report("estimate_weights", n, w_serial, w_parallel, weight_diff(ws, wp, scn.horizon));

    MarginalHazard m = marginal_treatment_hazard(scn);
    IntensityFn lam = treatment_intensity(scn, hp);
    IntensityFn lam_tilde = marginal_intensity(m, hp, EventKind::Treatment);
    t0 = std::chrono::steady_clock::now();
    WeightSet ts = serial::theoretical_weights(hp, lam, lam_tilde);
    double t_serial = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    WeightSet tp = theoretical_weights(hp, lam, lam_tilde);
    double t_parallel = ms_since(t0);
    report("theoretical_weights", n, t_serial, t_parallel, weight_diff(ts, tp, scn.horizon));

    return 0;
}
