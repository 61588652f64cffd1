#pragma once

// Shared helpers for the unit suites: random event histories and weight
// paths, built on the library RNG so instances are reproducible.

#include <cmath>
#include <vector>

#include "ctmsm/event_history.hpp"
#include "ctmsm/rng.hpp"
#include "ctmsm/weight_set.hpp"

namespace testutil {

// Random history with monotone A/L indicators and D/C terminal events.
inline ctmsm::EventHistory random_history(uint64_t seed, int n, double horizon = 10.0,
                                          double rate_a = 0.2, double rate_l = 0.3,
                                          double rate_d = 0.15, double rate_c = 0.08) {
    using namespace ctmsm;
    std::vector<EventRecord> recs;
    for (int i = 0; i < n; ++i) {
        Philox rng(seed, static_cast<uint64_t>(i));
        double ta = rng.next_exponential(rate_a);
        double tl = rng.next_exponential(rate_l);
        double td = rng.next_exponential(rate_d);
        double tc = rng.next_exponential(rate_c);
        double term = std::min(td, tc);
        if (td <= tc && td <= horizon) recs.push_back({i, td, EventKind::Outcome, {}});
        if (tc < td && tc <= horizon) recs.push_back({i, tc, EventKind::Censoring, {}});
        if (ta < term && ta <= horizon) recs.push_back({i, ta, EventKind::Treatment, {}});
        if (tl < term && tl <= horizon) recs.push_back({i, tl, EventKind::Covariate, {}});
    }
    std::vector<std::vector<double>> baseline(static_cast<std::size_t>(n));
    return build_history(std::move(recs), std::move(baseline), {}, horizon);
}

// Strictly positive random step weights with a few jumps per subject.
inline ctmsm::WeightSet random_weights(uint64_t seed, int n, double horizon = 10.0) {
    using namespace ctmsm;
    WeightSet ws;
    for (int i = 0; i < n; ++i) {
        Philox rng(seed ^ 0x5eedULL, static_cast<uint64_t>(i));
        StepPath p(0.5 + rng.next_uniform());
        double t = 0.0;
        int jumps = static_cast<int>(rng.next_uniform() * 4);
        for (int k = 0; k < jumps; ++k) {
            t += rng.next_exponential(1.0);
            if (t >= horizon) break;
            p.append(t, 0.25 + 2.0 * rng.next_uniform());
        }
        ws.paths.push_back(std::move(p));
    }
    return ws;
}

}  // namespace testutil
