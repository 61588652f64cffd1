#include "ctmsm/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctmsm {

StepSeries column_series(const CumCoef& fit, int column) {
    if (column < 0 || column >= fit.p())
        throw std::invalid_argument("column_series: column out of range");
    StepSeries s;
    s.times = fit.times;
    s.increments.resize(fit.times.size());
    for (std::size_t k = 0; k < fit.times.size(); ++k)
        s.increments[k] = fit.increments(static_cast<Eigen::Index>(k), column);
    return s;
}

StepSeries column_series(const CumCoef& fit, const std::string& label) {
    for (int j = 0; j < fit.p(); ++j)
        if (fit.columns[static_cast<std::size_t>(j)] == label) return column_series(fit, j);
    throw std::invalid_argument("column_series: no column labeled '" + label + "'");
}

StepSeries sum_series(const StepSeries& a, const StepSeries& b) {
    StepSeries out;
    std::size_t i = 0, j = 0;
    while (i < a.times.size() || j < b.times.size()) {
        double ta = i < a.times.size() ? a.times[i] : std::numeric_limits<double>::infinity();
        double tb = j < b.times.size() ? b.times[j] : std::numeric_limits<double>::infinity();
        double t = std::min(ta, tb);
        double inc = 0.0;
        if (ta == t) inc += a.increments[i++];
        if (tb == t) inc += b.increments[j++];
        out.times.push_back(t);
        out.increments.push_back(inc);
    }
    return out;
}

int OdeSpec::hazard_columns() const {
    int c = 0;
    for (bool t : time_column) c += !t;
    return c;
}

std::vector<double> ParamPath::at(double t) const {
    std::size_t lo = 0, hi = times.size();
    while (lo < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (times[mid] <= t) lo = mid + 1; else hi = mid;
    }
    return lo == 0 ? eta0 : states[lo - 1];
}

double ParamPath::at(double t, int component) const {
    return at(t)[static_cast<std::size_t>(component)];
}

ParamPath solve_plugin(const OdeSpec& spec, const std::vector<StepSeries>& hazards) {
    if (static_cast<int>(spec.time_column.size()) != spec.m)
        throw std::invalid_argument("solve_plugin: time_column size must equal m");
    if (static_cast<int>(hazards.size()) != spec.hazard_columns())
        throw std::invalid_argument("solve_plugin: expected " +
                                    std::to_string(spec.hazard_columns()) +
                                    " integrator series, got " + std::to_string(hazards.size()));
    if (static_cast<int>(spec.eta0.size()) != spec.dim)
        throw std::invalid_argument("solve_plugin: eta0 dimension mismatch");

    // Joint jump grid: union of the hazard columns' jump times.
    std::vector<double> grid;
    for (const auto& h : hazards) grid.insert(grid.end(), h.times.begin(), h.times.end());
    if (spec.terminal_time) grid.push_back(*spec.terminal_time);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    const int d = spec.dim;
    const int m = spec.m;
    ParamPath path;
    path.eta0 = spec.eta0;
    path.state_names = spec.state_names;
    std::vector<double> eta = spec.eta0;
    std::vector<double> f(static_cast<std::size_t>(d * m));
    std::vector<double> db(static_cast<std::size_t>(m));
    std::vector<std::size_t> cursor(hazards.size(), 0);
    double prev_t = 0.0;

    for (double t : grid) {
        int hcol = 0;
        for (int c = 0; c < m; ++c) {
            if (spec.time_column[static_cast<std::size_t>(c)]) {
                db[static_cast<std::size_t>(c)] = t - prev_t;
            } else {
                const auto& h = hazards[static_cast<std::size_t>(hcol)];
                auto& k = cursor[static_cast<std::size_t>(hcol)];
                double inc = 0.0;
                while (k < h.times.size() && h.times[k] <= t) {
                    if (h.times[k] == t) inc += h.increments[k];
                    ++k;
                }
                db[static_cast<std::size_t>(c)] = inc;
                ++hcol;
            }
        }
        // single joint update from the left-limit state
        spec.integrand(eta.data(), f.data());
        for (int r = 0; r < d; ++r) {
            double acc = 0.0;
            for (int c = 0; c < m; ++c)
                acc += f[static_cast<std::size_t>(r * m + c)] * db[static_cast<std::size_t>(c)];
            eta[static_cast<std::size_t>(r)] += acc;
        }
        for (double v : eta)
            if (!std::isfinite(v))
                throw std::runtime_error("solve_plugin: non-finite state at t=" + std::to_string(t));
        path.times.push_back(t);
        path.states.push_back(eta);
        prev_t = t;
    }
    return path;
}

OdeSpec survival_spec() {
    OdeSpec s;
    s.dim = 1;
    s.eta0 = {1.0};
    s.m = 1;
    s.time_column = {false};
    s.state_names = {"survival"};
    s.integrand = [](const double* eta, double* f) { f[0] = -eta[0]; };
    return s;
}

OdeSpec relative_survival_spec() {
    // columns: (treated cumulative coefficient, untreated cumulative coefficient)
    OdeSpec s;
    s.dim = 1;
    s.eta0 = {1.0};
    s.m = 2;
    s.time_column = {false, false};
    s.state_names = {"relative_survival"};
    s.integrand = [](const double* eta, double* f) {
        f[0] = -eta[0];
        f[1] = eta[0];
    };
    return s;
}

OdeSpec cumulative_incidence_spec() {
    // state (S, C1), columns (cause-1 hazard, all-cause hazard)
    OdeSpec s;
    s.dim = 2;
    s.eta0 = {1.0, 0.0};
    s.m = 2;
    s.time_column = {false, false};
    s.state_names = {"survival", "incidence"};
    s.integrand = [](const double* eta, double* f) {
        f[0] = 0.0;
        f[1] = -eta[0];
        f[2] = eta[0];
        f[3] = 0.0;
    };
    return s;
}

OdeSpec rmst_spec(double horizon) {
    // state (S, mu), columns (hazard, dt)
    OdeSpec s;
    s.dim = 2;
    s.eta0 = {1.0, 0.0};
    s.m = 2;
    s.time_column = {false, true};
    s.terminal_time = horizon;
    s.state_names = {"survival", "rmst"};
    s.integrand = [](const double* eta, double* f) {
        f[0] = -eta[0];
        f[1] = 0.0;
        f[2] = 0.0;
        f[3] = eta[0];
    };
    return s;
}

}  // namespace ctmsm
