// ctmsm: continuous-time marginal structural modeling toolkit.
//
// Subcommands: simulate, weights, fit, transform, iptw,
// experiment {fig1,fig2,fig3,censoring}. Every command is a pure function of
// (input files, config, seed) to output files. Config keys and command-line
// flags mirror each other one-to-one; flags win.
//
// Exit codes: 0 success, 1 user error, 2 internal error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include "ctmsm/aalen.hpp"
#include "ctmsm/design.hpp"
#include "ctmsm/experiments.hpp"
#include "ctmsm/io.hpp"
#include "ctmsm/iptw.hpp"
#include "ctmsm/sim.hpp"
#include "ctmsm/transform.hpp"
#include "ctmsm/weights.hpp"

using nlohmann::json;
using namespace ctmsm;

namespace {

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw UserError("config parse error in " + path + ": " + e.what());
    }
}

// flag overrides: only set keys the user passed on the command line
struct Override {
    json values = json::object();
    void set_if(const CLI::App& app, const std::string& flag, const std::string& key, json v) {
        if (app.count("--" + flag) > 0) values[key] = std::move(v);
    }
};

json merged(const json& config, const json& overrides) {
    json out = config;
    for (auto it = overrides.begin(); it != overrides.end(); ++it) out[it.key()] = it.value();
    return out;
}

template <typename T>
T require(const json& cfg, const std::string& key) {
    if (!cfg.contains(key)) throw UserError("missing config key: " + key);
    try {
        return cfg.at(key).get<T>();
    } catch (const json::exception& e) {
        throw UserError("bad config value for '" + key + "': " + e.what());
    }
}

ConfoundedScenario parse_confounded(const json& j) {
    ConfoundedScenario s;
    s.alpha_d0 = j.value("alpha_d0", s.alpha_d0);
    s.alpha_da = j.value("alpha_da", s.alpha_da);
    s.alpha_dl = j.value("alpha_dl", s.alpha_dl);
    s.alpha_dal = j.value("alpha_dal", s.alpha_dal);
    s.alpha_a0 = j.value("alpha_a0", s.alpha_a0);
    s.alpha_al = j.value("alpha_al", s.alpha_al);
    s.alpha_l0 = j.value("alpha_l0", s.alpha_l0);
    s.alpha_la = j.value("alpha_la", s.alpha_la);
    s.cens0 = j.value("cens0", s.cens0);
    s.censl = j.value("censl", s.censl);
    s.horizon = j.value("horizon", s.horizon);
    s.n = j.value("n", s.n);
    s.validate();
    return s;
}

BaselineScenario parse_baseline(const json& j) {
    BaselineScenario s;
    s.alpha0 = j.value("alpha0", s.alpha0);
    s.alphaA = j.value("alphaA", s.alphaA);
    s.p = j.value("p", s.p);
    s.horizon = j.value("horizon", s.horizon);
    s.n = j.value("n", s.n);
    s.validate();
    return s;
}

json scenario_json(const json& cfg) {
    if (cfg.contains("scenario_file")) return load_config(cfg.at("scenario_file").get<std::string>());
    if (cfg.contains("scenario")) return cfg.at("scenario");
    throw UserError("missing config key: scenario (or scenario_file)");
}

EventHistory load_history(const json& cfg) {
    return read_history_csv(require<std::string>(cfg, "events"), cfg.value("baseline", ""),
                            require<double>(cfg, "horizon"));
}

DesignSpec parse_design(const json& cfg, const std::string& key, const EventHistory& h) {
    auto exprs = require<std::vector<std::string>>(cfg, key);
    try {
        return DesignSpec::parse(exprs, h.baseline_names());
    } catch (const std::invalid_argument& e) {
        throw UserError(std::string(e.what()));
    }
}

std::optional<double> truncation_of(const json& cfg) {
    double b = cfg.value("truncation", 0.0);
    if (b > 0.0) return b;
    return std::nullopt;
}

// ct weight pipeline shared by `weights` and `fit --weights ct`
WeightSet ct_weights_from_config(const json& cfg, const EventHistory& h, double* kappa_out) {
    DesignSpec factual = parse_design(cfg, "factual_design", h);
    DesignSpec hypo = cfg.contains("hypothetical_design")
                          ? parse_design(cfg, "hypothetical_design", h)
                          : DesignSpec::intercept();
    double kappa = cfg.value("kappa", 0.0);
    if (!(kappa > 0.0)) kappa = default_bandwidth(h);
    if (kappa_out) *kappa_out = kappa;
    Theta0Policy policy = Theta0Policy::WindowAtBandwidth;
    std::string p = cfg.value("theta0", "window");
    if (p == "one") policy = Theta0Policy::One;
    else if (p != "window") throw UserError("theta0 must be 'window' or 'one'");
    CumCoef factual_fit = fit_additive(h, EventKind::Treatment, factual);
    CumCoef hypo_fit = fit_additive(h, EventKind::Treatment, hypo);
    return estimate_weights(h, factual_fit, hypo_fit, factual, hypo, kappa, nullptr,
                            truncation_of(cfg), policy);
}

WeightSet iptw_weights_from_config(const json& cfg, const EventHistory& h) {
    int K = require<int>(cfg, "K");
    DesignSpec cov = cfg.contains("covariates") ? parse_design(cfg, "covariates", h)
                                                : DesignSpec::parse({"L"}, h.baseline_names());
    PersonPeriodTable table = discretize(h, K, cov);
    LogisticFit num = fit_pooled_logistic(table, false);
    LogisticFit den = fit_pooled_logistic(table, true);
    if (!num.converged || !den.converged)
        std::cerr << "warning: pooled logistic fit flagged (separation or no convergence)\n";
    return stabilized_iptw(num, den, table);
}

int cmd_simulate(const json& cfg) {
    json scn = scenario_json(cfg);
    std::string type = scn.value("type", "confounded");
    uint64_t seed = cfg.value("seed", 1ULL);
    std::string world = cfg.value("world", "factual");
    EventHistory h = [&] {
        if (type == "confounded") {
            ConfoundedScenario s = parse_confounded(scn);
            if (world == "factual") return simulate_confounded(s, seed);
            if (world == "hypothetical")
                return simulate_hypothetical(s, marginal_treatment_hazard(s), seed);
            if (world == "censoring-randomized")
                return simulate_censoring_randomized(s, marginal_censoring_hazard(s), seed);
            throw UserError("unknown world: " + world);
        }
        if (type == "baseline") {
            BaselineScenario s = parse_baseline(scn);
            if (world == "factual") return simulate_baseline_scenario(s, seed);
            if (world == "hypothetical")
                return simulate_baseline_hypothetical(s, marginal_treatment_hazard(s), seed);
            throw UserError("unknown world: " + world);
        }
        throw UserError("unknown scenario type: " + type);
    }();
    write_events_csv(require<std::string>(cfg, "out"), h);
    if (cfg.contains("baseline_out")) write_baseline_csv(cfg.at("baseline_out"), h);
    std::cerr << "simulated " << h.n() << " subjects, " << h.records().size() << " events\n";
    return 0;
}

int cmd_weights(const json& cfg) {
    EventHistory h = load_history(cfg);
    double kappa = 0.0;
    WeightSet ws = ct_weights_from_config(cfg, h, &kappa);
    write_weights_csv(require<std::string>(cfg, "out"), ws);
    int grid_points = cfg.value("grid_points", 100);
    WeightDiagnostics diag = diagnose_weights(ws, time_grid(h.horizon(), grid_points));
    if (cfg.contains("diagnostics"))
        write_diagnostics_json(cfg.at("diagnostics"), diag, provenance_name(ws.provenance));
    if (cfg.contains("expanded")) {
        DesignSpec outcome = parse_design(cfg, "outcome_design", h);
        write_expanded_csv(cfg.at("expanded"),
                           expand_to_event_grid(h, EventKind::Outcome, outcome, &ws));
    }
    std::cerr << "kappa = " << kappa << ", flagged " << ws.flagged.size() << " subjects\n";
    return 0;
}

int cmd_fit(const json& cfg) {
    EventHistory h = load_history(cfg);
    DesignSpec design = parse_design(cfg, "design", h);
    std::string outcome = cfg.value("outcome", "D");
    if (outcome.size() != 1) throw UserError("outcome must be one of D,A,L,C");
    EventKind kind = [&] {
        try {
            return kind_from_code(outcome[0]);
        } catch (const std::invalid_argument& e) {
            throw UserError(e.what());
        }
    }();

    json wcfg = cfg.value("weights", json{{"method", "none"}});
    std::string method = wcfg.value("method", "none");
    std::optional<WeightSet> ws;
    if (method == "ct") {
        ws = ct_weights_from_config(wcfg, h, nullptr);
    } else if (method == "iptw") {
        ws = iptw_weights_from_config(wcfg, h);
    } else if (method == "theoretical") {
        json scn = scenario_json(wcfg);
        if (scn.value("type", "confounded") != "confounded")
            throw UserError("theoretical weights: only the confounded scenario is wired here");
        ConfoundedScenario s = parse_confounded(scn);
        MarginalHazard m = marginal_treatment_hazard(s);
        ws = theoretical_weights(h, treatment_intensity(s, h),
                                 marginal_intensity(m, h, EventKind::Treatment));
    } else if (method == "file") {
        ws = read_weights_csv(require<std::string>(wcfg, "path"), h.n());
    } else if (method != "none") {
        throw UserError("unknown weight method: " + method);
    }

    CumCoef fit = fit_additive(h, kind, design, ws ? &*ws : nullptr);
    write_cumcoef_csv(require<std::string>(cfg, "out"), fit);
    if (cfg.contains("meta")) write_cumcoef_meta_json(cfg.at("meta"), fit);
    if (cfg.contains("expanded"))
        write_expanded_csv(cfg.at("expanded"),
                           expand_to_event_grid(h, kind, design, ws ? &*ws : nullptr));
    std::cerr << "fit " << fit.times.size() << " event times, skipped "
              << fit.skipped_times.size() << "\n";
    return 0;
}

int cmd_transform(const json& cfg) {
    CumCoef fit = read_cumcoef_csv(require<std::string>(cfg, "input"));
    std::string name = require<std::string>(cfg, "spec");
    json params = cfg.value("params", json::object());

    auto series_for = [&](const std::string& key, const std::string& fallback) {
        std::string label = params.value(key, fallback);
        try {
            return column_series(fit, label);
        } catch (const std::invalid_argument& e) {
            throw UserError(e.what());
        }
    };

    OdeSpec spec;
    std::vector<StepSeries> columns;
    if (name == "survival") {
        spec = survival_spec();
        columns = {series_for("column", fit.columns.front())};
    } else if (name == "relative_survival") {
        spec = relative_survival_spec();
        StepSeries base = series_for("baseline", fit.columns.front());
        StepSeries effect = series_for("effect", fit.columns.size() > 1 ? fit.columns[1] : "");
        columns = {sum_series(base, effect), base};
    } else if (name == "cumulative_incidence") {
        spec = cumulative_incidence_spec();
        columns = {series_for("cause", fit.columns.front()),
                   series_for("all", fit.columns.front())};
    } else if (name == "rmst") {
        double horizon = params.value("horizon", 0.0);
        if (!(horizon > 0.0)) throw UserError("rmst requires params.horizon > 0");
        spec = rmst_spec(horizon);
        columns = {series_for("column", fit.columns.front())};
    } else {
        throw UserError("unknown transform spec: " + name);
    }
    ParamPath path = solve_plugin(spec, columns);
    write_parampath_csv(require<std::string>(cfg, "out"), path);
    return 0;
}

int cmd_iptw(const json& cfg) {
    EventHistory h = load_history(cfg);
    WeightSet ws = iptw_weights_from_config(cfg, h);
    write_weights_csv(require<std::string>(cfg, "out"), ws);
    if (cfg.contains("diagnostics")) {
        WeightDiagnostics diag =
            diagnose_weights(ws, time_grid(h.horizon(), cfg.value("grid_points", 100)));
        write_diagnostics_json(cfg.at("diagnostics"), diag, provenance_name(ws.provenance));
    }
    return 0;
}

int cmd_experiment(const std::string& which, const json& cfg) {
    uint64_t seed = cfg.value("seed", 1ULL);
    std::string out = require<std::string>(cfg, "out");
    if (which == "fig1") {
        EffectComparisonConfig c;
        c.scenario = parse_confounded(cfg.value("scenario", json::object()));
        c.ns = cfg.value("ns", c.ns);
        c.k_list = cfg.value("k_list", c.k_list);
        c.reps = cfg.value("reps", c.reps);
        c.grid_points = cfg.value("grid_points", c.grid_points);
        c.kappa_scale = cfg.value("kappa_scale", c.kappa_scale);
        c.seed = seed;
        c.outdir = out;
        run_effect_comparison(c);
    } else if (which == "fig2") {
        MeanWeightConfig c;
        c.scenario = parse_confounded(cfg.value("scenario", json::object()));
        c.n = cfg.value("n", c.n);
        c.reps = cfg.value("reps", c.reps);
        c.k_list = cfg.value("k_list", c.k_list);
        c.grid_points = cfg.value("grid_points", c.grid_points);
        c.kappa_scale = cfg.value("kappa_scale", c.kappa_scale);
        c.seed = seed;
        c.outdir = out;
        run_mean_weight_bias(c);
    } else if (which == "fig3") {
        BiasVarianceConfig c;
        c.scenario = parse_baseline(cfg.value("scenario", json::object()));
        if (cfg.contains("grid")) {
            const json& g = cfg.at("grid");
            c.grid.n0 = g.value("n0", c.grid.n0);
            c.grid.t0 = g.value("t0", c.grid.t0);
            c.grid.rates = g.value("rates", c.grid.rates);
            c.grid.ns = g.value("ns", c.grid.ns);
            c.grid.reps = g.value("reps", c.grid.reps);
        }
        c.seed = seed;
        c.outdir = out;
        run_bias_variance(c);
    } else if (which == "censoring") {
        CensoringConfig c;
        json scn = cfg.value("scenario", json::object());
        if (!scn.contains("censl")) {
            // default dependent-censoring study: treatment-free, L-driven censoring
            scn["alpha_a0"] = 0.0;
            scn["alpha_al"] = 0.0;
            scn["alpha_l0"] = 0.4;
            scn["alpha_d0"] = 0.1;
            scn["alpha_dl"] = 0.5;
            scn["cens0"] = 0.05;
            scn["censl"] = 0.5;
            scn["horizon"] = 5.0;
        }
        c.scenario = parse_confounded(scn);
        c.n = cfg.value("n", c.n);
        c.reps = cfg.value("reps", c.reps);
        c.oracle_n = cfg.value("oracle_n", c.oracle_n);
        c.grid_points = cfg.value("grid_points", c.grid_points);
        c.seed = seed;
        c.outdir = out;
        run_censoring_validation(c);
    } else {
        throw UserError("unknown experiment: " + which);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("CTMSM_THREADS")) {
        int t = std::atoi(threads);
        if (t > 0) omp_set_num_threads(t);
    }

    CLI::App app{"continuous-time marginal structural modeling toolkit"};
    app.require_subcommand(1);

    std::string config_path, out, events, baseline, experiment_kind;
    uint64_t seed = 0;
    int n = 0, K = 0, reps = 0;
    double horizon = 0.0, kappa = 0.0, truncation = 0.0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--out", out, "output path");
        sub->add_option("--seed", seed, "RNG seed");
        return sub;
    };

    CLI::App* sim = add_common(app.add_subcommand("simulate", "generate an event history CSV"));
    sim->add_option("--n", n, "subject count");
    CLI::App* wts = add_common(app.add_subcommand("weights", "estimate continuous-time weights"));
    wts->add_option("--events", events, "events CSV");
    wts->add_option("--baseline", baseline, "baseline CSV");
    wts->add_option("--horizon", horizon, "study horizon");
    wts->add_option("--kappa", kappa, "bandwidth (0 = auto)");
    wts->add_option("--truncation", truncation, "weight truncation bound (0 = none)");
    CLI::App* fit = add_common(app.add_subcommand("fit", "weighted additive hazard regression"));
    fit->add_option("--events", events, "events CSV");
    fit->add_option("--baseline", baseline, "baseline CSV");
    fit->add_option("--horizon", horizon, "study horizon");
    CLI::App* tra = add_common(app.add_subcommand("transform", "ODE plugin transformation"));
    CLI::App* ipw = add_common(app.add_subcommand("iptw", "discrete-time stabilized IPTW"));
    ipw->add_option("--events", events, "events CSV");
    ipw->add_option("--baseline", baseline, "baseline CSV");
    ipw->add_option("--horizon", horizon, "study horizon");
    ipw->add_option("--K", K, "number of intervals");
    CLI::App* exp = add_common(app.add_subcommand("experiment", "scripted simulation studies"));
    exp->add_option("kind", experiment_kind, "fig1|fig2|fig3|censoring")->required();
    exp->add_option("--reps", reps, "replications");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        json cfg = load_config(config_path);
        Override ov;
        CLI::App* active = app.get_subcommands().front();
        ov.set_if(*active, "out", "out", out);
        ov.set_if(*active, "seed", "seed", seed);
        if (active == sim) ov.set_if(*active, "n", "n", n);
        if (active == wts || active == fit || active == ipw) {
            ov.set_if(*active, "events", "events", events);
            ov.set_if(*active, "baseline", "baseline", baseline);
            ov.set_if(*active, "horizon", "horizon", horizon);
        }
        if (active == wts) {
            ov.set_if(*active, "kappa", "kappa", kappa);
            ov.set_if(*active, "truncation", "truncation", truncation);
        }
        if (active == ipw) ov.set_if(*active, "K", "K", K);
        if (active == exp) ov.set_if(*active, "reps", "reps", reps);
        cfg = merged(cfg, ov.values);

        if (active == sim) {
            // --n overrides the scenario's subject count
            if (cfg.contains("n")) {
                json scn = scenario_json(cfg);
                scn["n"] = cfg.at("n");
                cfg["scenario"] = scn;
            }
            return cmd_simulate(cfg);
        }
        if (active == wts) return cmd_weights(cfg);
        if (active == fit) return cmd_fit(cfg);
        if (active == tra) return cmd_transform(cfg);
        if (active == ipw) return cmd_iptw(cfg);
        if (active == exp) return cmd_experiment(experiment_kind, cfg);
        throw UserError("no subcommand");
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
