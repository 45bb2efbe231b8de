// obm: command-line front end for simulation, likelihood evaluation,
// estimation, limit-law quantiles, confidence intervals and experiments.
//
// Every option can also come from a JSON file given with --config; keys are
// the long option names (dashes or underscores). Flags on the command line
// win over the file. Exit codes: 0 ok, 2 bad configuration, 3 numerical
// failure.

#include "obm/errors.hpp"
#include "obm/experiments.hpp"
#include "obm/inference.hpp"
#include "obm/io.hpp"
#include "obm/likelihood.hpp"
#include "obm/limit_law.hpp"
#include "obm/mle.hpp"
#include "obm/sampler.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using obm::json;

std::string normalize_key(std::string k) {
    for (char& c : k)
        if (c == '-') c = '_';
    return k;
}

// Options registered through bind() can be filled from the config file when
// they were not given on the command line.
class ConfigBindings {
public:
    template <class T>
    CLI::Option* option(CLI::App* app, const std::string& name, T& var, const std::string& help) {
        CLI::Option* opt = app->add_option("--" + name, var, help)->capture_default_str();
        entries_.push_back({normalize_key(name), opt, [&var](const json& j) { assign(var, j); }});
        return opt;
    }

    CLI::Option* flag(CLI::App* app, const std::string& name, bool& var, const std::string& help) {
        CLI::Option* opt = app->add_flag("--" + name, var, help);
        entries_.push_back({normalize_key(name), opt, [&var](const json& j) { var = j.get<bool>(); }});
        return opt;
    }

    void apply(const json& config) const {
        for (const auto& e : entries_) {
            if (e.opt->count() > 0) continue;
            const auto it = config.find(e.key);
            if (it == config.end()) continue;
            try {
                e.set(*it);
            } catch (const json::exception& ex) {
                throw obm::ConfigError("config key '" + e.key + "': " + ex.what());
            }
        }
    }

private:
    template <class T>
    static void assign(T& var, const json& j) {
        var = j.get<T>();
    }
    template <class T>
    static void assign(std::optional<T>& var, const json& j) {
        if (j.is_null()) var.reset();
        else var = j.get<T>();
    }

    struct Entry {
        std::string key;
        CLI::Option* opt;
        std::function<void(const json&)> set;
    };
    std::vector<Entry> entries_;
};

// Accepts flat files as well as the nested layout written into experiment
// sidecars ({"config": {..., "theta_grid": {lo, hi, step}}}).
json load_config(const std::string& file) {
    json raw = obm::read_json(file);
    if (!raw.is_object()) throw obm::ConfigError("config file must hold a JSON object");
    if (raw.contains("config") && raw["config"].is_object()) raw = raw["config"];
    json flat = json::object();
    for (auto& [k, v] : raw.items()) {
        const std::string key = normalize_key(k);
        if (key == "theta_grid" && v.is_object()) {
            for (auto& [gk, gv] : v.items()) flat["theta_" + normalize_key(gk)] = gv;
        } else if (key == "calibrated_local_time" && v.is_boolean()) {
            flat["raw_local_time"] = !v.get<bool>();
        } else {
            flat[key] = v;
        }
    }
    return flat;
}

void emit(const json& j, const std::string& out) {
    if (!out.empty()) obm::write_json(out, j);
    std::cout << j.dump(2) << '\n';
}

obm::PathSample require_path_file(const std::string& file) {
    if (file.empty()) throw obm::ConfigError("--path is required");
    return obm::read_path(file);
}

struct Model {
    double alpha{0.5};
    double beta{0.2};
};

void add_model(ConfigBindings& b, CLI::App* app, Model& m) {
    b.option(app, "alpha", m.alpha, "volatility below the threshold");
    b.option(app, "beta", m.beta, "volatility at or above the threshold");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Threshold estimation for oscillating Brownian motion"};
    app.require_subcommand(1);
    std::string config_file;
    app.add_option("--config", config_file, "JSON file with option values")->check(CLI::ExistingFile);
    ConfigBindings bind;
    std::function<void()> action;

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate one path and write it as CSV");
    Model sim_m;
    double sim_rho = 0.0, sim_x0 = 0.0;
    std::size_t sim_n = 1000;
    std::uint64_t sim_seed = 1, sim_stream = 0;
    std::string sim_out;
    add_model(bind, sim, sim_m);
    bind.option(sim, "rho", sim_rho, "threshold");
    bind.option(sim, "n", sim_n, "number of steps on [0, 1]");
    bind.option(sim, "x0", sim_x0, "starting point");
    bind.option(sim, "seed", sim_seed, "RNG seed");
    bind.option(sim, "stream", sim_stream, "RNG stream id");
    bind.option(sim, "out", sim_out, "output CSV (a .json sidecar is written next to it)");
    sim->callback([&] {
        action = [&] {
            if (sim_out.empty()) throw obm::ConfigError("--out is required");
            const obm::ModelParams p{sim_m.alpha, sim_m.beta, sim_rho};
            obm::RngStream rng(sim_seed, sim_stream);
            const obm::PathSample path = obm::simulate_path(p, sim_n, sim_x0, rng);
            obm::write_path(sim_out, path, {p, sim_seed, sim_stream});
            emit({{"path", sim_out}, {"n", sim_n}, {"params", obm::params_json(p)}}, "");
        };
    });

    // loglik
    auto* ll = app.add_subcommand("loglik", "evaluate the log-likelihood ratio on a path");
    Model ll_m;
    double ll_rho0 = 0.0, ll_lo = -0.01, ll_hi = 0.01, ll_step = 1e-5;
    std::optional<double> ll_theta;
    std::string ll_path, ll_out;
    add_model(bind, ll, ll_m);
    bind.option(ll, "path", ll_path, "path CSV");
    bind.option(ll, "rho0", ll_rho0, "reference threshold");
    bind.option(ll, "theta", ll_theta, "single offset; prints value and left limit");
    bind.option(ll, "theta-lo", ll_lo, "grid start");
    bind.option(ll, "theta-hi", ll_hi, "grid end");
    bind.option(ll, "theta-step", ll_step, "grid step");
    bind.option(ll, "out", ll_out, "landscape CSV theta,ell");
    ll->callback([&] {
        action = [&] {
            const obm::PathSample path = require_path_file(ll_path);
            const obm::ModelParams p0{ll_m.alpha, ll_m.beta, ll_rho0};
            p0.validate();
            const obm::PairTable table(path, p0);
            if (ll_theta) {
                emit({{"theta", *ll_theta},
                      {"ell", table.evaluate(*ll_theta)},
                      {"left_limit", table.evaluate(*ll_theta, true)}},
                     "");
                return;
            }
            if (ll_out.empty()) throw obm::ConfigError("give --theta or --out");
            const obm::ThetaGrid grid{ll_lo, ll_hi, ll_step};
            if (!(grid.step > 0.0) || !(grid.lo < grid.hi))
                throw obm::ConfigError("theta grid needs lo < hi and step > 0");
            if (grid.size() > 50'000'000) throw obm::ConfigError("theta grid too large");
            std::vector<double> th(grid.size()), v(grid.size());
            for (std::size_t i = 0; i < th.size(); ++i) {
                th[i] = grid.at(i);
                v[i] = table.evaluate(th[i]);
            }
            obm::write_columns(ll_out, "theta", "ell", th, v);
            const json meta = {{"path", ll_path},
                               {"n", path.n()},
                               {"params", obm::params_json(p0)},
                               {"theta_grid", {{"lo", grid.lo}, {"hi", grid.hi}, {"step", grid.step}}},
                               {"points", th.size()},
                               {"version", obm::kLibraryVersion}};
            obm::write_json(obm::sidecar_path(ll_out), meta);
            emit(meta, "");
        };
    });

    // estimate
    auto* est = app.add_subcommand("estimate", "maximum likelihood estimate of the threshold");
    Model est_m;
    double est_rho0 = 0.0, est_lo = -1.0, est_hi = 1.0;
    std::string est_path, est_out;
    add_model(bind, est, est_m);
    bind.option(est, "path", est_path, "path CSV");
    bind.option(est, "rho0", est_rho0, "reference threshold (centre of the search window)");
    bind.option(est, "window-lo", est_lo, "search window start, relative to rho0");
    bind.option(est, "window-hi", est_hi, "search window end, relative to rho0");
    bind.option(est, "out", est_out, "also write the JSON here");
    est->callback([&] {
        action = [&] {
            const obm::PathSample path = require_path_file(est_path);
            const obm::ModelParams p0{est_m.alpha, est_m.beta, est_rho0};
            obm::MleOptions opt;
            opt.window = {est_lo, est_hi};
            const obm::ArgsupResult r = obm::argsup_mle(path, p0, opt);
            emit({{"rho_hat", r.rho_hat},
                  {"value", r.value},
                  {"attained_as_left_limit", r.attained_as_left_limit},
                  {"n", path.n()},
                  {"params", obm::params_json(p0)},
                  {"edge_warning", r.edge_warning},
                  {"ties", r.ties}},
                 est_out);
        };
    });

    // limit-quantiles
    auto* lq = app.add_subcommand("limit-quantiles", "quantiles of the limit-law argsup");
    Model lq_m;
    double lq_level = 0.1, lq_tol = 1e-6;
    std::size_t lq_nmc = 100000;
    std::uint64_t lq_seed = 1;
    unsigned lq_threads = 0;
    std::string lq_draws, lq_out;
    add_model(bind, lq, lq_m);
    bind.option(lq, "level", lq_level, "miscoverage; quantiles at level/2 and 1 - level/2");
    bind.option(lq, "n-mc", lq_nmc, "Monte Carlo draws (>= 1000)");
    bind.option(lq, "seed", lq_seed, "RNG seed");
    bind.option(lq, "tail-tol", lq_tol, "tail certification tolerance");
    bind.option(lq, "threads", lq_threads, "worker threads (0 = all cores)");
    bind.option(lq, "draws-csv", lq_draws, "write all sorted draws to this CSV");
    bind.option(lq, "out", lq_out, "also write the JSON here");
    lq->callback([&] {
        action = [&] {
            obm::RngStream rng(lq_seed, 0);
            obm::LimitSamplerOptions opt;
            opt.tail_tol = lq_tol;
            const obm::LimitQuantiles q = obm::limit_quantiles(
                obm::limit_params(lq_m.alpha, lq_m.beta), lq_level, lq_nmc, rng, opt, lq_threads);
            if (!lq_draws.empty()) {
                auto out = obm::open_output(lq_draws);
                out << "z_star\n";
                for (double d : q.draws) out << d << '\n';
                if (!out) throw obm::IoError("write failed: " + lq_draws);
            }
            emit({{"q_lo", q.q_lo}, {"q_hi", q.q_hi}, {"n_mc", q.n_mc}, {"tail_tol", q.tail_tol}},
                 lq_out);
        };
    });

    // ci
    auto* ci = app.add_subcommand("ci", "confidence interval for the threshold");
    Model ci_m;
    double ci_rho0 = 0.0, ci_lo = -1.0, ci_hi = 1.0, ci_level = 0.1, ci_tol = 1e-6;
    std::size_t ci_nmc = 100000;
    std::uint64_t ci_seed = 1;
    unsigned ci_threads = 0;
    bool ci_raw = false;
    std::string ci_path, ci_out;
    add_model(bind, ci, ci_m);
    bind.option(ci, "path", ci_path, "path CSV");
    bind.option(ci, "rho0", ci_rho0, "centre of the search window");
    bind.option(ci, "window-lo", ci_lo, "search window start, relative to rho0");
    bind.option(ci, "window-hi", ci_hi, "search window end, relative to rho0");
    bind.option(ci, "level", ci_level, "miscoverage (0.1 gives a 90% interval)");
    bind.option(ci, "n-mc", ci_nmc, "Monte Carlo draws for the quantiles");
    bind.option(ci, "seed", ci_seed, "RNG seed for the quantiles");
    bind.option(ci, "tail-tol", ci_tol, "tail certification tolerance");
    bind.option(ci, "threads", ci_threads, "worker threads (0 = all cores)");
    bind.flag(ci, "raw-local-time", ci_raw, "use the unscaled sign-change count as local time");
    bind.option(ci, "out", ci_out, "also write the JSON here");
    ci->callback([&] {
        action = [&] {
            const obm::PathSample path = require_path_file(ci_path);
            const obm::ModelParams p0{ci_m.alpha, ci_m.beta, ci_rho0};
            obm::MleOptions mopt;
            mopt.window = {ci_lo, ci_hi};
            const obm::ArgsupResult r = obm::argsup_mle(path, p0, mopt);
            const obm::ModelParams ph = p0.with_rho(r.rho_hat);
            const double L = ci_raw ? obm::local_time_estimator(path, r.rho_hat)
                                    : obm::local_time_consistent(path, ph);
            obm::RngStream rng(ci_seed, 0);
            obm::LimitSamplerOptions lopt;
            lopt.tail_tol = ci_tol;
            const obm::LimitQuantiles q = obm::limit_quantiles(
                obm::limit_params(ci_m.alpha, ci_m.beta), ci_level, ci_nmc, rng, lopt, ci_threads);
            const obm::EstimationReport rep =
                obm::confidence_interval(r.rho_hat, L, path.n(), q.q_lo, q.q_hi, ci_level);
            auto bound = [](double v) { return std::isfinite(v) ? json(v) : json(v < 0 ? "-inf" : "inf"); };
            emit({{"rho_hat", rep.rho_hat},
                  {"local_time_hat", rep.local_time_hat},
                  {"local_time_calibrated", !ci_raw},
                  {"ci_lo", bound(rep.ci_lo)},
                  {"ci_hi", bound(rep.ci_hi)},
                  {"level", rep.level},
                  {"n", rep.n},
                  {"degenerate", rep.degenerate},
                  {"q_lo", rep.q_lo},
                  {"q_hi", rep.q_hi},
                  {"n_mc", q.n_mc}},
                 ci_out);
        };
    });

    // experiment
    auto* ex = app.add_subcommand("experiment", "Monte Carlo experiments");
    std::string ex_kind;
    obm::ExperimentConfig cfg;
    std::string ex_dir = cfg.output_dir.string();
    bool ex_raw = false;
    ex->add_option("kind", ex_kind, "landscape, consistency or coverage")
        ->required()
        ->check(CLI::IsMember({"landscape", "consistency", "coverage"}));
    bind.option(ex, "alpha", cfg.alpha, "volatility below the threshold");
    bind.option(ex, "beta", cfg.beta, "volatility at or above the threshold");
    bind.option(ex, "rho0", cfg.rho0, "true threshold");
    bind.option(ex, "x0", cfg.x0, "starting point");
    bind.option(ex, "n-values", cfg.n_values, "sample sizes");
    bind.option(ex, "replications", cfg.replications, "paths per sample size");
    bind.option(ex, "seed", cfg.seed, "master seed");
    bind.option(ex, "level", cfg.level, "miscoverage of the intervals");
    bind.option(ex, "output-dir", ex_dir, "directory for CSV and JSON output");
    bind.option(ex, "theta-lo", cfg.theta_grid.lo, "theta grid / search window start");
    bind.option(ex, "theta-hi", cfg.theta_grid.hi, "theta grid / search window end");
    bind.option(ex, "theta-step", cfg.theta_grid.step, "theta grid step");
    bind.option(ex, "n-mc", cfg.n_mc, "limit-law draws for the quantiles");
    bind.option(ex, "conditioning-threshold", cfg.conditioning_threshold,
                "keep replications whose sign-change count exceeds this");
    bind.flag(ex, "raw-local-time", ex_raw, "use the unscaled sign-change count as local time");
    bind.option(ex, "export-paths", cfg.export_paths, "per-path landscapes to write");
    bind.option(ex, "min-conditioned", cfg.min_conditioned,
                "coverage: replicate until this many replications pass conditioning");
    bind.flag(ex, "allow-large", cfg.allow_large, "permit runs beyond desk scale");
    bind.option(ex, "threads", cfg.threads, "worker threads (0 = all cores)");
    ex->callback([&] {
        action = [&] {
            cfg.output_dir = ex_dir;
            cfg.calibrated_local_time = !ex_raw;
            if (ex_kind == "landscape") {
                const auto s = obm::run_likelihood_landscape(cfg);
                emit({{"n", s.n},
                      {"mean_local_time", s.mean_local_time},
                      {"slope_pos", s.slope_pos},
                      {"slope_neg", s.slope_neg},
                      {"expected_slope_pos", s.expected_slope_pos},
                      {"expected_slope_neg", s.expected_slope_neg},
                      {"argsup_dominates_grid", s.dominance},
                      {"config_hash", cfg.hash()}},
                     "");
            } else if (ex_kind == "consistency") {
                const auto s = obm::run_consistency_study(cfg);
                json rows = json::array();
                for (const auto& r : s.rows)
                    rows.push_back({{"n", r.n},
                                    {"conditioned", r.conditioned},
                                    {"q50_scaled", r.q50_scaled},
                                    {"q90_scaled", r.q90_scaled},
                                    {"median_abs_error", r.median_abs_error}});
                emit({{"rows", rows}, {"q90_ratio", s.q90_ratio}, {"config_hash", cfg.hash()}}, "");
            } else {
                const auto s = obm::run_coverage_study(cfg);
                emit({{"n", s.n},
                      {"replications", s.replications},
                      {"conditioned", s.conditioned},
                      {"coverage", s.coverage},
                      {"wilson_95", {s.wilson.lo, s.wilson.hi}},
                      {"q_lo", s.q_lo},
                      {"q_hi", s.q_hi},
                      {"mean_width", s.mean_width},
                      {"config_hash", cfg.hash()}},
                     "");
            }
        };
    });

    try {
        app.parse(argc, argv);
        if (!config_file.empty()) bind.apply(load_config(config_file));
        action();
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const obm::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const obm::InternalFault& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    } catch (const obm::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) { // includes ConfigError
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
