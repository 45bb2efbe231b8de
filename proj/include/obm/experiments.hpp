#pragma once

// Monte Carlo harness: likelihood landscapes, n-consistency and CI coverage.
// Replication r of sample size n always uses RngStream(seed_for(seed, n), r),
// so outputs depend only on the configuration, not on thread scheduling.

#include "obm/errors.hpp"
#include "obm/inference.hpp"
#include "obm/io.hpp"
#include "obm/likelihood.hpp"
#include "obm/limit_law.hpp"
#include "obm/mle.hpp"
#include "obm/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

namespace obm {

struct ThetaGrid {
    double lo{-1.0};
    double hi{1.0};
    double step{1e-6};

    [[nodiscard]] std::size_t size() const {
        return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    }
    [[nodiscard]] double at(std::size_t i) const {
        return std::min(hi, lo + static_cast<double>(i) * step);
    }
};

struct ExperimentConfig {
    double alpha{0.5};
    double beta{0.2};
    double rho0{0.0};
    double x0{0.0};
    std::vector<std::size_t> n_values{1000};
    std::size_t replications{50};
    std::uint64_t seed{20240601};
    double level{0.1};
    std::filesystem::path output_dir{"out"};
    ThetaGrid theta_grid{};
    std::size_t n_mc{100000};
    double conditioning_threshold{0.1};
    bool calibrated_local_time{true};
    std::size_t export_paths{3};
    std::size_t min_conditioned{0}; // coverage: keep replicating until this many pass conditioning
    bool write_files{true};
    bool allow_large{false};
    unsigned threads{0};

    [[nodiscard]] ModelParams params() const { return {alpha, beta, rho0}; }

    void validate() const {
        try {
            params().validate();
        } catch (const std::domain_error& e) {
            throw ConfigError(e.what());
        }
        if (!std::isfinite(x0)) throw ConfigError("x0 must be finite");
        if (replications < 1) throw ConfigError("replications must be >= 1");
        if (n_values.empty()) throw ConfigError("n_values must be nonempty");
        for (auto n : n_values)
            if (n < 1) throw ConfigError("n_values entries must be >= 1");
        if (!(theta_grid.step > 0.0) || !(theta_grid.lo < theta_grid.hi))
            throw ConfigError("theta_grid needs lo < hi and step > 0");
        if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
        if (n_mc < 1000) throw ConfigError("n_mc must be >= 1000");
        if (!allow_large) {
            if (*std::max_element(n_values.begin(), n_values.end()) > 4000 || replications > 2000 ||
                min_conditioned > 2000)
                throw ConfigError("runs with n > 4000 or more than 2000 replications need allow_large");
        }
    }

    [[nodiscard]] json to_json() const {
        return {{"alpha", alpha},
                {"beta", beta},
                {"rho0", rho0},
                {"x0", x0},
                {"n_values", n_values},
                {"replications", replications},
                {"seed", seed},
                {"level", level},
                {"output_dir", output_dir.string()},
                {"theta_grid", {{"lo", theta_grid.lo}, {"hi", theta_grid.hi}, {"step", theta_grid.step}}},
                {"n_mc", n_mc},
                {"conditioning_threshold", conditioning_threshold},
                {"calibrated_local_time", calibrated_local_time},
                {"export_paths", export_paths},
                {"min_conditioned", min_conditioned},
                {"allow_large", allow_large}};
    }

    [[nodiscard]] std::string hash() const { return hex64(fnv1a(to_json().dump())); }
};

[[nodiscard]] inline std::uint64_t seed_for(std::uint64_t seed, std::size_t n) {
    return fnv1a(std::to_string(seed) + ":" + std::to_string(n));
}

// Runs fn(i) for i in [0, count) on up to `threads` workers; rethrows the
// first failure by index.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct WilsonInterval {
    double lo{0.0};
    double hi{1.0};
};

[[nodiscard]] inline WilsonInterval wilson_interval(std::size_t successes, std::size_t trials,
                                                    double z = 1.959963984540054) {
    if (trials == 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double denom = 1.0 + z * z / n;
    const double centre = (p + z * z / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

inline json provenance(const ExperimentConfig& cfg, const std::string& kind) {
    return {{"experiment", kind},
            {"config", cfg.to_json()},
            {"config_hash", cfg.hash()},
            {"module_versions",
             {{"model_core", kLibraryVersion},
              {"sampler", kLibraryVersion},
              {"likelihood", kLibraryVersion},
              {"mle", kLibraryVersion},
              {"limit_law", kLibraryVersion},
              {"inference", kLibraryVersion},
              {"experiments", kLibraryVersion}}}};
}

[[nodiscard]] inline double local_time_for(const ExperimentConfig& cfg, const PathSample& path,
                                           double rho) {
    const ModelParams p = cfg.params().with_rho(rho);
    return cfg.calibrated_local_time ? local_time_consistent(path, p)
                                     : local_time_estimator(path, rho);
}

// Least-squares slope through the origin of y on |z|.
[[nodiscard]] inline double slope_through_origin(const std::vector<double>& z,
                                                 const std::vector<double>& y, bool positive) {
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (positive ? z[i] <= 0.0 : z[i] >= 0.0) continue;
        sxy += std::abs(z[i]) * y[i];
        sxx += z[i] * z[i];
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

struct LandscapePathResult {
    double rho_hat{0.0};
    double argsup_value{0.0};
    double grid_max{0.0};
    double grid_argmax{0.0};
    double local_time_raw{0.0};
    double local_time{0.0};
    bool edge_warning{false};
};

struct LandscapeSummary {
    std::size_t n{0};
    std::vector<double> z;
    std::vector<double> average;
    double mean_local_time{0.0};
    double slope_pos{0.0};
    double slope_neg{0.0};
    double expected_slope_pos{0.0};
    double expected_slope_neg{0.0};
    bool dominance{true};
    std::vector<LandscapePathResult> paths;
};

inline LandscapeSummary run_likelihood_landscape(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.n_values.front();
    const ModelParams p0 = cfg.params();
    const ThetaGrid grid = cfg.theta_grid;
    const std::size_t reps = cfg.replications;
    const std::uint64_t seed = seed_for(cfg.seed, n);

    std::vector<double> zs;
    for (int i = -200; i <= 200; ++i) zs.push_back(0.1 * i);

    LandscapeSummary s;
    s.n = n;
    s.z = zs;
    s.paths.resize(reps);
    std::vector<std::vector<double>> zvals(reps);

    parallel_for(reps, cfg.threads, [&](std::size_t r) {
        RngStream rng(seed, r);
        const PathSample path = simulate_path(p0, n, cfg.x0, rng);
        MleOptions mopt;
        mopt.window = {grid.lo, grid.hi};
        const ArgsupResult est = argsup_mle(path, p0, mopt);
        const PairTable table(path, p0);

        LandscapePathResult& res = s.paths[r];
        res.rho_hat = est.rho_hat;
        res.argsup_value = est.value;
        res.edge_warning = est.edge_warning;
        res.local_time_raw = local_time_estimator(path, p0.rho);
        res.local_time = local_time_for(cfg, path, p0.rho);

        const bool exported = cfg.write_files && r < cfg.export_paths;
        std::vector<double> thetas, values;
        res.grid_max = -std::numeric_limits<double>::infinity();
        const std::size_t m = grid.size();
        if (exported) {
            thetas.reserve(m);
            values.reserve(m);
        }
        for (std::size_t i = 0; i < m; ++i) {
            const double th = grid.at(i);
            const double v = table.evaluate(th);
            if (v > res.grid_max) {
                res.grid_max = v;
                res.grid_argmax = th;
            }
            if (exported) {
                thetas.push_back(th);
                values.push_back(v);
            }
        }
        if (exported) {
            const auto file = cfg.output_dir / ("landscape_path_" + std::to_string(r) + ".csv");
            write_columns(file, "theta", "ell", thetas, values);
            json meta = provenance(cfg, "landscape_path");
            meta["params"] = params_json(p0);
            meta["n"] = n;
            meta["seed"] = seed;
            meta["stream_id"] = r;
            meta["rho_hat"] = est.rho_hat;
            meta["argsup_value"] = est.value;
            write_json(sidecar_path(file), meta);
        }
        std::vector<double>& zv = zvals[r];
        for (double z : zs) zv.push_back(table.evaluate(z / static_cast<double>(n)));
    });

    s.average.assign(zs.size(), 0.0);
    for (const auto& zv : zvals)
        for (std::size_t i = 0; i < zs.size(); ++i) s.average[i] += zv[i] / static_cast<double>(reps);
    for (const auto& pr : s.paths) {
        s.mean_local_time += pr.local_time / static_cast<double>(reps);
        if (pr.grid_max > pr.argsup_value + 1e-9) s.dominance = false;
    }
    s.slope_pos = slope_through_origin(s.z, s.average, true);
    s.slope_neg = slope_through_origin(s.z, s.average, false);
    if (cfg.alpha != cfg.beta) {
        const DriftConstants c = drift_constants(cfg.alpha, cfg.beta);
        s.expected_slope_pos = c.b * s.mean_local_time;
        s.expected_slope_neg = c.b_prime * s.mean_local_time;
    }

    if (cfg.write_files) {
        const auto file = cfg.output_dir / "landscape_average.csv";
        write_columns(file, "z", "ell", s.z, s.average);
        json meta = provenance(cfg, "landscape_average");
        meta["params"] = params_json(p0);
        meta["n"] = n;
        meta["seed"] = cfg.seed;
        meta["mean_local_time"] = s.mean_local_time;
        meta["slope_pos"] = s.slope_pos;
        meta["slope_neg"] = s.slope_neg;
        meta["expected_slope_pos"] = s.expected_slope_pos;
        meta["expected_slope_neg"] = s.expected_slope_neg;
        meta["argsup_dominates_grid"] = s.dominance;
        json per_path = json::array();
        for (const auto& pr : s.paths)
            per_path.push_back({{"rho_hat", pr.rho_hat},
                                {"argsup_value", pr.argsup_value},
                                {"grid_max", pr.grid_max},
                                {"grid_argmax", pr.grid_argmax},
                                {"local_time_raw", pr.local_time_raw},
                                {"local_time", pr.local_time},
                                {"edge_warning", pr.edge_warning}});
        meta["paths"] = per_path;
        write_json(sidecar_path(file), meta);
    }
    return s;
}

struct ReplicationRecord {
    std::size_t n{0};
    std::size_t replication{0};
    double rho_hat{0.0};
    double local_time_raw{0.0};
    double local_time{0.0};
    bool conditioned{false};
    bool edge_warning{false};
    double ci_lo{0.0};
    double ci_hi{0.0};
    bool covered{false};
};

inline ReplicationRecord run_replication(const ExperimentConfig& cfg, std::size_t n,
                                         std::size_t r) {
    const ModelParams p0 = cfg.params();
    RngStream rng(seed_for(cfg.seed, n), r);
    const PathSample path = simulate_path(p0, n, cfg.x0, rng);
    MleOptions mopt;
    mopt.window = {cfg.theta_grid.lo, cfg.theta_grid.hi};
    const ArgsupResult est = argsup_mle(path, p0, mopt);
    ReplicationRecord rec;
    rec.n = n;
    rec.replication = r;
    rec.rho_hat = est.rho_hat;
    rec.edge_warning = est.edge_warning;
    rec.local_time_raw = local_time_estimator(path, est.rho_hat);
    rec.local_time = local_time_for(cfg, path, est.rho_hat);
    rec.conditioned = rec.local_time_raw > cfg.conditioning_threshold;
    return rec;
}

struct ConsistencyRow {
    std::size_t n{0};
    std::size_t replications{0};
    std::size_t conditioned{0};
    double q50_scaled{0.0};
    double q90_scaled{0.0};
    double median_abs_error{0.0};
};

struct ConsistencySummary {
    std::vector<ConsistencyRow> rows;
    std::vector<ReplicationRecord> records;
    double q90_ratio{0.0}; // max / min of the 90% quantiles across n
};

inline void write_records(const ExperimentConfig& cfg, const std::filesystem::path& file,
                          const std::vector<ReplicationRecord>& recs, bool with_ci) {
    auto out = open_output(file);
    out << "n,replication,rho_hat,local_time_raw,local_time,conditioned,edge_warning";
    if (with_ci) out << ",ci_lo,ci_hi,covered";
    out << '\n';
    for (const auto& r : recs) {
        out << r.n << ',' << r.replication << ',' << r.rho_hat << ',' << r.local_time_raw << ','
            << r.local_time << ',' << r.conditioned << ',' << r.edge_warning;
        if (with_ci) out << ',' << r.ci_lo << ',' << r.ci_hi << ',' << r.covered;
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + file.string());
    (void)cfg;
}

inline ConsistencySummary run_consistency_study(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.n_values.size() < 3) throw ConfigError("consistency study needs at least 3 n values");
    ConsistencySummary s;
    for (std::size_t n : cfg.n_values) {
        std::vector<ReplicationRecord> recs(cfg.replications);
        parallel_for(cfg.replications, cfg.threads,
                     [&](std::size_t r) { recs[r] = run_replication(cfg, n, r); });
        std::vector<double> scaled, abs_err;
        for (const auto& r : recs) {
            if (!r.conditioned) continue;
            abs_err.push_back(std::abs(r.rho_hat - cfg.rho0));
            scaled.push_back(static_cast<double>(n) * abs_err.back());
        }
        ConsistencyRow row;
        row.n = n;
        row.replications = recs.size();
        row.conditioned = scaled.size();
        if (!scaled.empty()) {
            std::sort(scaled.begin(), scaled.end());
            std::sort(abs_err.begin(), abs_err.end());
            row.q50_scaled = empirical_quantile(scaled, 0.5);
            row.q90_scaled = empirical_quantile(scaled, 0.9);
            row.median_abs_error = empirical_quantile(abs_err, 0.5);
        }
        s.rows.push_back(row);
        s.records.insert(s.records.end(), recs.begin(), recs.end());
    }
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& row : s.rows) {
        lo = std::min(lo, row.q90_scaled);
        hi = std::max(hi, row.q90_scaled);
    }
    s.q90_ratio = lo > 0.0 ? hi / lo : (hi == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());

    if (cfg.write_files) {
        write_records(cfg, cfg.output_dir / "consistency_replications.csv", s.records, false);
        auto file = cfg.output_dir / "consistency_summary.csv";
        auto out = open_output(file);
        out << "n,replications,conditioned,q50_scaled,q90_scaled,median_abs_error\n";
        json rows = json::array();
        for (const auto& r : s.rows) {
            out << r.n << ',' << r.replications << ',' << r.conditioned << ',' << r.q50_scaled
                << ',' << r.q90_scaled << ',' << r.median_abs_error << '\n';
            rows.push_back({{"n", r.n},
                            {"replications", r.replications},
                            {"conditioned", r.conditioned},
                            {"q50_scaled", r.q50_scaled},
                            {"q90_scaled", r.q90_scaled},
                            {"median_abs_error", r.median_abs_error}});
        }
        out.close();
        json meta = provenance(cfg, "consistency");
        meta["rows"] = rows;
        meta["q90_ratio"] = s.q90_ratio;
        write_json(sidecar_path(file), meta);
        json rmeta = provenance(cfg, "consistency_replications");
        write_json(cfg.output_dir / "consistency_replications.json", rmeta);
    }
    return s;
}

struct CoverageSummary {
    std::size_t n{0};
    std::size_t replications{0};
    std::size_t conditioned{0};
    std::size_t covered{0};
    double coverage{0.0};
    WilsonInterval wilson{};
    double q_lo{0.0};
    double q_hi{0.0};
    double mean_width{0.0};
    std::vector<ReplicationRecord> records;
};

inline CoverageSummary run_coverage_study(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.alpha == cfg.beta) throw ConfigError("coverage study needs alpha != beta");
    const std::size_t n = cfg.n_values.front();
    CoverageSummary s;
    s.n = n;
    s.replications = cfg.replications;

    RngStream qrng(seed_for(cfg.seed, 0), 0);
    const LimitQuantiles q =
        limit_quantiles(limit_params(cfg.alpha, cfg.beta), cfg.level, cfg.n_mc, qrng, {}, cfg.threads);
    s.q_lo = q.q_lo;
    s.q_hi = q.q_hi;

    auto run_batch = [&](std::size_t from, std::size_t to) {
        s.records.resize(to);
        parallel_for(to - from, cfg.threads, [&](std::size_t i) {
            ReplicationRecord rec = run_replication(cfg, n, from + i);
            const EstimationReport rep =
                confidence_interval(rec.rho_hat, rec.local_time, n, q.q_lo, q.q_hi, cfg.level);
            rec.ci_lo = rep.ci_lo;
            rec.ci_hi = rep.ci_hi;
            rec.covered = rep.ci_lo <= cfg.rho0 && cfg.rho0 <= rep.ci_hi;
            s.records[from + i] = rec;
        });
    };
    auto conditioned_count = [&] {
        return static_cast<std::size_t>(std::count_if(
            s.records.begin(), s.records.end(), [](const auto& r) { return r.conditioned; }));
    };
    run_batch(0, cfg.replications);
    // Deterministic top-up: replication indices continue where the batch ended.
    const std::size_t cap = 20 * std::max(cfg.replications, cfg.min_conditioned);
    while (conditioned_count() < cfg.min_conditioned && s.records.size() < cap) {
        const std::size_t missing = cfg.min_conditioned - conditioned_count();
        run_batch(s.records.size(), s.records.size() + missing);
    }
    if (conditioned_count() > cfg.min_conditioned && cfg.min_conditioned > 0) {
        // Keep the first min_conditioned conditioned replications in index order.
        std::size_t seen = 0, keep = s.records.size();
        for (std::size_t i = 0; i < s.records.size(); ++i)
            if (s.records[i].conditioned && ++seen == cfg.min_conditioned) {
                keep = std::max(cfg.replications, i + 1);
                break;
            }
        s.records.resize(keep);
    }
    s.replications = s.records.size();
    double width = 0.0;
    for (const auto& r : s.records) {
        if (!r.conditioned) continue;
        ++s.conditioned;
        if (r.covered) ++s.covered;
        width += r.ci_hi - r.ci_lo;
    }
    if (s.conditioned > 0) {
        s.coverage = static_cast<double>(s.covered) / static_cast<double>(s.conditioned);
        s.mean_width = width / static_cast<double>(s.conditioned);
    }
    s.wilson = wilson_interval(s.covered, s.conditioned);

    if (cfg.write_files) {
        const auto file = cfg.output_dir / "coverage_replications.csv";
        write_records(cfg, file, s.records, true);
        json meta = provenance(cfg, "coverage");
        meta["n"] = n;
        meta["replications"] = s.replications;
        meta["conditioned"] = s.conditioned;
        meta["covered"] = s.covered;
        meta["coverage"] = s.coverage;
        meta["wilson_95"] = {s.wilson.lo, s.wilson.hi};
        meta["q_lo"] = s.q_lo;
        meta["q_hi"] = s.q_hi;
        meta["mean_width"] = s.mean_width;
        write_json(sidecar_path(file), meta);
    }
    return s;
}

} // namespace obm
