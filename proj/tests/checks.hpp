#pragma once

// Verification routines shared by the unit tests (small sizes) and the
// acceptance runner (full sizes). Each returns the measured quantities; the
// callers decide pass/fail.

#include "obm/experiments.hpp"
#include "obm/inference.hpp"
#include "obm/likelihood.hpp"
#include "obm/limit_law.hpp"
#include "obm/mle.hpp"
#include "obm/model.hpp"
#include "obm/quadrature.hpp"
#include "obm/sampler.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace obm::checks {

// Test-side parameter draws; std::mt19937_64 keeps them independent of the
// library generator.
struct Draws {
    std::mt19937_64 gen;
    explicit Draws(std::uint64_t seed) : gen(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
    std::size_t integer(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(gen);
    }
};

inline double integrate_density(const ModelParams& p, double t, double x) {
    const double reach = 40.0 * p.sigma_max() * std::sqrt(t);
    return integrate_piecewise([&](double y) { return transition_density(p, t, x, y); }, x - reach,
                               x + reach, {p.rho, x})
        .value;
}

// max |int p_t(x, y) dy - 1| over random (alpha, beta, rho, t, x).
inline double normalization_error(int draws, std::uint64_t seed) {
    Draws d(seed);
    double worst = 0.0;
    for (int i = 0; i < draws; ++i) {
        const ModelParams p{d.uniform(0.1, 2.0), d.uniform(0.1, 2.0), d.uniform(-1.0, 1.0)};
        const double t = std::pow(10.0, d.uniform(-4.0, 0.0));
        const double x = p.rho + d.uniform(-3.0, 3.0) * p.sigma_max() * std::sqrt(t);
        worst = std::max(worst, std::abs(integrate_density(p, t, x) - 1.0));
    }
    return worst;
}

// max relative error of int p_s(x, z) p_t(z, y) dz against p_{s+t}(x, y).
inline double chapman_kolmogorov_error(int pairs, std::uint64_t seed, double s = 0.01,
                                       double t = 0.01) {
    Draws d(seed);
    double worst = 0.0;
    for (int i = 0; i < pairs; ++i) {
        const ModelParams p = i % 2 == 0 ? ModelParams{0.5, 0.2, 0.0} : ModelParams{0.3, 0.9, 0.05};
        const double x = d.uniform(-0.2, 0.2);
        const double y = x + d.uniform(-0.15, 0.15);
        const double reach = 14.0 * p.sigma_max() * std::sqrt(s + t);
        const double lo = std::min(x, y) - reach, hi = std::max(x, y) + reach;
        const double conv = integrate_piecewise(
                                [&](double z) { return transition_density(p, s, x, z) * transition_density(p, t, z, y); },
                                lo, hi, {p.rho, x, y})
                                .value;
        const double direct = transition_density(p, s + t, x, y);
        worst = std::max(worst, std::abs(conv - direct) / direct);
    }
    return worst;
}

// Weak forward equation with phi(y) = exp(-(y - m)^2 / (2 w^2)):
// int p_t phi - phi(x) - int_0^t int sigma^2 / 2 p_s phi'' dy ds.
inline double fokker_planck_residual(const ModelParams& p, double t, double x, double m, double w) {
    auto phi = [&](double y) { return std::exp(-(y - m) * (y - m) / (2.0 * w * w)); };
    auto phi2 = [&](double y) {
        const double u = (y - m) / w;
        return phi(y) * (u * u - 1.0) / (w * w);
    };
    auto space = [&](double s, auto&& g) {
        const double reach = 14.0 * p.sigma_max() * std::sqrt(s);
        return integrate_piecewise([&](double y) { return transition_density(p, s, x, y) * g(y); },
                                   x - reach, x + reach, {p.rho, x, m})
            .value;
    };
    const double lhs = space(t, phi);
    auto sigma2_phi2 = [&](double y) {
        const double sg = p.sigma(y);
        return 0.5 * sg * sg * phi2(y);
    };
    // s = u^2 removes the square-root behaviour at s = 0.
    const double time_part =
        integrate_piecewise([&](double u) { return u > 0.0 ? 2.0 * u * space(u * u, sigma2_phi2) : 0.0; },
                            0.0, std::sqrt(t), {}, QuadratureOptions{1e-10, 1e-12, 400, 1e-8})
            .value;
    return lhs - phi(x) - time_part;
}

struct KsSetting {
    ModelParams params;
    double t;
    double x;
};

inline std::vector<KsSetting> sampler_settings() {
    return {{{1.0, 1.0, 0.0}, 1.0, 0.0}, {{0.5, 0.2, 0.0}, 1e-3, 0.0}, {{0.3, 0.8, 0.1}, 0.01, 0.05}};
}

inline testkit::KsResult sampler_ks(const KsSetting& s, std::size_t draws, std::uint64_t seed) {
    RngStream rng(seed, 0);
    std::vector<double> ys(draws);
    for (auto& y : ys) y = sample_transition(s.params, s.t, s.x, rng);
    return testkit::ks_one_sample(ys, [&](double y) { return transition_cdf(s.params, s.t, s.x, y); });
}

// The nine sets written out as stated, for theta_lo <= theta_hi.
inline std::array<bool, 9> nine_sets(double lo, double hi, double x, double y) {
    return {x < lo && y <= lo,
            x < lo && lo < y && y <= hi,
            x < lo && lo <= hi && hi < y,
            y <= lo && lo <= x && x < hi,
            lo <= x && x < hi && lo < y && y <= hi,
            lo <= x && x < hi && hi < y,
            y <= lo && lo <= hi && hi <= x,
            lo < y && y <= hi && hi <= x,
            hi <= x && hi < y};
}

struct DecompositionResult {
    double max_error{0.0};
    std::size_t pairs_checked{0};
    std::size_t regime_violations{0};
};

inline DecompositionResult decomposition_check(int cases, std::size_t pairs, std::uint64_t seed) {
    Draws d(seed);
    DecompositionResult out;
    for (int i = 0; i < cases; ++i) {
        const ModelParams p{d.uniform(0.1, 1.5), d.uniform(0.1, 1.5), d.uniform(-0.2, 0.2)};
        const std::size_t n = d.integer(20, 800);
        RngStream rng(seed, static_cast<std::uint64_t>(i));
        const PathSample path = simulate_path(p, n, p.rho + d.uniform(-0.1, 0.1), rng);
        const double theta = d.uniform(-30.0, 30.0) / static_cast<double>(n);
        const auto parts = regime_sums(path, p, theta);
        double sum = 0.0;
        for (double v : parts) sum += v;
        out.max_error = std::max(out.max_error, std::abs(sum - ell_n(path, p, theta)));
    }
    for (std::size_t i = 0; i < pairs; ++i) {
        // Coarse values make boundary ties frequent.
        auto coarse = [&] { return std::round(d.uniform(-4.0, 4.0)) / 4.0; };
        double a = coarse(), b = coarse();
        if (a > b) std::swap(a, b);
        const double x = i % 2 ? coarse() : d.uniform(-1.2, 1.2);
        const double y = i % 3 ? coarse() : d.uniform(-1.2, 1.2);
        const auto sets = nine_sets(a, b, x, y);
        const int hits = static_cast<int>(std::count(sets.begin(), sets.end(), true));
        const int idx = classify_pair(a, b, 0.0, x, y).index;
        if (hits != 1 || !sets[static_cast<std::size_t>(idx - 1)]) ++out.regime_violations;
        ++out.pairs_checked;
    }
    return out;
}

struct ConstantsResult {
    double b_reference_error{0.0};
    double max_compensation_error{0.0};
};

inline ConstantsResult constants_check(int draws, std::uint64_t seed) {
    ConstantsResult out;
    out.b_reference_error = std::abs(drift_constants(0.5, 0.2).b - (-24.8145));
    Draws d(seed);
    for (int i = 0; i < draws; ++i) {
        const double a = d.uniform(0.2, 2.0), b = d.uniform(0.2, 2.0);
        if (a == b) continue;
        const LimitLawParams lp = limit_params(a, b);
        const DriftConstants c = drift_constants(a, b);
        out.max_compensation_error =
            std::max({out.max_compensation_error, std::abs(lp.slope_pos + lp.jump_pos * lp.rate_pos - c.b),
                      std::abs(lp.slope_neg + lp.jump_neg * lp.rate_neg - c.b_prime)});
    }
    return out;
}

struct DriftFit {
    std::size_t n{0};
    double C{0.0};      // least squares through the origin of |B + |theta| F Lambda| on theta^2 n^1.5
    double max_B{-std::numeric_limits<double>::infinity()};
};

// Positive theta = z / n for z = 1..20; nonpositivity is also checked at -z / n.
inline DriftFit drift_remainder_fit(std::size_t n, std::size_t paths, std::uint64_t seed) {
    const ModelParams p{0.5, 0.2, 0.0};
    const DriftConstants c = drift_constants(p.alpha, p.beta);
    DriftFit out;
    out.n = n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t r = 0; r < paths; ++r) {
        RngStream rng(seed, r);
        const PathSample path = simulate_path(p, n, 0.0, rng);
        const double lambda = lambda_n_statistic(path, p, 1.0);
        for (int z = 1; z <= 20; ++z) {
            const double th = static_cast<double>(z) / static_cast<double>(n);
            const double B = drift_numeric(path, p, th);
            out.max_B = std::max({out.max_B, B, drift_numeric(path, p, -th)});
            const double rem = std::abs(B + th * c.F * lambda);
            const double x = th * th * std::pow(static_cast<double>(n), 1.5);
            sxy += rem * x;
            sxx += x * x;
        }
    }
    out.C = sxy / sxx;
    return out;
}

struct LimitArgsupCheck {
    double max_grid_excess{0.0};    // grid max - exact value (should be <= 0)
    double max_grid_shortfall{0.0}; // exact value - grid max, minus slope * step
    double max_location_error{0.0}; // |z_grid - z_exact| on realizations with a clear winner
    std::size_t realizations{0};
};

inline LimitArgsupCheck limit_argsup_vs_grid(const LimitLawParams& p, double L, int realizations,
                                             std::uint64_t seed, double step = 1e-4) {
    LimitArgsupCheck out;
    const double steepest = std::max(std::abs(p.slope_pos), std::abs(p.slope_neg)) * L;
    for (int i = 0; i < realizations; ++i) {
        RngStream rng(seed, static_cast<std::uint64_t>(i));
        RngStream copy = rng;
        const LimitArgsupSample s = sample_limit_argsup(p, L, rng);
        const double h = std::max(s.truncation_horizon, std::abs(s.z_star)) + 10.0 * step;
        const auto m = static_cast<long>(std::ceil(h / step));
        std::vector<double> grid;
        grid.reserve(static_cast<std::size_t>(2 * m + 1));
        for (long j = -m; j <= m; ++j) grid.push_back(static_cast<double>(j) * step);
        const std::vector<double> v = sample_limit_path(p, L, grid, copy);
        const auto best = std::max_element(v.begin(), v.end());
        const double zg = grid[static_cast<std::size_t>(best - v.begin())];
        out.max_grid_excess = std::max(out.max_grid_excess, *best - s.value);
        out.max_grid_shortfall = std::max(out.max_grid_shortfall, s.value - *best - steepest * step);
        if (s.gap > 2.0 * steepest * step)
            out.max_location_error = std::max(out.max_location_error, std::abs(zg - s.z_star));
        ++out.realizations;
    }
    return out;
}

// L * argsup_z l(z L) against argsup_z l(z), independent streams.
inline testkit::KsResult limit_scaling_ks(const LimitLawParams& p, double L, std::size_t draws,
                                          std::uint64_t seed) {
    std::vector<double> a(draws), b(draws);
    for (std::size_t i = 0; i < draws; ++i) {
        RngStream ra(seed, 2 * i), rb(seed, 2 * i + 1);
        a[i] = L * sample_limit_argsup(p, L, ra).z_star;
        b[i] = sample_limit_argsup(p, 1.0, rb).z_star;
    }
    return testkit::ks_two_sample(a, b);
}

struct RiemannRatio {
    double mean_ratio{0.0};
    std::size_t used{0};
};

// Mean over paths (raw sign-change count > threshold) of the statistic for
// 1_[0,1) divided by the statistic for 1_[0,2).
inline RiemannRatio riemann_ratio(std::size_t n, std::size_t paths, std::uint64_t seed,
                                  double threshold = 0.1) {
    const ModelParams p{0.5, 0.2, 0.0};
    RiemannRatio out;
    double sum = 0.0;
    for (std::size_t r = 0; r < paths; ++r) {
        RngStream rng(seed, r);
        const PathSample path = simulate_path(p, n, 0.0, rng);
        if (!(local_time_estimator(path, p.rho) > threshold)) continue;
        const double s1 = riemann_statistic(path, p.rho, IndicatorWindow{0.0, 1.0});
        const double s2 = riemann_statistic(path, p.rho, IndicatorWindow{0.0, 2.0});
        if (!(s2 > 0.0)) continue;
        sum += s1 / s2;
        ++out.used;
    }
    out.mean_ratio = out.used ? sum / static_cast<double>(out.used) : 0.0;
    return out;
}

} // namespace obm::checks
