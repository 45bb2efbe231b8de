#pragma once

#include "obm/likelihood.hpp"
#include "obm/model.hpp"
#include "obm/sampler.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace obm {

// (1/sqrt n) * number of steps whose endpoints lie strictly on opposite sides of rho.
[[nodiscard]] inline double local_time_estimator(const PathSample& path, double rho) {
    detail::require_path(path);
    std::size_t crossings = 0;
    for (std::size_t k = 1; k <= path.n(); ++k)
        if ((path[k - 1] - rho) * (path[k] - rho) < 0.0) ++crossings;
    return static_cast<double>(crossings) / std::sqrt(static_cast<double>(path.n()));
}

// Limit of local_time_estimator divided by the local time L (normalized by the
// occupation formula int g(X_s) sigma^2(X_s) ds = int g(a) L^a da). A step
// from x = rho - u crosses with probability 2 alpha / (alpha + beta) *
// Phi(-u / (alpha sqrt t)), and symmetrically from above, which gives
// 4 / ((alpha + beta) sqrt(2 pi)); for standard Brownian motion sqrt(2 / pi).
[[nodiscard]] inline double crossing_count_scale(double alpha, double beta) {
    ModelParams{alpha, beta, 0.0}.validate();
    return 4.0 / ((alpha + beta) * std::sqrt(2.0 * std::numbers::pi));
}

// Sign-change count rescaled to estimate L itself.
[[nodiscard]] inline double local_time_consistent(const PathSample& path, const ModelParams& p) {
    return local_time_estimator(path, p.rho) / crossing_count_scale(p.alpha, p.beta);
}

// Occupation-time proxy (1/(2 eps)) * sum 1{|X - rho| <= eps} sigma(X)^2 / n.
[[nodiscard]] inline double occupation_local_time(const PathSample& path, const ModelParams& p,
                                                  double eps) {
    detail::require_path(path);
    if (!(eps > 0.0)) throw std::invalid_argument("occupation_local_time: eps must be positive");
    double sum = 0.0;
    for (std::size_t k = 0; k < path.n(); ++k)
        if (std::abs(path[k] - p.rho) <= eps) sum += p.sigma(path[k]) * p.sigma(path[k]);
    return sum / (2.0 * eps * static_cast<double>(path.n()));
}

// (1/sqrt n) * sum_{k <= floor(n t)} f(sqrt n (X_{k-1} - rho0)).
template <class F>
[[nodiscard]] double riemann_statistic(const PathSample& path, double rho0, F&& f, double t = 1.0) {
    detail::require_path(path);
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("riemann_statistic: t outside [0, 1]");
    const double rn = std::sqrt(static_cast<double>(path.n()));
    const std::size_t m = detail::steps_until(path, t);
    double sum = 0.0;
    for (std::size_t k = 1; k <= m; ++k) sum += f(rn * (path[k - 1] - rho0));
    return sum / rn;
}

// exp(-u^2 / (2 sigma(u)^2)) with sigma switching at 0.
struct LambdaWeight {
    double alpha{1.0};
    double beta{1.0};
    double operator()(double u) const {
        const double s = u < 0.0 ? alpha : beta;
        return std::exp(-u * u / (2.0 * s * s));
    }
};

struct IndicatorWindow {
    double lo{0.0};
    double hi{1.0};
    double operator()(double u) const { return u >= lo && u < hi ? 1.0 : 0.0; }
};

struct EstimationReport {
    double rho_hat{0.0};
    double local_time_hat{0.0};
    double ci_lo{-std::numeric_limits<double>::infinity()};
    double ci_hi{std::numeric_limits<double>::infinity()};
    double level{0.1};
    std::size_t n{0};
    bool degenerate{true};
    double q_lo{0.0};
    double q_hi{0.0};
};

// [rho_hat - q_hi / (n L), rho_hat - q_lo / (n L)]; the whole line when L == 0.
[[nodiscard]] inline EstimationReport confidence_interval(double rho_hat, double L_hat,
                                                          std::size_t n, double q_lo, double q_hi,
                                                          double level) {
    if (!(L_hat >= 0.0) || !std::isfinite(L_hat))
        throw std::domain_error("confidence_interval: local time estimate must be >= 0");
    if (!(q_lo <= q_hi)) throw std::invalid_argument("confidence_interval: q_lo > q_hi");
    if (n == 0) throw std::invalid_argument("confidence_interval: n must be >= 1");
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("confidence_interval: level must lie in (0, 1)");
    EstimationReport r;
    r.rho_hat = rho_hat;
    r.local_time_hat = L_hat;
    r.level = level;
    r.n = n;
    r.q_lo = q_lo;
    r.q_hi = q_hi;
    r.degenerate = L_hat == 0.0;
    if (!r.degenerate) {
        const double scale = static_cast<double>(n) * L_hat;
        r.ci_lo = rho_hat - q_hi / scale;
        r.ci_hi = rho_hat - q_lo / scale;
    }
    return r;
}

} // namespace obm
