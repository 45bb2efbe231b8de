#pragma once

// Oscillating Brownian motion dX = sigma_rho(X) dW with sigma_rho(x) = alpha
// below the threshold rho and beta at/above it. Closed-form transition
// density, its logarithm, Gaussian envelope bounds and conditional CDF.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace obm {

struct ModelParams {
    double alpha{1.0};
    double beta{1.0};
    double rho{0.0};

    void validate() const {
        if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(rho))
            throw std::domain_error("ModelParams: non-finite field");
        if (alpha <= 0.0 || beta <= 0.0)
            throw std::domain_error("ModelParams: alpha and beta must be positive");
    }

    [[nodiscard]] double sigma(double x) const { return x < rho ? alpha : beta; }
    [[nodiscard]] double sigma_max() const { return std::max(alpha, beta); }
    [[nodiscard]] double sigma_min() const { return std::min(alpha, beta); }

    // (alpha - beta) / (alpha + beta), the reflection coefficient.
    [[nodiscard]] double skew() const { return (alpha - beta) / (alpha + beta); }

    [[nodiscard]] ModelParams with_rho(double r) const { return {alpha, beta, r}; }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// 1: x<rho, y<=rho   2: x>=rho, y>rho   3: x<rho<y   4: y<=rho<=x
enum class Regime : int { BelowBelow = 1, AboveAbove = 2, Up = 3, Down = 4 };

[[nodiscard]] inline Regime regime_of(const ModelParams& p, double x, double y) {
    if (x < p.rho) return y <= p.rho ? Regime::BelowBelow : Regime::Up;
    return y > p.rho ? Regime::AboveAbove : Regime::Down;
}

namespace detail {

inline void require_positive_time(double t) {
    if (!(t > 0.0) || !std::isfinite(t))
        throw std::domain_error("transition density: t must be positive, got " + std::to_string(t));
}

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

} // namespace detail

// log P_r^rho(x, y; t) for a fixed regime formula r, without checking that
// (x, y) lies in the region of r. Regimes 1 and 2 are written as
// phi(y - x) * (1 -/+ c * exp(-s)) with s = 2 (x - rho)(y - rho) / (t sigma^2),
// which is >= 0 on the closure of their regions.
[[nodiscard]] inline double log_regime_density(const ModelParams& p, Regime r, double t,
                                               double x, double y) {
    const double c = p.skew();
    const double log_sqrt_t = 0.5 * std::log(t);
    switch (r) {
    case Regime::BelowBelow: {
        const double a2t = p.alpha * p.alpha * t;
        const double d = y - x;
        const double s = 2.0 * (p.rho - x) * (p.rho - y) / a2t;
        const double factor = -c * std::exp(-s);
        if (factor <= -1.0) return -INFINITY;
        return -detail::kLogSqrt2Pi - log_sqrt_t - std::log(p.alpha) - d * d / (2.0 * a2t) +
               std::log1p(factor);
    }
    case Regime::AboveAbove: {
        const double b2t = p.beta * p.beta * t;
        const double d = y - x;
        const double s = 2.0 * (x - p.rho) * (y - p.rho) / b2t;
        const double factor = c * std::exp(-s);
        if (factor <= -1.0) return -INFINITY;
        return -detail::kLogSqrt2Pi - log_sqrt_t - std::log(p.beta) - d * d / (2.0 * b2t) +
               std::log1p(factor);
    }
    case Regime::Up: {
        const double h = (y - p.rho) / p.beta - (x - p.rho) / p.alpha;
        return std::log(2.0 / (p.alpha + p.beta) * p.alpha / p.beta) - detail::kLogSqrt2Pi -
               log_sqrt_t - h * h / (2.0 * t);
    }
    case Regime::Down: {
        const double h = (y - p.rho) / p.alpha - (x - p.rho) / p.beta;
        return std::log(2.0 / (p.alpha + p.beta) * p.beta / p.alpha) - detail::kLogSqrt2Pi -
               log_sqrt_t - h * h / (2.0 * t);
    }
    }
    return -INFINITY;
}

[[nodiscard]] inline double log_transition_density(const ModelParams& p, double t, double x,
                                                   double y) {
    detail::require_positive_time(t);
    return log_regime_density(p, regime_of(p, x, y), t, x, y);
}

[[nodiscard]] inline double transition_density(const ModelParams& p, double t, double x,
                                               double y) {
    return std::exp(log_transition_density(p, t, x, y));
}

struct GaussianEnvelope {
    double scale_constant{1.0};
    double mean{0.0};
    double std{1.0};

    [[nodiscard]] double log_density(double y) const {
        const double z = (y - mean) / std;
        return std::log(scale_constant) - detail::kLogSqrt2Pi - std::log(std) - 0.5 * z * z;
    }
    [[nodiscard]] double density(double y) const { return std::exp(log_density(y)); }
};

// Upper Gaussian envelope: p_t(x, .) <= C_env * N(x, max(alpha,beta)^2 t).
[[nodiscard]] inline GaussianEnvelope envelope(const ModelParams& p, double t, double x) {
    detail::require_positive_time(t);
    const double hi = p.sigma_max();
    const double lo = p.sigma_min();
    return {2.0 * hi / (p.alpha + p.beta) * (hi / lo), x, hi * std::sqrt(t)};
}

// Matching lower bound: p_t(x, y) >= this value.
[[nodiscard]] inline double lower_envelope_density(const ModelParams& p, double t, double x,
                                                   double y) {
    detail::require_positive_time(t);
    const double hi = p.sigma_max();
    const double lo = p.sigma_min();
    const double d = y - x;
    return 2.0 / (p.alpha + p.beta) * (lo / hi) / std::sqrt(2.0 * std::numbers::pi * t) *
           std::exp(-d * d / (2.0 * t * lo * lo));
}

// P(X_t <= y | X_0 = x), integrating each regime piece in closed form.
[[nodiscard]] inline double transition_cdf(const ModelParams& p, double t, double x, double y) {
    detail::require_positive_time(t);
    using detail::std_normal_cdf;
    const double c = p.skew();
    const double st = std::sqrt(t);
    const double rho = p.rho;
    double F = 0.0;
    if (x < rho) {
        const double sa = p.alpha * st;
        if (y <= rho) {
            F = std_normal_cdf((y - x) / sa) - c * std_normal_cdf((y - 2.0 * rho + x) / sa);
        } else {
            const double at_rho =
                std_normal_cdf((rho - x) / sa) - c * std_normal_cdf((x - rho) / sa);
            // Regime 3 in the variable v = (u - rho)/beta - (x - rho)/alpha.
            const double v_y = (y - rho) / p.beta - (x - rho) / p.alpha;
            const double v_rho = (rho - x) / p.alpha;
            F = at_rho + (1.0 + c) * (std_normal_cdf(v_y / st) - std_normal_cdf(v_rho / st));
        }
    } else {
        const double sb = p.beta * st;
        if (y <= rho) {
            const double v_y = (y - rho) / p.alpha - (x - rho) / p.beta;
            F = (1.0 - c) * std_normal_cdf(v_y / st);
        } else {
            const double at_rho = (1.0 - c) * std_normal_cdf((rho - x) / sb);
            F = at_rho + (std_normal_cdf((y - x) / sb) - std_normal_cdf((rho - x) / sb)) +
                c * (std_normal_cdf((y - 2.0 * rho + x) / sb) - std_normal_cdf((x - rho) / sb));
        }
    }
    return std::clamp(F, 0.0, 1.0);
}

} // namespace obm
