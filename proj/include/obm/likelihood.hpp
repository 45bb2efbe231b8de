#pragma once

// Normalized log-likelihood ell_n(theta) = sum_k log p^{rho0+theta} / p^{rho0}
// over consecutive observation pairs, its nine-regime split, the sequential
// version, the drift term B_n and the closed-form drift constants.

#include "obm/errors.hpp"
#include "obm/model.hpp"
#include "obm/quadrature.hpp"
#include "obm/sampler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace obm {

// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_{0.0};
    double comp_{0.0};
};

struct PairRegime {
    int index{0}; // 1..9

    friend bool operator==(const PairRegime&, const PairRegime&) = default;
};

// Position of the pair (x, y) relative to lo = rho0 + theta_lo and
// hi = rho0 + theta_hi, theta_lo <= theta_hi; rows are indexed by x, columns by y.
[[nodiscard]] inline PairRegime classify_pair(double theta_lo, double theta_hi, double rho0,
                                              double x, double y) {
    if (theta_lo > theta_hi) throw std::invalid_argument("classify_pair: theta_lo > theta_hi");
    const double lo = rho0 + theta_lo;
    const double hi = rho0 + theta_hi;
    const int col = y <= lo ? 0 : (y <= hi ? 1 : 2);
    if (x < lo) return {1 + col};
    if (x < hi) return {4 + col};
    return {7 + col};
}

// Regimes of ell_n(theta): (theta', theta) = (0, theta) for theta >= 0 and
// (theta, 0) for theta < 0.
[[nodiscard]] inline PairRegime classify_for_theta(double theta, double rho0, double x, double y) {
    return theta >= 0.0 ? classify_pair(0.0, theta, rho0, x, y)
                        : classify_pair(theta, 0.0, rho0, x, y);
}

namespace detail {

inline std::size_t steps_until(const PathSample& path, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("time must lie in [0, 1]");
    const auto n = static_cast<double>(path.n());
    // Guard against n * t landing a hair below an integer.
    const double raw = n * t;
    const double rounded = std::round(raw);
    const double k = std::abs(raw - rounded) < 1e-9 * std::max(1.0, n) ? rounded : std::floor(raw);
    return static_cast<std::size_t>(std::min(k, n));
}

inline void require_path(const PathSample& path) {
    if (path.n() < 1) throw std::invalid_argument("likelihood: path must have n >= 1");
}

} // namespace detail

// Summand k (1-based) of ell_n.
[[nodiscard]] inline double log_ratio_term(const ModelParams& params0, double theta,
                                           const PathSample& path, std::size_t k) {
    const double t = path.dt();
    const double x = path[k - 1];
    const double y = path[k];
    return log_transition_density(params0.with_rho(params0.rho + theta), t, x, y) -
           log_transition_density(params0, t, x, y);
}

[[nodiscard]] inline double ell_n_sequential(const PathSample& path, const ModelParams& params0,
                                             double theta, double t) {
    detail::require_path(path);
    const std::size_t steps = detail::steps_until(path, t);
    if (theta == 0.0) return 0.0;
    CompensatedSum sum;
    for (std::size_t k = 1; k <= steps; ++k) sum.add(log_ratio_term(params0, theta, path, k));
    return sum.value();
}

[[nodiscard]] inline double ell_n(const PathSample& path, const ModelParams& params0,
                                  double theta) {
    return ell_n_sequential(path, params0, theta, 1.0);
}

[[nodiscard]] inline std::array<double, 9> regime_sums(const PathSample& path,
                                                       const ModelParams& params0, double theta) {
    detail::require_path(path);
    std::array<CompensatedSum, 9> sums{};
    if (theta != 0.0) {
        for (std::size_t k = 1; k <= path.n(); ++k) {
            const int j = classify_for_theta(theta, params0.rho, path[k - 1], path[k]).index;
            sums[j - 1].add(log_ratio_term(params0, theta, path, k));
        }
    }
    std::array<double, 9> out{};
    for (std::size_t j = 0; j < 9; ++j) out[j] = sums[j].value();
    return out;
}

struct DriftConstants {
    double F{0.0};
    double F_tilde{0.0};
    double b{0.0};
    double b_prime{0.0};
    double lambda_f{0.0}; // lambda_{alpha,beta}(f_{alpha,beta})
};

[[nodiscard]] inline DriftConstants drift_constants(double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw std::domain_error("drift_constants: alpha and beta must be positive");
    const double a2 = alpha * alpha;
    const double b2 = beta * beta;
    const double log_ba = std::log(b2 / a2);
    DriftConstants c;
    c.F = -(2.0 * (alpha - beta) / (alpha * beta) + alpha / beta * 2.0 / (alpha + beta) * log_ba);
    c.F_tilde =
        -(2.0 * (beta - alpha) / (alpha * beta) + beta / alpha * 2.0 / (alpha + beta) * (-log_ba));
    c.b = (a2 - b2) / (a2 * b2) + log_ba / b2;
    c.b_prime = (b2 - a2) / (a2 * b2) - log_ba / a2;
    c.lambda_f = std::sqrt(std::numbers::pi / 2.0) * (1.0 / alpha + 1.0 / beta);
    return c;
}

// Lambda^n_{alpha,beta} over the first floor(n t) starting points.
[[nodiscard]] inline double lambda_n_statistic(const PathSample& path, const ModelParams& params0,
                                               double t) {
    detail::require_path(path);
    const std::size_t steps = detail::steps_until(path, t);
    const auto n = static_cast<double>(path.n());
    CompensatedSum sum;
    for (std::size_t k = 1; k <= steps; ++k) {
        const double d = path[k - 1] - params0.rho;
        const double s = d < 0.0 ? params0.alpha : params0.beta;
        sum.add(std::exp(-d * d * n / (2.0 * s * s)));
    }
    return sum.value() / std::sqrt(2.0 * std::numbers::pi / n);
}

struct DriftOptions {
    double max_scaled_theta{50.0}; // enforce |theta| <= max_scaled_theta / sqrt(n)
    double t{1.0};
    QuadratureOptions quadrature{};
};

namespace detail {

// u + exp(-u) - 1 >= 0, so that p log(p/q) - p + q = p * kl_kernel(log(p/q))
// is evaluated without cancellation.
inline double kl_kernel(double u) {
    if (std::abs(u) < 1e-2) return u * u * (0.5 - u * (1.0 / 6.0 - u * (1.0 / 24.0 - u / 120.0)));
    return u + std::expm1(-u);
}

} // namespace detail

// B_{n,t}(theta): sum over pairs of E[log p^{rho0+theta}/p^{rho0}(X, Y) | X].
// Each conditional expectation is written as -KL(p || q) with the pointwise
// nonnegative integrand p log(p/q) - p + q, so the result is <= 0 by
// construction of the quadrature (positive weights).
[[nodiscard]] inline double drift_numeric(const PathSample& path, const ModelParams& params0,
                                          double theta, const DriftOptions& opt = {}) {
    detail::require_path(path);
    const auto n = static_cast<double>(path.n());
    if (std::abs(theta) > opt.max_scaled_theta / std::sqrt(n))
        throw std::domain_error("drift_numeric: |theta| exceeds max_scaled_theta / sqrt(n)");
    if (theta == 0.0) return 0.0;
    const std::size_t steps = detail::steps_until(path, opt.t);
    const double dt = path.dt();
    const ModelParams alt = params0.with_rho(params0.rho + theta);
    const double scale = params0.sigma_max() * std::sqrt(dt);
    const double reach = 12.0 * scale;
    const double k0 = params0.rho;
    const double k1 = alt.rho;

    CompensatedSum total;
    for (std::size_t k = 1; k <= steps; ++k) {
        const double x = path[k - 1];
        const double lo = x - reach;
        const double hi = x + reach;
        const bool touches = (k0 > lo && k0 < hi) || (k1 > lo && k1 < hi);
        if (!touches) continue;
        auto integrand = [&](double y) {
            const double lp = log_transition_density(params0, dt, x, y);
            const double u = lp - log_transition_density(alt, dt, x, y);
            return std::exp(lp) * detail::kl_kernel(u);
        };
        const auto r = integrate_piecewise(integrand, lo, hi,
                                           {k0, k1, x - 3.0 * scale, x, x + 3.0 * scale},
                                           opt.quadrature);
        total.add(-r.value);
    }
    return total.value();
}

// Left-limit regime rule: the regime a pair has for rho' slightly below rho.
[[nodiscard]] inline Regime regime_of_left(const ModelParams& p, double x, double y) {
    if (x < p.rho) return y < p.rho ? Regime::BelowBelow : Regime::Up;
    return y >= p.rho ? Regime::AboveAbove : Regime::Down;
}

// Precomputed pair data for fast evaluation of ell_n over many theta.
// Pairs lying entirely more than 5 alpha sqrt(t) below (5 beta sqrt(t) above)
// rho = rho0 + theta have reflection terms below exp(-50) and contribute a
// rho-independent constant, summed through prefix (suffix) sums; only the
// remaining band is evaluated.
class PairTable {
public:
    PairTable(const PathSample& path, const ModelParams& params0) : params0_(params0) {
        detail::require_path(path);
        params0.validate();
        const std::size_t n = path.n();
        t_ = path.dt();
        delta_below_ = 5.0 * params0.alpha * std::sqrt(t_);
        delta_above_ = 5.0 * params0.beta * std::sqrt(t_);
        x_.resize(n);
        y_.resize(n);
        base_.resize(n);
        std::vector<double> ga(n), gb(n);
        const double la = -detail::kLogSqrt2Pi - 0.5 * std::log(t_) - std::log(params0.alpha);
        const double lb = -detail::kLogSqrt2Pi - 0.5 * std::log(t_) - std::log(params0.beta);
        for (std::size_t k = 0; k < n; ++k) {
            x_[k] = path[k];
            y_[k] = path[k + 1];
            base_[k] = log_transition_density(params0, t_, x_[k], y_[k]);
            const double d = y_[k] - x_[k];
            ga[k] = la - d * d / (2.0 * params0.alpha * params0.alpha * t_) - base_[k];
            gb[k] = lb - d * d / (2.0 * params0.beta * params0.beta * t_) - base_[k];
            max_span_ = std::max(max_span_, std::abs(d));
        }
        by_lo_.resize(n);
        by_hi_.resize(n);
        std::iota(by_lo_.begin(), by_lo_.end(), 0u);
        std::iota(by_hi_.begin(), by_hi_.end(), 0u);
        std::stable_sort(by_lo_.begin(), by_lo_.end(),
                         [&](auto a, auto b) { return lo(a) < lo(b); });
        std::stable_sort(by_hi_.begin(), by_hi_.end(),
                         [&](auto a, auto b) { return hi(a) < hi(b); });
        lo_sorted_.resize(n);
        hi_sorted_.resize(n);
        prefix_ga_.assign(n + 1, 0.0L);
        suffix_gb_.assign(n + 1, 0.0L);
        for (std::size_t i = 0; i < n; ++i) {
            lo_sorted_[i] = lo(by_lo_[i]);
            hi_sorted_[i] = hi(by_hi_[i]);
            prefix_ga_[i + 1] = prefix_ga_[i] + ga[by_hi_[i]];
        }
        for (std::size_t i = n; i-- > 0;) suffix_gb_[i] = suffix_gb_[i + 1] + gb[by_lo_[i]];
    }

    [[nodiscard]] const ModelParams& params0() const { return params0_; }
    [[nodiscard]] double dt() const { return t_; }
    [[nodiscard]] std::size_t size() const { return x_.size(); }
    [[nodiscard]] double x(std::size_t k) const { return x_[k]; }
    [[nodiscard]] double y(std::size_t k) const { return y_[k]; }
    [[nodiscard]] double base(std::size_t k) const { return base_[k]; }
    [[nodiscard]] double lo(std::size_t k) const { return std::min(x_[k], y_[k]); }
    [[nodiscard]] double hi(std::size_t k) const { return std::max(x_[k], y_[k]); }

    // Constant contribution of pairs that are far from every rho in [ra, rb].
    [[nodiscard]] double far_sum(double ra, double rb) const {
        const auto na = static_cast<std::size_t>(
            std::lower_bound(hi_sorted_.begin(), hi_sorted_.end(), ra - delta_below_) - hi_sorted_.begin());
        const std::size_t nb = first_above(rb);
        return static_cast<double>(prefix_ga_[na] + suffix_gb_[nb]);
    }

    // Calls fn(k) for every pair not covered by far_sum(ra, rb).
    template <class Fn>
    void for_each_near(double ra, double rb, Fn&& fn) const {
        const double cut = ra - delta_below_;
        auto it = std::lower_bound(lo_sorted_.begin(), lo_sorted_.end(), cut - max_span_);
        const std::size_t end = first_above(rb);
        for (auto i = static_cast<std::size_t>(it - lo_sorted_.begin()); i < end; ++i) {
            const std::uint32_t k = by_lo_[i];
            if (hi(k) >= cut) fn(k);
        }
    }

    // ell_n(theta); with left_limit, the limit from theta' < theta.
    [[nodiscard]] double evaluate(double theta, bool left_limit = false) const {
        if (theta == 0.0 && !left_limit) return 0.0;
        const ModelParams p = params0_.with_rho(params0_.rho + theta);
        CompensatedSum sum;
        sum.add(far_sum(p.rho, p.rho));
        for_each_near(p.rho, p.rho, [&](std::uint32_t k) {
            const Regime r = left_limit ? regime_of_left(p, x_[k], y_[k]) : regime_of(p, x_[k], y_[k]);
            sum.add(log_regime_density(p, r, t_, x_[k], y_[k]) - base_[k]);
        });
        return sum.value();
    }

private:
    std::size_t first_above(double rb) const {
        return static_cast<std::size_t>(
            std::upper_bound(lo_sorted_.begin(), lo_sorted_.end(), rb + delta_above_) - lo_sorted_.begin());
    }

    ModelParams params0_;
    double t_{1.0};
    double delta_below_{0.0};
    double delta_above_{0.0};
    double max_span_{0.0};
    std::vector<double> x_, y_, base_;
    std::vector<std::uint32_t> by_lo_, by_hi_;
    std::vector<double> lo_sorted_, hi_sorted_;
    std::vector<long double> prefix_ga_, suffix_gb_;
};

struct LikelihoodLandscape {
    std::vector<double> thetas;
    std::vector<double> values;
    std::vector<double> breakpoints;
    std::map<double, double> left_limits;
};

// ell_n on a theta grid plus the observed-value breakpoints (shifted by -rho0)
// inside the grid range and the left limits of ell_n there.
[[nodiscard]] inline LikelihoodLandscape likelihood_landscape(const PathSample& path,
                                                              const ModelParams& params0,
                                                              std::vector<double> thetas) {
    std::sort(thetas.begin(), thetas.end());
    LikelihoodLandscape out;
    if (thetas.empty()) return out;
    const PairTable table(path, params0);
    out.values.reserve(thetas.size());
    for (double th : thetas) out.values.push_back(table.evaluate(th));
    for (double v : path.values()) {
        const double b = v - params0.rho;
        if (b >= thetas.front() && b <= thetas.back()) out.breakpoints.push_back(b);
    }
    std::sort(out.breakpoints.begin(), out.breakpoints.end());
    out.breakpoints.erase(std::unique(out.breakpoints.begin(), out.breakpoints.end()),
                          out.breakpoints.end());
    for (double b : out.breakpoints) out.left_limits[b] = table.evaluate(b, true);
    out.thetas = std::move(thetas);
    return out;
}

} // namespace obm
