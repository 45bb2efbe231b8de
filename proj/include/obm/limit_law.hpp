#pragma once

// Limit process of the rescaled log-likelihood:
//
//   l(z) = slope_pos |z| + jump_pos N(z / beta^2)        z >= 0
//   l(z) = slope_neg |z| + jump_neg N'((-z / alpha^2)-)  z < 0
//
// with N, N' independent unit-rate Poisson processes. Realizations of l(z L)
// are piecewise linear with jumps, so the argsup (left-limit convention) is
// found exactly by enumerating the jump abscissae. Each side is extended
// until an exponential-martingale bound certifies that the part beyond the
// horizon cannot reach the current maximum except with small probability.

#include "obm/errors.hpp"
#include "obm/likelihood.hpp"
#include "obm/rng.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

namespace obm {

struct LimitLawParams {
    double slope_pos{0.0};
    double slope_neg{0.0};
    double jump_pos{0.0};
    double jump_neg{0.0};
    double rate_pos{1.0};
    double rate_neg{1.0};
};

[[nodiscard]] inline LimitLawParams limit_params(double alpha, double beta) {
    ModelParams{alpha, beta, 0.0}.validate();
    if (alpha == beta)
        throw std::domain_error("limit_params: alpha == beta gives a degenerate limit (l == 0)");
    const double a2 = alpha * alpha, b2 = beta * beta;
    LimitLawParams p;
    p.slope_pos = (a2 - b2) / (a2 * b2);
    p.slope_neg = (b2 - a2) / (a2 * b2);
    p.jump_pos = std::log(b2 / a2);
    p.jump_neg = -p.jump_pos;
    p.rate_pos = 1.0 / b2;
    p.rate_neg = 1.0 / a2;
    return p;
}

struct LimitArgsupSample {
    double z_star{0.0};
    double value{0.0};
    bool attained_as_left_limit{false};
    double truncation_horizon{0.0};
    double tail_bound{0.0};
    double gap{std::numeric_limits<double>::infinity()}; // best minus runner-up candidate
    std::size_t jumps{0};
};

struct LimitSamplerOptions {
    double tail_tol{1e-6};
    std::size_t max_jumps_per_side{10'000'000};
};

namespace detail {

// Positive root of exp(theta J) - 1 - theta (J + kappa) = 0, where J is the jump
// size and kappa > 0 the net downward drift per unit Poisson time. Then
// exp(theta* Y) is a martingale for Y(u) = J (N(u) - u) - kappa u and
// P(sup Y >= a) <= exp(-theta* a).
inline double lundberg_exponent(double jump, double kappa) {
    auto g = [&](double th) { return std::expm1(th * jump) - th * (jump + kappa); };
    double hi = 1.0;
    while (g(hi) <= 0.0) {
        hi *= 2.0;
        if (hi > 1e12) throw NumericalError("lundberg_exponent: no positive root");
    }
    double lo = hi / 2.0;
    while (lo > 1e-300 && g(lo) > 0.0) lo /= 2.0;
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(
        g, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
    return r.first;
}

// One side of z -> l(z L) for a fixed L: drift slope L per unit z and jump
// abscissae T_i / (rate L) of a unit-rate Poisson process on its own stream.
class LimitSide {
public:
    LimitSide(double slope, double jump, double rate, double L, RngStream rng)
        : slope_(slope * L), jump_(jump), scale_(1.0 / (rate * L)), rng_(rng) {}

    double next_abscissa() {
        clock_ += rng_.exponential();
        return clock_ * scale_;
    }

    [[nodiscard]] double slope() const { return slope_; }
    [[nodiscard]] double jump() const { return jump_; }

private:
    double slope_;
    double jump_;
    double scale_;
    RngStream rng_;
    double clock_{0.0};
};

inline LimitSide positive_side(const LimitLawParams& p, double L, RngStream& rng) {
    return {p.slope_pos, p.jump_pos, p.rate_pos, L, rng.split(1)};
}

inline LimitSide negative_side(const LimitLawParams& p, double L, RngStream& rng) {
    return {p.slope_neg, p.jump_neg, p.rate_neg, L, rng.split(2)};
}

inline void require_limit_inputs(const LimitLawParams& p, double L) {
    if (!(L > 0.0) || !std::isfinite(L))
        throw std::domain_error("limit law: L must be positive and finite");
    if (!(p.rate_pos > 0.0) || !(p.rate_neg > 0.0))
        throw std::domain_error("limit law: rates must be positive");
}

} // namespace detail

// Exact argsup of z -> l(z L) for one realization. The realization is a
// deterministic function of rng (two child streams, one per side), which
// sample_limit_path reproduces.
[[nodiscard]] inline LimitArgsupSample sample_limit_argsup(const LimitLawParams& p, double L,
                                                           RngStream& rng,
                                                           const LimitSamplerOptions& opt = {}) {
    detail::require_limit_inputs(p, L);
    if (!(opt.tail_tol > 0.0) || opt.tail_tol > 0.01)
        throw std::invalid_argument("sample_limit_argsup: tail_tol must lie in (0, 0.01]");

    detail::LimitSide sides[2] = {detail::positive_side(p, L, rng), detail::negative_side(p, L, rng)};
    const double rates[2] = {p.rate_pos, p.rate_neg};

    LimitArgsupSample out;
    double second = -std::numeric_limits<double>::infinity();
    auto consider = [&](double z, double v, bool left) {
        const bool better = v > out.value || (v == out.value && std::abs(z) < std::abs(out.z_star));
        if (better) {
            second = std::max(second, out.value);
            out.value = v;
            out.z_star = z;
            out.attained_as_left_limit = left;
        } else {
            second = std::max(second, v);
        }
    };

    for (int s = 0; s < 2; ++s) {
        detail::LimitSide& side = sides[s];
        const double J = side.jump();
        const double b = side.slope() / L + J * rates[s];
        if (!(b < 0.0)) throw std::domain_error("limit law: compensated drift must be negative");
        // In unit Poisson time u = z rate L the process is J (N(u) - u) - kappa u.
        const double theta = detail::lundberg_exponent(J, -b / rates[s]);
        double level = 0.0; // value just after the most recent jump
        double bound = 1.0;
        for (std::size_t m = 1;; ++m) {
            bound = std::exp(-theta * std::max(0.0, out.value - level));
            if (bound < opt.tail_tol / 2.0) break;
            if (m > opt.max_jumps_per_side)
                throw HorizonError("sample_limit_argsup: tail bound not certified within horizon cap");
            const double z = side.next_abscissa();
            const double before = side.slope() * z + J * static_cast<double>(m - 1);
            const double after = before + J;
            // z >= 0 is cadlag with the jump included at z; on z < 0 the
            // counting is strict, so the value excludes the jump and the
            // left limit (z approached from below) includes it.
            if (s == 0) {
                consider(z, after, false);
                consider(z, before, true);
            } else {
                consider(-z, before, false);
                consider(-z, after, true);
            }
            level = after;
            out.truncation_horizon = std::max(out.truncation_horizon, z);
            ++out.jumps;
        }
        out.tail_bound += bound;
    }
    out.gap = out.value - second;
    return out;
}

// l(z L) on a grid, using the same realization as sample_limit_argsup for the
// same rng state.
[[nodiscard]] inline std::vector<double> sample_limit_path(const LimitLawParams& p, double L,
                                                           const std::vector<double>& z_grid,
                                                           RngStream& rng) {
    detail::require_limit_inputs(p, L);
    double zmax_pos = 0.0, zmax_neg = 0.0;
    for (double z : z_grid) {
        if (!std::isfinite(z)) throw std::invalid_argument("sample_limit_path: non-finite grid");
        if (z >= 0.0) zmax_pos = std::max(zmax_pos, z);
        else zmax_neg = std::max(zmax_neg, -z);
    }
    detail::LimitSide pos = detail::positive_side(p, L, rng);
    detail::LimitSide neg = detail::negative_side(p, L, rng);
    auto jumps_upto = [](detail::LimitSide& side, double zmax) {
        std::vector<double> out;
        for (double z = side.next_abscissa(); z <= zmax; z = side.next_abscissa()) out.push_back(z);
        return out;
    };
    const std::vector<double> jp = jumps_upto(pos, zmax_pos);
    const std::vector<double> jn = jumps_upto(neg, zmax_neg);

    std::vector<double> values;
    values.reserve(z_grid.size());
    for (double z : z_grid) {
        if (z >= 0.0) {
            const auto count = std::upper_bound(jp.begin(), jp.end(), z) - jp.begin();
            values.push_back(p.slope_pos * L * z + p.jump_pos * static_cast<double>(count));
        } else {
            const auto count = std::lower_bound(jn.begin(), jn.end(), -z) - jn.begin();
            values.push_back(p.slope_neg * L * -z + p.jump_neg * static_cast<double>(count));
        }
    }
    return values;
}

struct LimitQuantiles {
    double q_lo{0.0};
    double q_hi{0.0};
    std::size_t n_mc{0};
    double tail_tol{0.0};
    std::vector<double> draws; // sorted
};

// Linear interpolation between order statistics.
[[nodiscard]] inline double empirical_quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("empirical_quantile: empty sample");
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(h));
    if (i + 1 >= sorted.size()) return sorted.back();
    return sorted[i] + (h - static_cast<double>(i)) * (sorted[i + 1] - sorted[i]);
}

// level is the miscoverage: returns the level/2 and 1 - level/2 quantiles of
// argsup l(z). Draw i uses stream i under a seed taken from rng, so results do
// not depend on the thread count.
[[nodiscard]] inline LimitQuantiles limit_quantiles(const LimitLawParams& p, double level,
                                                    std::size_t n_mc, RngStream& rng,
                                                    const LimitSamplerOptions& opt = {},
                                                    unsigned threads = 0) {
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("limit_quantiles: level must lie in (0, 1)");
    if (n_mc < 1000) throw std::invalid_argument("limit_quantiles: n_mc must be >= 1000");
    const std::uint64_t base = rng();
    std::vector<double> draws(n_mc);
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_mc));
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n_mc; i += threads) {
                    RngStream r(base, i);
                    draws[i] = sample_limit_argsup(p, 1.0, r, opt).z_star;
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::sort(draws.begin(), draws.end());
    LimitQuantiles q;
    q.q_lo = empirical_quantile(draws, level / 2.0);
    q.q_hi = empirical_quantile(draws, 1.0 - level / 2.0);
    q.n_mc = n_mc;
    q.tail_tol = opt.tail_tol;
    q.draws = std::move(draws);
    return q;
}

} // namespace obm
