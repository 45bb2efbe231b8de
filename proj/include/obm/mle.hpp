#pragma once

// Argsup maximum-likelihood estimation of the threshold rho.
//
// ell_n is cadlag in theta with jumps only where rho0 + theta crosses an
// observed value, so on each interval [a, b) between consecutive breakpoints
// every pair keeps its density regime and ell_n is the restriction of one
// smooth function g_I, whose value at b is the left limit ell_n(b-).
//
// For fixed regime each pair's log-density is either monotone in rho
// (regimes 1, 2) or a concave quadratic in rho (regimes 3, 4). Summing
// per-pair suprema over a theta range gives a rigorous upper bound of ell_n
// and of its left limits there, which drives a best-first branch-and-bound.

#include "obm/errors.hpp"
#include "obm/likelihood.hpp"
#include "obm/model.hpp"
#include "obm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace obm {

struct SearchWindow {
    double lo{-1.0};
    double hi{1.0};
};

// Sorted distinct {X_k - rho0 in window} together with the window endpoints and 0.
[[nodiscard]] inline std::vector<double> breakpoints(const PathSample& path, double rho0,
                                                     SearchWindow window) {
    if (!std::isfinite(window.lo) || !std::isfinite(window.hi))
        throw std::domain_error("breakpoints: window must be bounded");
    std::vector<double> out{window.lo, window.hi};
    if (window.lo <= 0.0 && 0.0 <= window.hi) out.push_back(0.0);
    for (double v : path.values()) {
        const double b = v - rho0;
        if (b >= window.lo && b <= window.hi) out.push_back(b);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct MleOptions {
    SearchWindow window{};
    double grid_step{0.0};    // 0 selects 1 / (100 n)
    double refine_tol{1e-12};
    double tie_tol{1e-12};    // relative to max(1, |sup|)
    double edge_margin{1.0};  // required drop of ell_n at the window edges
    std::size_t max_ties{64};
};

struct ArgsupResult {
    double rho_hat{0.0};
    double theta_hat{0.0};
    double value{0.0};
    bool attained_as_left_limit{false};
    std::size_t candidates_examined{0};
    std::vector<double> ties;
    bool edge_warning{false};
    double edge_value{0.0};
    std::size_t intervals{0};
    std::size_t intervals_searched{0};
};

namespace detail {

// g_I restricted to one breakpoint interval with frozen pair regimes.
class IntervalModel {
public:
    IntervalModel(const PairTable& table, double theta_a, double theta_b) : table_(&table) {
        const ModelParams& p0 = table.params0();
        const double ra = p0.rho + theta_a;
        const double rb = p0.rho + theta_b;
        const ModelParams mid = p0.with_rho(0.5 * (ra + rb));
        constant_ = table.far_sum(ra, rb);
        table.for_each_near(ra, rb, [&](std::uint32_t k) {
            near_.push_back({k, regime_of(mid, table.x(k), table.y(k))});
        });
    }

    [[nodiscard]] double operator()(double theta) const {
        const ModelParams p = table_->params0().with_rho(table_->params0().rho + theta);
        CompensatedSum sum;
        sum.add(constant_);
        for (const auto& e : near_) sum.add(term(p, e));
        return sum.value();
    }

private:
    struct Entry {
        std::uint32_t k;
        Regime regime;
    };

    [[nodiscard]] double term(const ModelParams& p, const Entry& e) const {
        return log_regime_density(p, e.regime, table_->dt(), table_->x(e.k), table_->y(e.k)) -
               table_->base(e.k);
    }

    const PairTable* table_;
    double constant_{0.0};
    std::vector<Entry> near_;
};

struct Candidate {
    double theta;
    double value;
    bool left_limit;
};

template <class F>
Candidate golden_section_max(F&& f, double a, double b, double tol) {
    constexpr double kInvPhi = 0.6180339887498949;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = f(d);
        }
    }
    return fc >= fd ? Candidate{c, fc, false} : Candidate{d, fd, false};
}


// Upper bound of one pair's log-ratio term over rho in [ra, rb]: the range is
// cut at x and y, inside each piece the regime is fixed and the term is
// monotone (regimes 1, 2) or concave with a known vertex (regimes 3, 4).
inline double pair_sup(const PairTable& table, std::uint32_t k, double ra, double rb) {
    const ModelParams& p0 = table.params0();
    const double x = table.x(k), y = table.y(k), t = table.dt();
    double cuts[4] = {ra, 0.0, 0.0, 0.0};
    int m = 1;
    const double c1 = std::min(x, y), c2 = std::max(x, y);
    if (c1 > ra && c1 < rb) cuts[m++] = c1;
    if (c2 > ra && c2 < rb && c2 != c1) cuts[m++] = c2;
    cuts[m++] = rb;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i + 1 < m; ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        const Regime r = regime_of(p0.with_rho(0.5 * (a + b)), x, y);
        const double fa = log_regime_density(p0.with_rho(a), r, t, x, y);
        const double fb = log_regime_density(p0.with_rho(b), r, t, x, y);
        double s = std::max(fa, fb);
        if (r == Regime::Up || r == Regime::Down) {
            const double ia = r == Regime::Up ? 1.0 / p0.beta : 1.0 / p0.alpha;
            const double ib = r == Regime::Up ? 1.0 / p0.alpha : 1.0 / p0.beta;
            const double ha = (y - a) * ia - (x - a) * ib;
            const double hb = (y - b) * ia - (x - b) * ib;
            if (ha * hb <= 0.0) {
                const double ratio = r == Regime::Up ? p0.alpha / p0.beta : p0.beta / p0.alpha;
                s = std::log(2.0 / (p0.alpha + p0.beta) * ratio) - kLogSqrt2Pi - 0.5 * std::log(t);
            }
        }
        best = std::max(best, s);
    }
    return best - table.base(k);
}

inline double range_upper_bound(const PairTable& table, double theta_a, double theta_b) {
    const double ra = table.params0().rho + theta_a;
    const double rb = table.params0().rho + theta_b;
    double ub = table.far_sum(ra, rb);
    table.for_each_near(ra, rb, [&](std::uint32_t k) { ub += pair_sup(table, k, ra, rb); });
    return ub + 1e-9 * (1.0 + std::abs(ub));
}

} // namespace detail

// Best-first branch-and-bound over the window. A node is a theta range with a
// rigorous upper bound of ell_n (values and left limits) on it; nodes are
// split at breakpoints until they lie inside one breakpoint interval, then at
// midpoints down to 64 grid steps, where a dense grid plus golden-section
// refinement is run on the fixed-regime restriction.
[[nodiscard]] inline ArgsupResult argsup_mle(const PathSample& path, const ModelParams& params0,
                                             const MleOptions& opt = {}) {
    params0.validate();
    detail::require_path(path);
    const SearchWindow w = opt.window;
    if (!std::isfinite(w.lo) || !std::isfinite(w.hi) || !(w.lo < w.hi))
        throw std::domain_error("argsup_mle: degenerate search window");
    const auto n = static_cast<double>(path.n());
    const double h = opt.grid_step > 0.0 ? opt.grid_step : 1.0 / (100.0 * n);
    if (h > 0.1 / n * (1.0 + 1e-12))
        throw std::invalid_argument("argsup_mle: grid_step must be <= 0.1 / n");

    const PairTable table(path, params0);
    const std::vector<double> bps = breakpoints(path, params0.rho, w);
    auto is_breakpoint = [&](double th) { return std::binary_search(bps.begin(), bps.end(), th); };

    ArgsupResult res;
    res.intervals = bps.size() - 1;
    std::vector<detail::Candidate> cands;
    double tol = opt.tie_tol;
    auto better = [&](const detail::Candidate& a, const detail::Candidate& b) {
        if (a.value > b.value + tol) return true;
        if (b.value > a.value + tol) return false;
        const double aa = std::abs(a.theta), ab = std::abs(b.theta);
        if (aa != ab) return aa < ab;
        return a.theta < b.theta;
    };
    detail::Candidate best{0.0, -std::numeric_limits<double>::infinity(), false};
    auto offer = [&](detail::Candidate c) {
        if (c.theta == 0.0 && !c.left_limit) c.value = 0.0;
        ++res.candidates_examined;
        cands.push_back(c);
        if (!std::isfinite(best.value) || better(c, best)) best = c;
        tol = opt.tie_tol * std::max(1.0, std::abs(best.value));
    };

    const double value_at_lo = table.evaluate(w.lo);
    const double value_at_hi = table.evaluate(w.hi);
    offer({w.lo, value_at_lo, false});
    offer({w.hi, value_at_hi, false});
    if (w.lo < 0.0 && 0.0 < w.hi) offer({0.0, 0.0, false});

    struct Node {
        double ub;
        double a;
        double b;
        bool operator<(const Node& o) const { return ub < o.ub; }
    };
    std::priority_queue<Node> queue;
    queue.push({detail::range_upper_bound(table, w.lo, w.hi), w.lo, w.hi});

    while (!queue.empty()) {
        const Node node = queue.top();
        queue.pop();
        if (node.ub <= best.value + tol) break;
        const auto first = std::upper_bound(bps.begin(), bps.end(), node.a);
        const auto last = std::lower_bound(bps.begin(), bps.end(), node.b);
        if (first < last) {
            // Split at the interior breakpoint closest to the midpoint.
            const double mid = 0.5 * (node.a + node.b);
            auto it = std::lower_bound(first, last, mid);
            if (it == last || (it != first && mid - *(it - 1) < *it - mid)) --it;
            const double c = *it;
            offer({c, table.evaluate(c), false});
            offer({c, table.evaluate(c, true), true});
            queue.push({detail::range_upper_bound(table, node.a, c), node.a, c});
            queue.push({detail::range_upper_bound(table, c, node.b), c, node.b});
            continue;
        }
        const double width = node.b - node.a;
        if (width > 64.0 * h) {
            const double mid = 0.5 * (node.a + node.b);
            offer({mid, table.evaluate(mid), false});
            queue.push({detail::range_upper_bound(table, node.a, mid), node.a, mid});
            queue.push({detail::range_upper_bound(table, mid, node.b), mid, node.b});
            continue;
        }
        ++res.intervals_searched;
        const detail::IntervalModel model(table, node.a, node.b);
        const bool right_is_break = is_breakpoint(node.b);
        const auto m = static_cast<std::size_t>(std::max(2.0, std::ceil(width / h)));
        std::vector<double> grid(m + 1), vals(m + 1);
        for (std::size_t i = 0; i <= m; ++i) {
            grid[i] = i == m ? node.b
                             : node.a + width * static_cast<double>(i) / static_cast<double>(m);
            vals[i] = model(grid[i]);
        }
        for (std::size_t i = 0; i <= m; ++i) {
            const bool left_ok = i == 0 || vals[i] >= vals[i - 1];
            const bool right_ok = i == m || vals[i] >= vals[i + 1];
            if (!(left_ok && right_ok)) continue;
            if (i == 0 && node.a == w.lo && !is_breakpoint(node.a)) continue;
            detail::Candidate c{grid[i], vals[i], false};
            if (i > 0 && i < m) {
                const detail::Candidate g =
                    detail::golden_section_max(model, grid[i - 1], grid[i + 1], opt.refine_tol);
                if (g.value > c.value) c = g;
            }
            c.left_limit = c.theta == node.b && right_is_break;
            offer(c);
        }
    }

    res.theta_hat = best.theta;
    res.rho_hat = params0.rho + best.theta;
    res.value = best.value;
    res.attained_as_left_limit = best.left_limit;
    for (const auto& c : cands) {
        if (res.ties.size() >= opt.max_ties) break;
        if (c.theta != best.theta && std::abs(c.value - best.value) <= tol &&
            std::find(res.ties.begin(), res.ties.end(), c.theta) == res.ties.end())
            res.ties.push_back(c.theta);
    }
    res.edge_value = std::max(value_at_lo, value_at_hi);
    res.edge_warning = best.theta == w.lo || best.theta == w.hi ||
                       res.edge_value > best.value - opt.edge_margin;
    return res;
}

} // namespace obm
