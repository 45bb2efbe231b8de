#pragma once

// Adaptive Gauss-Kronrod integration over a finite range split at known
// kinks of the integrand. Uses the 15/31-point rule from
// boost::math::quadrature::gauss_kronrod on single segments and a global
// worst-segment-first bisection driver. Boost's own recursive driver reports
// the per-segment error on the reference interval [-1, 1] without the
// half-width factor, which overstates errors on short pieces.

#include "obm/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <vector>

namespace obm {

struct QuadratureOptions {
    double tolerance{1e-12};     // relative to the L1 norm of each piece
    double abs_tolerance{1e-13}; // per piece
    unsigned max_segments{2000}; // per piece
    double error_limit{1e-9};    // absolute error estimate above which we throw
};

struct QuadratureResult {
    double value{0.0};
    double error{0.0};
};

namespace detail {

struct QuadSegment {
    double a, b, value, error, l1;
    bool operator<(const QuadSegment& o) const { return error < o.error; }
};

template <class F>
QuadSegment gk31_segment(F& f, double a, double b) {
    using boost::math::quadrature::gauss_kronrod;
    double err = 0.0, l1 = 0.0;
    const double v = gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0, &err, &l1);
    return {a, b, v, err * 0.5 * (b - a), l1};
}

template <class F>
QuadratureResult integrate_segment(F& f, double a, double b, const QuadratureOptions& opt) {
    std::priority_queue<QuadSegment> heap;
    heap.push(gk31_segment(f, a, b));
    double value = heap.top().value, error = heap.top().error, l1 = heap.top().l1;
    while (error > std::max(opt.tolerance * l1, opt.abs_tolerance) && heap.size() < opt.max_segments) {
        const QuadSegment s = heap.top();
        const double mid = 0.5 * (s.a + s.b);
        if (!(mid > s.a && mid < s.b)) break;
        heap.pop();
        const QuadSegment left = gk31_segment(f, s.a, mid);
        const QuadSegment right = gk31_segment(f, mid, s.b);
        value += left.value + right.value - s.value;
        error += left.error + right.error - s.error;
        l1 += left.l1 + right.l1 - s.l1;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to drop drift from the running updates.
    QuadratureResult r;
    while (!heap.empty()) {
        r.value += heap.top().value;
        r.error += heap.top().error;
        heap.pop();
    }
    return r;
}

} // namespace detail

template <class F>
QuadratureResult integrate_piecewise(F&& f, double lo, double hi, std::vector<double> kinks,
                                     const QuadratureOptions& opt = {}) {
    std::vector<double> cuts{lo};
    std::sort(kinks.begin(), kinks.end());
    for (double k : kinks)
        if (k > lo && k < hi && k > cuts.back()) cuts.push_back(k);
    cuts.push_back(hi);

    QuadratureResult total;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const QuadratureResult piece = detail::integrate_segment(f, cuts[i], cuts[i + 1], opt);
        total.value += piece.value;
        total.error += piece.error;
    }
    if (!std::isfinite(total.value) || total.error > opt.error_limit) {
        std::ostringstream os;
        os << "quadrature did not converge on [" << lo << ", " << hi << "]: value "
           << total.value << ", error estimate " << total.error << " (limit "
           << opt.error_limit << ")";
        throw NumericalError(os.str());
    }
    return total;
}

} // namespace obm
