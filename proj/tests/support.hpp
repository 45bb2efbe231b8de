#pragma once

// Shared test helpers: Kolmogorov-Smirnov tests and a long-double density oracle.

#include "obm/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace obm::testkit {

// Asymptotic Kolmogorov tail Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
inline double kolmogorov_tail(double lambda) {
    if (lambda < 0.2) return 1.0;
    double sum = 0.0, sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-16) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic{0.0};
    double p_value{1.0};
};

// One-sample test against a continuous CDF (Stephens' small-sample correction).
inline KsResult ks_one_sample(std::vector<double> xs, const std::function<double(double)>& cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    const double rn = std::sqrt(n);
    return {d, kolmogorov_tail((rn + 0.12 + 0.11 / rn) * d)};
}

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d)};
}

// The four-regime density written out directly in long double.
inline long double density_oracle(const ModelParams& p, long double t, long double x, long double y) {
    const long double a = p.alpha, b = p.beta, r = p.rho;
    const long double c = (a - b) / (a + b);
    const long double pi = std::numbers::pi_v<long double>;
    const long double norm = 1.0L / std::sqrt(2.0L * pi * t);
    if (x < r && y <= r)
        return norm / a *
               (std::exp(-(y - x) * (y - x) / (2 * a * a * t)) -
                c * std::exp(-(y + x - 2 * r) * (y + x - 2 * r) / (2 * a * a * t)));
    if (x >= r && y > r)
        return norm / b *
               (std::exp(-(y - x) * (y - x) / (2 * b * b * t)) +
                c * std::exp(-(y + x - 2 * r) * (y + x - 2 * r) / (2 * b * b * t)));
    if (x < r && y > r) {
        const long double h = (y - r) / b - (x - r) / a;
        return 2 / (a + b) * a / b * norm * std::exp(-h * h / (2 * t));
    }
    const long double h = (y - r) / a - (x - r) / b;
    return 2 / (a + b) * b / a * norm * std::exp(-h * h / (2 * t));
}

} // namespace obm::testkit
