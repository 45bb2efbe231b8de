#pragma once

#include "obm/errors.hpp"
#include "obm/model.hpp"
#include "obm/rng.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace obm {

// Discrete observations X_0, X_{1/n}, ..., X_1 of one path.
class PathSample {
public:
    PathSample() = default;
    explicit PathSample(std::vector<double> values) : values_(std::move(values)) {
        if (values_.size() < 2)
            throw std::invalid_argument("PathSample: need at least two observations");
        for (double v : values_)
            if (!std::isfinite(v)) throw std::invalid_argument("PathSample: non-finite value");
    }

    [[nodiscard]] std::size_t n() const { return values_.empty() ? 0 : values_.size() - 1; }
    [[nodiscard]] double x0() const { return values_.front(); }
    [[nodiscard]] double dt() const { return 1.0 / static_cast<double>(n()); }
    [[nodiscard]] const std::vector<double>& values() const { return values_; }
    [[nodiscard]] double operator[](std::size_t k) const { return values_[k]; }

    friend bool operator==(const PathSample&, const PathSample&) = default;

private:
    std::vector<double> values_;
};

struct SamplerStats {
    std::size_t accepted{0};
    std::size_t proposals{0};
};

inline constexpr std::size_t kMaxRejectionProposals = 1'000'000;

// Exact draw from p_t(x, .) by rejection against the Gaussian envelope.
inline double sample_transition(const ModelParams& p, double t, double x, RngStream& rng,
                                SamplerStats* stats = nullptr) {
    const GaussianEnvelope env = envelope(p, t, x);
    for (std::size_t i = 1; i <= kMaxRejectionProposals; ++i) {
        const double y = env.mean + env.std * rng.normal();
        const double log_ratio = log_transition_density(p, t, x, y) - env.log_density(y);
        if (stats) ++stats->proposals;
        if (std::log(rng.uniform()) <= log_ratio) {
            if (stats) ++stats->accepted;
            return y;
        }
    }
    throw InternalFault("sample_transition: rejection cap reached");
}

inline PathSample simulate_path(const ModelParams& p, std::size_t n, double x0, RngStream& rng) {
    p.validate();
    if (n < 1) throw std::invalid_argument("simulate_path: n must be >= 1");
    if (!std::isfinite(x0)) throw std::invalid_argument("simulate_path: x0 must be finite");
    const double t = 1.0 / static_cast<double>(n);
    std::vector<double> values(n + 1);
    values[0] = x0;
    for (std::size_t k = 1; k <= n; ++k) values[k] = sample_transition(p, t, values[k - 1], rng);
    return PathSample(std::move(values));
}

} // namespace obm
