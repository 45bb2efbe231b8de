#include "checks.hpp"
#include "obm/sampler.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace obm;

namespace {

TEST(Rng, ReproducibleAndStreamSeparated) {
    RngStream a(5, 1), b(5, 1), c(5, 2), d(6, 1);
    bool differs_c = false, differs_d = false;
    for (int i = 0; i < 100; ++i) {
        const auto va = a(), vb = b(), vc = c(), vd = d();
        EXPECT_EQ(va, vb);
        differs_c |= va != vc;
        differs_d |= va != vd;
    }
    EXPECT_TRUE(differs_c);
    EXPECT_TRUE(differs_d);
}

TEST(Rng, UniformIsOpenAndNormalMoments) {
    RngStream r(9, 0);
    double sum = 0.0, sq = 0.0;
    const int m = 200000;
    for (int i = 0; i < m; ++i) {
        const double u = r.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        const double z = r.normal();
        sum += z;
        sq += z * z;
    }
    EXPECT_NEAR(sum / m, 0.0, 5.0 / std::sqrt(m));
    EXPECT_NEAR(sq / m, 1.0, 0.02);
}

TEST(Rng, UniformPassesKs) {
    RngStream r(10, 3);
    std::vector<double> u(50000);
    for (auto& v : u) v = r.uniform();
    EXPECT_GT(testkit::ks_one_sample(u, [](double x) { return x; }).p_value, 0.001);
}

TEST(Rng, ChildStreamsDiffer) {
    RngStream r(1, 0);
    RngStream copy = r;
    RngStream c1 = r.split(1);
    RngStream c1_again = copy.split(1);
    EXPECT_EQ(c1(), c1_again());
    RngStream c2 = r.split(1);
    EXPECT_NE(c1(), c2());
}

TEST(Sampler, KsAgainstTransitionCdf) {
    std::uint64_t seed = 20;
    for (const auto& s : checks::sampler_settings()) {
        const auto ks = checks::sampler_ks(s, 100000, seed++);
        EXPECT_GT(ks.p_value, 0.01) << "alpha=" << s.params.alpha << " D=" << ks.statistic;
    }
}

TEST(Sampler, AcceptanceRateIsInverseEnvelopeConstant) {
    const ModelParams p{0.5, 0.2, 0.0};
    RngStream rng(21, 0);
    SamplerStats stats;
    while (stats.proposals < 100000) (void)sample_transition(p, 1e-3, 0.0, rng, &stats);
    const double rate = static_cast<double>(stats.accepted) / static_cast<double>(stats.proposals);
    EXPECT_NEAR(rate, 1.0 / 3.5714, 0.01);
}

TEST(Path, SingleStepAndDeterminism) {
    const ModelParams p{0.5, 0.2, 0.0};
    RngStream a(3, 4), b(3, 4);
    const PathSample path = simulate_path(p, 1, 0.25, a);
    ASSERT_EQ(path.n(), 1u);
    EXPECT_EQ(path[0], 0.25);
    EXPECT_EQ(path[1], sample_transition(p, 1.0, 0.25, b));

    RngStream c(8, 8), d(8, 8);
    EXPECT_EQ(simulate_path(p, 500, 0.0, c), simulate_path(p, 500, 0.0, d));
}

TEST(Path, RejectsBadInput) {
    RngStream r(1, 1);
    EXPECT_THROW((void)simulate_path({0.5, 0.2, 0.0}, 0, 0.0, r), std::invalid_argument);
    EXPECT_THROW((void)simulate_path({0.5, 0.2, 0.0}, 10, NAN, r), std::invalid_argument);
    EXPECT_THROW((void)simulate_path({-0.5, 0.2, 0.0}, 10, 0.0, r), std::domain_error);
    EXPECT_THROW(PathSample({1.0}), std::invalid_argument);
    EXPECT_THROW(PathSample({1.0, INFINITY}), std::invalid_argument);
}

TEST(Path, QuadraticVariationOfBrownianMotion) {
    const ModelParams p{1.0, 1.0, 0.3};
    double total = 0.0;
    for (int r = 0; r < 100; ++r) {
        RngStream rng(30, static_cast<std::uint64_t>(r));
        const PathSample path = simulate_path(p, 1000, 0.0, rng);
        for (std::size_t k = 1; k <= path.n(); ++k) total += (path[k] - path[k - 1]) * (path[k] - path[k - 1]);
    }
    EXPECT_NEAR(total / 100.0, 1.0, 0.15);
}

TEST(Path, OccupationWeightedVolatilityAboveThreshold) {
    const ModelParams p{0.5, 0.2, 0.0};
    double ratio_sum = 0.0;
    int used = 0;
    for (int r = 0; r < 200; ++r) {
        RngStream rng(31, static_cast<std::uint64_t>(r));
        const PathSample path = simulate_path(p, 1000, 0.0, rng);
        double qv = 0.0, count = 0.0;
        for (std::size_t k = 1; k <= path.n(); ++k)
            if (path[k - 1] >= 5.0 * 0.2 * std::sqrt(1e-3)) {  // clear of the threshold
                qv += (path[k] - path[k - 1]) * (path[k] - path[k - 1]);
                count += 1.0;
            }
        if (count == 0.0) continue;
        ratio_sum += qv / count * 1000.0;
        ++used;
    }
    EXPECT_NEAR(ratio_sum / used, 0.04, 0.004);
}

} // namespace
