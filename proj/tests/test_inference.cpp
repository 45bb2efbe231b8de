#include "checks.hpp"
#include "obm/inference.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace obm;

namespace {

const ModelParams kFig{0.5, 0.2, 0.0};

TEST(LocalTime, CountingExamples) {
    EXPECT_EQ(local_time_estimator(PathSample({1.0, 2.0, 1.5, 3.0}), 0.0), 0.0);
    std::vector<double> alt;
    for (int k = 0; k <= 100; ++k) alt.push_back(k % 2 ? 0.1 : -0.1);
    EXPECT_DOUBLE_EQ(local_time_estimator(PathSample(alt), 0.0), 10.0);
    // Touching the level is not a sign change.
    EXPECT_EQ(local_time_estimator(PathSample({-1.0, 0.0, 1.0}), 0.0), 0.0);
}

TEST(LocalTime, TranslationEquivariant) {
    RngStream rng(90, 0);
    const PathSample path = simulate_path(kFig, 1000, 0.0, rng);
    std::vector<double> shifted = path.values();
    for (double& v : shifted) v += 0.75;
    EXPECT_EQ(local_time_estimator(path, 0.01), local_time_estimator(PathSample(shifted), 0.76));
}

TEST(LocalTime, DistributionStableUnderRefinement) {
    // Coupled refinement: the n = 1000 path is every fourth point of the n = 4000 path.
    std::vector<double> coarse, fine;
    for (std::uint64_t r = 0; r < 500; ++r) {
        RngStream rng(91, r);
        const PathSample path = simulate_path(kFig, 4000, 0.0, rng);
        std::vector<double> sub;
        for (std::size_t k = 0; k <= 4000; k += 4) sub.push_back(path[k]);
        fine.push_back(local_time_estimator(path, 0.0));
        coarse.push_back(local_time_estimator(PathSample(sub), 0.0));
    }
    EXPECT_GT(testkit::ks_two_sample(coarse, fine).p_value, 0.01);
}

TEST(LocalTime, CrossingScaleMatchesOccupationProxy) {
    double raw = 0.0, occ = 0.0;
    for (std::uint64_t r = 0; r < 200; ++r) {
        RngStream rng(92, r);
        const PathSample path = simulate_path(kFig, 4000, 0.0, rng);
        raw += local_time_estimator(path, 0.0);
        occ += occupation_local_time(path, kFig, 0.02);
    }
    const double ratio = raw / occ;
    EXPECT_NEAR(ratio, crossing_count_scale(0.5, 0.2), 0.15 * crossing_count_scale(0.5, 0.2));
    EXPECT_NEAR(crossing_count_scale(1.0, 1.0), std::sqrt(2.0 / std::numbers::pi), 1e-15);
}

TEST(Riemann, IdentitiesAndAdditivity) {
    RngStream rng(93, 0);
    const PathSample path = simulate_path(kFig, 1000, 0.0, rng);
    EXPECT_EQ(riemann_statistic(path, 0.0, [](double) { return 0.0; }), 0.0);
    const double n = 1000.0;
    const double via_f = riemann_statistic(path, 0.0, LambdaWeight{0.5, 0.2});
    EXPECT_NEAR(via_f, std::sqrt(2.0 * std::numbers::pi / n) * lambda_n_statistic(path, kFig, 1.0) / std::sqrt(n),
                1e-12 * std::max(1.0, via_f));
    const double a = riemann_statistic(path, 0.0, IndicatorWindow{-1.0, 0.5});
    const double b = riemann_statistic(path, 0.0, IndicatorWindow{0.5, 2.0});
    const double ab = riemann_statistic(path, 0.0, IndicatorWindow{-1.0, 2.0});
    EXPECT_GE(a, 0.0);
    EXPECT_NEAR(a + b, ab, 1e-12);
    EXPECT_THROW((void)riemann_statistic(path, 0.0, IndicatorWindow{}, 1.2), std::invalid_argument);
}

TEST(Riemann, NestedWindowRatio) {
    const auto r = checks::riemann_ratio(4000, 100, 94);
    EXPECT_NEAR(r.mean_ratio, 0.5, 0.075);
}

TEST(Interval, FormulaAndDegenerateCase) {
    const auto r = confidence_interval(0.003, 0.8, 1000, -3.1, 2.4, 0.1);
    EXPECT_NEAR(r.ci_lo, 0.0, 1e-15);
    EXPECT_NEAR(r.ci_hi, 0.006875, 1e-15);
    EXPECT_FALSE(r.degenerate);
    EXPECT_LE(r.ci_lo, r.rho_hat);
    EXPECT_GE(r.ci_hi, r.rho_hat);

    const auto d = confidence_interval(0.003, 0.0, 1000, -3.1, 2.4, 0.1);
    EXPECT_TRUE(d.degenerate);
    EXPECT_EQ(d.ci_lo, -INFINITY);
    EXPECT_EQ(d.ci_hi, INFINITY);

    const auto w2 = confidence_interval(0.003, 0.8, 2000, -3.1, 2.4, 0.1);
    EXPECT_NEAR(w2.ci_hi - w2.ci_lo, 0.5 * (r.ci_hi - r.ci_lo), 1e-15);

    EXPECT_THROW((void)confidence_interval(0.0, -0.1, 1000, -1.0, 1.0, 0.1), std::domain_error);
    EXPECT_THROW((void)confidence_interval(0.0, 0.5, 1000, 1.0, -1.0, 0.1), std::invalid_argument);
    EXPECT_THROW((void)confidence_interval(0.0, 0.5, 1000, -1.0, 1.0, 1.5), std::invalid_argument);
}

} // namespace
