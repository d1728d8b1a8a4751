#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kkreg/kernels.hpp"

using namespace kkreg;

TEST(SmoothingKernel, ProfileValues)
{
    EXPECT_DOUBLE_EQ(eval_smoothing({SmoothingFamily::epanechnikov}, 0.0), 0.75);
    EXPECT_DOUBLE_EQ(eval_smoothing({SmoothingFamily::epanechnikov}, 2.0), 0.0);
    EXPECT_DOUBLE_EQ(eval_smoothing({SmoothingFamily::triangle}, 0.5), 0.5);
    EXPECT_DOUBLE_EQ(eval_smoothing({SmoothingFamily::boxcar}, -1.0), 0.5);
    EXPECT_DOUBLE_EQ(eval_smoothing({SmoothingFamily::boxcar}, 1.0001), 0.0);
}

TEST(SmoothingKernel, NonnegativeAndCompact)
{
    for (auto fam : {SmoothingFamily::epanechnikov, SmoothingFamily::triangle, SmoothingFamily::boxcar}) {
        const SmoothingKernel k{fam};
        for (double u = -3.0; u <= 3.0; u += 0.01) {
            EXPECT_GE(k(u), 0.0);
            if (std::abs(u) > 1.0) {
                EXPECT_EQ(k(u), 0.0);
            }
        }
    }
}

TEST(SmoothingKernel, IntegratesToOne)
{
    constexpr int cells = 10000;
    for (auto fam : {SmoothingFamily::epanechnikov, SmoothingFamily::triangle, SmoothingFamily::boxcar}) {
        const SmoothingKernel k{fam};
        const double w = 2.0 / cells;
        double s = 0.0;
        for (int i = 0; i < cells; ++i)
            s += k(-1.0 + (i + 0.5) * w) * w;
        EXPECT_NEAR(s, 1.0, 1e-3) << to_string(fam);
    }
}

// Closed-form radial constants: 1 / (|S^{k-1}| * int_0^1 B(r) r^{k-1} dr).
TEST(SmoothingKernel, RadialNormalizationMatchesClosedForm)
{
    for (std::size_t k = 1; k <= 10; ++k) {
        const double kk = static_cast<double>(k);
        const double sphere = 2.0 * std::pow(std::numbers::pi, kk / 2.0) / std::tgamma(kk / 2.0);
        const double epa = 0.75 * (1.0 / kk - 1.0 / (kk + 2.0));
        const double tri = 1.0 / kk - 1.0 / (kk + 1.0);
        const double box = 0.5 / kk;
        EXPECT_NEAR(SmoothingKernel{SmoothingFamily::epanechnikov}.radial_normalization(k), 1.0 / (sphere * epa), 1e-9);
        EXPECT_NEAR(SmoothingKernel{SmoothingFamily::triangle}.radial_normalization(k), 1.0 / (sphere * tri), 1e-9);
        EXPECT_NEAR(SmoothingKernel{SmoothingFamily::boxcar}.radial_normalization(k), 1.0 / (sphere * box), 1e-9);
    }
    EXPECT_NEAR(SmoothingKernel{}.radial_normalization(1), 1.0, 1e-12);
    EXPECT_THROW(SmoothingKernel{}.radial_normalization(0), std::invalid_argument);
}

TEST(SmoothingKernel, FamilyNames)
{
    for (auto fam : {SmoothingFamily::epanechnikov, SmoothingFamily::triangle, SmoothingFamily::boxcar})
        EXPECT_EQ(smoothing_family_from_string(to_string(fam)), fam);
    EXPECT_THROW(smoothing_family_from_string("gaussian"), std::invalid_argument);
    EXPECT_EQ(regression_family_from_string("triangle"), RegressionFamily::triangle);
}

TEST(RegressionKernel, Values)
{
    const auto K = RegressionKernel::triangle();
    EXPECT_EQ(eval_regression(K, 0.0), 1.0);
    EXPECT_EQ(eval_regression(K, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(eval_regression(K, 0.25), 0.75);
    EXPECT_EQ(eval_regression(K, 7.0), 0.0);
    EXPECT_THROW(eval_regression(K, -0.1), std::invalid_argument);
}

TEST(RegressionKernel, DeclaredConstants)
{
    const auto K = RegressionKernel::triangle();
    EXPECT_EQ(K.lipschitz, 1.0);
    EXPECT_EQ(K.lower, 0.5);
    EXPECT_EQ(K.r, 0.5);
    EXPECT_EQ(K.R, 1.0);
    EXPECT_THROW(RegressionKernel::with_constants(1.0, 1.0, 0.5, 1.0), std::invalid_argument);
    EXPECT_THROW(RegressionKernel::with_constants(1.0, 0.5, 2.0, 1.0), std::invalid_argument);
}

TEST(RegressionKernel, NonincreasingOnSortedSamples)
{
    const auto K = RegressionKernel::triangle();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    std::vector<double> xs(5000);
    for (auto& x : xs)
        x = u(rng);
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 1; i < xs.size(); ++i)
        EXPECT_LE(K(xs[i]), K(xs[i - 1]));
}

TEST(VerifyA2, ShippedTriangleHasNoViolations)
{
    const auto rep = verify_a2(RegressionKernel::triangle(), 100000);
    EXPECT_EQ(rep.violations(), 0u);
    EXPECT_LE(rep.max_lipschitz_ratio, 1.0 + 1e-9);
    EXPECT_GT(rep.max_lipschitz_ratio, 0.99);
}

TEST(VerifyA2, OverclaimedLowerBoxIsDetected)
{
    const auto claimed = RegressionKernel::with_constants(1.0, 0.5, 2.0, 3.0);
    const auto rep = verify_a2(claimed, 1000);
    EXPECT_GE(rep.lower_box_violations, 1u);
    EXPECT_LT(claimed(1.5), claimed.lower);
}

TEST(VerifyA2, EndpointsOnly)
{
    const auto rep = verify_a2(RegressionKernel::triangle(), 2);
    EXPECT_EQ(rep.violations(), 0u);
    EXPECT_THROW(verify_a2(RegressionKernel::triangle(), 1), std::invalid_argument);
}

TEST(VerifyA2, UnderclaimedLipschitzIsDetected)
{
    const auto claimed = RegressionKernel::with_constants(0.5, 0.5, 0.5, 1.0);
    EXPECT_GT(verify_a2(claimed, 1000).lipschitz_violations, 0u);
}
