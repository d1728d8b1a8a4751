#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kkreg/synthetic.hpp"
#include "kkreg/theory.hpp"

using namespace kkreg;

namespace {

RateSpec spec(double beta, double d, double k, double m, double n, bool noiseless = false)
{
    return {beta, d, k, m, n, noiseless};
}

//! Uniform density on [0, 1], tilted so that its L1 distance from the flat one is `delta`.
GridDensity offset_density(const GridSpec& g, double delta)
{
    GridDensity p{g, std::vector<double>(g.total_cells(), 1.0)};
    const std::size_t half = p.values.size() / 2;
    for (std::size_t i = 0; i < p.values.size(); ++i)
        p.values[i] += i < half ? delta : -delta; //! unit total volume, so the L1 shift is delta
    return p;
}

std::vector<GridDensity> beta_densities(std::size_t count, std::size_t n, std::uint64_t seed)
{
    BetaTask task;
    task.n_per_bag = n;
    task.counts = {count, 1, 1};
    auto ds = task.generate(seed);
    ds.bags.resize(count);
    const double b = default_bandwidth(n, 1);
    const auto grid = auto_grid(ds.bags, 1024, b, 1.0);
    std::vector<const SampleBag*> ptrs;
    for (const auto& bag : ds.bags)
        ptrs.push_back(&bag);
    return kde_fit_all(ptrs, b, {}, grid);
}

} // namespace

TEST(RiskRate, MLimited)
{
    const auto r = risk_rate(spec(1, 1, 1, 1e6, 1e19));
    EXPECT_EQ(r.regime, Regime::m_limited);
    EXPECT_EQ(r.exponent_base, 'm');
    EXPECT_NEAR(r.exponent, -1.0 / 3.0, 1e-15);
    EXPECT_NEAR(r.h_star, 1e-2, 1e-15);
}

// n = 1e12 is below the m^{(beta+d+1)(k+2)/(2 beta+d)} = 1e18 threshold for m = 1e6.
TEST(RiskRate, NLimited)
{
    const auto r = risk_rate(spec(1, 1, 1, 1e6, 1e12));
    EXPECT_EQ(r.regime, Regime::n_limited);
    EXPECT_EQ(r.exponent_base, 'n');
    EXPECT_NEAR(r.exponent, -1.0 / 9.0, 1e-15);
    EXPECT_NEAR(r.h_star, std::pow(1e12, -1.0 / 9.0), 1e-15);
    EXPECT_EQ(risk_rate(spec(1, 1, 1, 1e6, 1e3)).regime, Regime::n_limited);
}

TEST(RiskRate, Noiseless)
{
    const auto r = risk_rate(spec(1, 1, 1, 1e4, 1e30, true));
    EXPECT_EQ(r.regime, Regime::m_limited);
    EXPECT_NEAR(r.exponent, -0.5, 1e-15);
    // threshold n >= m^{(beta+d+1)/((beta+d)(k+2))} = m^{1/2}
    EXPECT_EQ(risk_rate(spec(1, 1, 1, 1e4, 99.0, true)).regime, Regime::n_limited);
    EXPECT_EQ(risk_rate(spec(1, 1, 1, 1e4, 1000.0, true)).regime, Regime::m_limited);
    EXPECT_NEAR(risk_rate(spec(1, 1, 1, 1e4, 99.0, true)).exponent, -1.0 / 9.0, 1e-15);
}

TEST(RiskRate, InvalidSpecs)
{
    EXPECT_THROW(risk_rate(spec(0.0, 1, 1, 10, 10)), std::invalid_argument);
    EXPECT_THROW(risk_rate(spec(1.5, 1, 1, 10, 10)), std::invalid_argument);
    EXPECT_THROW(risk_rate(spec(1, 0, 1, 10, 10)), std::invalid_argument);
    EXPECT_THROW(risk_rate(spec(1, 1, 1.5, 10, 10)), std::invalid_argument);
    EXPECT_THROW(risk_rate(spec(1, 1, 1, 0.5, 10)), std::invalid_argument);
}

TEST(RiskRate, ExponentMonotonicity)
{
    for (double d : {0.5, 1.0, 3.0}) {
        double prev = 0.0;
        for (double beta : {0.2, 0.4, 0.6, 0.8, 1.0}) {
            const double e = risk_rate(spec(beta, d, 1, 1e3, 1e300)).exponent;
            EXPECT_LT(e, prev);
            prev = e;
        }
    }
    for (double beta : {0.3, 1.0}) {
        double prev = -1.0;
        for (double d : {0.5, 1.0, 2.0, 4.0}) {
            const auto r = risk_rate(spec(beta, d, 1, 1e3, 1e300));
            ASSERT_EQ(r.regime, Regime::m_limited);
            EXPECT_GT(r.exponent, prev);
            EXPECT_LT(r.exponent, 0.0);
            prev = r.exponent;
        }
    }
    // n-limited: worse with larger d or k, better with larger beta
    const auto base = risk_rate(spec(0.5, 1, 1, 1e12, 10));
    ASSERT_EQ(base.regime, Regime::n_limited);
    EXPECT_GT(risk_rate(spec(0.5, 2, 1, 1e12, 10)).exponent, base.exponent);
    EXPECT_GT(risk_rate(spec(0.5, 1, 3, 1e12, 10)).exponent, base.exponent);
    EXPECT_LT(risk_rate(spec(0.9, 1, 1, 1e12, 10)).exponent, base.exponent);
}

TEST(RiskRate, SelfConsistencyOnRandomSpecs)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ub(0.05, 1.0), ud(0.1, 5.0), ul(0.0, 12.0);
    std::uniform_int_distribution<int> uk(1, 5);
    for (int i = 0; i < 500; ++i) {
        const RateSpec s = spec(ub(rng), ud(rng), uk(rng), std::pow(10.0, ul(rng)), std::pow(10.0, ul(rng)));
        const auto r = risk_rate(s);
        EXPECT_GT(r.h_star, 0.0);
        EXPECT_LE(r.h_star, 1.0);
        EXPECT_LT(r.exponent, 0.0);
        const double lhs = std::sqrt(1.0 / (s.m * std::pow(r.h_star, s.d)));
        const double rhs = 1.0 / (std::pow(r.h_star, s.d + 1.0) * std::pow(s.n, 1.0 / (s.k + 2.0)));
        if (r.regime == Regime::m_limited)
            EXPECT_GE(lhs, rhs * (1.0 - 1e-9));
        else
            EXPECT_LE(lhs, rhs * (1.0 + 1e-9));
    }
}

TEST(RiskRate, BoundaryCarriesAlternative)
{
    // exactly at the threshold n = m^3 for beta = d = k = 1
    const auto r = risk_rate(spec(1, 1, 1, 100, 1e6));
    ASSERT_TRUE(r.alternative.has_value());
    EXPECT_NE(r.alternative->regime, r.regime);
    EXPECT_FALSE(risk_rate(spec(1, 1, 1, 100, 1e12)).alternative.has_value());
}

TEST(SmallBall, Basics)
{
    const auto dens = beta_densities(40, 300, 1);
    EXPECT_EQ(small_ball_estimate(dens, dens[0], 2.0, Distance::l1), 1.0);
    std::vector<GridDensity> others(dens.begin() + 1, dens.end());
    EXPECT_EQ(small_ball_estimate(others, dens[0], 1e-12, Distance::l1), 0.0);
    EXPECT_THROW(small_ball_estimate(others, dens[0], 0.0, Distance::l1), std::invalid_argument);
    EXPECT_THROW(small_ball_estimate({}, dens[0], 1.0, Distance::l1), std::invalid_argument);
    const GridDensity foreign{GridSpec::uniform(1, 0.0, 1.0, 8), std::vector<double>(8, 1.0)};
    EXPECT_THROW(small_ball_estimate(dens, foreign, 1.0, Distance::l1), DataError);
}

TEST(SmallBall, MonotoneInRadius)
{
    const auto dens = beta_densities(60, 300, 2);
    double prev = 0.0;
    for (double r = 0.01; r < 2.0; r += 0.05) {
        const double p = small_ball_estimate(dens, dens[3], r, Distance::l1);
        EXPECT_GE(p, prev);
        prev = p;
    }
}

TEST(SmallBall, MatchesBruteForceCount)
{
    BetaTask task;
    task.n_per_bag = 200;
    task.counts = {500, 1, 1};
    auto ds = task.generate(3);
    ds.bags.resize(500);
    ds.bags.push_back(sample_beta(10.0, 3.0, 200, 99));
    const double b = default_bandwidth(200, 1);
    const auto grid = auto_grid(ds.bags, 1024, b, 1.0);
    std::vector<GridDensity> dens;
    for (std::size_t i = 0; i < 500; ++i)
        dens.push_back(kde_fit(ds.bags[i], b, {}, grid));
    const auto center = kde_fit(ds.bags.back(), b, {}, grid);
    std::size_t count = 0;
    for (const auto& p : dens) {
        double d = 0.0;
        for (std::size_t c = p.values.size(); c-- > 0;)
            d += std::abs(center.values[c] - p.values[c]);
        count += d * grid.cell_volume() <= 0.2;
    }
    EXPECT_EQ(small_ball_estimate(dens, center, 0.2, Distance::l1), static_cast<double>(count) / 500.0);
    EXPECT_GT(count, 0u);
}

TEST(DoublingDim, CountsHalving)
{
    const auto g = GridSpec::uniform(1, 0.0, 1.0, 100);
    const auto center = offset_density(g, 0.0);
    std::vector<GridDensity> dens;
    for (int i = 0; i < 10; ++i)
        dens.push_back(center);
    for (int i = 0; i < 10; ++i)
        dens.push_back(offset_density(g, 0.15));
    for (int i = 0; i < 20; ++i)
        dens.push_back(offset_density(g, 0.3));
    const auto est = doubling_dim_estimate(dens, {center}, {0.2, 0.4}, 0.5, Distance::l1);
    EXPECT_NEAR(est.d_hat, 1.0, 1e-12);
    EXPECT_EQ(est.retained_pairs, 2u);

    // duplicating the list keeps every ratio
    auto twice = dens;
    twice.insert(twice.end(), dens.begin(), dens.end());
    EXPECT_NEAR(doubling_dim_estimate(twice, {center}, {0.2, 0.4}, 0.5, Distance::l1).d_hat, est.d_hat, 1e-12);
}

TEST(DoublingDim, IdenticalDensitiesGiveZero)
{
    const auto g = GridSpec::uniform(1, 0.0, 1.0, 50);
    const std::vector<GridDensity> dens(12, offset_density(g, 0.0));
    EXPECT_EQ(doubling_dim_estimate(dens, {dens[0]}, {0.1, 0.5, 1.0}, 0.5, Distance::l1).d_hat, 0.0);
}

TEST(DoublingDim, DuplicationInvarianceOnBetaCurve)
{
    const auto dens = beta_densities(80, 400, 4);
    const std::vector<GridDensity> centers(dens.begin(), dens.begin() + 10);
    const auto a = doubling_dim_estimate(dens, centers, {0.4, 0.8}, 0.5, Distance::l1);
    auto twice = dens;
    twice.insert(twice.end(), dens.begin(), dens.end());
    const auto b = doubling_dim_estimate(twice, centers, {0.4, 0.8}, 0.5, Distance::l1);
    if (a.retained_pairs == b.retained_pairs) {
        EXPECT_NEAR(a.d_hat, b.d_hat, 1e-12);
    }
    EXPECT_GT(a.retained_pairs, 0u);
}

TEST(DoublingDim, Errors)
{
    const auto g = GridSpec::uniform(1, 0.0, 1.0, 50);
    const std::vector<GridDensity> dens{offset_density(g, 0.0), offset_density(g, 0.5)};
    EXPECT_THROW(doubling_dim_estimate(dens, {dens[0]}, {0.1}, 0.5, Distance::l1), std::invalid_argument);
    EXPECT_THROW(doubling_dim_estimate(dens, {dens[0]}, {0.1, 0.2}, 1.0, Distance::l1), std::invalid_argument);
    EXPECT_THROW(doubling_dim_estimate(dens, {dens[0]}, {0.1, 0.2}, 0.5, Distance::l1), NumericError);
}

TEST(KdeRiskStudy, Preconditions)
{
    const auto truth = uniform_unit_density();
    EXPECT_THROW(kde_l1_risk_study(truth, {100}, 1, {}, 1), std::invalid_argument);
    EXPECT_THROW(kde_l1_risk_study(truth, {100, 100, 200}, 1, {}, 1), std::invalid_argument);
    EXPECT_THROW(kde_l1_risk_study(truth, {100, 200, 300}, 0, {}, 1), std::invalid_argument);
}

TEST(KdeRiskStudy, TruthEqualToKdeRealizationHasZeroError)
{
    const std::vector<std::size_t> ns{100, 200, 400};
    const std::uint64_t seed = 31;
    const auto base = uniform_unit_density();
    const SmoothingKernel kernel;
    const auto grid = risk_study_grid(base, ns, kernel, 4096);
    // truth := the KDE the study itself will draw for n = 200, replicate 0
    const auto bag = base.sample(200, risk_study_seed(seed, 1, 0));
    const auto realization = kde_fit(bag, default_bandwidth(200, 1), kernel, grid);
    TrueDensity truth = base;
    truth.pdf = [&](std::span<const double> x) {
        const auto i = static_cast<std::size_t>(std::floor((x[0] - grid.lo[0]) / grid.width(0)));
        return realization.values[std::min(i, grid.cells[0] - 1)];
    };
    const auto study = kde_l1_risk_study(truth, ns, 1, kernel, seed);
    ASSERT_EQ(study.rows.size(), 3u);
    EXPECT_EQ(study.rows[1].n, 200u);
    EXPECT_EQ(study.rows[1].l1_error, 0.0);
    EXPECT_GT(study.rows[0].l1_error, 0.0);
}

TEST(KdeRiskStudy, ErrorDecreasesWithN)
{
    const auto study = kde_l1_risk_study(uniform_unit_density(), {200, 800, 3200}, 6, {}, 5);
    ASSERT_EQ(study.summary.size(), 3u);
    EXPECT_GT(study.summary[0].mean_error, study.summary[2].mean_error);
    EXPECT_LT(study.slope, 0.0);
}
