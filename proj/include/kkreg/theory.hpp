#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "kkreg/density.hpp"
#include "kkreg/errors.hpp"
#include "kkreg/parallel.hpp"
#include "kkreg/rng.hpp"

namespace kkreg {

// ---------------------------------------------------------------------------
// Risk rates under a doubling dimension
// ---------------------------------------------------------------------------

struct RateSpec {
    double beta = 1.0; // Hoelder exponent of the regression functional, in (0, 1]
    double d = 1.0;    // doubling dimension of the meta-distribution
    double k = 1.0;    // dimension of each sample point
    double m = 1.0;    // number of training distributions
    double n = 1.0;    // points per distribution
    bool noiseless = false;

    void validate() const
    {
        if (!(beta > 0.0 && beta <= 1.0))
            throw std::invalid_argument("beta must lie in (0, 1]");
        if (!(d > 0.0) || !std::isfinite(d))
            throw std::invalid_argument("doubling dimension must be positive");
        if (!(k >= 1.0) || k != std::floor(k))
            throw std::invalid_argument("k must be a positive integer");
        if (!(m >= 1.0) || !std::isfinite(m) || !(n >= 1.0) || !std::isfinite(n))
            throw std::invalid_argument("m and n must be at least 1");
    }
};

enum class Regime { m_limited, n_limited };

inline std::string_view to_string(Regime r)
{
    return r == Regime::m_limited ? "m_limited" : "n_limited";
}

struct RateCandidate {
    Regime regime = Regime::m_limited;
    double h_star = 1.0;
    double exponent = 0.0; // risk = O(base^exponent), base is m or n per regime
};

struct RateResult {
    Regime regime = Regime::m_limited;
    double h_star = 1.0;
    char exponent_base = 'm';
    double exponent = 0.0;
    //! log of (left side / right side) of the regime condition; >= 0 selects m_limited.
    double log_dominance = 0.0;
    //! Set when the two sides of the regime condition are within a factor 2.
    std::optional<RateCandidate> alternative;
};

namespace detail {

inline RateCandidate m_candidate(const RateSpec& s)
{
    if (s.noiseless)
        return {Regime::m_limited, std::pow(s.m, -1.0 / (s.beta + s.d)), -1.0 / (s.beta + s.d)};
    return {Regime::m_limited, std::pow(s.m, -1.0 / (2.0 * s.beta + s.d)), -s.beta / (2.0 * s.beta + s.d)};
}

inline RateCandidate n_candidate(const RateSpec& s)
{
    const double denom = (s.k + 2.0) * (s.beta + s.d + 1.0);
    return {Regime::n_limited, std::pow(s.n, -1.0 / denom), -s.beta / denom};
}

} // namespace detail

//! log(sqrt(1/(m h^d)) / (1/(h^{d+1} n^{1/(k+2)}))): variance term over the density-estimation term.
inline double log_variance_over_density_term(const RateSpec& s, double h)
{
    const double lh = std::log(h);
    return -0.5 * (std::log(s.m) + s.d * lh) + (s.d + 1.0) * lh + std::log(s.n) / (s.k + 2.0);
}

//! Picks the regime and optimal h. With noise, the m-limited regime holds when the
//! variance term dominates the density-estimation term at h = m^{-1/(2 beta + d)},
//! i.e. n >= m^{(beta+d+1)(k+2)/(2 beta+d)}. Without noise the threshold is
//! n >= m^{(beta+d+1)/((beta+d)(k+2))}.
inline RateResult risk_rate(const RateSpec& spec)
{
    spec.validate();
    const RateCandidate mc = detail::m_candidate(spec);
    const RateCandidate nc = detail::n_candidate(spec);
    double log_dom = 0.0;
    if (spec.noiseless) {
        const double expo = (spec.beta + spec.d + 1.0) / ((spec.beta + spec.d) * (spec.k + 2.0));
        log_dom = std::log(spec.n) - expo * std::log(spec.m);
    } else {
        log_dom = log_variance_over_density_term(spec, mc.h_star);
    }
    const RateCandidate& chosen = log_dom >= 0.0 ? mc : nc;
    const RateCandidate& other = log_dom >= 0.0 ? nc : mc;
    RateResult res;
    res.regime = chosen.regime;
    res.h_star = chosen.h_star;
    res.exponent = chosen.exponent;
    res.exponent_base = chosen.regime == Regime::m_limited ? 'm' : 'n';
    res.log_dominance = log_dom;
    if (std::abs(log_dom) <= std::log(2.0))
        res.alternative = other;
    return res;
}

// ---------------------------------------------------------------------------
// Small-ball probability and doubling dimension
// ---------------------------------------------------------------------------

//! Fraction of `densities` within `radius` (inclusive) of `center`.
inline double small_ball_estimate(const std::vector<GridDensity>& densities, const GridDensity& center, double radius,
                                  Distance distance)
{
    if (densities.empty())
        throw std::invalid_argument("small_ball_estimate needs at least one density");
    if (!(radius > 0.0))
        throw std::invalid_argument("radius must be positive");
    std::size_t inside = 0;
    for (const auto& p : densities)
        if (density_distance(p, center, distance) <= radius)
            ++inside;
    return static_cast<double>(inside) / static_cast<double>(densities.size());
}

struct DoublingEstimate {
    double d_hat = 0.0;
    std::size_t retained_pairs = 0;
    std::size_t total_pairs = 0;
};

inline constexpr std::size_t doubling_min_inner_count = 5;

//! Pooled least-squares slope (through the origin) of log(count(r)/count(eps r))
//! against log(1/eps), over (center, r) pairs whose inner count is at least five.
inline DoublingEstimate doubling_dim_estimate(const std::vector<GridDensity>& densities,
                                              const std::vector<GridDensity>& centers, const std::vector<double>& radii,
                                              double eps, Distance distance, unsigned threads = 0)
{
    if (radii.size() < 2)
        throw std::invalid_argument("doubling_dim_estimate needs at least two radii");
    if (!(eps > 0.0 && eps < 1.0))
        throw std::invalid_argument("eps must lie in (0, 1)");
    for (double r : radii)
        if (!(r > 0.0))
            throw std::invalid_argument("radii must be positive");
    if (densities.empty() || centers.empty())
        throw std::invalid_argument("doubling_dim_estimate needs densities and centers");

    std::vector<std::vector<double>> dist(centers.size(), std::vector<double>(densities.size()));
    parallel_for(centers.size(), threads, [&](std::size_t c) {
        for (std::size_t i = 0; i < densities.size(); ++i)
            dist[c][i] = density_distance(densities[i], centers[c], distance);
    });

    const double x = std::log(1.0 / eps);
    double sxy = 0.0;
    double sxx = 0.0;
    DoublingEstimate est;
    for (std::size_t c = 0; c < centers.size(); ++c) {
        for (double r : radii) {
            ++est.total_pairs;
            std::size_t outer = 0;
            std::size_t inner = 0;
            for (double v : dist[c]) {
                outer += v <= r;
                inner += v <= eps * r;
            }
            if (inner < doubling_min_inner_count)
                continue;
            ++est.retained_pairs;
            sxy += x * std::log(static_cast<double>(outer) / static_cast<double>(inner));
            sxx += x * x;
        }
    }
    if (est.retained_pairs == 0)
        throw NumericError("doubling_dim_estimate: no (center, radius) pair has enough points in the inner ball");
    est.d_hat = sxy / sxx;
    return est;
}

// ---------------------------------------------------------------------------
// Empirical L1 risk of the density estimator
// ---------------------------------------------------------------------------

//! A known density with a sampler and a bounding box of its support.
struct TrueDensity {
    std::size_t k = 1;
    std::vector<double> lo;
    std::vector<double> hi;
    std::function<double(std::span<const double>)> pdf;
    std::function<SampleBag(std::size_t n, std::uint64_t seed)> sample;
};

inline TrueDensity uniform_unit_density()
{
    TrueDensity t;
    t.k = 1;
    t.lo = {0.0};
    t.hi = {1.0};
    t.pdf = [](std::span<const double> x) { return x[0] >= 0.0 && x[0] <= 1.0 ? 1.0 : 0.0; };
    t.sample = [](std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> xs(n);
        for (auto& x : xs)
            x = u(rng);
        return SampleBag(1, std::move(xs));
    };
    return t;
}

struct RiskRow {
    std::size_t n = 0;
    std::size_t rep = 0;
    double l1_error = 0.0;
};

struct RiskSummary {
    std::size_t n = 0;
    double mean_error = 0.0;
};

struct RiskStudy {
    GridSpec grid;
    std::vector<RiskRow> rows;
    std::vector<RiskSummary> summary;
    double slope = 0.0;
};

//! Seed of replicate `rep` at the `n_index`-th sample size.
constexpr std::uint64_t risk_study_seed(std::uint64_t master, std::size_t n_index, std::size_t rep)
{
    return derive_seed(master, 16 + n_index, rep);
}

//! Study grid: the truth's support box widened by the largest bandwidth reach.
inline GridSpec risk_study_grid(const TrueDensity& truth, const std::vector<std::size_t>& ns,
                                const SmoothingKernel& kernel, std::size_t cells_per_dim)
{
    const std::size_t n_min = *std::min_element(ns.begin(), ns.end());
    const double reach = default_bandwidth(n_min, truth.k) * kernel.support_radius;
    std::vector<double> lo(truth.lo), hi(truth.hi);
    for (std::size_t d = 0; d < truth.k; ++d) {
        lo[d] -= reach;
        hi[d] += reach;
    }
    return GridSpec(std::move(lo), std::move(hi), std::vector<std::size_t>(truth.k, cells_per_dim));
}

//! Ordinary least-squares slope of y on x.
inline double ols_slope(std::span<const double> x, std::span<const double> y)
{
    const double nx = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= nx;
    my /= nx;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

//! For each n, fits `reps` KDEs with b = n^{-1/(2+k)} and records the rectangle-rule L1
//! error against the discretized truth; the slope is fitted to log(mean error) vs log(n).
inline RiskStudy kde_l1_risk_study(const TrueDensity& truth, const std::vector<std::size_t>& ns, std::size_t reps,
                                   const SmoothingKernel& kernel, std::uint64_t seed, std::size_t cells_per_dim = 0,
                                   unsigned threads = 0)
{
    if (std::set<std::size_t>(ns.begin(), ns.end()).size() < 3)
        throw std::invalid_argument("kde_l1_risk_study needs at least three distinct sample sizes");
    if (reps == 0)
        throw std::invalid_argument("kde_l1_risk_study needs at least one replicate");
    for (auto n : ns)
        if (n == 0)
            throw std::invalid_argument("sample sizes must be positive");
    if (cells_per_dim == 0)
        cells_per_dim = truth.k == 1 ? 4096 : 64;

    RiskStudy study;
    study.grid = risk_study_grid(truth, ns, kernel, cells_per_dim);
    const auto& grid = study.grid;
    GridDensity exact{grid, std::vector<double>(grid.total_cells())};
    std::vector<double> x(truth.k);
    for (std::size_t c = 0; c < exact.values.size(); ++c) {
        const auto idx = grid.unravel(c);
        for (std::size_t d = 0; d < truth.k; ++d)
            x[d] = grid.center(d, idx[d]);
        exact.values[c] = truth.pdf(x);
    }

    study.rows.resize(ns.size() * reps);
    parallel_for(study.rows.size(), threads, [&](std::size_t job) {
        const std::size_t ni = job / reps;
        const std::size_t rep = job % reps;
        const std::size_t n = ns[ni];
        const SampleBag bag = truth.sample(n, risk_study_seed(seed, ni, rep));
        const GridDensity est = kde_fit(bag, default_bandwidth(n, truth.k), kernel, grid);
        study.rows[job] = {n, rep, l1_distance(est, exact)};
    });

    std::vector<double> lx, ly;
    for (std::size_t ni = 0; ni < ns.size(); ++ni) {
        double s = 0.0;
        for (std::size_t rep = 0; rep < reps; ++rep)
            s += study.rows[ni * reps + rep].l1_error;
        const double mean = s / static_cast<double>(reps);
        study.summary.push_back({ns[ni], mean});
        lx.push_back(std::log(static_cast<double>(ns[ni])));
        ly.push_back(std::log(mean));
    }
    study.slope = ols_slope(lx, ly);
    return study;
}

} // namespace kkreg
