#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kkreg/density.hpp"
#include "kkreg/rng.hpp"

namespace kkreg {

using Matrix2 = std::array<std::array<double, 2>, 2>;

inline double beta_skewness(double a, double b)
{
    if (!(a > 0.0 && b > 0.0))
        throw std::invalid_argument("Beta parameters must be positive");
    return 2.0 * (b - a) * std::sqrt(a + b + 1.0) / ((a + b + 2.0) * std::sqrt(a * b));
}

//! n i.i.d. Beta(a, b) draws as G_a / (G_a + G_b).
inline SampleBag sample_beta(double a, double b, std::size_t n, std::uint64_t seed)
{
    if (!(a > 0.0 && b > 0.0))
        throw std::invalid_argument("Beta parameters must be positive");
    if (n == 0)
        throw std::invalid_argument("sample size must be positive");
    Rng rng(seed);
    std::vector<double> xs(n);
    for (auto& x : xs) {
        do {
            const double ga = sample_gamma(a, rng);
            const double gb = sample_gamma(b, rng);
            x = ga / (ga + gb);
        } while (!(x > 0.0 && x < 1.0));
    }
    return SampleBag(1, std::move(xs));
}

inline Matrix2 rotation(double alpha)
{
    const double c = std::cos(alpha);
    const double s = std::sin(alpha);
    return {{{c, -s}, {s, c}}};
}

inline void check_spd(const Matrix2& m)
{
    const bool finite = std::isfinite(m[0][0]) && std::isfinite(m[0][1]) && std::isfinite(m[1][0]) && std::isfinite(m[1][1]);
    if (!finite || m[0][1] != m[1][0] || !(m[0][0] > 0.0) || !(m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0))
        throw std::invalid_argument("covariance matrix must be symmetric positive definite");
}

//! M = R(alpha) Sigma R(alpha)^T.
inline Matrix2 rotated_covariance(const Matrix2& sigma, double alpha)
{
    check_spd(sigma);
    const Matrix2 r = rotation(alpha);
    Matrix2 rs{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            rs[i][j] = r[i][0] * sigma[0][j] + r[i][1] * sigma[1][j];
    Matrix2 m{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            m[i][j] = rs[i][0] * r[j][0] + rs[i][1] * r[j][1];
    // exact symmetry so the Cholesky factor and M11 do not depend on rounding order
    m[1][0] = m[0][1];
    return m;
}

//! Entropy 0.5 ln(2 pi e M11) of the first marginal of N(0, R Sigma R^T).
inline double marginal_entropy(const Matrix2& sigma, double alpha)
{
    const Matrix2 m = rotated_covariance(sigma, alpha);
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * m[0][0]);
}

inline SampleBag sample_rotated_gaussian(const Matrix2& sigma, double alpha, std::size_t n, std::uint64_t seed)
{
    if (n == 0)
        throw std::invalid_argument("sample size must be positive");
    const Matrix2 m = rotated_covariance(sigma, alpha);
    check_spd(m);
    const double l00 = std::sqrt(m[0][0]);
    const double l10 = m[1][0] / l00;
    const double l11 = std::sqrt(m[1][1] - l10 * l10);
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> xs(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z0 = normal(rng);
        const double z1 = normal(rng);
        xs[2 * i] = l00 * z0;
        xs[2 * i + 1] = l10 * z0 + l11 * z1;
    }
    return SampleBag(2, std::move(xs));
}

//! y + U[-sigma, sigma]; sigma == 0 returns y unchanged.
inline double add_noise(double y, double sigma, std::uint64_t seed)
{
    if (!(sigma >= 0.0))
        throw std::invalid_argument("noise level must be nonnegative");
    if (sigma == 0.0)
        return y;
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-sigma, sigma);
    return y + u(rng);
}

enum class Split { train, val, test };

inline std::string_view to_string(Split s)
{
    switch (s) {
    case Split::train:
        return "train";
    case Split::val:
        return "val";
    case Split::test:
        return "test";
    }
    return "unknown";
}

inline Split split_from_string(std::string_view name)
{
    if (name == "train")
        return Split::train;
    if (name == "val")
        return Split::val;
    if (name == "test")
        return Split::test;
    throw DataError("unknown split '" + std::string(name) + "'");
}

struct SplitCounts {
    std::size_t train = 250;
    std::size_t val = 25;
    std::size_t test = 50;

    std::size_t total() const { return train + val + test; }
};

//! A labelled collection of bags; bag ids are vector indices.
struct Dataset {
    std::size_t k = 1;
    std::vector<SampleBag> bags;
    std::vector<double> y;     // observed response (truth plus noise)
    std::vector<double> truth; // f(P_i)
    std::vector<double> param; // covariate descriptor: Beta a, or rotation angle
    std::vector<Split> split;

    std::vector<std::size_t> indices(Split s) const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < split.size(); ++i)
            if (split[i] == s)
                out.push_back(i);
        return out;
    }
};

// Seed streams for task generation.
namespace stream {
inline constexpr std::uint64_t params = 1;
inline constexpr std::uint64_t points = 2;
inline constexpr std::uint64_t noise = 3;
inline constexpr std::uint64_t layout = 4;
} // namespace stream

namespace detail {

inline void check_counts(const SplitCounts& c, std::size_t n_per_bag)
{
    if (c.train == 0 || c.val == 0 || c.test == 0)
        throw std::invalid_argument("train, validation and test counts must all be at least 1");
    if (n_per_bag == 0)
        throw std::invalid_argument("points per bag must be positive");
}

inline void finish_labels(Dataset& ds, double noise, std::uint64_t master)
{
    ds.y.resize(ds.truth.size());
    for (std::size_t i = 0; i < ds.truth.size(); ++i)
        ds.y[i] = add_noise(ds.truth[i], noise, derive_seed(master, stream::noise, i));
}

} // namespace detail

//! Bags from Beta(a, 3), a ~ U[3, 20]; response is the Beta skewness.
struct BetaTask {
    double a_lo = 3.0;
    double a_hi = 20.0;
    double b_fixed = 3.0;
    std::size_t n_per_bag = 500;
    SplitCounts counts;

    //! Bag i uses seeds derived from (master, i); splits are laid out train, val, test.
    Dataset generate(std::uint64_t master, double noise = 0.0, unsigned threads = 0) const
    {
        detail::check_counts(counts, n_per_bag);
        const std::size_t total = counts.total();
        Dataset ds;
        ds.k = 1;
        ds.bags.resize(total);
        ds.truth.resize(total);
        ds.param.resize(total);
        ds.split.resize(total);
        parallel_for(total, threads, [&](std::size_t i) {
            Rng prng(derive_seed(master, stream::params, i));
            std::uniform_real_distribution<double> ua(a_lo, a_hi);
            const double a = ua(prng);
            ds.param[i] = a;
            ds.truth[i] = beta_skewness(a, b_fixed);
            ds.bags[i] = sample_beta(a, b_fixed, n_per_bag, derive_seed(master, stream::points, i));
        });
        for (std::size_t i = 0; i < total; ++i)
            ds.split[i] = i < counts.train ? Split::train : (i < counts.train + counts.val ? Split::val : Split::test);
        detail::finish_labels(ds, noise, master);
        return ds;
    }
};

//! Rotated 2-d Gaussians N(0, R(a_i) Sigma R(a_i)^T) with a_i = i pi / N, Sigma = A A^T,
//! A_ij ~ U[0, 1]; response is the entropy of the first marginal.
struct GaussianTask {
    std::size_t n_per_bag = 500;
    SplitCounts counts;

    static Matrix2 base_covariance(std::uint64_t master)
    {
        Rng rng(derive_seed(master, stream::params, 0));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Matrix2 a{};
        for (auto& row : a)
            for (auto& v : row)
                v = u(rng);
        Matrix2 s{};
        s[0][0] = a[0][0] * a[0][0] + a[0][1] * a[0][1];
        s[1][1] = a[1][0] * a[1][0] + a[1][1] * a[1][1];
        s[0][1] = s[1][0] = a[0][0] * a[1][0] + a[0][1] * a[1][1];
        return s;
    }

    //! Angles are assigned to splits by a seeded permutation so every split spans [0, pi].
    Dataset generate(std::uint64_t master, double noise = 0.0, unsigned threads = 0) const
    {
        detail::check_counts(counts, n_per_bag);
        const std::size_t total = counts.total();
        const Matrix2 sigma = base_covariance(master);
        std::vector<std::size_t> order(total);
        std::iota(order.begin(), order.end(), std::size_t{1});
        Rng lrng(derive_seed(master, stream::layout, 0));
        for (std::size_t i = total; i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(order[i - 1], order[pick(lrng)]);
        }
        Dataset ds;
        ds.k = 2;
        ds.bags.resize(total);
        ds.truth.resize(total);
        ds.param.resize(total);
        ds.split.resize(total);
        parallel_for(total, threads, [&](std::size_t i) {
            const double alpha = static_cast<double>(order[i]) * std::numbers::pi / static_cast<double>(total);
            ds.param[i] = alpha;
            ds.truth[i] = marginal_entropy(sigma, alpha);
            ds.bags[i] = sample_rotated_gaussian(sigma, alpha, n_per_bag, derive_seed(master, stream::points, i));
        });
        for (std::size_t i = 0; i < total; ++i)
            ds.split[i] = i < counts.train ? Split::train : (i < counts.train + counts.val ? Split::val : Split::test);
        detail::finish_labels(ds, noise, master);
        return ds;
    }
};

} // namespace kkreg
