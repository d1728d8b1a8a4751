#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kkreg {

enum class SmoothingFamily { epanechnikov, triangle, boxcar };
enum class RegressionFamily { triangle };

inline std::string_view to_string(SmoothingFamily f)
{
    switch (f) {
    case SmoothingFamily::epanechnikov:
        return "epanechnikov";
    case SmoothingFamily::triangle:
        return "triangle";
    case SmoothingFamily::boxcar:
        return "boxcar";
    }
    return "unknown";
}

inline std::string_view to_string(RegressionFamily)
{
    return "triangle";
}

inline SmoothingFamily smoothing_family_from_string(std::string_view name)
{
    if (name == "epanechnikov")
        return SmoothingFamily::epanechnikov;
    if (name == "triangle")
        return SmoothingFamily::triangle;
    if (name == "boxcar")
        return SmoothingFamily::boxcar;
    throw std::invalid_argument("unknown smoothing kernel family '" + std::string(name) + "'");
}

inline RegressionFamily regression_family_from_string(std::string_view name)
{
    if (name == "triangle")
        return RegressionFamily::triangle;
    throw std::invalid_argument("unknown regression kernel family '" + std::string(name) + "'");
}

namespace detail {

inline double smoothing_profile(SmoothingFamily f, double u)
{
    const double a = std::abs(u);
    if (a > 1.0)
        return 0.0;
    switch (f) {
    case SmoothingFamily::epanechnikov:
        return 0.75 * (1.0 - a * a);
    case SmoothingFamily::triangle:
        return 1.0 - a;
    case SmoothingFamily::boxcar:
        return 0.5;
    }
    return 0.0;
}

// c_k such that the radial kernel c_k * B(|u|) integrates to one over R^k.
// Midpoint rule on the radial integral, surface area of the unit sphere in closed form.
inline double compute_radial_normalization(SmoothingFamily f, std::size_t k)
{
    constexpr std::size_t cells = 1'000'000;
    const double dr = 1.0 / static_cast<double>(cells);
    const double kk = static_cast<double>(k);
    double radial = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        const double r = (static_cast<double>(i) + 0.5) * dr;
        radial += smoothing_profile(f, r) * std::pow(r, kk - 1.0);
    }
    radial *= dr;
    const double sphere = 2.0 * std::pow(std::numbers::pi, kk / 2.0) / std::tgamma(kk / 2.0);
    return 1.0 / (sphere * radial);
}

} // namespace detail

//! Inner kernel B used by the density estimator. Evaluated as a 1-d profile;
//! the k-dimensional estimator applies it radially with `radial_normalization(k)`.
struct SmoothingKernel {
    SmoothingFamily family = SmoothingFamily::epanechnikov;
    double support_radius = 1.0;

    double operator()(double u) const { return detail::smoothing_profile(family, u / support_radius) / support_radius; }

    //! Constant making c * B(||u||) a probability density on R^k (canonical scale).
    double radial_normalization(std::size_t k) const
    {
        if (k == 0)
            throw std::invalid_argument("dimension must be positive");
        constexpr std::size_t cached_dims = 8;
        static const auto table = [] {
            std::array<std::array<double, cached_dims + 1>, 3> t{};
            for (int f = 0; f < 3; ++f)
                for (std::size_t d = 1; d <= cached_dims; ++d)
                    t[f][d] = detail::compute_radial_normalization(static_cast<SmoothingFamily>(f), d);
            return t;
        }();
        if (k <= cached_dims)
            return table[static_cast<int>(family)][k];
        return detail::compute_radial_normalization(family, k);
    }
};

inline double eval_smoothing(const SmoothingKernel& kernel, double u)
{
    return kernel(u);
}

//! Outer kernel K applied to scaled distances. The declared constants are the
//! boxed/Lipschitz bounds: lower * 1{x < r} <= K(x) <= 1{x <= R} and |K(x)-K(y)| <= L|x-y|.
struct RegressionKernel {
    RegressionFamily family = RegressionFamily::triangle;
    double lipschitz = 1.0;
    double lower = 0.5;
    double r = 0.5;
    double R = 1.0;

    static RegressionKernel triangle() { return {}; }

    static RegressionKernel with_constants(double lipschitz, double lower, double r, double R)
    {
        if (!(lipschitz > 0.0))
            throw std::invalid_argument("Lipschitz constant must be positive");
        if (!(lower > 0.0 && lower < 1.0))
            throw std::invalid_argument("lower box constant must lie in (0,1)");
        if (!(r > 0.0 && R > r))
            throw std::invalid_argument("box radii must satisfy 0 < r < R");
        return {RegressionFamily::triangle, lipschitz, lower, r, R};
    }

    double operator()(double x) const
    {
        if (!(x >= 0.0))
            throw std::invalid_argument("regression kernel argument must be nonnegative");
        return std::max(0.0, 1.0 - x);
    }
};

inline double eval_regression(const RegressionKernel& kernel, double x)
{
    return kernel(x);
}

struct A2Report {
    double max_lipschitz_ratio = 0.0;
    std::size_t lower_box_violations = 0;
    std::size_t upper_box_violations = 0;
    std::size_t lipschitz_violations = 0;

    std::size_t violations() const { return lower_box_violations + upper_box_violations + lipschitz_violations; }
};

//! Dense check of the declared kernel constants: `samples` equispaced points on
//! [0, R] and the same spacing continued over (R, 2R].
inline A2Report verify_a2(const RegressionKernel& kernel, std::size_t samples)
{
    if (samples < 2)
        throw std::invalid_argument("verify_a2 needs at least two samples");
    A2Report rep;
    const double step = kernel.R / static_cast<double>(samples - 1);
    const std::size_t total = 2 * samples - 1;
    double prev_x = 0.0;
    double prev_k = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        const double x = i < samples ? step * static_cast<double>(i) : kernel.R + step * static_cast<double>(i - samples + 1);
        const double kx = kernel(x);
        if (x < kernel.r && kx < kernel.lower)
            ++rep.lower_box_violations;
        const double upper = x <= kernel.R ? 1.0 : 0.0;
        if (kx > upper || kx < 0.0)
            ++rep.upper_box_violations;
        if (i > 0) {
            const double ratio = std::abs(kx - prev_k) / (x - prev_x);
            rep.max_lipschitz_ratio = std::max(rep.max_lipschitz_ratio, ratio);
            if (ratio > kernel.lipschitz * (1.0 + 1e-9))
                ++rep.lipschitz_violations;
        }
        prev_x = x;
        prev_k = kx;
    }
    return rep;
}

} // namespace kkreg
