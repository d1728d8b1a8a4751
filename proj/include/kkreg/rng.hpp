#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace kkreg {

using Rng = std::mt19937_64;

//! SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

//! Per-item seed: master XOR mix(stream, index). Streams separate independent
//! uses (parameters, points, noise) of the same item index.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index)
{
    return master ^ mix64((stream << 40) ^ index);
}

//! Uniform draw on the open interval (0, 1).
inline double uniform_open(Rng& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double v = 0.0;
    do {
        v = u(rng);
    } while (v <= 0.0);
    return v;
}

//! Gamma(shape, 1) by Marsaglia-Tsang squeeze/rejection; shapes below one use
//! the boost G(shape+1) * U^{1/shape}.
inline double sample_gamma(double shape, Rng& rng)
{
    if (!(shape > 0.0) || !std::isfinite(shape))
        throw std::invalid_argument("gamma shape must be positive");
    if (shape < 1.0) {
        const double g = sample_gamma(shape + 1.0, rng);
        return g * std::pow(uniform_open(rng), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            x = normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform_open(rng);
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2)
            return d * v;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v)))
            return d * v;
    }
}

} // namespace kkreg
