#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kkreg/density.hpp"
#include "kkreg/regressor.hpp"
#include "kkreg/rng.hpp"

namespace kkreg {

//! Half-open search interval (lo, hi].
struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    bool contains(double v) const { return v > lo && v <= hi; }
};

struct SelectionConfig {
    std::size_t trials = 100;
    Interval range_b;
    Interval range_h;
    std::uint64_t seed = 0;
    //! Fixed (b, h) candidates evaluated after the random draws.
    std::vector<std::pair<double, double>> pilot_candidates;

    void validate() const
    {
        if (trials == 0)
            throw std::invalid_argument("selection needs at least one trial");
        for (const Interval* r : {&range_b, &range_h})
            if (!(r->lo >= 0.0 && r->lo < r->hi && r->hi <= 1.0))
                throw std::invalid_argument("search ranges must satisfy 0 <= lo < hi <= 1");
        for (const auto& [b, h] : pilot_candidates)
            if (!range_b.contains(b) || !range_h.contains(h))
                throw std::invalid_argument("pilot candidate lies outside the search ranges");
    }
};

struct Trial {
    double b = 0.0;
    double h = 0.0;
    double mse = 0.0;
};

struct SelectionResult {
    double best_b = 0.0;
    double best_h = 0.0;
    double best_mse = std::numeric_limits<double>::infinity();
    std::size_t best_trial = 0;
    std::vector<Trial> trace;
};

//! The (b, h) pairs a configuration evaluates, in trial order. Each trial draws b
//! then h, so a longer run with the same seed extends a shorter one.
inline std::vector<std::pair<double, double>> draw_candidates(const SelectionConfig& config)
{
    config.validate();
    Rng rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](const Interval& r) {
        for (;;) {
            const double v = r.lo + (r.hi - r.lo) * (1.0 - unit(rng));
            if (r.contains(v))
                return v;
        }
    };
    std::vector<std::pair<double, double>> out;
    out.reserve(config.trials + config.pilot_candidates.size());
    for (std::size_t t = 0; t < config.trials; ++t) {
        const double b = draw(config.range_b);
        const double h = draw(config.range_h);
        out.emplace_back(b, h);
    }
    out.insert(out.end(), config.pilot_candidates.begin(), config.pilot_candidates.end());
    return out;
}

namespace detail {

inline std::vector<const SampleBag*> bag_ptrs(const std::vector<LabeledBag>& xs)
{
    std::vector<const SampleBag*> out;
    out.reserve(xs.size());
    for (const auto& x : xs)
        out.push_back(&x.bag);
    return out;
}

} // namespace detail

//! Fits on `train` with (b, h) and returns the mean squared prediction error on `val`.
inline double validation_mse(const std::vector<LabeledBag>& train, const std::vector<LabeledBag>& val, double b, double h,
                             Distance distance, const KernelPair& kernels, const GridSpec& grid, unsigned threads = 0)
{
    if (train.empty() || val.empty())
        throw std::invalid_argument("training and validation sets must be nonempty");
    const auto model = fit(train, h, b, distance, kernels, grid, threads);
    const auto queries = kde_fit_all(detail::bag_ptrs(val), b, kernels.smoothing, grid, threads);
    std::vector<double> sq(val.size());
    parallel_for(val.size(), threads, [&](std::size_t i) {
        const double r = predict_density(model, queries[i]) - val[i].y;
        sq[i] = r * r;
    });
    double s = 0.0;
    for (double v : sq)
        s += v;
    return s / static_cast<double>(val.size());
}

//! Random search over (b, h) minimizing validation MSE; the earliest trial wins ties.
inline SelectionResult select_bandwidths(const std::vector<LabeledBag>& train, const std::vector<LabeledBag>& val,
                                         const SelectionConfig& config, Distance distance, const KernelPair& kernels,
                                         const GridSpec& grid, unsigned threads = 0)
{
    const auto candidates = draw_candidates(config);
    SelectionResult res;
    res.trace.reserve(candidates.size());
    for (const auto& [b, h] : candidates)
        res.trace.push_back({b, h, validation_mse(train, val, b, h, distance, kernels, grid, threads)});
    for (std::size_t t = 0; t < res.trace.size(); ++t) {
        if (t == 0 || res.trace[t].mse < res.best_mse) {
            res.best_trial = t;
            res.best_b = res.trace[t].b;
            res.best_h = res.trace[t].h;
            res.best_mse = res.trace[t].mse;
        }
    }
    return res;
}

} // namespace kkreg
