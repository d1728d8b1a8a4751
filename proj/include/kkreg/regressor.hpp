#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "kkreg/density.hpp"
#include "kkreg/errors.hpp"
#include "kkreg/kernels.hpp"
#include "kkreg/parallel.hpp"

namespace kkreg {

struct LabeledBag {
    SampleBag bag;
    double y = 0.0;
};

struct KernelPair {
    SmoothingKernel smoothing;
    RegressionKernel regression;
};

//! Frozen training state of the kernel-kernel estimator.
struct KernelKernelModel {
    std::vector<GridDensity> densities;
    std::vector<double> responses;
    double h = 1.0;
    double b = 1.0;
    Distance distance = Distance::l1;
    KernelPair kernels;
    GridSpec grid;

    std::size_t size() const { return responses.size(); }
};

//! Weights K(d_i / h) for precomputed distances.
inline std::vector<double> regression_weights(const std::vector<double>& distances, double h,
                                              const RegressionKernel& kernel)
{
    if (!(h > 0.0))
        throw std::invalid_argument("bandwidth h must be positive");
    std::vector<double> w(distances.size());
    for (std::size_t i = 0; i < distances.size(); ++i)
        w[i] = kernel(distances[i] / h);
    return w;
}

//! Weighted average of the responses; exactly 0 when every weight vanishes.
//! Summation runs in index order.
inline double weighted_average(const std::vector<double>& responses, const std::vector<double>& weights)
{
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        num += responses[i] * weights[i];
        den += weights[i];
    }
    if (den > 0.0)
        return num / den;
    return 0.0;
}

namespace detail {

inline void check_bandwidths(double h, double b)
{
    if (!(h > 0.0) || !std::isfinite(h))
        throw std::invalid_argument("bandwidth h must be positive and finite");
    if (!(b > 0.0) || !std::isfinite(b))
        throw std::invalid_argument("bandwidth b must be positive and finite");
}

} // namespace detail

//! Builds a model from already estimated training densities.
inline KernelKernelModel make_model(std::vector<GridDensity> densities, std::vector<double> responses, double h, double b,
                                    Distance distance, const KernelPair& kernels, const GridSpec& grid)
{
    detail::check_bandwidths(h, b);
    if (densities.empty())
        throw std::invalid_argument("training set must be nonempty");
    if (densities.size() != responses.size())
        throw std::invalid_argument("densities and responses must have equal length");
    for (const auto& d : densities)
        if (!(d.spec == grid) || d.values.size() != grid.total_cells())
            throw DataError("training density does not live on the model grid");
    return {std::move(densities), std::move(responses), h, b, distance, kernels, grid};
}

inline KernelKernelModel fit(const std::vector<LabeledBag>& train, double h, double b, Distance distance,
                             const KernelPair& kernels, const GridSpec& grid, unsigned threads = 0)
{
    detail::check_bandwidths(h, b);
    if (train.empty())
        throw std::invalid_argument("training set must be nonempty");
    std::vector<GridDensity> densities(train.size());
    std::vector<double> responses(train.size());
    parallel_for(train.size(), threads, [&](std::size_t i) {
        densities[i] = kde_fit(train[i].bag, b, kernels.smoothing, grid);
        responses[i] = train[i].y;
    });
    return make_model(std::move(densities), std::move(responses), h, b, distance, kernels, grid);
}

//! Distances from one query density to every training density.
inline std::vector<double> distances_to(const KernelKernelModel& model, const GridDensity& query)
{
    std::vector<double> d(model.size());
    for (std::size_t i = 0; i < model.size(); ++i)
        d[i] = density_distance(model.densities[i], query, model.distance);
    return d;
}

inline double predict_density(const KernelKernelModel& model, const GridDensity& query)
{
    const auto w = regression_weights(distances_to(model, query), model.h, model.kernels.regression);
    return weighted_average(model.responses, w);
}

inline double predict(const KernelKernelModel& model, const SampleBag& query)
{
    if (query.dim() != model.grid.dim())
        throw DataError("dimension mismatch: query has k=" + std::to_string(query.dim()) + ", model has k=" +
                        std::to_string(model.grid.dim()));
    return predict_density(model, kde_fit(query, model.b, model.kernels.smoothing, model.grid));
}

inline std::vector<double> predict_batch(const KernelKernelModel& model, const std::vector<SampleBag>& queries,
                                         unsigned threads = 0)
{
    std::vector<double> out(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) { out[i] = predict(model, queries[i]); });
    return out;
}

} // namespace kkreg
