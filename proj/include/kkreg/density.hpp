#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "kkreg/errors.hpp"
#include "kkreg/kernels.hpp"
#include "kkreg/parallel.hpp"

namespace kkreg {

//! An i.i.d. sample from one unobserved distribution, stored row-major (n x k).
class SampleBag {
public:
    SampleBag() = default;

    SampleBag(std::size_t k, std::vector<double> coords) : k_(k), coords_(std::move(coords))
    {
        if (k_ == 0)
            throw std::invalid_argument("sample bag dimension must be positive");
        if (coords_.empty())
            throw std::invalid_argument("sample bag must be nonempty");
        if (coords_.size() % k_ != 0)
            throw DataError("sample bag coordinate count is not a multiple of its dimension");
        for (double v : coords_)
            if (!std::isfinite(v))
                throw DataError("sample bag contains a non-finite coordinate");
    }

    static SampleBag from_points(const std::vector<std::vector<double>>& points)
    {
        if (points.empty())
            throw std::invalid_argument("sample bag must be nonempty");
        const std::size_t k = points.front().size();
        std::vector<double> flat;
        flat.reserve(points.size() * k);
        for (const auto& p : points) {
            if (p.size() != k)
                throw DataError("sample bag points have inconsistent dimension");
            flat.insert(flat.end(), p.begin(), p.end());
        }
        return SampleBag(k, std::move(flat));
    }

    std::size_t dim() const { return k_; }
    std::size_t size() const { return k_ == 0 ? 0 : coords_.size() / k_; }
    std::span<const double> point(std::size_t i) const { return {coords_.data() + i * k_, k_}; }
    const std::vector<double>& coords() const { return coords_; }

private:
    std::size_t k_ = 0;
    std::vector<double> coords_;
};

//! Regular axis-aligned grid; densities are evaluated at cell centers and the
//! flat index runs with the last dimension fastest.
struct GridSpec {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<std::size_t> cells;

    GridSpec() = default;

    GridSpec(std::vector<double> lo_, std::vector<double> hi_, std::vector<std::size_t> cells_)
        : lo(std::move(lo_)), hi(std::move(hi_)), cells(std::move(cells_))
    {
        if (lo.empty() || lo.size() != hi.size() || lo.size() != cells.size())
            throw std::invalid_argument("grid bounds and cell counts must have the same positive dimension");
        for (std::size_t d = 0; d < lo.size(); ++d) {
            if (!(std::isfinite(lo[d]) && std::isfinite(hi[d]) && lo[d] < hi[d]))
                throw std::invalid_argument("grid requires finite lo < hi in every dimension");
            if (cells[d] == 0)
                throw std::invalid_argument("grid requires at least one cell per dimension");
        }
    }

    static GridSpec uniform(std::size_t k, double lo, double hi, std::size_t cells_per_dim)
    {
        return GridSpec(std::vector<double>(k, lo), std::vector<double>(k, hi), std::vector<std::size_t>(k, cells_per_dim));
    }

    std::size_t dim() const { return lo.size(); }

    std::size_t total_cells() const
    {
        std::size_t t = 1;
        for (auto c : cells)
            t *= c;
        return t;
    }

    double width(std::size_t d) const { return (hi[d] - lo[d]) / static_cast<double>(cells[d]); }

    double center(std::size_t d, std::size_t i) const { return lo[d] + (static_cast<double>(i) + 0.5) * width(d); }

    double cell_volume() const
    {
        double v = 1.0;
        for (std::size_t d = 0; d < dim(); ++d)
            v *= width(d);
        return v;
    }

    //! Per-dimension cell indices of a flat index.
    std::vector<std::size_t> unravel(std::size_t flat) const
    {
        std::vector<std::size_t> idx(dim());
        for (std::size_t d = dim(); d-- > 0;) {
            idx[d] = flat % cells[d];
            flat /= cells[d];
        }
        return idx;
    }

    bool operator==(const GridSpec&) const = default;
};

//! Density values at the cell centers of a grid.
struct GridDensity {
    GridSpec spec;
    std::vector<double> values;

    double cell_volume() const { return spec.cell_volume(); }

    double mass() const
    {
        double s = 0.0;
        for (double v : values)
            s += v;
        return s * cell_volume();
    }
};

enum class Distance { l1, l2 };

inline std::string_view to_string(Distance d)
{
    return d == Distance::l1 ? "l1" : "l2";
}

inline Distance distance_from_string(std::string_view name)
{
    if (name == "l1")
        return Distance::l1;
    if (name == "l2")
        return Distance::l2;
    throw std::invalid_argument("unknown distance '" + std::string(name) + "' (expected l1 or l2)");
}

//! Bandwidth n^{-1/(2+k)} used by the risk analysis.
inline double default_bandwidth(std::size_t n, std::size_t k)
{
    if (n == 0 || k == 0)
        throw std::invalid_argument("default_bandwidth requires n >= 1 and k >= 1");
    return std::pow(static_cast<double>(n), -1.0 / (2.0 + static_cast<double>(k)));
}

namespace detail {

inline void check_kde_args(const SampleBag& bag, double b, const GridSpec& spec)
{
    if (!(b > 0.0) || !std::isfinite(b))
        throw std::invalid_argument("bandwidth must be positive and finite");
    if (bag.dim() != spec.dim())
        throw DataError("dimension mismatch: bag has k=" + std::to_string(bag.dim()) + ", grid has k=" +
                        std::to_string(spec.dim()));
    if (bag.size() == 0)
        throw std::invalid_argument("cannot fit a density to an empty bag");
}

// Inclusive range of cell indices whose centers can lie within `reach` of x.
inline std::pair<std::size_t, std::size_t> cell_window(const GridSpec& spec, std::size_t d, double x, double reach)
{
    const double w = spec.width(d);
    const double first = std::floor((x - reach - spec.lo[d]) / w - 0.5) - 1.0;
    const double last = std::ceil((x + reach - spec.lo[d]) / w - 0.5) + 1.0;
    const double top = static_cast<double>(spec.cells[d]) - 1.0;
    if (last < 0.0 || first > top)
        return {1, 0};
    return {static_cast<std::size_t>(std::max(first, 0.0)), static_cast<std::size_t>(std::min(last, top))};
}

} // namespace detail

//! Kernel density estimate (1/n) sum_j b^{-k} B(||x - X_j|| / b) at every cell center.
//! Each point only touches cells inside its kernel support.
inline GridDensity kde_fit(const SampleBag& bag, double b, const SmoothingKernel& kernel, const GridSpec& spec)
{
    detail::check_kde_args(bag, b, spec);
    const std::size_t k = spec.dim();
    const std::size_t n = bag.size();
    const double scale_b = b * kernel.support_radius;
    const double inv_b = 1.0 / scale_b;
    const double norm = kernel.radial_normalization(k) / (static_cast<double>(n) * std::pow(scale_b, static_cast<double>(k)));
    const SmoothingFamily fam = kernel.family;

    GridDensity out{spec, std::vector<double>(spec.total_cells(), 0.0)};
    auto& vals = out.values;

    if (k == 1) {
        const double w = spec.width(0);
        const double lo = spec.lo[0];
        auto scatter = [&](auto profile) {
            for (std::size_t j = 0; j < n; ++j) {
                const double x = bag.point(j)[0];
                const auto [first, last] = detail::cell_window(spec, 0, x, scale_b);
                if (first > last)
                    continue;
                double* v = vals.data();
                for (std::size_t i = first; i <= last; ++i) {
                    const double u = std::abs(lo + (static_cast<double>(i) + 0.5) * w - x) * inv_b;
                    v[i] += profile(u);
                }
            }
        };
        switch (fam) {
        case SmoothingFamily::epanechnikov:
            scatter([](double u) { return u <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0; });
            break;
        case SmoothingFamily::triangle:
            scatter([](double u) { return u <= 1.0 ? 1.0 - u : 0.0; });
            break;
        case SmoothingFamily::boxcar:
            scatter([](double u) { return u <= 1.0 ? 0.5 : 0.0; });
            break;
        }
    } else {
        std::vector<std::size_t> first(k), last(k), idx(k), stride(k);
        std::vector<double> partial(k + 1);
        stride[k - 1] = 1;
        for (std::size_t d = k - 1; d-- > 0;)
            stride[d] = stride[d + 1] * spec.cells[d + 1];
        for (std::size_t j = 0; j < n; ++j) {
            const auto x = bag.point(j);
            bool empty = false;
            for (std::size_t d = 0; d < k; ++d) {
                std::tie(first[d], last[d]) = detail::cell_window(spec, d, x[d], scale_b);
                if (first[d] > last[d])
                    empty = true;
            }
            if (empty)
                continue;
            idx = first;
            // odometer over the window; partial[d] is the squared distance over dims < d
            partial[0] = 0.0;
            for (std::size_t d = 0; d < k; ++d) {
                const double diff = spec.center(d, idx[d]) - x[d];
                partial[d + 1] = partial[d] + diff * diff;
            }
            for (;;) {
                const double u = std::sqrt(partial[k]) * inv_b;
                if (u <= 1.0) {
                    std::size_t flat = 0;
                    for (std::size_t d = 0; d < k; ++d)
                        flat += idx[d] * stride[d];
                    vals[flat] += detail::smoothing_profile(fam, u);
                }
                std::size_t d = k;
                while (d > 0 && idx[d - 1] == last[d - 1]) {
                    idx[d - 1] = first[d - 1];
                    --d;
                }
                if (d == 0)
                    break;
                ++idx[d - 1];
                for (std::size_t e = d - 1; e < k; ++e) {
                    const double diff = spec.center(e, idx[e]) - x[e];
                    partial[e + 1] = partial[e] + diff * diff;
                }
            }
        }
    }
    for (double& v : vals)
        v *= norm;
    return out;
}

//! Fits every bag with the same bandwidth and grid.
inline std::vector<GridDensity> kde_fit_all(const std::vector<const SampleBag*>& bags, double b,
                                            const SmoothingKernel& kernel, const GridSpec& spec, unsigned threads = 0)
{
    std::vector<GridDensity> out(bags.size());
    parallel_for(bags.size(), threads, [&](std::size_t i) { out[i] = kde_fit(*bags[i], b, kernel, spec); });
    return out;
}

//! Common grid covering every bag, extended by the largest kernel reach.
inline GridSpec auto_grid(const std::vector<const SampleBag*>& bags, std::size_t cells_per_dim, double b_max,
                          double support_radius)
{
    if (bags.empty())
        throw std::invalid_argument("auto_grid needs at least one bag");
    if (cells_per_dim < 2)
        throw std::invalid_argument("auto_grid needs at least two cells per dimension");
    if (!(b_max >= 0.0) || !(support_radius > 0.0))
        throw std::invalid_argument("auto_grid needs b_max >= 0 and a positive support radius");
    const std::size_t k = bags.front()->dim();
    std::vector<double> lo(k, std::numeric_limits<double>::infinity());
    std::vector<double> hi(k, -std::numeric_limits<double>::infinity());
    for (const SampleBag* bag : bags) {
        if (bag->dim() != k)
            throw DataError("auto_grid: bags have inconsistent dimension");
        for (std::size_t j = 0; j < bag->size(); ++j) {
            const auto p = bag->point(j);
            for (std::size_t d = 0; d < k; ++d) {
                lo[d] = std::min(lo[d], p[d]);
                hi[d] = std::max(hi[d], p[d]);
            }
        }
    }
    const double reach = b_max * support_radius;
    for (std::size_t d = 0; d < k; ++d) {
        lo[d] -= reach;
        hi[d] += reach;
    }
    return GridSpec(std::move(lo), std::move(hi), std::vector<std::size_t>(k, cells_per_dim));
}

inline GridSpec auto_grid(const std::vector<SampleBag>& bags, std::size_t cells_per_dim, double b_max,
                          double support_radius)
{
    std::vector<const SampleBag*> ptrs;
    ptrs.reserve(bags.size());
    for (const auto& b : bags)
        ptrs.push_back(&b);
    return auto_grid(ptrs, cells_per_dim, b_max, support_radius);
}

namespace detail {

inline void check_same_grid(const GridDensity& p, const GridDensity& q)
{
    if (!(p.spec == q.spec) || p.values.size() != q.values.size())
        throw DataError("densities live on different grids");
}

} // namespace detail

//! Rectangle-rule L1 distance.
inline double l1_distance(const GridDensity& p, const GridDensity& q)
{
    detail::check_same_grid(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i)
        s += std::abs(p.values[i] - q.values[i]);
    return s * p.cell_volume();
}

//! Rectangle-rule L2 distance.
inline double l2_distance(const GridDensity& p, const GridDensity& q)
{
    detail::check_same_grid(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double d = p.values[i] - q.values[i];
        s += d * d;
    }
    return std::sqrt(s * p.cell_volume());
}

inline double density_distance(const GridDensity& p, const GridDensity& q, Distance kind)
{
    return kind == Distance::l1 ? l1_distance(p, q) : l2_distance(p, q);
}

} // namespace kkreg
