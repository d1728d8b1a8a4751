#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "kkreg/density.hpp"
#include "kkreg/io.hpp"
#include "kkreg/regressor.hpp"
#include "kkreg/selection.hpp"
#include "kkreg/synthetic.hpp"

namespace kkreg {

enum class Task { beta_skewness, gauss_entropy, custom };

inline std::string_view to_string(Task t)
{
    switch (t) {
    case Task::beta_skewness:
        return "beta-skewness";
    case Task::gauss_entropy:
        return "gauss-entropy";
    case Task::custom:
        return "custom";
    }
    return "unknown";
}

inline Task task_from_string(std::string_view name)
{
    if (name == "beta-skewness")
        return Task::beta_skewness;
    if (name == "gauss-entropy")
        return Task::gauss_entropy;
    if (name == "custom")
        return Task::custom;
    throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

//! Settings of one synthetic distribution-regression run. The presets use the
//! triangle kernel for both B and K and the L2 density distance.
struct ExperimentConfig {
    Task task = Task::beta_skewness;
    SplitCounts counts;
    std::size_t n_per_bag = 500;
    std::size_t cells_per_dim = 0; // 0: 4096 for k = 1, 64 per dimension otherwise
    Distance distance = Distance::l2;
    std::size_t trials = 100;
    double noise = 0.0;
    std::uint64_t seed = 0;
    SmoothingFamily smoothing = SmoothingFamily::triangle;
    unsigned threads = 0;

    void validate() const
    {
        if (counts.train == 0 || counts.val == 0 || counts.test == 0)
            throw std::invalid_argument("train, validation and test counts must all be at least 1");
        if (n_per_bag == 0)
            throw std::invalid_argument("points per bag must be positive");
        if (trials == 0)
            throw std::invalid_argument("selection needs at least one trial");
        if (!(noise >= 0.0))
            throw std::invalid_argument("noise level must be nonnegative");
    }

    std::size_t cells_for(std::size_t k) const
    {
        if (cells_per_dim > 0)
            return cells_per_dim;
        return k == 1 ? 4096 : 64;
    }
};

inline Dataset generate_dataset(const ExperimentConfig& config)
{
    config.validate();
    switch (config.task) {
    case Task::beta_skewness: {
        BetaTask t;
        t.n_per_bag = config.n_per_bag;
        t.counts = config.counts;
        return t.generate(config.seed, config.noise, config.threads);
    }
    case Task::gauss_entropy: {
        GaussianTask t;
        t.n_per_bag = config.n_per_bag;
        t.counts = config.counts;
        return t.generate(config.seed, config.noise, config.threads);
    }
    case Task::custom:
        break;
    }
    throw std::invalid_argument("the custom task has no generator; load a dataset directory instead");
}

//! Writes points.csv, labels.csv, covariates.csv (bag_id,split,param,truth) and manifest.
inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds, const ExperimentConfig& config)
{
    std::vector<std::pair<std::uint64_t, const SampleBag*>> bags;
    std::vector<std::pair<std::uint64_t, double>> labels;
    for (std::size_t i = 0; i < ds.bags.size(); ++i) {
        bags.emplace_back(i, &ds.bags[i]);
        labels.emplace_back(i, ds.y[i]);
    }
    io::write_points_csv(dir / "points.csv", bags);
    io::write_labels_csv(dir / "labels.csv", labels);
    {
        auto out = io::open_out(dir / "covariates.csv");
        out << "bag_id,split,param,truth\n";
        for (std::size_t i = 0; i < ds.bags.size(); ++i)
            out << i << ',' << to_string(ds.split[i]) << ',' << io::format_double(ds.param[i]) << ','
                << io::format_double(ds.truth[i]) << '\n';
    }
    io::KeyValues manifest{{"task", std::string(to_string(config.task))},
                           {"k", std::to_string(ds.k)},
                           {"bags", std::to_string(ds.bags.size())},
                           {"train", std::to_string(config.counts.train)},
                           {"val", std::to_string(config.counts.val)},
                           {"test", std::to_string(config.counts.test)},
                           {"n_per_bag", std::to_string(config.n_per_bag)},
                           {"noise", io::format_double(config.noise)},
                           {"seed", std::to_string(config.seed)}};
    if (config.task == Task::gauss_entropy) {
        const Matrix2 s = GaussianTask::base_covariance(config.seed);
        manifest.emplace_back("sigma", io::format_double(s[0][0]) + "," + io::format_double(s[0][1]) + "," +
                                           io::format_double(s[1][1]));
    }
    io::write_key_values(dir / "manifest", manifest);
}

//! Reads a directory written by save_dataset (manifest optional for custom data).
inline Dataset load_dataset(const std::filesystem::path& dir)
{
    const auto bags = io::read_points_csv(dir / "points.csv");
    const auto labels = io::read_labels_csv(dir / "labels.csv");
    Dataset ds;
    ds.k = bags.begin()->second.dim();
    std::vector<std::uint64_t> ids;
    for (const auto& [id, bag] : bags) {
        if (bag.dim() != ds.k)
            throw DataError("bags have inconsistent dimension");
        if (!labels.count(id))
            throw DataError("missing label for bag_id " + std::to_string(id));
        ids.push_back(id);
    }
    if (ids.back() + 1 != ids.size())
        throw DataError("dataset bag ids must be 0..N-1");
    for (const auto& [id, bag] : bags) {
        ds.bags.push_back(bag);
        ds.y.push_back(labels.at(id));
    }
    ds.truth = ds.y;
    ds.param.assign(ds.bags.size(), 0.0);
    ds.split.assign(ds.bags.size(), Split::train);
    const auto cov_path = dir / "covariates.csv";
    auto in = io::open_in(cov_path);
    std::string line;
    std::getline(in, line);
    if (io::split_fields(line) != std::vector<std::string>{"bag_id", "split", "param", "truth"})
        throw DataError(io::where(cov_path, 1) + "header must be bag_id,split,param,truth");
    std::vector<bool> seen(ds.bags.size(), false);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (io::trim(line).empty())
            continue;
        const auto f = io::split_fields(line);
        if (f.size() != 4)
            throw DataError(io::where(cov_path, lineno) + "expected 4 fields");
        const auto id = io::parse_id(f[0], cov_path, lineno);
        if (id >= ds.bags.size())
            throw DataError(io::where(cov_path, lineno) + "unknown bag_id " + std::to_string(id));
        ds.split[id] = split_from_string(f[1]);
        ds.param[id] = io::parse_double(f[2], cov_path, lineno);
        ds.truth[id] = io::parse_double(f[3], cov_path, lineno);
        seen[id] = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            throw DataError(cov_path.string() + ": missing row for bag_id " + std::to_string(i));
    return ds;
}

struct ExperimentRow {
    std::uint64_t bag_id = 0;
    double param = 0.0;
    double y_true = 0.0;
    double y_pred = 0.0;
};

struct ExperimentResult {
    std::vector<ExperimentRow> rows; // sorted by covariate descriptor
    double test_mse = 0.0;
    double relative_mse = 0.0;
    SelectionResult selection;
    GridSpec grid;
    double wall_time_s = 0.0;
};

//! auto grid -> bandwidth selection -> fit -> predict on the test split.
inline ExperimentResult run_experiment(const Dataset& ds, const ExperimentConfig& config)
{
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto train_idx = ds.indices(Split::train);
    const auto val_idx = ds.indices(Split::val);
    const auto test_idx = ds.indices(Split::test);
    if (train_idx.empty() || val_idx.empty() || test_idx.empty())
        throw std::invalid_argument("dataset needs nonempty train, validation and test splits");

    KernelPair kernels;
    kernels.smoothing.family = config.smoothing;
    SelectionConfig sel;
    sel.trials = config.trials;
    sel.seed = derive_seed(config.seed, 5, 0);

    const GridSpec grid = auto_grid(ds.bags, config.cells_for(ds.k), sel.range_b.hi, kernels.smoothing.support_radius);

    auto labeled = [&](const std::vector<std::size_t>& idx) {
        std::vector<LabeledBag> out;
        out.reserve(idx.size());
        for (auto i : idx)
            out.push_back({ds.bags[i], ds.y[i]});
        return out;
    };
    const auto train = labeled(train_idx);
    const auto val = labeled(val_idx);

    ExperimentResult res;
    res.grid = grid;
    res.selection = select_bandwidths(train, val, sel, config.distance, kernels, grid, config.threads);
    const auto model = fit(train, res.selection.best_h, res.selection.best_b, config.distance, kernels, grid, config.threads);
    std::vector<SampleBag> queries;
    for (auto i : test_idx)
        queries.push_back(ds.bags[i]);
    const auto preds = predict_batch(model, queries, config.threads);
    for (std::size_t j = 0; j < test_idx.size(); ++j)
        res.rows.push_back({test_idx[j], ds.param[test_idx[j]], ds.truth[test_idx[j]], preds[j]});
    std::stable_sort(res.rows.begin(), res.rows.end(),
                     [](const ExperimentRow& a, const ExperimentRow& b) { return a.param < b.param; });

    double sq = 0.0, mean = 0.0;
    for (const auto& r : res.rows) {
        sq += (r.y_pred - r.y_true) * (r.y_pred - r.y_true);
        mean += r.y_true;
    }
    const double count = static_cast<double>(res.rows.size());
    mean /= count;
    double var = 0.0;
    for (const auto& r : res.rows)
        var += (r.y_true - mean) * (r.y_true - mean);
    var /= count;
    res.test_mse = sq / count;
    res.relative_mse = var > 0.0 ? res.test_mse / var : std::numeric_limits<double>::infinity();
    res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

//! predictions.csv, figure.csv, trace.csv and summary (key=value).
inline void write_experiment(const std::filesystem::path& dir, const ExperimentResult& res, const ExperimentConfig& config)
{
    std::vector<io::PredictionRow> rows;
    for (const auto& r : res.rows)
        rows.push_back({r.bag_id, r.y_true, r.y_pred});
    {
        auto out = io::open_out(dir / "predictions.csv");
        io::write_predictions_csv(out, rows);
    }
    {
        auto out = io::open_out(dir / "figure.csv");
        out << "bag_id,param,y_true,y_pred\n";
        for (const auto& r : res.rows)
            out << r.bag_id << ',' << io::format_double(r.param) << ',' << io::format_double(r.y_true) << ','
                << io::format_double(r.y_pred) << '\n';
    }
    {
        auto out = io::open_out(dir / "trace.csv");
        out << "trial,b,h,mse\n";
        for (std::size_t t = 0; t < res.selection.trace.size(); ++t) {
            const auto& tr = res.selection.trace[t];
            out << t << ',' << io::format_double(tr.b) << ',' << io::format_double(tr.h) << ','
                << io::format_double(tr.mse) << '\n';
        }
    }
    io::write_key_values(dir / "summary", {{"task", std::string(to_string(config.task))},
                                           {"seed", std::to_string(config.seed)},
                                           {"distance", std::string(to_string(config.distance))},
                                           {"test_count", std::to_string(res.rows.size())},
                                           {"test_mse", io::format_double(res.test_mse)},
                                           {"relative_mse", io::format_double(res.relative_mse)},
                                           {"best_b", io::format_double(res.selection.best_b)},
                                           {"best_h", io::format_double(res.selection.best_h)},
                                           {"validation_mse", io::format_double(res.selection.best_mse)},
                                           {"wall_time_s", io::format_double(res.wall_time_s)}});
}

} // namespace kkreg
