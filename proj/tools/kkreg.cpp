// kkreg: command-line front end for kernel-kernel distribution regression.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kkreg/kkreg.hpp"

namespace fs = std::filesystem;
using namespace kkreg;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_data = 3;
constexpr int exit_numeric = 4;

struct CommonOpts {
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

struct GenerateOpts {
    std::string task = "beta-skewness";
    std::string out;
    std::size_t n_per_bag = 500;
    std::size_t n_train = 250, n_val = 25, n_test = 50;
    double noise = 0.0;
};

struct ExperimentOpts {
    GenerateOpts gen;
    std::string data;
    std::size_t trials = 100;
    std::string distance = "l2";
    std::size_t cells = 0;
    std::string kernel = "triangle";
};

struct FitPredictOpts {
    std::string train, labels, test, test_labels, val, val_labels, out, model_out;
    std::optional<double> b, h;
    bool select = false;
    std::size_t trials = 100;
    std::string distance = "l1";
    std::size_t cells = 0;
    std::string kernel = "epanechnikov";
};

struct PredictOpts {
    std::string model, test, test_labels, out;
};

struct RateOpts {
    double beta = 1.0, d = 1.0, k = 1.0, m = 1.0, n = 1.0;
    bool noiseless = false;
};

struct StudyOpts {
    std::string kind;
    std::string out;
    std::size_t reps = 20;
    std::vector<std::size_t> ns{250, 500, 1000, 2000, 4000};
    std::size_t bags = 500;
    std::size_t n_per_bag = 2000;
    double eps = 0.5;
    std::vector<double> radii{0.1, 0.2, 0.4, 0.8};
    double radius = 0.2;
    double center_a = 10.0;
    std::string distance = "l1";
    std::size_t cells = 4096;
    std::string kernel = "epanechnikov";
};

ExperimentConfig experiment_config(const GenerateOpts& g, const CommonOpts& c)
{
    ExperimentConfig cfg;
    cfg.task = task_from_string(g.task);
    cfg.n_per_bag = g.n_per_bag;
    cfg.counts = {g.n_train, g.n_val, g.n_test};
    cfg.noise = g.noise;
    cfg.seed = c.seed;
    cfg.threads = c.threads;
    return cfg;
}

int run_generate(const GenerateOpts& g, const CommonOpts& c)
{
    const auto cfg = experiment_config(g, c);
    const auto ds = generate_dataset(cfg);
    save_dataset(g.out, ds, cfg);
    std::cerr << "wrote " << ds.bags.size() << " bags (k=" << ds.k << ") to " << g.out << '\n';
    return exit_ok;
}

int run_experiment_cmd(const ExperimentOpts& e, const CommonOpts& c)
{
    auto cfg = experiment_config(e.gen, c);
    cfg.trials = e.trials;
    cfg.distance = distance_from_string(e.distance);
    cfg.cells_per_dim = e.cells;
    cfg.smoothing = smoothing_family_from_string(e.kernel);
    Dataset ds;
    if (!e.data.empty()) {
        ds = load_dataset(e.data);
        cfg.counts = {ds.indices(Split::train).size(), ds.indices(Split::val).size(), ds.indices(Split::test).size()};
    } else {
        ds = generate_dataset(cfg);
    }
    cfg.validate();
    std::cerr << "running " << to_string(cfg.task) << " with " << cfg.trials << " selection trials\n";
    const auto res = run_experiment(ds, cfg);
    write_experiment(e.gen.out, res, cfg);
    std::cout << "test_mse=" << io::format_double(res.test_mse) << '\n'
              << "relative_mse=" << io::format_double(res.relative_mse) << '\n'
              << "best_b=" << io::format_double(res.selection.best_b) << '\n'
              << "best_h=" << io::format_double(res.selection.best_h) << '\n';
    return exit_ok;
}

std::vector<LabeledBag> attach_labels(const io::BagMap& bags, const io::LabelMap& labels)
{
    std::vector<LabeledBag> out;
    for (const auto& [id, bag] : bags) {
        const auto it = labels.find(id);
        if (it == labels.end())
            throw DataError("missing label for bag_id " + std::to_string(id));
        out.push_back({bag, it->second});
    }
    return out;
}

std::size_t default_cells(std::size_t k, std::size_t requested)
{
    return requested > 0 ? requested : (k == 1 ? 4096 : 64);
}

void emit_predictions(const KernelKernelModel& model, const io::BagMap& test, const std::string& test_labels,
                      const std::string& out_path)
{
    std::optional<io::LabelMap> truth;
    if (!test_labels.empty())
        truth = io::read_labels_csv(test_labels);
    std::vector<io::PredictionRow> rows;
    for (const auto& [id, bag] : test) {
        if (bag.dim() != model.grid.dim())
            throw DataError("dimension mismatch for test bag_id " + std::to_string(id));
        const auto q = kde_fit(bag, model.b, model.kernels.smoothing, model.grid);
        const auto w = regression_weights(distances_to(model, q), model.h, model.kernels.regression);
        const double y = weighted_average(model.responses, w);
        if (!std::isfinite(y))
            throw NumericError("non-finite prediction for bag_id " + std::to_string(id));
        double wsum = 0.0;
        for (double v : w)
            wsum += v;
        if (wsum == 0.0)
            std::cerr << "warning: bag_id " << id << ": every training weight is zero (h too small); predicting 0\n";
        io::PredictionRow row{id, std::nullopt, y};
        if (truth) {
            const auto it = truth->find(id);
            if (it == truth->end())
                throw DataError("missing label for bag_id " + std::to_string(id));
            row.y_true = it->second;
        }
        rows.push_back(row);
    }
    if (out_path.empty() || out_path == "-") {
        io::write_predictions_csv(std::cout, rows);
    } else {
        auto out = io::open_out(out_path);
        io::write_predictions_csv(out, rows);
    }
}

int run_fit_predict(const FitPredictOpts& o, const CommonOpts& c)
{
    if (!o.select && (!o.b || !o.h))
        throw CLI::ValidationError("fit-predict", "either --select or both --b and --h are required");
    const auto train_bags = io::read_points_csv(o.train);
    const auto labels = io::read_labels_csv(o.labels);
    const auto test_bags = io::read_points_csv(o.test);
    auto train = attach_labels(train_bags, labels);
    const std::size_t k = train.front().bag.dim();

    std::vector<LabeledBag> val;
    if (!o.val.empty()) {
        const auto val_labels = o.val_labels.empty() ? labels : io::read_labels_csv(o.val_labels);
        val = attach_labels(io::read_points_csv(o.val), val_labels);
    } else if (o.select) {
        if (train.size() < 2)
            throw std::invalid_argument("--select without --val needs at least two training bags");
        const std::size_t hold = std::max<std::size_t>(1, train.size() / 10);
        val.assign(train.end() - static_cast<std::ptrdiff_t>(hold), train.end());
        train.resize(train.size() - hold);
        std::cerr << "holding out the last " << hold << " training bags for bandwidth selection\n";
    }

    std::vector<const SampleBag*> all;
    for (const auto& t : train)
        all.push_back(&t.bag);
    for (const auto& v : val)
        all.push_back(&v.bag);
    for (const auto& [id, bag] : test_bags) {
        if (bag.dim() != k)
            throw DataError("dimension mismatch: test bag_id " + std::to_string(id) + " has k=" +
                            std::to_string(bag.dim()) + ", training bags have k=" + std::to_string(k));
        all.push_back(&bag);
    }
    KernelPair kernels;
    kernels.smoothing.family = smoothing_family_from_string(o.kernel);
    const Distance distance = distance_from_string(o.distance);
    SelectionConfig sel;
    sel.trials = o.trials;
    sel.seed = c.seed;
    const double b_max = o.select ? sel.range_b.hi : *o.b;
    if (!(b_max > 0.0))
        throw std::invalid_argument("bandwidth b must be positive");
    const GridSpec grid = auto_grid(all, default_cells(k, o.cells), b_max, kernels.smoothing.support_radius);

    double b = o.b.value_or(0.0), h = o.h.value_or(0.0);
    if (o.select) {
        const auto res = select_bandwidths(train, val, sel, distance, kernels, grid, c.threads);
        b = res.best_b;
        h = res.best_h;
        std::cerr << "selected b=" << io::format_double(b) << " h=" << io::format_double(h)
                  << " validation_mse=" << io::format_double(res.best_mse) << '\n';
    } else if (!val.empty()) {
        train.insert(train.end(), val.begin(), val.end());
    }
    const auto model = fit(train, h, b, distance, kernels, grid, c.threads);
    if (!o.model_out.empty())
        io::save_model(o.model_out, model);
    emit_predictions(model, test_bags, o.test_labels, o.out);
    return exit_ok;
}

int run_predict(const PredictOpts& o)
{
    const auto model = io::load_model(o.model);
    emit_predictions(model, io::read_points_csv(o.test), o.test_labels, o.out);
    return exit_ok;
}

int run_rate(const RateOpts& o)
{
    const RateSpec spec{o.beta, o.d, o.k, o.m, o.n, o.noiseless};
    const auto r = risk_rate(spec);
    io::KeyValues kv{{"regime", std::string(to_string(r.regime))},
                     {"h_star", io::format_double(r.h_star)},
                     {"exponent_base", std::string(1, r.exponent_base)},
                     {"exponent", io::format_double(r.exponent)},
                     {"log_dominance", io::format_double(r.log_dominance)},
                     {"near_boundary", r.alternative ? "true" : "false"}};
    if (r.alternative) {
        kv.emplace_back("alt_regime", std::string(to_string(r.alternative->regime)));
        kv.emplace_back("alt_h_star", io::format_double(r.alternative->h_star));
        kv.emplace_back("alt_exponent", io::format_double(r.alternative->exponent));
    }
    io::write_key_values(std::cout, kv);
    return exit_ok;
}

// Beta(a, 3) densities with a ~ U[3, 20], plus an optional extra bag at a = center_a.
struct BetaFamily {
    std::vector<GridDensity> densities;
    std::optional<GridDensity> center;
};

BetaFamily beta_family(const StudyOpts& o, const CommonOpts& c, bool with_center)
{
    BetaTask task;
    task.n_per_bag = o.n_per_bag;
    task.counts = {o.bags, 1, 1};
    auto ds = task.generate(c.seed, 0.0, c.threads);
    ds.bags.resize(o.bags);
    if (with_center)
        ds.bags.push_back(sample_beta(o.center_a, 3.0, o.n_per_bag, derive_seed(c.seed, 6, 0)));
    const SmoothingKernel kernel{smoothing_family_from_string(o.kernel)};
    const double b = default_bandwidth(o.n_per_bag, 1);
    const auto grid = auto_grid(ds.bags, o.cells, b, kernel.support_radius);
    std::vector<const SampleBag*> ptrs;
    for (const auto& bag : ds.bags)
        ptrs.push_back(&bag);
    auto dens = kde_fit_all(ptrs, b, kernel, grid, c.threads);
    BetaFamily fam;
    if (with_center) {
        fam.center = std::move(dens.back());
        dens.pop_back();
    }
    fam.densities = std::move(dens);
    return fam;
}

int run_study(const StudyOpts& o, const CommonOpts& c)
{
    const fs::path out(o.out);
    const Distance distance = distance_from_string(o.distance);
    if (o.kind == "kde-risk") {
        const auto st = kde_l1_risk_study(uniform_unit_density(), o.ns, o.reps,
                                          SmoothingKernel{smoothing_family_from_string(o.kernel)}, c.seed, o.cells,
                                          c.threads);
        {
            auto f = io::open_out(out / "rows.csv");
            f << "n,rep,l1_error\n";
            for (const auto& r : st.rows)
                f << r.n << ',' << r.rep << ',' << io::format_double(r.l1_error) << '\n';
        }
        {
            auto f = io::open_out(out / "summary.csv");
            f << "n,mean_error\n";
            for (const auto& s : st.summary)
                f << s.n << ',' << io::format_double(s.mean_error) << '\n';
        }
        const io::KeyValues report{{"slope", io::format_double(st.slope)}, {"target_slope", io::format_double(-1.0 / 3.0)}};
        io::write_key_values(out / "report", report);
        io::write_key_values(std::cout, report);
        return exit_ok;
    }
    if (o.kind == "doubling") {
        const auto fam = beta_family(o, c, false);
        const auto est = doubling_dim_estimate(fam.densities, fam.densities, o.radii, o.eps, distance, c.threads);
        const io::KeyValues report{{"d_hat", io::format_double(est.d_hat)},
                                   {"retained_pairs", std::to_string(est.retained_pairs)},
                                   {"total_pairs", std::to_string(est.total_pairs)},
                                   {"eps", io::format_double(o.eps)}};
        io::write_key_values(out / "report", report);
        io::write_key_values(std::cout, report);
        return exit_ok;
    }
    if (o.kind == "small-ball") {
        const auto fam = beta_family(o, c, true);
        {
            auto f = io::open_out(out / "small_ball.csv");
            f << "radius,probability\n";
            for (int i = 1; i <= 40; ++i) {
                const double r = 0.05 * i;
                f << io::format_double(r) << ',' << io::format_double(small_ball_estimate(fam.densities, *fam.center, r, distance))
                  << '\n';
            }
        }
        const io::KeyValues report{
            {"radius", io::format_double(o.radius)},
            {"probability", io::format_double(small_ball_estimate(fam.densities, *fam.center, o.radius, distance))}};
        io::write_key_values(out / "report", report);
        io::write_key_values(std::cout, report);
        return exit_ok;
    }
    throw CLI::ValidationError("study", "unknown kind '" + o.kind + "'");
}

void add_common(CLI::App* sub, CommonOpts& c)
{
    sub->add_option("--seed", c.seed, "Master seed");
    sub->add_option("--threads", c.threads, "Worker threads (0: machine parallelism)");
    sub->add_option("--config", "key = value configuration file; flags override it");
}

void add_generate_opts(CLI::App* sub, GenerateOpts& g)
{
    sub->add_option("--task", g.task, "beta-skewness | gauss-entropy")
        ->check(CLI::IsMember({"beta-skewness", "gauss-entropy", "custom"}));
    sub->add_option("--out", g.out, "Output directory")->required();
    sub->add_option("--n-per-bag", g.n_per_bag, "Points per bag")->check(CLI::PositiveNumber);
    sub->add_option("--n-train", g.n_train, "Training bags");
    sub->add_option("--n-val", g.n_val, "Validation bags");
    sub->add_option("--n-test", g.n_test, "Test bags");
    sub->add_option("--noise", g.noise, "Half-width of uniform label noise")->check(CLI::NonNegativeNumber);
}

//! Expands `--config FILE` into `--key=value` tokens placed right after the subcommand; keys
//! also given on the command line are skipped so explicit flags win.
std::vector<std::string> expand_config(int argc, char** argv)
{
    std::vector<std::string> args(argv, argv + argc);
    std::string file;
    std::vector<std::string> kept;
    std::set<std::string> given;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const auto& a = args[i];
        if (a == "--config" && i + 1 < args.size()) {
            file = args[++i];
            continue;
        }
        if (a.rfind("--config=", 0) == 0) {
            file = a.substr(9);
            continue;
        }
        if (a.rfind("--", 0) == 0)
            given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
        kept.push_back(a);
    }
    if (file.empty() || kept.size() < 2)
        return kept;
    std::vector<std::string> injected;
    for (const auto& [key, value] : io::read_key_values(file))
        if (!given.contains(key))
            injected.push_back("--" + key + "=" + value);
    kept.insert(kept.begin() + 2, injected.begin(), injected.end());
    return kept;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Kernel-kernel distribution regression"};
    app.require_subcommand(1);
    CommonOpts common;

    GenerateOpts gen;
    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset (points, labels, covariates, manifest)");
    add_generate_opts(generate, gen);
    add_common(generate, common);

    ExperimentOpts exp;
    auto* experiment = app.add_subcommand("experiment", "Run a synthetic experiment end to end");
    add_generate_opts(experiment, exp.gen);
    add_common(experiment, common);
    experiment->add_option("--data", exp.data, "Dataset directory written by 'generate'");
    experiment->add_option("--trials", exp.trials, "Bandwidth search trials")->check(CLI::PositiveNumber);
    experiment->add_option("--distance", exp.distance, "l1 | l2")->check(CLI::IsMember({"l1", "l2"}));
    experiment->add_option("--cells", exp.cells, "Grid cells per dimension (0: 4096 for k=1, 64 otherwise)");
    experiment->add_option("--kernel", exp.kernel, "Smoothing kernel family")
        ->check(CLI::IsMember({"epanechnikov", "triangle", "boxcar"}));

    FitPredictOpts fp;
    auto* fitpred = app.add_subcommand("fit-predict", "Fit on CSV bags and predict test bags");
    fitpred->set_help_flag("--help", "Print this help message and exit"); //! frees --h for the bandwidth
    add_common(fitpred, common);
    fitpred->add_option("--train", fp.train, "Training points CSV")->required()->check(CLI::ExistingFile);
    fitpred->add_option("--labels", fp.labels, "Training labels CSV")->required()->check(CLI::ExistingFile);
    fitpred->add_option("--test", fp.test, "Test points CSV")->required()->check(CLI::ExistingFile);
    fitpred->add_option("--test-labels", fp.test_labels, "Optional test labels CSV (adds y_true)");
    fitpred->add_option("--val", fp.val, "Validation points CSV for --select");
    fitpred->add_option("--val-labels", fp.val_labels, "Validation labels CSV (default: --labels)");
    fitpred->add_option("--b", fp.b, "Density bandwidth")->check(CLI::PositiveNumber);
    fitpred->add_option("--h", fp.h, "Regression bandwidth")->check(CLI::PositiveNumber);
    fitpred->add_flag("--select", fp.select, "Choose b and h by validation random search");
    fitpred->add_option("--trials", fp.trials, "Bandwidth search trials")->check(CLI::PositiveNumber);
    fitpred->add_option("--distance", fp.distance, "l1 | l2")->check(CLI::IsMember({"l1", "l2"}));
    fitpred->add_option("--cells", fp.cells, "Grid cells per dimension");
    fitpred->add_option("--kernel", fp.kernel, "Smoothing kernel family")
        ->check(CLI::IsMember({"epanechnikov", "triangle", "boxcar"}));
    fitpred->add_option("--out", fp.out, "Predictions CSV (default: standard output)");
    fitpred->add_option("--model-out", fp.model_out, "Save the fitted model to this directory");

    PredictOpts pr;
    auto* predict_cmd = app.add_subcommand("predict", "Predict with a saved model");
    predict_cmd->add_option("--model", pr.model, "Model directory")->required()->check(CLI::ExistingDirectory);
    predict_cmd->add_option("--test", pr.test, "Test points CSV")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--test-labels", pr.test_labels, "Optional test labels CSV");
    predict_cmd->add_option("--out", pr.out, "Predictions CSV (default: standard output)");

    RateOpts ro;
    auto* rate = app.add_subcommand("rate", "Risk rate and optimal h under a doubling dimension");
    rate->add_option("--beta", ro.beta, "Hoelder exponent in (0,1]")->required();
    rate->add_option("--d", ro.d, "Doubling dimension")->required();
    rate->add_option("--k", ro.k, "Point dimension")->required();
    rate->add_option("--m", ro.m, "Number of training distributions")->required();
    rate->add_option("--n", ro.n, "Points per distribution")->required();
    rate->add_flag("--noiseless", ro.noiseless, "No additive label noise");

    StudyOpts so;
    auto* study = app.add_subcommand("study", "Diagnostic studies: kde-risk | doubling | small-ball");
    add_common(study, common);
    study->add_option("kind", so.kind, "kde-risk | doubling | small-ball")
        ->required()
        ->check(CLI::IsMember({"kde-risk", "doubling", "small-ball"}));
    study->add_option("--out", so.out, "Output directory")->required();
    study->add_option("--reps", so.reps, "Replicates per n (kde-risk)");
    study->add_option("--ns", so.ns, "Sample sizes (kde-risk)")->delimiter(',');
    study->add_option("--bags", so.bags, "Number of Beta densities (doubling, small-ball)");
    study->add_option("--n-per-bag", so.n_per_bag, "Points per Beta bag (doubling, small-ball)");
    study->add_option("--eps", so.eps, "Radius ratio (doubling)");
    study->add_option("--radii", so.radii, "Radii (doubling)")->delimiter(',');
    study->add_option("--radius", so.radius, "Ball radius (small-ball)");
    study->add_option("--center-a", so.center_a, "Beta parameter of the ball center (small-ball)");
    study->add_option("--distance", so.distance, "l1 | l2")->check(CLI::IsMember({"l1", "l2"}));
    study->add_option("--cells", so.cells, "Grid cells");
    study->add_option("--kernel", so.kernel, "Smoothing kernel family")
        ->check(CLI::IsMember({"epanechnikov", "triangle", "boxcar"}));

    try {
        auto args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        args.pop_back(); //! program name
        app.parse(args);
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        if (generate->parsed())
            return run_generate(gen, common);
        if (experiment->parsed())
            return run_experiment_cmd(exp, common);
        if (fitpred->parsed())
            return run_fit_predict(fp, common);
        if (predict_cmd->parsed())
            return run_predict(pr);
        if (rate->parsed())
            return run_rate(ro);
        if (study->parsed())
            return run_study(so, common);
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return exit_numeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const std::exception& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return exit_numeric;
    }
    return exit_usage;
}
