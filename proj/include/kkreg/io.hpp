#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kkreg/density.hpp"
#include "kkreg/errors.hpp"
#include "kkreg/regressor.hpp"

namespace kkreg::io {

namespace fs = std::filesystem;

//! Shortest round-trippable text: 17 significant digits.
inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_fields(std::string_view line, char sep = ',')
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

inline std::string where(const fs::path& path, std::size_t line)
{
    return path.string() + ":" + std::to_string(line) + ": ";
}

inline double parse_double(const std::string& s, const fs::path& path, std::size_t line)
{
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
        throw DataError(where(path, line) + "invalid number '" + s + "'");
    return v;
}

inline std::uint64_t parse_id(const std::string& s, const fs::path& path, std::size_t line)
{
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || ptr != end)
        throw DataError(where(path, line) + "invalid bag_id '" + s + "' (expected a nonnegative integer)");
    return v;
}

inline std::ifstream open_in(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path.string() + "' for reading");
    return in;
}

inline std::ofstream open_out(const fs::path& path)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot open '" + path.string() + "' for writing");
    return out;
}

//! Bags keyed by bag_id, in ascending id order.
using BagMap = std::map<std::uint64_t, SampleBag>;
using LabelMap = std::map<std::uint64_t, double>;

//! Reads `bag_id,x0,...,x{k-1}`; rows of one bag need not be contiguous.
inline BagMap read_points_csv(const fs::path& path)
{
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line))
        throw DataError(where(path, 1) + "empty file, expected header bag_id,x0,...");
    const auto header = split_fields(line);
    if (header.size() < 2 || header[0] != "bag_id")
        throw DataError(where(path, 1) + "header must be bag_id,x0,...,x{k-1}");
    const std::size_t k = header.size() - 1;
    for (std::size_t d = 0; d < k; ++d)
        if (header[d + 1] != "x" + std::to_string(d))
            throw DataError(where(path, 1) + "expected column 'x" + std::to_string(d) + "', found '" + header[d + 1] + "'");
    std::map<std::uint64_t, std::vector<double>> coords;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        const auto f = split_fields(line);
        if (f.size() != k + 1)
            throw DataError(where(path, lineno) + "expected " + std::to_string(k + 1) + " fields, found " +
                            std::to_string(f.size()));
        auto& dst = coords[parse_id(f[0], path, lineno)];
        for (std::size_t d = 0; d < k; ++d)
            dst.push_back(parse_double(f[d + 1], path, lineno));
    }
    if (coords.empty())
        throw DataError(path.string() + ": no data rows");
    BagMap out;
    for (auto& [id, c] : coords)
        out.emplace(id, SampleBag(k, std::move(c)));
    return out;
}

inline void write_points_csv(const fs::path& path, const std::vector<std::pair<std::uint64_t, const SampleBag*>>& bags)
{
    auto out = open_out(path);
    const std::size_t k = bags.empty() ? 1 : bags.front().second->dim();
    out << "bag_id";
    for (std::size_t d = 0; d < k; ++d)
        out << ",x" << d;
    out << '\n';
    for (const auto& [id, bag] : bags) {
        for (std::size_t j = 0; j < bag->size(); ++j) {
            out << id;
            for (double v : bag->point(j))
                out << ',' << format_double(v);
            out << '\n';
        }
    }
    if (!out)
        throw DataError("write failed for '" + path.string() + "'");
}

inline LabelMap read_labels_csv(const fs::path& path)
{
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || split_fields(line) != std::vector<std::string>{"bag_id", "y"})
        throw DataError(where(path, 1) + "header must be bag_id,y");
    LabelMap out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        const auto f = split_fields(line);
        if (f.size() != 2)
            throw DataError(where(path, lineno) + "expected 2 fields, found " + std::to_string(f.size()));
        const auto id = parse_id(f[0], path, lineno);
        if (!out.emplace(id, parse_double(f[1], path, lineno)).second)
            throw DataError(where(path, lineno) + "duplicate label for bag_id " + std::to_string(id));
    }
    return out;
}

inline void write_labels_csv(const fs::path& path, const std::vector<std::pair<std::uint64_t, double>>& labels)
{
    auto out = open_out(path);
    out << "bag_id,y\n";
    for (const auto& [id, y] : labels)
        out << id << ',' << format_double(y) << '\n';
}

//! `cell_index,center0,...,center{k-1},value`
inline void write_density_csv(const fs::path& path, const GridDensity& density)
{
    auto out = open_out(path);
    const std::size_t k = density.spec.dim();
    out << "cell_index";
    for (std::size_t d = 0; d < k; ++d)
        out << ",center" << d;
    out << ",value\n";
    for (std::size_t i = 0; i < density.values.size(); ++i) {
        const auto idx = density.spec.unravel(i);
        out << i;
        for (std::size_t d = 0; d < k; ++d)
            out << ',' << format_double(density.spec.center(d, idx[d]));
        out << ',' << format_double(density.values[i]) << '\n';
    }
}

struct PredictionRow {
    std::uint64_t bag_id = 0;
    std::optional<double> y_true;
    double y_pred = 0.0;
};

inline void write_predictions_csv(std::ostream& out, const std::vector<PredictionRow>& rows)
{
    const bool with_truth = !rows.empty() && rows.front().y_true.has_value();
    out << (with_truth ? "bag_id,y_true,y_pred\n" : "bag_id,y_pred\n");
    for (const auto& r : rows) {
        out << r.bag_id << ',';
        if (with_truth)
            out << format_double(r.y_true.value_or(0.0)) << ',';
        out << format_double(r.y_pred) << '\n';
    }
}

//! Ordered key=value text; `#` starts a comment line.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline void write_key_values(std::ostream& out, const KeyValues& kv)
{
    for (const auto& [k, v] : kv)
        out << k << '=' << v << '\n';
}

inline void write_key_values(const fs::path& path, const KeyValues& kv)
{
    auto out = open_out(path);
    write_key_values(out, kv);
}

inline std::map<std::string, std::string> read_key_values(const fs::path& path)
{
    auto in = open_in(path);
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#')
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw DataError(where(path, lineno) + "expected key=value");
        out[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
    }
    return out;
}

inline const std::string& require_key(const std::map<std::string, std::string>& kv, const std::string& key,
                                      const fs::path& path)
{
    const auto it = kv.find(key);
    if (it == kv.end())
        throw DataError(path.string() + ": missing key '" + key + "'");
    return it->second;
}

namespace detail {

template <class T, class Fn>
std::string join(const std::vector<T>& xs, Fn&& fmt)
{
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i)
            s += ',';
        s += fmt(xs[i]);
    }
    return s;
}

inline std::vector<double> parse_double_list(const std::string& s, const fs::path& path)
{
    std::vector<double> out;
    for (const auto& f : split_fields(s))
        out.push_back(parse_double(f, path, 0));
    return out;
}

} // namespace detail

//! Directory layout: `meta` (key=value), `densities.csv` (density,cell_index,value),
//! `responses.csv` (index,y).
inline void save_model(const fs::path& dir, const KernelKernelModel& model)
{
    fs::create_directories(dir);
    const auto& g = model.grid;
    const auto& rk = model.kernels.regression;
    write_key_values(dir / "meta",
                     {{"format", "kkreg-model-1"},
                      {"h", format_double(model.h)},
                      {"b", format_double(model.b)},
                      {"k", std::to_string(g.dim())},
                      {"m", std::to_string(model.size())},
                      {"distance", std::string(to_string(model.distance))},
                      {"smoothing_kernel", std::string(to_string(model.kernels.smoothing.family))},
                      {"smoothing_support_radius", format_double(model.kernels.smoothing.support_radius)},
                      {"regression_kernel", std::string(to_string(rk.family))},
                      {"regression_lipschitz", format_double(rk.lipschitz)},
                      {"regression_lower", format_double(rk.lower)},
                      {"regression_r", format_double(rk.r)},
                      {"regression_R", format_double(rk.R)},
                      {"grid_lo", detail::join(g.lo, format_double)},
                      {"grid_hi", detail::join(g.hi, format_double)},
                      {"grid_cells", detail::join(g.cells, [](std::size_t c) { return std::to_string(c); })}});
    {
        auto out = open_out(dir / "densities.csv");
        out << "density,cell_index,value\n";
        for (std::size_t i = 0; i < model.densities.size(); ++i)
            for (std::size_t c = 0; c < model.densities[i].values.size(); ++c)
                out << i << ',' << c << ',' << format_double(model.densities[i].values[c]) << '\n';
    }
    auto out = open_out(dir / "responses.csv");
    out << "index,y\n";
    for (std::size_t i = 0; i < model.responses.size(); ++i)
        out << i << ',' << format_double(model.responses[i]) << '\n';
}

inline KernelKernelModel load_model(const fs::path& dir)
{
    const fs::path meta_path = dir / "meta";
    const auto meta = read_key_values(meta_path);
    auto get = [&](const std::string& key) -> const std::string& { return require_key(meta, key, meta_path); };
    const double h = parse_double(get("h"), meta_path, 0);
    const double b = parse_double(get("b"), meta_path, 0);
    const auto m = static_cast<std::size_t>(parse_id(get("m"), meta_path, 0));
    std::vector<std::size_t> cells;
    for (const auto& f : split_fields(get("grid_cells")))
        cells.push_back(static_cast<std::size_t>(parse_id(f, meta_path, 0)));
    const GridSpec grid(detail::parse_double_list(get("grid_lo"), meta_path),
                        detail::parse_double_list(get("grid_hi"), meta_path), cells);
    if (grid.dim() != static_cast<std::size_t>(parse_id(get("k"), meta_path, 0)))
        throw DataError(meta_path.string() + ": k does not match grid dimension");
    KernelPair kernels;
    kernels.smoothing.family = smoothing_family_from_string(get("smoothing_kernel"));
    kernels.smoothing.support_radius = parse_double(get("smoothing_support_radius"), meta_path, 0);
    regression_family_from_string(get("regression_kernel"));
    kernels.regression = RegressionKernel::with_constants(
        parse_double(get("regression_lipschitz"), meta_path, 0), parse_double(get("regression_lower"), meta_path, 0),
        parse_double(get("regression_r"), meta_path, 0), parse_double(get("regression_R"), meta_path, 0));
    const Distance distance = distance_from_string(get("distance"));

    const std::size_t cells_total = grid.total_cells();
    std::vector<GridDensity> densities(m, GridDensity{grid, std::vector<double>(cells_total, 0.0)});
    std::vector<std::vector<bool>> seen(m, std::vector<bool>(cells_total, false));
    {
        const fs::path path = dir / "densities.csv";
        auto in = open_in(path);
        std::string line;
        std::getline(in, line);
        if (split_fields(line) != std::vector<std::string>{"density", "cell_index", "value"})
            throw DataError(where(path, 1) + "header must be density,cell_index,value");
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty())
                continue;
            const auto f = split_fields(line);
            if (f.size() != 3)
                throw DataError(where(path, lineno) + "expected 3 fields");
            const auto i = parse_id(f[0], path, lineno);
            const auto c = parse_id(f[1], path, lineno);
            if (i >= m || c >= cells_total)
                throw DataError(where(path, lineno) + "index out of range");
            densities[i].values[c] = parse_double(f[2], path, lineno);
            seen[i][c] = true;
        }
        for (const auto& s : seen)
            for (bool v : s)
                if (!v)
                    throw DataError(path.string() + ": incomplete density table");
    }
    std::vector<double> responses(m);
    std::vector<bool> have(m, false);
    {
        const fs::path path = dir / "responses.csv";
        auto in = open_in(path);
        std::string line;
        std::getline(in, line);
        if (split_fields(line) != std::vector<std::string>{"index", "y"})
            throw DataError(where(path, 1) + "header must be index,y");
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty())
                continue;
            const auto f = split_fields(line);
            if (f.size() != 2)
                throw DataError(where(path, lineno) + "expected 2 fields");
            const auto i = parse_id(f[0], path, lineno);
            if (i >= m)
                throw DataError(where(path, lineno) + "index out of range");
            responses[i] = parse_double(f[1], path, lineno);
            have[i] = true;
        }
        for (bool v : have)
            if (!v)
                throw DataError(path.string() + ": missing responses");
    }
    return make_model(std::move(densities), std::move(responses), h, b, distance, kernels, grid);
}

} // namespace kkreg::io
