#pragma once

// Multi-view dataset ingestion (CSV), fold planning, validation carving,
// per-fold z-scoring and the synthetic multi-view generator.
//
// CSV layout: a mandatory header row; feature columns named
// `<view_name>_f<j>` with j counted from 0 inside each view; a `label` column
// holding class names; optional `id` and `group` columns. Column order is free.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mov/dataset.hpp"
#include "mov/error.hpp"
#include "mov/seed.hpp"

namespace mov::data {

// ---------------------------------------------------------------------------
// Number formatting

/// Shortest decimal string that parses back to the identical double.
[[nodiscard]] inline std::string format_double(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw NumericError("cannot format double");
    return std::string(buf, ptr);
}

[[nodiscard]] inline std::optional<double> parse_double(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line)
{
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    for (auto& cell : out) {
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.erase(cell.begin());
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.pop_back();
    }
    return out;
}

/// Splits `<view>_f<j>` into (view, j).
inline std::optional<std::pair<std::string, std::size_t>> parse_feature_column(std::string_view name)
{
    auto pos = name.rfind("_f");
    if (pos == std::string_view::npos || pos == 0 || pos + 2 >= name.size()) return std::nullopt;
    std::size_t j = 0;
    auto digits = name.substr(pos + 2);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), j);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
    return std::pair{std::string(name.substr(0, pos)), j};
}

} // namespace detail

/// Recovers view names and dimensions from a header row.
[[nodiscard]] inline ViewSchema infer_schema(const std::vector<std::string>& header,
                                             std::vector<std::string> class_names)
{
    ViewSchema schema;
    schema.class_names = std::move(class_names);
    std::map<std::string, std::set<std::size_t>> seen;
    for (const auto& col : header) {
        if (col == "id" || col == "label" || col == "group") continue;
        auto parsed = detail::parse_feature_column(col);
        if (!parsed) throw DataError("header column '" + col + "' is not of the form <view>_f<j>");
        if (!seen.contains(parsed->first)) schema.view_names.push_back(parsed->first);
        if (!seen[parsed->first].insert(parsed->second).second) throw DataError("duplicate header column '" + col + "'");
    }
    for (const auto& name : schema.view_names) {
        const auto& idx = seen[name];
        if (*idx.rbegin() + 1 != idx.size())
            throw DataError("view '" + name + "' feature columns must be numbered 0.." + std::to_string(idx.size() - 1));
        schema.view_dims.push_back(idx.size());
    }
    schema.validate();
    return schema;
}

[[nodiscard]] inline std::vector<std::string> read_header(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw DataError("CSV is empty: header row is mandatory");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF && static_cast<unsigned char>(line[1]) == 0xBB &&
        static_cast<unsigned char>(line[2]) == 0xBF)
        line.erase(0, 3);
    return detail::split_csv_line(line);
}

[[nodiscard]] inline Dataset read_csv(std::istream& in, const ViewSchema& schema)
{
    schema.validate();
    const auto header = read_header(in);

    std::unordered_map<std::string, std::size_t> column_of;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (!column_of.emplace(header[c], c).second) throw DataError("duplicate header column '" + header[c] + "'");

    std::vector<std::string> missing;
    auto find = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = column_of.find(name);
        if (it == column_of.end()) return std::nullopt;
        return it->second;
    };
    const auto label_col = find("label");
    if (!label_col) missing.emplace_back("label");
    const auto id_col = find("id");
    const auto group_col = find("group");
    std::vector<std::vector<std::size_t>> feature_cols(schema.views());
    for (std::size_t v = 0; v < schema.views(); ++v)
        for (std::size_t j = 0; j < schema.view_dims[v]; ++j) {
            auto name = schema.view_names[v] + "_f" + std::to_string(j);
            if (auto c = find(name))
                feature_cols[v].push_back(*c);
            else
                missing.push_back(name);
        }
    if (!missing.empty()) {
        std::string msg = "CSV is missing columns:";
        for (const auto& m : missing) msg += " " + m;
        throw DataError(msg);
    }

    std::unordered_map<std::string, std::size_t> label_index;
    for (std::size_t k = 0; k < schema.classes(); ++k) label_index[schema.class_names[k]] = k;

    Dataset out;
    out.schema = schema;
    std::vector<std::string> problems;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            problems.push_back("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                               " fields, found " + std::to_string(cells.size()));
            continue;
        }
        MultiViewSample s;
        s.id = id_col ? cells[*id_col] : "row" + std::to_string(line_no);
        if (group_col) s.group = cells[*group_col];
        bool ok = true;
        auto lbl = label_index.find(cells[*label_col]);
        if (lbl == label_index.end()) {
            problems.push_back("line " + std::to_string(line_no) + ": unknown label '" + cells[*label_col] + "'");
            ok = false;
        } else {
            s.label = lbl->second;
        }
        s.views.resize(schema.views());
        for (std::size_t v = 0; v < schema.views(); ++v) {
            s.views[v].reserve(schema.view_dims[v]);
            for (auto c : feature_cols[v]) {
                auto value = parse_double(cells[c]);
                if (!value) {
                    problems.push_back("line " + std::to_string(line_no) + ": non-numeric value '" + cells[c] +
                                       "' in column " + header[c]);
                    ok = false;
                    s.views[v].push_back(0.0);
                } else {
                    s.views[v].push_back(*value);
                }
            }
        }
        if (ok) out.samples.push_back(std::move(s));
    }
    if (!problems.empty()) {
        std::string msg = "CSV ingestion failed (" + std::to_string(problems.size()) + " problem(s)):";
        for (const auto& p : problems) msg += "\n  " + p;
        throw DataError(msg);
    }
    return out;
}

[[nodiscard]] inline Dataset load_csv(const std::string& path, const ViewSchema& schema)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_csv(in, schema);
}

/// Loads a CSV whose view layout is taken from its own header.
[[nodiscard]] inline Dataset load_csv(const std::string& path, std::vector<std::string> class_names)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    auto schema = infer_schema(read_header(in), std::move(class_names));
    in.clear();
    in.seekg(0);
    return read_csv(in, schema);
}

inline void write_csv(std::ostream& out, const Dataset& data)
{
    const auto& schema = data.schema;
    const bool has_group = std::any_of(data.samples.begin(), data.samples.end(),
                                       [](const auto& s) { return s.group.has_value(); });
    out << "id";
    if (has_group) out << ",group";
    for (std::size_t v = 0; v < schema.views(); ++v)
        for (std::size_t j = 0; j < schema.view_dims[v]; ++j) out << ',' << schema.view_names[v] << "_f" << j;
    out << ",label\n";
    for (const auto& s : data.samples) {
        out << s.id;
        if (has_group) out << ',' << s.group.value_or("");
        for (const auto& view : s.views)
            for (double x : view) out << ',' << format_double(x);
        out << ',' << schema.class_names.at(s.label) << '\n';
    }
}

inline void save_csv(const std::string& path, const Dataset& data)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_csv(out, data);
}

/// Ground-truth sidecar: `id,informative_view` with the view given by name.
inline void write_truth_csv(std::ostream& out, const Dataset& data)
{
    out << "id,informative_view\n";
    for (const auto& s : data.samples)
        out << s.id << ',' << (s.informative_view ? data.schema.view_names.at(*s.informative_view) : "") << '\n';
}

inline void attach_truth_csv(std::istream& in, Dataset& data)
{
    const auto header = read_header(in);
    if (header.size() != 2 || header[0] != "id" || header[1] != "informative_view")
        throw DataError("truth sidecar header must be 'id,informative_view'");
    std::unordered_map<std::string, std::size_t> view_of;
    std::string line;
    std::size_t line_no = 1;
    std::vector<std::string> problems;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != 2) {
            problems.push_back("line " + std::to_string(line_no) + ": expected 2 fields");
            continue;
        }
        if (cells[1].empty()) continue;
        auto it = std::find(data.schema.view_names.begin(), data.schema.view_names.end(), cells[1]);
        if (it == data.schema.view_names.end()) {
            problems.push_back("line " + std::to_string(line_no) + ": unknown view '" + cells[1] + "'");
            continue;
        }
        view_of[cells[0]] = static_cast<std::size_t>(it - data.schema.view_names.begin());
    }
    if (!problems.empty()) {
        std::string msg = "truth sidecar rejected:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw DataError(msg);
    }
    for (auto& s : data.samples)
        if (auto it = view_of.find(s.id); it != view_of.end()) s.informative_view = it->second;
}

// ---------------------------------------------------------------------------
// Grouping

[[nodiscard]] inline Dataset filter_group(const Dataset& data, const std::string& group)
{
    Dataset out;
    out.schema = data.schema;
    for (const auto& s : data.samples)
        if (s.group && *s.group == group) out.samples.push_back(s);
    return out;
}

// ---------------------------------------------------------------------------
// Fold planning

struct FoldPlan {
    std::size_t k_folds = 0;
    std::vector<std::size_t> assignments;
    std::uint64_t seed = 0;

    [[nodiscard]] std::vector<std::size_t> test_indices(std::size_t fold) const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] == fold) out.push_back(i);
        return out;
    }

    [[nodiscard]] std::vector<std::size_t> train_indices(std::size_t fold) const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] != fold) out.push_back(i);
        return out;
    }

    bool operator==(const FoldPlan&) const = default;
};

/// Per-class shuffle, then round-robin over folds. The round-robin cursor
/// carries over between classes so fold sizes also stay within one sample.
[[nodiscard]] inline FoldPlan stratified_kfold(const Dataset& data, std::size_t k_folds, std::uint64_t seed)
{
    if (k_folds < 2) throw ConfigError("k_folds must be at least 2");
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < data.samples.size(); ++i) by_class[data.samples[i].label].push_back(i);
    for (const auto& [label, idx] : by_class)
        if (idx.size() < k_folds)
            throw ConfigError("class " + std::to_string(label) + " has " + std::to_string(idx.size()) +
                              " samples, fewer than k_folds=" + std::to_string(k_folds));

    FoldPlan plan;
    plan.k_folds = k_folds;
    plan.seed = seed;
    plan.assignments.assign(data.samples.size(), 0);
    std::size_t cursor = 0;
    for (auto& [label, idx] : by_class) {
        std::mt19937_64 rng(derive_seed(seed, label));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (auto i : idx) plan.assignments[i] = cursor++ % k_folds;
    }
    return plan;
}

[[nodiscard]] inline nlohmann::json fold_plan_to_json(const FoldPlan& plan, const Dataset& data)
{
    nlohmann::json assignments = nlohmann::json::object();
    for (std::size_t i = 0; i < plan.assignments.size(); ++i) assignments[data.samples.at(i).id] = plan.assignments[i];
    return {{"k_folds", plan.k_folds}, {"seed", plan.seed}, {"assignments", assignments}};
}

struct ValidationSplit {
    std::vector<std::size_t> inner_train;
    std::vector<std::size_t> validation;

    bool operator==(const ValidationSplit&) const = default;
};

/// Stratified validation carve out of `train`. Each class with at least two
/// training samples contributes at least one validation sample and keeps at
/// least one for training; singleton classes stay in training.
[[nodiscard]] inline ValidationSplit carve_validation(const Dataset& data, std::span<const std::size_t> train,
                                                      double fraction, std::uint64_t seed)
{
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must lie in (0, 1)");
    if (train.empty()) throw ConfigError("cannot carve a validation set from an empty training set");

    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (auto i : train) by_class[data.samples.at(i).label].push_back(i);

    const double n = static_cast<double>(train.size());
    const auto target = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * n)));

    // largest-remainder apportionment of `target` over classes
    std::vector<std::size_t> labels;
    std::vector<std::size_t> quota;
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (const auto& [label, idx] : by_class) {
        const double exact = static_cast<double>(target) * static_cast<double>(idx.size()) / n;
        const auto base = static_cast<std::size_t>(std::floor(exact));
        remainders.emplace_back(exact - static_cast<double>(base), labels.size());
        labels.push_back(label);
        quota.push_back(base);
        assigned += base;
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < target && r < remainders.size(); ++r, ++assigned) ++quota[remainders[r].second];

    ValidationSplit split;
    for (std::size_t c = 0; c < labels.size(); ++c) {
        auto idx = by_class[labels[c]];
        const std::size_t n_c = idx.size();
        const std::size_t q = n_c < 2 ? 0 : std::clamp<std::size_t>(quota[c], 1, n_c - 1);
        std::mt19937_64 rng(derive_seed(seed, labels[c]));
        std::shuffle(idx.begin(), idx.end(), rng);
        split.validation.insert(split.validation.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(q));
        split.inner_train.insert(split.inner_train.end(), idx.begin() + static_cast<std::ptrdiff_t>(q), idx.end());
    }
    if (split.validation.empty() || split.inner_train.empty())
        throw ConfigError("stratified validation carve is infeasible for " + std::to_string(train.size()) +
                          " training samples");
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.inner_train.begin(), split.inner_train.end());
    return split;
}

// ---------------------------------------------------------------------------
// Standardization

struct StandardizationStats {
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> stddev;

    bool operator==(const StandardizationStats&) const = default;
};

inline constexpr double kStdFloor = 1e-8;

/// Per-feature population mean/std. The mean is accumulated relative to the
/// first sample so a constant feature yields its value exactly.
[[nodiscard]] inline StandardizationStats fit_standardizer(SampleSpan samples)
{
    if (samples.empty()) throw DataError("cannot fit a standardizer on an empty set");
    const auto& first = samples.front();
    StandardizationStats stats;
    const double n = static_cast<double>(samples.size());
    for (std::size_t v = 0; v < first.views.size(); ++v) {
        const std::size_t dim = first.views[v].size();
        std::vector<double> mean(dim), sd(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            const double ref = first.views[v][j];
            double shift = 0.0;
            for (const auto& s : samples) shift += s.views.at(v).at(j) - ref;
            mean[j] = ref + shift / n;
            double ss = 0.0;
            for (const auto& s : samples) {
                const double d = s.views[v][j] - mean[j];
                ss += d * d;
            }
            sd[j] = std::max(std::sqrt(ss / n), kStdFloor);
        }
        stats.mean.push_back(std::move(mean));
        stats.stddev.push_back(std::move(sd));
    }
    return stats;
}

/// Stats that leave features untouched (raw-feature mode).
[[nodiscard]] inline StandardizationStats identity_standardizer(const ViewSchema& schema)
{
    StandardizationStats stats;
    for (auto d : schema.view_dims) {
        stats.mean.emplace_back(d, 0.0);
        stats.stddev.emplace_back(d, 1.0);
    }
    return stats;
}

inline void apply_standardizer(const StandardizationStats& stats, MultiViewSample& s)
{
    if (s.views.size() != stats.mean.size()) throw ShapeError("standardizer view count mismatch");
    for (std::size_t v = 0; v < s.views.size(); ++v) {
        if (s.views[v].size() != stats.mean[v].size()) throw ShapeError("standardizer feature count mismatch");
        for (std::size_t j = 0; j < s.views[v].size(); ++j)
            s.views[v][j] = (s.views[v][j] - stats.mean[v][j]) / stats.stddev[v][j];
    }
}

[[nodiscard]] inline std::vector<MultiViewSample> apply_standardizer(const StandardizationStats& stats,
                                                                     std::vector<MultiViewSample> samples)
{
    for (auto& s : samples) apply_standardizer(stats, s);
    return samples;
}

[[nodiscard]] inline Dataset apply_standardizer(const StandardizationStats& stats, Dataset data)
{
    for (auto& s : data.samples) apply_standardizer(stats, s);
    return data;
}

// ---------------------------------------------------------------------------
// Synthetic generator

struct SyntheticConfig {
    std::size_t n_samples = 1400;
    std::vector<std::size_t> view_dims{14, 14};
    std::vector<std::string> view_names;   // defaults to view0, view1, ...
    std::vector<std::string> class_names;  // defaults to {"benign", "malignant"} for k=2
    std::size_t classes = 2;
    double separation = 2.0;
    std::vector<double> informative_prior{0.5, 0.5};
    double noise_std = 1.0;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (view_dims.empty()) throw ConfigError("synthetic config needs at least one view");
        for (auto d : view_dims)
            if (d == 0) throw ConfigError("view dimensions must be positive");
        if (classes < 2) throw ConfigError("synthetic config needs at least two classes");
        if (informative_prior.size() != view_dims.size())
            throw ConfigError("informative_prior must have one entry per view");
        double sum = 0.0;
        for (auto p : informative_prior) {
            if (!(p >= 0.0)) throw ConfigError("informative_prior entries must be non-negative");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("informative_prior must sum to 1");
        if (!(separation >= 0.0)) throw ConfigError("separation must be non-negative");
        if (!(noise_std > 0.0)) throw ConfigError("noise_std must be positive");
        if (!view_names.empty() && view_names.size() != view_dims.size())
            throw ConfigError("view_names must match view_dims");
        if (!class_names.empty() && class_names.size() != classes)
            throw ConfigError("class_names must have one entry per class");
    }

    [[nodiscard]] ViewSchema schema() const
    {
        ViewSchema s;
        s.view_dims = view_dims;
        if (view_names.empty())
            for (std::size_t v = 0; v < view_dims.size(); ++v) s.view_names.push_back("view" + std::to_string(v));
        else
            s.view_names = view_names;
        if (!class_names.empty())
            s.class_names = class_names;
        else if (classes == 2)
            s.class_names = {"benign", "malignant"};
        else
            for (std::size_t k = 0; k < classes; ++k) s.class_names.push_back("class" + std::to_string(k));
        return s;
    }
};

/// Per sample: label uniform over classes; informative view z drawn from the
/// prior. View z is centred on (label - (k-1)/2) * separation along the unit
/// all-ones direction with isotropic noise of std `noise_std` (so binary
/// class means sit at -d/2 and +d/2). Every other view is standard normal and
/// class-independent.
[[nodiscard]] inline Dataset generate_synthetic(const SyntheticConfig& config)
{
    config.validate();
    Dataset out;
    out.schema = config.schema();

    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<std::size_t> pick_label(0, config.classes - 1);
    std::discrete_distribution<std::size_t> pick_view(config.informative_prior.begin(), config.informative_prior.end());
    std::normal_distribution<double> normal(0.0, 1.0);

    const std::size_t width = std::to_string(config.n_samples).size();
    const double centre = (static_cast<double>(config.classes) - 1.0) / 2.0;
    out.samples.reserve(config.n_samples);
    for (std::size_t t = 0; t < config.n_samples; ++t) {
        MultiViewSample s;
        auto id = std::to_string(t);
        s.id = "s" + std::string(width - id.size(), '0') + id;
        s.label = pick_label(rng);
        const std::size_t z = pick_view(rng);
        s.informative_view = z;
        s.views.resize(config.view_dims.size());
        for (std::size_t v = 0; v < config.view_dims.size(); ++v) {
            const std::size_t dim = config.view_dims[v];
            auto& x = s.views[v];
            x.resize(dim);
            if (v == z) {
                const double offset =
                    (static_cast<double>(s.label) - centre) * config.separation / std::sqrt(static_cast<double>(dim));
                for (auto& xi : x) xi = offset + config.noise_std * normal(rng);
            } else {
                for (auto& xi : x) xi = normal(rng);
            }
        }
        out.samples.push_back(std::move(s));
    }
    return out;
}

[[nodiscard]] inline Dataset generate_synthetic(SyntheticConfig config, std::uint64_t seed)
{
    config.seed = seed;
    return generate_synthetic(config);
}

} // namespace mov::data
