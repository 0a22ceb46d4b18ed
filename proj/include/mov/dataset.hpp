#pragma once

#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mov/error.hpp"

namespace mov {

/// Class labels are 0-based indices into ViewSchema::class_names.
struct ViewSchema {
    std::vector<std::string> view_names;
    std::vector<std::size_t> view_dims;
    std::vector<std::string> class_names;

    [[nodiscard]] std::size_t views() const { return view_dims.size(); }
    [[nodiscard]] std::size_t classes() const { return class_names.size(); }
    [[nodiscard]] std::size_t total_dim() const
    {
        return std::accumulate(view_dims.begin(), view_dims.end(), std::size_t{0});
    }

    void validate() const
    {
        if (view_names.size() != view_dims.size()) throw ConfigError("view_names and view_dims differ in length");
        if (view_dims.empty()) throw ConfigError("schema needs at least one view");
        for (auto d : view_dims)
            if (d == 0) throw ConfigError("view dimensions must be positive");
        if (class_names.size() < 2) throw ConfigError("schema needs at least two classes");
    }

    bool operator==(const ViewSchema&) const = default;
};

struct MultiViewSample {
    std::string id;
    std::vector<std::vector<double>> views;
    std::size_t label = 0;
    std::optional<std::size_t> informative_view;
    std::optional<std::string> group;

    bool operator==(const MultiViewSample&) const = default;
};

struct Dataset {
    ViewSchema schema;
    std::vector<MultiViewSample> samples;

    [[nodiscard]] std::size_t size() const { return samples.size(); }
    [[nodiscard]] bool empty() const { return samples.empty(); }

    bool operator==(const Dataset&) const = default;
};

using SampleSpan = std::span<const MultiViewSample>;

/// Concatenation of all views in schema order.
[[nodiscard]] inline std::vector<double> concat_views(const std::vector<std::vector<double>>& views)
{
    std::vector<double> out;
    std::size_t n = 0;
    for (const auto& v : views) n += v.size();
    out.reserve(n);
    for (const auto& v : views) out.insert(out.end(), v.begin(), v.end());
    return out;
}

inline void check_sample_shape(const MultiViewSample& s, std::span<const std::size_t> view_dims, std::size_t classes)
{
    if (s.views.size() != view_dims.size())
        throw ShapeError("sample '" + s.id + "' has " + std::to_string(s.views.size()) + " views, expected " +
                         std::to_string(view_dims.size()));
    for (std::size_t v = 0; v < view_dims.size(); ++v)
        if (s.views[v].size() != view_dims[v])
            throw ShapeError("sample '" + s.id + "' view " + std::to_string(v) + " has " +
                             std::to_string(s.views[v].size()) + " features, expected " + std::to_string(view_dims[v]));
    if (s.label >= classes) throw DataError("sample '" + s.id + "' has label outside the class range");
}

[[nodiscard]] inline std::vector<MultiViewSample> gather(const Dataset& data, std::span<const std::size_t> indices)
{
    std::vector<MultiViewSample> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(data.samples.at(i));
    return out;
}

} // namespace mov
