#pragma once

// Comparison models: a classifier on a single view, fixed-average decision
// fusion (Avg) and feature-concatenation fusion (Concat). All of them share
// the trainer and the train/predict contract of MoVModel.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mov/dataset.hpp"
#include "mov/error.hpp"
#include "mov/model.hpp"
#include "mov/nn.hpp"
#include "mov/seed.hpp"
#include "mov/train.hpp"

namespace mov {

inline constexpr std::uint64_t kConcatNetwork = 0xC0C47ULL;

namespace detail {

/// Mean softmax cross-entropy of one network and its gradient, for the
/// per-sample inputs produced by `input_of`.
template <class InputFn>
std::pair<double, nn::MLPParams> single_network_objective(const nn::MLPParams& net, SampleSpan batch,
                                                          double dropout_rate, std::uint64_t mask_seed,
                                                          std::uint64_t network, InputFn&& input_of)
{
    if (batch.empty()) throw DataError("objective on an empty batch");
    const auto mode = dropout_rate > 0.0 ? nn::Mode::train : nn::Mode::infer;
    const double scale = 1.0 / static_cast<double>(batch.size());
    auto grad = nn::zeros_like(net);
    nn::ForwardCache cache;
    std::vector<double> logit_grad;
    double total = 0.0;
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const auto& s = batch[t];
        check_label(s.label, net.output_size());
        nn::mlp_forward(net, input_of(s), mode, dropout_rate, derive_seed(sample_mask_seed(mask_seed, t), network),
                        cache);
        const auto log_p = nn::log_softmax(cache.logits());
        const double loss = -log_p[s.label];
        if (!std::isfinite(loss)) throw NumericError("non-finite loss at batch sample " + std::to_string(t));
        total += loss;
        logit_grad.resize(log_p.size());
        for (std::size_t c = 0; c < log_p.size(); ++c)
            logit_grad[c] = -scale * ((c == s.label ? 1.0 : 0.0) - std::exp(log_p[c]));
        nn::mlp_backward_accumulate(net, cache, logit_grad, grad);
    }
    return {total * scale, std::move(grad)};
}

template <class InputFn>
double single_network_nll(const nn::MLPParams& net, SampleSpan samples, InputFn&& input_of)
{
    if (samples.empty()) throw DataError("NLL of an empty dataset");
    nn::ForwardCache cache;
    double total = 0.0;
    for (const auto& s : samples) {
        check_label(s.label, net.output_size());
        nn::mlp_forward(net, input_of(s), nn::Mode::infer, 0.0, 0, cache);
        total -= nn::log_softmax(cache.logits())[s.label];
    }
    return total / static_cast<double>(samples.size());
}

} // namespace detail

class SingleViewModel {
public:
    using Params = nn::MLPParams;

    SingleViewModel(std::size_t view, nn::MLPParams net) : view_(view), net_(std::move(net)) {}

    [[nodiscard]] std::size_t view() const { return view_; }
    [[nodiscard]] nn::MLPParams& parameters() { return net_; }
    [[nodiscard]] const nn::MLPParams& parameters() const { return net_; }

    [[nodiscard]] std::pair<double, nn::MLPParams> batch_objective(SampleSpan batch, const TrainConfig& cfg,
                                                                   std::uint64_t mask_seed) const
    {
        return detail::single_network_objective(net_, batch, cfg.dropout_rate, mask_seed, expert_network(view_),
                                                [this](const MultiViewSample& s) { return input(s); });
    }

    [[nodiscard]] double validation_nll(SampleSpan samples) const
    {
        return detail::single_network_nll(net_, samples, [this](const MultiViewSample& s) { return input(s); });
    }

    [[nodiscard]] std::vector<double> predict_proba(const MultiViewSample& s) const
    {
        return nn::softmax(nn::mlp_forward(net_, input(s), nn::Mode::infer).first);
    }

private:
    [[nodiscard]] std::span<const double> input(const MultiViewSample& s) const
    {
        if (view_ >= s.views.size()) throw ShapeError("sample '" + s.id + "' lacks view " + std::to_string(view_));
        return s.views[view_];
    }

    std::size_t view_;
    nn::MLPParams net_;
};

/// The expert networks of a fusion model, as one parameter set.
struct ExpertSet {
    std::vector<nn::MLPParams> experts;

    [[nodiscard]] std::vector<std::span<double>> blocks()
    {
        std::vector<std::span<double>> out;
        for (auto& e : experts) {
            auto b = e.blocks();
            out.insert(out.end(), b.begin(), b.end());
        }
        return out;
    }

    [[nodiscard]] std::vector<std::span<const double>> blocks() const
    {
        std::vector<std::span<const double>> out;
        for (const auto& e : experts) {
            auto b = e.blocks();
            out.insert(out.end(), b.begin(), b.end());
        }
        return out;
    }

    [[nodiscard]] std::vector<std::string> block_names() const
    {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < experts.size(); ++i) {
            auto b = experts[i].block_names("expert" + std::to_string(i) + ".");
            out.insert(out.end(), b.begin(), b.end());
        }
        return out;
    }

    bool operator==(const ExpertSet&) const = default;
};

/// Decision averaging: MoV with the gate replaced by constant weights 1/m.
/// By default the experts are trained jointly on the uniform-mixture
/// likelihood (plus the lambda per-view term, as in MoV); with `independent`
/// each expert is trained on its own view's likelihood only.
class AvgFusionModel {
public:
    using Params = ExpertSet;

    AvgFusionModel(std::vector<nn::MLPParams> experts, bool independent = false)
        : experts_{std::move(experts)}, independent_(independent)
    {
        if (experts_.experts.size() < 2) throw ConfigError("Avg fusion needs at least two views");
    }

    [[nodiscard]] bool independent() const { return independent_; }
    [[nodiscard]] ExpertSet& parameters() { return experts_; }
    [[nodiscard]] const ExpertSet& parameters() const { return experts_; }

    [[nodiscard]] std::pair<double, ExpertSet> batch_objective(SampleSpan batch, const TrainConfig& cfg,
                                                               std::uint64_t mask_seed) const
    {
        if (batch.empty()) throw DataError("objective on an empty batch");
        const auto& experts = experts_.experts;
        const std::size_t m = experts.size();
        const auto mode = cfg.dropout_rate > 0.0 ? nn::Mode::train : nn::Mode::infer;
        const double scale = 1.0 / static_cast<double>(batch.size());
        // Same arithmetic as the log-softmax of an all-zero gate output.
        const std::vector<double> log_gate(m, -std::log(static_cast<double>(m)));

        ExpertSet grad;
        for (const auto& e : experts) grad.experts.push_back(nn::zeros_like(e));
        std::vector<nn::ForwardCache> caches(m);
        std::vector<std::vector<double>> log_expert(m), expert_grad;
        std::vector<double> posterior, gate_grad;
        double total = 0.0;
        for (std::size_t t = 0; t < batch.size(); ++t) {
            const auto& s = batch[t];
            if (s.views.size() != m) throw ShapeError("sample '" + s.id + "' has the wrong number of views");
            detail::check_label(s.label, experts.front().output_size());
            const auto seed = sample_mask_seed(mask_seed, t);
            for (std::size_t i = 0; i < m; ++i) {
                nn::mlp_forward(experts[i], s.views[i], mode, cfg.dropout_rate, derive_seed(seed, expert_network(i)),
                                caches[i]);
                log_expert[i] = nn::log_softmax(caches[i].logits());
            }
            double loss = 0.0;
            if (independent_) {
                expert_grad.resize(m);
                for (std::size_t i = 0; i < m; ++i) {
                    loss -= log_expert[i][s.label];
                    expert_grad[i].resize(log_expert[i].size());
                    for (std::size_t c = 0; c < log_expert[i].size(); ++c)
                        expert_grad[i][c] = -scale * ((c == s.label ? 1.0 : 0.0) - std::exp(log_expert[i][c]));
                }
            } else {
                loss = detail::mixture_objective(log_gate, log_expert, s.label, cfg.lambda, scale, posterior, gate_grad,
                                                 expert_grad);
            }
            if (!std::isfinite(loss)) throw NumericError("non-finite loss at batch sample " + std::to_string(t));
            total += loss;
            for (std::size_t i = 0; i < m; ++i)
                nn::mlp_backward_accumulate(experts[i], caches[i], expert_grad[i], grad.experts[i]);
        }
        return {total * scale, std::move(grad)};
    }

    /// Validation criterion: NLL of the uniform mixture.
    [[nodiscard]] double validation_nll(SampleSpan samples) const
    {
        if (samples.empty()) throw DataError("NLL of an empty dataset");
        const auto& experts = experts_.experts;
        const std::size_t m = experts.size();
        const double log_g = -std::log(static_cast<double>(m));
        nn::ForwardCache cache;
        std::vector<double> a(m);
        double total = 0.0;
        for (const auto& s : samples) {
            detail::check_label(s.label, experts.front().output_size());
            for (std::size_t i = 0; i < m; ++i) {
                nn::mlp_forward(experts[i], s.views.at(i), nn::Mode::infer, 0.0, 0, cache);
                a[i] = log_g + nn::log_softmax(cache.logits())[s.label];
            }
            total -= nn::log_sum_exp(a);
        }
        return total / static_cast<double>(samples.size());
    }

    /// Unweighted mean of the expert class distributions.
    [[nodiscard]] std::vector<double> predict_proba(const MultiViewSample& s) const
    {
        const auto& experts = experts_.experts;
        const std::size_t m = experts.size();
        if (s.views.size() != m) throw ShapeError("sample '" + s.id + "' has the wrong number of views");
        const double weight = 1.0 / static_cast<double>(m);
        std::vector<double> mix(experts.front().output_size(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const auto dist = nn::softmax(nn::mlp_forward(experts[i], s.views[i], nn::Mode::infer).first);
            for (std::size_t c = 0; c < mix.size(); ++c) mix[c] += weight * dist[c];
        }
        return mix;
    }

private:
    ExpertSet experts_;
    bool independent_ = false;
};

/// Early fusion: one network on the concatenated views.
class ConcatFusionModel {
public:
    using Params = nn::MLPParams;

    explicit ConcatFusionModel(nn::MLPParams net) : net_(std::move(net)) {}

    [[nodiscard]] nn::MLPParams& parameters() { return net_; }
    [[nodiscard]] const nn::MLPParams& parameters() const { return net_; }

    [[nodiscard]] std::pair<double, nn::MLPParams> batch_objective(SampleSpan batch, const TrainConfig& cfg,
                                                                   std::uint64_t mask_seed) const
    {
        return detail::single_network_objective(net_, batch, cfg.dropout_rate, mask_seed, kConcatNetwork,
                                                [](const MultiViewSample& s) { return concat_views(s.views); });
    }

    [[nodiscard]] double validation_nll(SampleSpan samples) const
    {
        return detail::single_network_nll(net_, samples,
                                          [](const MultiViewSample& s) { return concat_views(s.views); });
    }

    [[nodiscard]] std::vector<double> predict_proba(const MultiViewSample& s) const
    {
        return nn::softmax(nn::mlp_forward(net_, concat_views(s.views), nn::Mode::infer).first);
    }

private:
    nn::MLPParams net_;
};

// ---------------------------------------------------------------------------
// Factories. Every factory seeds expert i exactly as init_mov_params does.

[[nodiscard]] inline SingleViewModel single_view_model(std::size_t view, std::span<const std::size_t> view_dims,
                                                       std::size_t classes, const Architecture& arch,
                                                       std::uint64_t seed)
{
    if (view >= view_dims.size())
        throw ConfigError("view index " + std::to_string(view) + " out of range for " +
                          std::to_string(view_dims.size()) + " views");
    return {view, nn::init_mlp(layer_sizes(view_dims[view], arch.expert_hidden, classes),
                               derive_seed(seed, expert_network(view)))};
}

[[nodiscard]] inline AvgFusionModel avg_fusion_model(std::span<const std::size_t> view_dims, std::size_t classes,
                                                     const Architecture& arch, std::uint64_t seed,
                                                     bool independent = false)
{
    if (view_dims.size() < 2) throw ConfigError("Avg fusion needs at least two views");
    std::vector<nn::MLPParams> experts;
    for (std::size_t i = 0; i < view_dims.size(); ++i)
        experts.push_back(
            nn::init_mlp(layer_sizes(view_dims[i], arch.expert_hidden, classes), derive_seed(seed, expert_network(i))));
    return {std::move(experts), independent};
}

[[nodiscard]] inline ConcatFusionModel concat_fusion_model(std::span<const std::size_t> view_dims, std::size_t classes,
                                                           const Architecture& arch, std::uint64_t seed)
{
    std::size_t total = 0;
    for (auto d : view_dims) total += d;
    if (total == 0) throw ConfigError("Concat fusion needs at least one feature");
    return ConcatFusionModel(
        nn::init_mlp(layer_sizes(total, arch.concat_hidden, classes), derive_seed(seed, kConcatNetwork)));
}

// ---------------------------------------------------------------------------
// Uniform handle over all model kinds.

enum class ModelKind { mov, single_view, avg_fusion, concat_fusion };

struct ModelSpec {
    ModelKind kind = ModelKind::mov;
    std::size_t view = 0; ///< only for single_view

    /// Display name; single-view models are named after their view.
    [[nodiscard]] std::string name(const ViewSchema& schema) const
    {
        switch (kind) {
        case ModelKind::mov: return "MoV";
        case ModelKind::avg_fusion: return "Avg";
        case ModelKind::concat_fusion: return "Concat";
        case ModelKind::single_view:
            return view < schema.view_names.size() ? schema.view_names[view] : "view" + std::to_string(view);
        }
        return "?";
    }

    bool operator==(const ModelSpec&) const = default;
};

/// Parses "mov", "avg", "concat", "single:<index>" or "single:<view name>".
[[nodiscard]] inline ModelSpec parse_model_spec(const std::string& text, const ViewSchema& schema)
{
    if (text == "mov") return {ModelKind::mov, 0};
    if (text == "avg") return {ModelKind::avg_fusion, 0};
    if (text == "concat") return {ModelKind::concat_fusion, 0};
    if (text.rfind("single:", 0) == 0) {
        const auto arg = text.substr(7);
        for (std::size_t v = 0; v < schema.view_names.size(); ++v)
            if (schema.view_names[v] == arg) return {ModelKind::single_view, v};
        std::size_t v = 0;
        try {
            std::size_t used = 0;
            v = std::stoul(arg, &used);
            if (used != arg.size()) throw std::invalid_argument(arg);
        } catch (const std::exception&) {
            throw ConfigError("unknown view '" + arg + "'");
        }
        if (v >= schema.views()) throw ConfigError("view index " + arg + " out of range");
        return {ModelKind::single_view, v};
    }
    throw ConfigError("unknown model '" + text + "' (expected mov, avg, concat or single:<view>)");
}

[[nodiscard]] inline std::string model_spec_string(const ModelSpec& spec)
{
    switch (spec.kind) {
    case ModelKind::mov: return "mov";
    case ModelKind::avg_fusion: return "avg";
    case ModelKind::concat_fusion: return "concat";
    case ModelKind::single_view: return "single:" + std::to_string(spec.view);
    }
    return "?";
}

using Classifier = std::variant<MoVModel, SingleViewModel, AvgFusionModel, ConcatFusionModel>;

struct ClassifierOptions {
    Architecture arch;
    bool avg_independent = false;
    bool zero_frozen_gate = false; ///< MoV only: start with an all-zero gate (pair with TrainConfig::freeze_gate)
};

[[nodiscard]] inline Classifier make_classifier(const ModelSpec& spec, const ViewSchema& schema,
                                                const ClassifierOptions& options, std::uint64_t seed)
{
    switch (spec.kind) {
    case ModelKind::mov: {
        auto params = init_mov_params(schema.view_dims, schema.classes(), options.arch, seed);
        if (options.zero_frozen_gate) params.gate.set_zero();
        return MoVModel(std::move(params));
    }
    case ModelKind::single_view:
        return single_view_model(spec.view, schema.view_dims, schema.classes(), options.arch, seed);
    case ModelKind::avg_fusion:
        return avg_fusion_model(schema.view_dims, schema.classes(), options.arch, seed, options.avg_independent);
    case ModelKind::concat_fusion: return concat_fusion_model(schema.view_dims, schema.classes(), options.arch, seed);
    }
    throw ConfigError("unknown model kind");
}

[[nodiscard]] inline ModelSpec spec_of(const Classifier& c)
{
    return std::visit(
        [](const auto& m) -> ModelSpec {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, MoVModel>) return {ModelKind::mov, 0};
            else if constexpr (std::is_same_v<M, SingleViewModel>) return {ModelKind::single_view, m.view()};
            else if constexpr (std::is_same_v<M, AvgFusionModel>) return {ModelKind::avg_fusion, 0};
            else return {ModelKind::concat_fusion, 0};
        },
        c);
}

[[nodiscard]] inline std::pair<Classifier, TrainHistory> train_classifier(Classifier model, SampleSpan train_set,
                                                                          SampleSpan val_set, const TrainConfig& cfg)
{
    return std::visit(
        [&](auto&& m) -> std::pair<Classifier, TrainHistory> {
            auto [trained, history] = train_model(std::move(m), train_set, val_set, cfg);
            return {Classifier(std::move(trained)), std::move(history)};
        },
        std::move(model));
}

[[nodiscard]] inline std::vector<double> predict_proba(const Classifier& c, const MultiViewSample& s)
{
    return std::visit([&](const auto& m) { return m.predict_proba(s); }, c);
}

[[nodiscard]] inline double validation_nll(const Classifier& c, SampleSpan samples)
{
    return std::visit([&](const auto& m) { return m.validation_nll(samples); }, c);
}

} // namespace mov
