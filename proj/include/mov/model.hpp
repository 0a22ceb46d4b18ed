#pragma once

// Mixture of Views: one expert network per view, and a gate network that
// reads the concatenation of all views and outputs a distribution over views.
//
//   p(y = c | x) = sum_i g_i(x) * p_i(y = c | x^i)
//
// Training maximizes the composite objective
//
//   L(theta) + lambda * sum_i L_i(theta_i)
//
// where L is the mixture log-likelihood and L_i the log-likelihood of expert i
// used on its own. Internally we minimize the negation, averaged per sample.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mov/dataset.hpp"
#include "mov/error.hpp"
#include "mov/nn.hpp"
#include "mov/seed.hpp"
#include "mov/train.hpp"

namespace mov {

/// Network indices used when deriving per-network seeds. The gate is 0 and
/// expert i is i+1 in every model, so baselines that share experts with MoV
/// draw identical initial weights and dropout masks.
inline constexpr std::uint64_t kGateNetwork = 0;
[[nodiscard]] constexpr std::uint64_t expert_network(std::size_t view) noexcept { return view + 1; }

struct Architecture {
    std::vector<std::size_t> expert_hidden{24, 24};
    std::vector<std::size_t> gate_hidden{3, 3};
    std::vector<std::size_t> concat_hidden{24, 24};

    bool operator==(const Architecture&) const = default;
};

[[nodiscard]] inline std::vector<std::size_t> layer_sizes(std::size_t inputs, std::span<const std::size_t> hidden,
                                                          std::size_t outputs)
{
    std::vector<std::size_t> sizes{inputs};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(outputs);
    return sizes;
}

struct MoVParams {
    nn::MLPParams gate;
    std::vector<nn::MLPParams> experts;

    [[nodiscard]] std::size_t views() const { return experts.size(); }
    [[nodiscard]] std::size_t classes() const { return experts.front().output_size(); }

    [[nodiscard]] std::vector<std::size_t> view_dims() const
    {
        std::vector<std::size_t> dims;
        for (const auto& e : experts) dims.push_back(e.input_size());
        return dims;
    }

    [[nodiscard]] std::vector<std::span<double>> blocks()
    {
        auto out = gate.blocks();
        for (auto& e : experts) {
            auto b = e.blocks();
            out.insert(out.end(), b.begin(), b.end());
        }
        return out;
    }

    [[nodiscard]] std::vector<std::span<const double>> blocks() const
    {
        auto out = std::as_const(gate).blocks();
        for (const auto& e : experts) {
            auto b = e.blocks();
            out.insert(out.end(), b.begin(), b.end());
        }
        return out;
    }

    [[nodiscard]] std::vector<std::string> block_names() const
    {
        auto out = gate.block_names("gate.");
        for (std::size_t i = 0; i < experts.size(); ++i) {
            auto b = experts[i].block_names("expert" + std::to_string(i) + ".");
            out.insert(out.end(), b.begin(), b.end());
        }
        return out;
    }

    void validate() const
    {
        if (experts.empty()) throw ShapeError("MoV needs at least one expert");
        const std::size_t k = classes();
        if (k < 2) throw ShapeError("experts must output at least two classes");
        std::size_t total = 0;
        for (const auto& e : experts) {
            if (e.output_size() != k) throw ShapeError("all experts must output the same number of classes");
            total += e.input_size();
        }
        if (gate.input_size() != total)
            throw ShapeError("gate input size " + std::to_string(gate.input_size()) +
                             " differs from the concatenated view length " + std::to_string(total));
        if (gate.output_size() != experts.size()) throw ShapeError("gate must output one logit per view");
    }

    bool operator==(const MoVParams&) const = default;
};

[[nodiscard]] inline MoVParams zeros_like(const MoVParams& p)
{
    MoVParams z;
    z.gate = nn::zeros_like(p.gate);
    for (const auto& e : p.experts) z.experts.push_back(nn::zeros_like(e));
    return z;
}

[[nodiscard]] inline MoVParams init_mov_params(std::span<const std::size_t> view_dims, std::size_t classes,
                                               const Architecture& arch, std::uint64_t seed)
{
    if (view_dims.empty()) throw ConfigError("MoV needs at least one view");
    if (classes < 2) throw ConfigError("MoV needs at least two classes");
    std::size_t total = 0;
    for (auto d : view_dims) total += d;
    MoVParams p;
    p.gate = nn::init_mlp(layer_sizes(total, arch.gate_hidden, view_dims.size()), derive_seed(seed, kGateNetwork));
    for (std::size_t i = 0; i < view_dims.size(); ++i)
        p.experts.push_back(
            nn::init_mlp(layer_sizes(view_dims[i], arch.expert_hidden, classes), derive_seed(seed, expert_network(i))));
    return p;
}

struct DropoutConfig {
    double rate = 0.0;
    bool gate = true; ///< whether the gate's hidden layers are dropped too
};

struct MoVPrediction {
    std::vector<double> gate_weights;
    std::vector<std::vector<double>> expert_dists;
    std::vector<double> mixture_dist;
};

namespace detail {

inline void check_views(const MoVParams& params, std::span<const std::vector<double>> views)
{
    if (views.size() != params.views())
        throw ShapeError("expected " + std::to_string(params.views()) + " views, got " + std::to_string(views.size()));
    for (std::size_t i = 0; i < views.size(); ++i)
        if (views[i].size() != params.experts[i].input_size())
            throw ShapeError("view " + std::to_string(i) + " has " + std::to_string(views[i].size()) +
                             " features, expert expects " + std::to_string(params.experts[i].input_size()));
}

inline void concat_into(std::span<const std::vector<double>> views, std::vector<double>& out)
{
    out.clear();
    for (const auto& v : views) out.insert(out.end(), v.begin(), v.end());
}

inline void check_label(std::size_t label, std::size_t classes)
{
    if (label >= classes)
        throw DataError("label " + std::to_string(label) + " outside 0.." + std::to_string(classes - 1));
}

/// Per-sample mixture objective in log space, shared by MoV and the
/// uniform-gate Avg fusion. Given gate log-weights and expert log class
/// probabilities, returns the negated composite objective of the sample and
/// writes `scale` times its gradient w.r.t. the gate logits and every
/// expert's logits. `posterior` receives the gating posterior for the label.
inline double mixture_objective(std::span<const double> log_gate, const std::vector<std::vector<double>>& log_expert,
                                std::size_t label, double lambda, double scale, std::vector<double>& posterior,
                                std::vector<double>& gate_logit_grad,
                                std::vector<std::vector<double>>& expert_logit_grad)
{
    const std::size_t m = log_gate.size();
    posterior.resize(m);
    for (std::size_t i = 0; i < m; ++i) posterior[i] = log_gate[i] + log_expert[i][label];
    const double log_mix = nn::log_sum_exp(posterior);
    double per_view = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        per_view += log_expert[i][label];
        posterior[i] = std::exp(posterior[i] - log_mix);
    }

    gate_logit_grad.resize(m);
    expert_logit_grad.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        gate_logit_grad[i] = -scale * (posterior[i] - std::exp(log_gate[i]));
        const auto& le = log_expert[i];
        auto& g = expert_logit_grad[i];
        g.resize(le.size());
        const double weight = posterior[i] + lambda;
        for (std::size_t c = 0; c < le.size(); ++c) {
            const double target = c == label ? 1.0 : 0.0;
            g[c] = -scale * weight * (target - std::exp(le[c]));
        }
    }
    return -(log_mix + lambda * per_view);
}

} // namespace detail

/// Mixture prediction for one sample. In train mode the dropout masks of
/// network j are drawn from derive_seed(seed, j).
[[nodiscard]] inline MoVPrediction forward(const MoVParams& params, std::span<const std::vector<double>> views,
                                           nn::Mode mode = nn::Mode::infer, const DropoutConfig& dropout = {},
                                           std::uint64_t seed = 0)
{
    detail::check_views(params, views);
    const double gate_rate = dropout.gate ? dropout.rate : 0.0;
    std::vector<double> joined;
    detail::concat_into(views, joined);
    nn::ForwardCache cache;
    nn::mlp_forward(params.gate, joined, mode, gate_rate, derive_seed(seed, kGateNetwork), cache);

    MoVPrediction pred;
    pred.gate_weights = nn::softmax(cache.logits());
    const std::size_t k = params.classes();
    pred.mixture_dist.assign(k, 0.0);
    for (std::size_t i = 0; i < params.views(); ++i) {
        nn::mlp_forward(params.experts[i], views[i], mode, dropout.rate, derive_seed(seed, expert_network(i)), cache);
        pred.expert_dists.push_back(nn::softmax(cache.logits()));
    }
    for (std::size_t i = 0; i < params.views(); ++i)
        for (std::size_t c = 0; c < k; ++c) pred.mixture_dist[c] += pred.gate_weights[i] * pred.expert_dists[i][c];
    return pred;
}

/// Gating posterior p(i | x, y): prior gate weight times expert likelihood of
/// the label, normalized by the mixture likelihood.
[[nodiscard]] inline std::vector<double> posterior_weights(const MoVPrediction& pred, std::size_t label)
{
    detail::check_label(label, pred.mixture_dist.size());
    std::vector<double> w(pred.gate_weights.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = pred.gate_weights[i] * pred.expert_dists[i][label];
        denom += w[i];
    }
    if (denom == 0.0) throw NumericError("degenerate posterior: mixture assigns zero probability to the label");
    for (auto& v : w) v /= denom;
    return w;
}

namespace detail {

struct SampleLogTerms {
    std::vector<double> log_gate;
    std::vector<std::vector<double>> log_expert;
};

inline void sample_log_terms(const MoVParams& params, const MultiViewSample& s, nn::Mode mode,
                             const DropoutConfig& dropout, std::uint64_t seed, std::vector<double>& joined,
                             nn::ForwardCache& gate_cache, std::vector<nn::ForwardCache>& expert_caches,
                             SampleLogTerms& out)
{
    check_views(params, s.views);
    check_label(s.label, params.classes());
    concat_into(s.views, joined);
    nn::mlp_forward(params.gate, joined, mode, dropout.gate ? dropout.rate : 0.0, derive_seed(seed, kGateNetwork),
                    gate_cache);
    out.log_gate = nn::log_softmax(gate_cache.logits());
    out.log_expert.resize(params.views());
    expert_caches.resize(params.views());
    for (std::size_t i = 0; i < params.views(); ++i) {
        nn::mlp_forward(params.experts[i], s.views[i], mode, dropout.rate, derive_seed(seed, expert_network(i)),
                        expert_caches[i]);
        out.log_expert[i] = nn::log_softmax(expert_caches[i].logits());
    }
}

} // namespace detail

/// Mean per-sample mixture log-likelihood, inference mode, evaluated with a
/// max-shifted log-sum-exp.
[[nodiscard]] inline double log_likelihood(const MoVParams& params, SampleSpan samples)
{
    if (samples.empty()) throw DataError("log_likelihood of an empty dataset");
    std::vector<double> joined;
    nn::ForwardCache gate_cache;
    std::vector<nn::ForwardCache> expert_caches;
    detail::SampleLogTerms terms;
    std::vector<double> a;
    double total = 0.0;
    for (const auto& s : samples) {
        detail::sample_log_terms(params, s, nn::Mode::infer, {}, 0, joined, gate_cache, expert_caches, terms);
        a.resize(params.views());
        for (std::size_t i = 0; i < params.views(); ++i) a[i] = terms.log_gate[i] + terms.log_expert[i][s.label];
        total += nn::log_sum_exp(a);
    }
    return total / static_cast<double>(samples.size());
}

struct BackwardOptions {
    DropoutConfig dropout;
    bool freeze_gate = false;
    std::uint64_t mask_seed = 0;
};

/// Seed of the dropout masks used for sample `t` of a batch.
[[nodiscard]] constexpr std::uint64_t sample_mask_seed(std::uint64_t mask_seed, std::size_t t) noexcept
{
    return derive_seed(mask_seed, t);
}

/// Composite objective (maximization orientation): mean over the batch of
/// log p(y|x) + lambda * sum_i log p_i(y|x^i). Uses the same dropout masks as
/// backward() for equal options, which makes gradient checks exact.
[[nodiscard]] inline double composite_loss(const MoVParams& params, SampleSpan batch, double lambda,
                                           const BackwardOptions& options = {})
{
    if (batch.empty()) throw DataError("composite_loss of an empty batch");
    const auto mode = options.dropout.rate > 0.0 ? nn::Mode::train : nn::Mode::infer;
    double total = 0.0;
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const auto& s = batch[t];
        const auto pred = forward(params, s.views, mode, options.dropout, sample_mask_seed(options.mask_seed, t));
        double value = std::log(pred.mixture_dist.at(s.label));
        for (const auto& e : pred.expert_dists) value += lambda * std::log(e[s.label]);
        total += value;
    }
    return total / static_cast<double>(batch.size());
}

struct MoVGradient {
    double loss = 0.0; ///< negated composite objective, mean per sample
    MoVParams gradient;
};

/// Loss and gradient of the negated composite objective. Expert i receives
/// (w_ti + lambda) * d log p_i(y_t|x_t^i), w_ti being the gating posterior;
/// the gate receives w_t - g_t at its logits. With freeze_gate the gate
/// gradient is reported as zero.
[[nodiscard]] inline MoVGradient backward(const MoVParams& params, SampleSpan batch, double lambda,
                                          const BackwardOptions& options = {})
{
    if (batch.empty()) throw DataError("backward on an empty batch");
    params.validate();
    const auto mode = options.dropout.rate > 0.0 ? nn::Mode::train : nn::Mode::infer;
    const double scale = 1.0 / static_cast<double>(batch.size());

    MoVGradient out;
    out.gradient = zeros_like(params);
    std::vector<double> joined, posterior, gate_grad;
    std::vector<std::vector<double>> expert_grad;
    nn::ForwardCache gate_cache;
    std::vector<nn::ForwardCache> expert_caches;
    detail::SampleLogTerms terms;

    double total = 0.0;
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const auto& s = batch[t];
        detail::sample_log_terms(params, s, mode, options.dropout, sample_mask_seed(options.mask_seed, t), joined,
                                 gate_cache, expert_caches, terms);
        const double loss = detail::mixture_objective(terms.log_gate, terms.log_expert, s.label, lambda, scale,
                                                      posterior, gate_grad, expert_grad);
        if (!std::isfinite(loss)) throw NumericError("non-finite loss at batch sample " + std::to_string(t));
        total += loss;
        if (!options.freeze_gate) nn::mlp_backward_accumulate(params.gate, gate_cache, gate_grad, out.gradient.gate);
        for (std::size_t i = 0; i < params.views(); ++i)
            nn::mlp_backward_accumulate(params.experts[i], expert_caches[i], expert_grad[i], out.gradient.experts[i]);
    }
    out.loss = total * scale;
    return out;
}

struct Decision {
    std::size_t label = 0;
    std::vector<double> distribution;
};

/// Argmax with ties going to the lowest class index.
[[nodiscard]] inline std::size_t argmax_lowest(std::span<const double> dist)
{
    std::size_t best = 0;
    for (std::size_t c = 1; c < dist.size(); ++c)
        if (dist[c] > dist[best]) best = c;
    return best;
}

[[nodiscard]] inline Decision predict(const MoVParams& params, std::span<const std::vector<double>> views)
{
    auto pred = forward(params, views);
    return {argmax_lowest(pred.mixture_dist), std::move(pred.mixture_dist)};
}

/// Trainable wrapper used by the generic training loop.
class MoVModel {
public:
    using Params = MoVParams;

    MoVModel() = default;
    explicit MoVModel(MoVParams params) : params_(std::move(params)) { params_.validate(); }

    [[nodiscard]] MoVParams& parameters() { return params_; }
    [[nodiscard]] const MoVParams& parameters() const { return params_; }

    [[nodiscard]] std::pair<double, MoVParams> batch_objective(SampleSpan batch, const TrainConfig& cfg,
                                                               std::uint64_t mask_seed) const
    {
        auto g = backward(params_, batch, cfg.lambda,
                          {{cfg.dropout_rate, cfg.gate_dropout}, cfg.freeze_gate, mask_seed});
        return {g.loss, std::move(g.gradient)};
    }

    [[nodiscard]] double validation_nll(SampleSpan samples) const { return -log_likelihood(params_, samples); }

    [[nodiscard]] std::vector<double> predict_proba(const MultiViewSample& s) const
    {
        return forward(params_, s.views).mixture_dist;
    }

    [[nodiscard]] MoVPrediction explain(const MultiViewSample& s) const { return forward(params_, s.views); }

private:
    MoVParams params_;
};

/// Trains with Adam on the negated composite objective and returns the
/// best-validation snapshot (validation criterion: mixture NLL, lambda excluded).
[[nodiscard]] inline std::pair<MoVParams, TrainHistory> train(MoVParams params, SampleSpan train_set,
                                                              SampleSpan val_set, const TrainConfig& config)
{
    auto [model, history] = train_model(MoVModel(std::move(params)), train_set, val_set, config);
    return {std::move(model.parameters()), std::move(history)};
}

} // namespace mov
