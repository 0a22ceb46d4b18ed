#pragma once

// Dense feed-forward substrate: affine layers with ReLU between them,
// inverted dropout on hidden activations, Adam, and a central-difference
// gradient oracle. Everything runs in double precision.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mov/error.hpp"
#include "mov/seed.hpp"

namespace mov::nn {

enum class Mode { train, infer };

/// Weights are stored row-major with shape (outputs x inputs).
struct LayerParams {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;
    std::vector<double> biases;

    [[nodiscard]] double& weight(std::size_t row, std::size_t col) { return weights[row * inputs + col]; }
    [[nodiscard]] double weight(std::size_t row, std::size_t col) const { return weights[row * inputs + col]; }

    bool operator==(const LayerParams&) const = default;
};

struct MLPParams {
    std::vector<std::size_t> layer_sizes;
    std::vector<LayerParams> layers;

    [[nodiscard]] std::size_t input_size() const { return layer_sizes.front(); }
    [[nodiscard]] std::size_t output_size() const { return layer_sizes.back(); }
    [[nodiscard]] std::size_t hidden_layers() const { return layers.size() - 1; }

    [[nodiscard]] std::vector<std::span<double>> blocks()
    {
        std::vector<std::span<double>> out;
        out.reserve(layers.size() * 2);
        for (auto& layer : layers) {
            out.emplace_back(layer.weights);
            out.emplace_back(layer.biases);
        }
        return out;
    }

    [[nodiscard]] std::vector<std::span<const double>> blocks() const
    {
        std::vector<std::span<const double>> out;
        out.reserve(layers.size() * 2);
        for (const auto& layer : layers) {
            out.emplace_back(layer.weights);
            out.emplace_back(layer.biases);
        }
        return out;
    }

    [[nodiscard]] std::vector<std::string> block_names(std::string_view prefix = "") const
    {
        std::vector<std::string> out;
        out.reserve(layers.size() * 2);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto base = std::string(prefix) + "layer" + std::to_string(l);
            out.push_back(base + ".weights");
            out.push_back(base + ".biases");
        }
        return out;
    }

    [[nodiscard]] std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (const auto& layer : layers) n += layer.weights.size() + layer.biases.size();
        return n;
    }

    void set_zero()
    {
        for (auto& layer : layers) {
            std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
            std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
        }
    }

    bool operator==(const MLPParams&) const = default;
};

/// Anything exposing its parameters as named contiguous blocks. Adam and the
/// finite-difference oracle operate on this view.
template <class P>
concept ParameterSet = requires(P& p, const P& cp) {
    { p.blocks() } -> std::same_as<std::vector<std::span<double>>>;
    { cp.blocks() } -> std::same_as<std::vector<std::span<const double>>>;
    { cp.block_names() } -> std::same_as<std::vector<std::string>>;
};

inline void validate_layer_sizes(std::span<const std::size_t> layer_sizes)
{
    if (layer_sizes.size() < 2)
        throw ConfigError("layer_sizes needs at least an input and an output size");
    for (auto s : layer_sizes)
        if (s == 0) throw ConfigError("layer sizes must be positive");
}

[[nodiscard]] inline MLPParams zero_mlp(std::span<const std::size_t> layer_sizes)
{
    validate_layer_sizes(layer_sizes);
    MLPParams p;
    p.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
    p.layers.resize(layer_sizes.size() - 1);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        auto& layer = p.layers[l];
        layer.inputs = layer_sizes[l];
        layer.outputs = layer_sizes[l + 1];
        layer.weights.assign(layer.inputs * layer.outputs, 0.0);
        layer.biases.assign(layer.outputs, 0.0);
    }
    return p;
}

[[nodiscard]] inline MLPParams zeros_like(const MLPParams& p) { return zero_mlp(p.layer_sizes); }

/// He initialization: weights ~ N(0, 2/fan_in), biases zero.
[[nodiscard]] inline MLPParams init_mlp(std::span<const std::size_t> layer_sizes, std::uint64_t seed)
{
    auto p = zero_mlp(layer_sizes);
    std::mt19937_64 rng(seed);
    for (auto& layer : p.layers) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(layer.inputs)));
        for (auto& w : layer.weights) w = dist(rng);
    }
    return p;
}

[[nodiscard]] inline MLPParams init_mlp(std::initializer_list<std::size_t> layer_sizes, std::uint64_t seed)
{
    return init_mlp(std::span<const std::size_t>(layer_sizes.begin(), layer_sizes.size()), seed);
}

/// activations[0] is the input; activations[l+1] is the output of layer l
/// (after ReLU and dropout for hidden layers, raw logits for the last).
/// masks[l] holds the per-unit dropout multiplier of hidden layer l: 0 or
/// 1/(1-rate) in train mode, exactly 1 in infer mode.
struct ForwardCache {
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> pre_activations;
    std::vector<std::vector<double>> masks;

    [[nodiscard]] const std::vector<double>& logits() const { return activations.back(); }
};

inline void mlp_forward(const MLPParams& params, std::span<const double> input, Mode mode, double dropout_rate,
                        std::uint64_t seed, ForwardCache& cache)
{
    if (input.size() != params.input_size())
        throw ShapeError("network expects " + std::to_string(params.input_size()) + " inputs, got " +
                         std::to_string(input.size()));
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");

    const std::size_t n_layers = params.layers.size();
    cache.activations.resize(n_layers + 1);
    cache.pre_activations.resize(n_layers);
    cache.masks.resize(n_layers - 1);
    cache.activations[0].assign(input.begin(), input.end());

    const bool drop = mode == Mode::train && dropout_rate > 0.0;
    const double keep = 1.0 - dropout_rate;
    const double scale = 1.0 / keep;
    SplitMixStream rng(seed);

    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& layer = params.layers[l];
        const auto& in = cache.activations[l];
        auto& pre = cache.pre_activations[l];
        pre.resize(layer.outputs);
        for (std::size_t r = 0; r < layer.outputs; ++r) {
            const double* w = layer.weights.data() + r * layer.inputs;
            double acc = layer.biases[r];
            for (std::size_t c = 0; c < layer.inputs; ++c) acc += w[c] * in[c];
            pre[r] = acc;
        }
        auto& out = cache.activations[l + 1];
        if (l + 1 == n_layers) {
            out = pre;
            break;
        }
        auto& mask = cache.masks[l];
        mask.resize(layer.outputs);
        out.resize(layer.outputs);
        for (std::size_t r = 0; r < layer.outputs; ++r) {
            mask[r] = drop ? (rng.uniform() < keep ? scale : 0.0) : 1.0;
            out[r] = std::max(pre[r], 0.0) * mask[r];
        }
    }
}

[[nodiscard]] inline std::pair<std::vector<double>, ForwardCache>
mlp_forward(const MLPParams& params, std::span<const double> input, Mode mode, double dropout_rate = 0.0,
            std::uint64_t seed = 0)
{
    ForwardCache cache;
    mlp_forward(params, input, mode, dropout_rate, seed, cache);
    auto logits = cache.logits();
    return {std::move(logits), std::move(cache)};
}

/// Adds `scale * dL/dtheta` into `grad` given dL/dlogits. The dropout masks
/// recorded in the cache are reused, so the result is exact for that draw.
inline void mlp_backward_accumulate(const MLPParams& params, const ForwardCache& cache,
                                    std::span<const double> logit_gradient, MLPParams& grad, double scale = 1.0)
{
    const std::size_t n_layers = params.layers.size();
    if (logit_gradient.size() != params.output_size())
        throw ShapeError("logit gradient has length " + std::to_string(logit_gradient.size()) + ", expected " +
                         std::to_string(params.output_size()));
    if (cache.activations.size() != n_layers + 1 || cache.pre_activations.size() != n_layers)
        throw ShapeError("forward cache does not match network depth");
    if (grad.layer_sizes != params.layer_sizes) throw ShapeError("gradient buffer does not match network shape");

    std::vector<double> delta(logit_gradient.begin(), logit_gradient.end());
    for (auto& d : delta) d *= scale;
    std::vector<double> upstream;

    for (std::size_t l = n_layers; l-- > 0;) {
        const auto& layer = params.layers[l];
        auto& g = grad.layers[l];
        const auto& in = cache.activations[l];
        for (std::size_t r = 0; r < layer.outputs; ++r) {
            const double d = delta[r];
            g.biases[r] += d;
            if (d == 0.0) continue;
            double* gw = g.weights.data() + r * layer.inputs;
            for (std::size_t c = 0; c < layer.inputs; ++c) gw[c] += d * in[c];
        }
        if (l == 0) break;

        upstream.assign(layer.inputs, 0.0);
        for (std::size_t r = 0; r < layer.outputs; ++r) {
            const double d = delta[r];
            if (d == 0.0) continue;
            const double* w = layer.weights.data() + r * layer.inputs;
            for (std::size_t c = 0; c < layer.inputs; ++c) upstream[c] += w[c] * d;
        }
        const auto& pre = cache.pre_activations[l - 1];
        const auto& mask = cache.masks[l - 1];
        for (std::size_t c = 0; c < layer.inputs; ++c) upstream[c] = pre[c] > 0.0 ? upstream[c] * mask[c] : 0.0;
        delta.swap(upstream);
    }
}

[[nodiscard]] inline MLPParams mlp_backward(const MLPParams& params, const ForwardCache& cache,
                                            std::span<const double> logit_gradient)
{
    auto grad = zeros_like(params);
    mlp_backward_accumulate(params, cache, logit_gradient, grad);
    return grad;
}

inline void require_finite(std::span<const double> values, std::string_view what)
{
    for (auto v : values)
        if (!std::isfinite(v)) throw NumericError(std::string(what) + " contains a non-finite value");
}

[[nodiscard]] inline double log_sum_exp(std::span<const double> values)
{
    if (values.empty()) throw DataError("log_sum_exp of an empty vector");
    const double hi = *std::max_element(values.begin(), values.end());
    if (std::isinf(hi) && hi < 0) return hi;
    double sum = 0.0;
    for (auto v : values) sum += std::exp(v - hi);
    return hi + std::log(sum);
}

/// Max-shifted softmax.
[[nodiscard]] inline std::vector<double> softmax(std::span<const double> logits)
{
    if (logits.empty()) throw DataError("softmax of an empty vector");
    require_finite(logits, "softmax input");
    const double hi = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - hi);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

[[nodiscard]] inline std::vector<double> log_softmax(std::span<const double> logits)
{
    if (logits.empty()) throw DataError("log_softmax of an empty vector");
    require_finite(logits, "log_softmax input");
    const double hi = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (auto v : logits) sum += std::exp(v - hi);
    const double log_norm = std::log(sum);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = (logits[i] - hi) - log_norm;
    return out;
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t step_count = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <ParameterSet P>
[[nodiscard]] AdamState make_adam_state(const P& params, const AdamConfig& config = {})
{
    if (!(config.learning_rate > 0 && config.beta1 > 0 && config.beta1 < 1 && config.beta2 > 0 &&
          config.beta2 < 1 && config.epsilon > 0))
        throw ConfigError("Adam hyperparameters out of range");
    AdamState state;
    state.learning_rate = config.learning_rate;
    state.beta1 = config.beta1;
    state.beta2 = config.beta2;
    state.epsilon = config.epsilon;
    for (auto block : params.blocks()) {
        state.first_moment.emplace_back(block.size(), 0.0);
        state.second_moment.emplace_back(block.size(), 0.0);
    }
    return state;
}

/// One bias-corrected Adam update that descends `gradients`. Callers hand in
/// the gradient of the negated objective, never of the likelihood itself.
template <ParameterSet P>
void adam_step(P& params, const P& gradients, AdamState& state)
{
    auto p_blocks = params.blocks();
    const auto g_blocks = gradients.blocks();
    if (p_blocks.size() != g_blocks.size() || p_blocks.size() != state.first_moment.size())
        throw ShapeError("Adam: parameter, gradient and state block counts differ");
    for (std::size_t b = 0; b < p_blocks.size(); ++b) {
        if (p_blocks[b].size() != g_blocks[b].size() || p_blocks[b].size() != state.first_moment[b].size())
            throw ShapeError("Adam: block " + std::to_string(b) + " shape mismatch");
        for (std::size_t j = 0; j < g_blocks[b].size(); ++j)
            if (!std::isfinite(g_blocks[b][j])) {
                const auto names = params.block_names();
                throw NumericError("non-finite gradient at " + names[b] + "[" + std::to_string(j) + "]");
            }
    }

    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t b = 0; b < p_blocks.size(); ++b) {
        auto& m = state.first_moment[b];
        auto& v = state.second_moment[b];
        for (std::size_t j = 0; j < m.size(); ++j) {
            const double g = g_blocks[b][j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            p_blocks[b][j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

/// Central differences, one scalar at a time: (f(p+h) - f(p-h)) / 2h.
template <ParameterSet P, class LossFn>
    requires std::invocable<LossFn&, const P&>
[[nodiscard]] P finite_diff_gradient(LossFn&& loss_fn, P params, double step)
{
    if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
    P grad = params;
    auto g_blocks = grad.blocks();
    auto p_blocks = params.blocks();
    for (std::size_t b = 0; b < p_blocks.size(); ++b) {
        for (std::size_t j = 0; j < p_blocks[b].size(); ++j) {
            const double saved = p_blocks[b][j];
            p_blocks[b][j] = saved + step;
            const double up = static_cast<double>(loss_fn(std::as_const(params)));
            p_blocks[b][j] = saved - step;
            const double down = static_cast<double>(loss_fn(std::as_const(params)));
            p_blocks[b][j] = saved;
            g_blocks[b][j] = (up - down) / (2.0 * step);
        }
    }
    return grad;
}

/// |a-b| / max(|a|, |b|, floor). The floor keeps entries that are zero in
/// exact arithmetic from turning round-off into a huge relative error.
[[nodiscard]] inline double relative_error(double a, double b, double floor = 1e-4)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

} // namespace mov::nn
