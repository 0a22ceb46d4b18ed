#pragma once

// Randomized comparison of MoV's analytic gradient with central finite
// differences of the composite objective.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mov/dataset.hpp"
#include "mov/model.hpp"
#include "mov/nn.hpp"
#include "mov/seed.hpp"

namespace mov {

struct GradCheckCase {
    std::vector<std::size_t> view_dims;
    Architecture arch;
    std::size_t classes = 2;
    double lambda = 0.0;
    double dropout_rate = 0.0;
    std::uint64_t mask_seed = 0;
    MoVParams params;
    std::vector<MultiViewSample> batch;
};

struct GradCheckOutcome {
    double worst_relative_error = 0.0;
    double worst_absolute_error = 0.0;
    std::map<std::string, double> worst_by_block; ///< keyed by block role, e.g. "gate.layer0.weights"
    std::size_t cases = 0;
    std::size_t scalars_checked = 0;
};

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-6;
/// Denominator floor of the relative error. Central differences at step 1e-5
/// on a loss of magnitude ~10 carry ~1e-10 of roundoff, so components smaller
/// than the floor are judged on absolute error (floor * tolerance = 1e-9).
inline constexpr double kGradCheckFloor = 1e-3;
/// Minimum |pre-activation| of every hidden unit in a drawn case; central
/// differences straddling a ReLU kink are not a gradient error.
inline constexpr double kKinkMargin = 1e-3;

namespace detail {

inline double min_hidden_margin(const nn::MLPParams& net, std::span<const double> input, double rate,
                                std::uint64_t seed)
{
    nn::ForwardCache cache;
    nn::mlp_forward(net, input, rate > 0.0 ? nn::Mode::train : nn::Mode::infer, rate, seed, cache);
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l + 1 < cache.pre_activations.size(); ++l)
        for (double z : cache.pre_activations[l]) margin = std::min(margin, std::abs(z));
    return margin;
}

/// Smallest hidden |pre-activation| of sample t under the masks backward() will use.
inline double min_hidden_margin(const MoVParams& p, const MultiViewSample& s, double rate, std::uint64_t mask_seed,
                                std::size_t t)
{
    const auto seed = sample_mask_seed(mask_seed, t);
    double margin = min_hidden_margin(p.gate, concat_views(s.views), rate, derive_seed(seed, kGateNetwork));
    for (std::size_t i = 0; i < p.views(); ++i)
        margin = std::min(margin, min_hidden_margin(p.experts[i], s.views[i], rate, derive_seed(seed, expert_network(i))));
    return margin;
}

inline std::string block_role(const std::string& name)
{
    // expert3.layer0.weights -> expert.layer0.weights
    if (name.rfind("expert", 0) == 0) {
        auto dot = name.find('.');
        return "expert" + name.substr(dot);
    }
    return name;
}

} // namespace detail

/// Draws a random small configuration: m in {2,3}, k = 2, view dims <= 4,
/// hidden layers <= 8 units, batch <= 8, with biases perturbed away from zero.
[[nodiscard]] inline GradCheckCase random_gradcheck_case(std::uint64_t seed, double lambda, double dropout_rate)
{
    std::mt19937_64 rng(seed);
    auto uniform_int = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    GradCheckCase c;
    c.lambda = lambda;
    c.dropout_rate = dropout_rate;
    c.mask_seed = rng();
    const std::size_t m = uniform_int(2, 3);
    for (std::size_t i = 0; i < m; ++i) c.view_dims.push_back(uniform_int(1, 4));
    c.arch.expert_hidden.resize(uniform_int(1, 2));
    for (auto& h : c.arch.expert_hidden) h = uniform_int(2, 8);
    c.arch.gate_hidden.resize(uniform_int(0, 2));
    for (auto& h : c.arch.gate_hidden) h = uniform_int(2, 8);

    c.params = init_mov_params(c.view_dims, c.classes, c.arch, rng());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto block : c.params.blocks())
        for (auto& v : block) v += 0.1 * normal(rng);

    const std::size_t batch = uniform_int(1, 8);
    while (c.batch.size() < batch) {
        MultiViewSample s;
        s.id = "g" + std::to_string(c.batch.size());
        s.label = uniform_int(0, c.classes - 1);
        for (auto d : c.view_dims) {
            std::vector<double> x(d);
            for (auto& xi : x) xi = normal(rng);
            s.views.push_back(std::move(x));
        }
        if (detail::min_hidden_margin(c.params, s, dropout_rate, c.mask_seed, c.batch.size()) < kKinkMargin) continue;
        c.batch.push_back(std::move(s));
    }
    return c;
}

/// Worst relative error between backward() and finite differences on one case.
inline void check_gradient_case(const GradCheckCase& c, GradCheckOutcome& out)
{
    BackwardOptions options;
    options.dropout.rate = c.dropout_rate;
    options.mask_seed = c.mask_seed;
    const auto analytic = backward(c.params, c.batch, c.lambda, options).gradient;
    const auto numeric = nn::finite_diff_gradient(
        [&](const MoVParams& p) { return -composite_loss(p, c.batch, c.lambda, options); }, c.params, kGradCheckStep);
    const auto names = c.params.block_names();
    const auto a_blocks = analytic.blocks();
    const auto n_blocks = numeric.blocks();
    for (std::size_t b = 0; b < a_blocks.size(); ++b) {
        auto& worst = out.worst_by_block[detail::block_role(names[b])];
        for (std::size_t j = 0; j < a_blocks[b].size(); ++j) {
            const double err = nn::relative_error(a_blocks[b][j], n_blocks[b][j], kGradCheckFloor);
            out.worst_absolute_error = std::max(out.worst_absolute_error, std::abs(a_blocks[b][j] - n_blocks[b][j]));
            worst = std::max(worst, err);
            out.worst_relative_error = std::max(out.worst_relative_error, err);
            ++out.scalars_checked;
        }
    }
    ++out.cases;
}

/// Runs `trials` cases cycling lambda over {0, 1, 5}. With `dropout_cases`,
/// alternate groups of three use rate-0.5 dropout under fixed masks, so every
/// lambda is checked with and without dropout.
[[nodiscard]] inline GradCheckOutcome run_gradcheck(std::uint64_t seed, std::size_t trials, bool dropout_cases = true)
{
    static constexpr double lambdas[] = {0.0, 1.0, 5.0};
    GradCheckOutcome out;
    for (std::size_t t = 0; t < trials; ++t) {
        const double lambda = lambdas[t % 3];
        const double rate = dropout_cases && (t / 3) % 2 == 1 ? 0.5 : 0.0;
        check_gradient_case(random_gradcheck_case(derive_seed(seed, t), lambda, rate), out);
    }
    return out;
}

} // namespace mov
