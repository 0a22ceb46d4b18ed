#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. Deliberately naive: pair enumeration, no ranking.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mov/eval.hpp"
#include "mov/model.hpp"

namespace mov::oracle {

struct DeLongOracle {
    double auc_a = 0.0, auc_b = 0.0, variance = 0.0, z = 0.0;
};

inline double kernel(double pos, double neg) { return pos > neg ? 1.0 : pos == neg ? 0.5 : 0.0; }

/// Structural components built directly from every (positive, negative) pair.
inline DeLongOracle delong(const std::vector<eval::ScoredPrediction>& a, const std::vector<eval::ScoredPrediction>& b)
{
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < a.size(); ++i) (a[i].positive ? pos : neg).push_back(i);
    const double m = static_cast<double>(pos.size()), n = static_cast<double>(neg.size());

    auto components = [&](const std::vector<eval::ScoredPrediction>& p, std::vector<double>& v10, std::vector<double>& v01) {
        v10.assign(pos.size(), 0.0);
        v01.assign(neg.size(), 0.0);
        for (std::size_t i = 0; i < pos.size(); ++i)
            for (std::size_t j = 0; j < neg.size(); ++j) {
                const double k = kernel(p[pos[i]].score, p[neg[j]].score);
                v10[i] += k / n;
                v01[j] += k / m;
            }
    };
    std::vector<double> a10, a01, b10, b01;
    components(a, a10, a01);
    components(b, b10, b01);

    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    auto cov = [&](const std::vector<double>& x, const std::vector<double>& y) {
        const double mx = mean(x), my = mean(y);
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
        return s / static_cast<double>(x.size() - 1);
    };

    DeLongOracle r;
    r.auc_a = mean(a10);
    r.auc_b = mean(b10);
    r.variance = (cov(a10, a10) + cov(b10, b10) - 2 * cov(a10, b10)) / m +
                 (cov(a01, a01) + cov(b01, b01) - 2 * cov(a01, b01)) / n;
    r.z = r.variance > 0 ? (r.auc_a - r.auc_b) / std::sqrt(r.variance) : 0.0;
    return r;
}

/// AUC as the fraction of correctly ordered (positive, negative) pairs, ties counting half.
inline double pair_auc(const std::vector<eval::ScoredPrediction>& p)
{
    double good = 0.0, total = 0.0;
    for (const auto& x : p)
        for (const auto& y : p)
            if (x.positive && !y.positive) {
                good += kernel(x.score, y.score);
                total += 1.0;
            }
    return good / total;
}

/// Random prediction set with both classes present (at least `min_per_class`
/// of each). When `levels` > 0 scores are drawn from that many distinct
/// values, which produces heavy ties.
inline std::vector<eval::ScoredPrediction> random_predictions(std::mt19937_64& rng, std::size_t n, int levels,
                                                              std::size_t min_per_class = 1)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> level(0, levels > 0 ? levels - 1 : 0);
    std::vector<eval::ScoredPrediction> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].id = "s" + std::to_string(i);
        out[i].positive = i < min_per_class ? true : i < 2 * min_per_class ? false : unit(rng) < 0.5;
        const double shift = out[i].positive ? 0.15 : 0.0;
        out[i].score = levels > 0 ? static_cast<double>(level(rng)) / levels : unit(rng) + shift;
        out[i].predicted = out[i].score >= eval::kDecisionThreshold;
    }
    return out;
}

/// A second score set over the same samples, correlated with the first.
inline std::vector<eval::ScoredPrediction> correlated_copy(std::mt19937_64& rng, std::vector<eval::ScoredPrediction> p,
                                                           int levels)
{
    std::normal_distribution<double> noise(0.0, 0.3);
    for (auto& x : p) {
        x.score += noise(rng);
        if (levels > 0) x.score = std::round(x.score * levels) / levels;
    }
    return p;
}

/// Ascent gradient of mean_t weight_t * log p_i(y_t | x_t^i) computed with the
/// expert network alone.
inline nn::MLPParams standalone_expert_gradient(const nn::MLPParams& expert, const std::vector<MultiViewSample>& batch,
                                                std::size_t view, const std::vector<double>& weights)
{
    auto total = nn::zeros_like(expert);
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const auto [logits, cache] = nn::mlp_forward(expert, batch[t].views[view], nn::Mode::infer);
        const auto p = nn::softmax(logits);
        std::vector<double> up(p.size());
        for (std::size_t c = 0; c < p.size(); ++c)
            up[c] = weights[t] * ((c == batch[t].label ? 1.0 : 0.0) - p[c]) / static_cast<double>(batch.size());
        nn::mlp_backward_accumulate(expert, cache, up, total);
    }
    return total;
}

inline std::vector<MultiViewSample> random_batch(std::mt19937_64& rng, const std::vector<std::size_t>& dims,
                                                 std::size_t n, std::size_t classes = 2)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<MultiViewSample> out;
    for (std::size_t t = 0; t < n; ++t) {
        MultiViewSample s;
        s.id = "r" + std::to_string(t);
        for (auto d : dims) {
            std::vector<double> x(d);
            for (auto& v : x) v = normal(rng);
            s.views.push_back(std::move(x));
        }
        s.label = rng() % classes;
        out.push_back(std::move(s));
    }
    return out;
}

/// Largest absolute difference, over `cases` random models and batches, between
/// the expert gradients of the mixture log-likelihood from backward() and the
/// posterior-weighted sum of standalone per-view gradients.
inline double worst_structural_gap(std::size_t cases)
{
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < cases; ++seed) {
        std::mt19937_64 rng(seed);
        const std::vector<std::size_t> dims{1 + seed % 4, 2 + seed % 3, 3};
        const auto p = init_mov_params(dims, 2, {{6, 5}, {4}, {}}, seed);
        const auto batch = random_batch(rng, dims, 1 + seed % 8);
        const auto analytic = backward(p, batch, 0.0).gradient;
        for (std::size_t i = 0; i < dims.size(); ++i) {
            std::vector<double> w;
            for (const auto& s : batch) w.push_back(posterior_weights(forward(p, s.views), s.label)[i]);
            const auto expected = standalone_expert_gradient(p.experts[i], batch, i, w);
            const auto a = analytic.experts[i].blocks();
            const auto e = expected.blocks();
            // backward() returns the gradient of the negated objective
            for (std::size_t b = 0; b < a.size(); ++b)
                for (std::size_t j = 0; j < a[b].size(); ++j) worst = std::max(worst, std::abs(-a[b][j] - e[b][j]));
        }
    }
    return worst;
}

} // namespace mov::oracle
