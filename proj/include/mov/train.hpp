#pragma once

// Generic Adam training loop shared by MoV and every baseline: per-epoch
// validation NLL, learning-rate reduction on plateau, early stopping and a
// best-validation parameter snapshot.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mov/dataset.hpp"
#include "mov/error.hpp"
#include "mov/nn.hpp"
#include "mov/seed.hpp"

namespace mov {

struct TrainConfig {
    double lambda = 1.0;
    std::size_t max_epochs = 500;
    std::size_t batch_size = 0; ///< 0 means full batch
    std::size_t plateau_patience = 10;
    double plateau_factor = 0.5;
    std::size_t early_stop_patience = 50;
    double dropout_rate = 0.5;
    bool gate_dropout = true;
    bool freeze_gate = false;
    std::uint64_t seed = 0;
    nn::AdamConfig adam;

    void validate() const
    {
        if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
        if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw ConfigError("plateau_factor must lie in (0, 1)");
        if (plateau_patience < 1 || early_stop_patience < 1) throw ConfigError("patience values must be >= 1");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
        if (!(adam.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    }
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    std::vector<double> learning_rate;
    std::size_t best_epoch = 0;
    bool stopped_early = false;

    [[nodiscard]] std::size_t epochs() const { return train_loss.size(); }

    bool operator==(const TrainHistory&) const = default;
};

/// A model the trainer can drive. `batch_objective` returns the mean negated
/// training objective over the batch together with its gradient; masks for
/// dropout are derived from `mask_seed`.
template <class M>
concept TrainableModel = requires(M& m, const M& cm, SampleSpan batch, const TrainConfig& cfg, std::uint64_t seed) {
    typename M::Params;
    requires nn::ParameterSet<typename M::Params>;
    { m.parameters() } -> std::same_as<typename M::Params&>;
    { cm.batch_objective(batch, cfg, seed) } -> std::same_as<std::pair<double, typename M::Params>>;
    { cm.validation_nll(batch) } -> std::convertible_to<double>;
};

inline void check_disjoint_ids(SampleSpan train_set, SampleSpan val_set)
{
    std::set<std::string> ids;
    for (const auto& s : train_set)
        if (!s.id.empty()) ids.insert(s.id);
    for (const auto& s : val_set)
        if (!s.id.empty() && ids.contains(s.id))
            throw ConfigError("sample '" + s.id + "' appears in both training and validation sets");
}

template <TrainableModel M>
[[nodiscard]] std::pair<M, TrainHistory> train_model(M model, SampleSpan train_set, SampleSpan val_set,
                                                     const TrainConfig& config)
{
    config.validate();
    TrainHistory history;
    if (config.max_epochs == 0) return {std::move(model), std::move(history)};
    if (train_set.empty()) throw DataError("training set is empty");
    if (val_set.empty()) throw DataError("validation set is empty");
    check_disjoint_ids(train_set, val_set);

    auto state = nn::make_adam_state(model.parameters(), config.adam);
    std::vector<MultiViewSample> work(train_set.begin(), train_set.end());
    const std::size_t n = work.size();
    const std::size_t batch = config.batch_size == 0 ? n : std::min(config.batch_size, n);
    const bool shuffle = batch < n;

    auto best_params = model.parameters();
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::size_t since_reduction = 0;

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        if (shuffle) {
            std::mt19937_64 rng(derive_seed(config.seed, 0x5EED, epoch));
            std::shuffle(work.begin(), work.end(), rng);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0, b = 0; start < n; start += batch, ++b) {
            const auto size = std::min(batch, n - start);
            SampleSpan chunk(work.data() + start, size);
            auto [loss, grad] = model.batch_objective(chunk, config, derive_seed(config.seed, epoch, b));
            if (!std::isfinite(loss))
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(b));
            nn::adam_step(model.parameters(), grad, state);
            epoch_loss += loss * static_cast<double>(size);
        }
        const double val_loss = model.validation_nll(val_set);
        if (!std::isfinite(val_loss))
            throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));

        history.train_loss.push_back(epoch_loss / static_cast<double>(n));
        history.validation_loss.push_back(val_loss);
        history.learning_rate.push_back(state.learning_rate);

        if (val_loss < best_loss) {
            best_loss = val_loss;
            best_params = model.parameters();
            history.best_epoch = epoch;
            since_best = 0;
            since_reduction = 0;
            continue;
        }
        ++since_best;
        ++since_reduction;
        if (since_reduction >= config.plateau_patience) {
            state.learning_rate *= config.plateau_factor;
            since_reduction = 0;
        }
        if (since_best >= config.early_stop_patience) {
            history.stopped_early = true;
            break;
        }
    }
    model.parameters() = std::move(best_params);
    return {std::move(model), std::move(history)};
}

} // namespace mov
