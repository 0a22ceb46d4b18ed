#pragma once

// Cross-validated model comparison: stratified k folds, an inner validation
// carve per fold, leakage-free standardization, optional per-fold
// hyperparameter sweep selected by validation NLL, test evaluation, and
// pooled DeLong tests of MoV against every baseline.

#include <atomic>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "mov/baselines.hpp"
#include "mov/data.hpp"
#include "mov/dataset.hpp"
#include "mov/eval.hpp"
#include "mov/model.hpp"
#include "mov/train.hpp"

namespace mov::harness {

struct SweepGrid {
    std::vector<std::size_t> hidden_sizes{12, 24, 48};
    std::vector<std::size_t> layer_counts{1, 2};
    std::vector<double> lambdas{0.0, 0.5, 1.0, 2.0};
    std::vector<double> dropouts{0.0, 0.5};
};

struct Candidate {
    Architecture arch;
    double lambda = 1.0;
    double dropout = 0.5;
};

/// Hyperparameter candidates for one model kind. The hidden-shape axes act on
/// the experts (MoV, Avg, single view) or on the Concat network; lambda only
/// exists for the mixture models. Without a grid the base settings are the
/// sole candidate.
[[nodiscard]] inline std::vector<Candidate> candidates(ModelKind kind, const Architecture& base_arch,
                                                       const TrainConfig& base, const std::optional<SweepGrid>& grid)
{
    if (!grid) return {{base_arch, base.lambda, base.dropout_rate}};
    const bool mixture = kind == ModelKind::mov || kind == ModelKind::avg_fusion;
    const std::vector<double> lambdas = mixture ? grid->lambdas : std::vector<double>{base.lambda};
    std::vector<Candidate> out;
    for (auto layers : grid->layer_counts)
        for (auto units : grid->hidden_sizes)
            for (auto lambda : lambdas)
                for (auto dropout : grid->dropouts) {
                    Candidate c{base_arch, lambda, dropout};
                    auto& hidden = kind == ModelKind::concat_fusion ? c.arch.concat_hidden : c.arch.expert_hidden;
                    hidden.assign(layers, units);
                    out.push_back(std::move(c));
                }
    return out;
}

struct CvConfig {
    std::size_t k_folds = 10;
    double validation_fraction = 0.1;
    bool standardize = true;
    TrainConfig train;
    Architecture arch;
    std::optional<SweepGrid> sweep;
    bool avg_independent = false;
    bool delong_per_fold = false;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    void validate() const
    {
        if (k_folds < 2) throw ConfigError("k_folds must be at least 2");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
            throw ConfigError("validation fraction must lie in (0, 1)");
        train.validate();
    }
};

struct FoldOutcome {
    std::size_t fold = 0;
    eval::EvalReport report;
    std::vector<eval::ScoredPrediction> predictions;
    std::vector<std::vector<double>> gate_weights;             ///< MoV only, one row per test sample
    std::vector<std::optional<std::size_t>> informative_views; ///< ground truth, when known
    Candidate chosen;
    double validation_loss = 0.0;
    std::size_t epochs = 0;
    std::size_t best_epoch = 0;
};

struct ModelResult {
    ModelSpec spec;
    std::string name;
    std::vector<FoldOutcome> folds;
    eval::CvReport cv;
};

struct DeLongEntry {
    std::string baseline;
    eval::DeLongResult pooled;
    std::vector<std::optional<eval::DeLongResult>> per_fold;
};

struct Comparison {
    data::FoldPlan plan;
    std::vector<ModelResult> models;
    std::vector<DeLongEntry> delong; ///< MoV vs each baseline (MoV is "a")
};

/// Single view per view, then Avg (when m >= 2), Concat and MoV.
[[nodiscard]] inline std::vector<ModelSpec> default_models(const ViewSchema& schema)
{
    std::vector<ModelSpec> out;
    for (std::size_t v = 0; v < schema.views(); ++v) out.push_back({ModelKind::single_view, v});
    if (schema.views() >= 2) out.push_back({ModelKind::avg_fusion, 0});
    out.push_back({ModelKind::concat_fusion, 0});
    out.push_back({ModelKind::mov, 0});
    return out;
}

/// Seeds for fold f: one for the validation carve, one shared by every
/// model's initialization (so MoV and Avg start from identical experts), and
/// one for dropout masks and shuffling.
struct FoldSeeds {
    std::uint64_t carve, init, train;
};

[[nodiscard]] inline FoldSeeds fold_seeds(std::uint64_t master, std::size_t fold)
{
    const auto base = derive_seed(master, 0xF01D, fold);
    return {derive_seed(base, 1), derive_seed(base, 2), derive_seed(base, 3)};
}

struct PreparedFold {
    std::vector<MultiViewSample> train, validation, test;
    data::StandardizationStats stats;
};

[[nodiscard]] inline PreparedFold prepare_fold(const Dataset& data, const data::FoldPlan& plan, std::size_t fold,
                                               const CvConfig& cfg)
{
    const auto seeds = fold_seeds(cfg.seed, fold);
    const auto train_idx = plan.train_indices(fold);
    const auto split = data::carve_validation(data, train_idx, cfg.validation_fraction, seeds.carve);
    PreparedFold p;
    p.train = gather(data, split.inner_train);
    p.validation = gather(data, split.validation);
    p.test = gather(data, plan.test_indices(fold));
    p.stats = cfg.standardize ? data::fit_standardizer(p.train) : data::identity_standardizer(data.schema);
    p.train = data::apply_standardizer(p.stats, std::move(p.train));
    p.validation = data::apply_standardizer(p.stats, std::move(p.validation));
    p.test = data::apply_standardizer(p.stats, std::move(p.test));
    return p;
}

struct TrainedCandidate {
    Classifier model;
    TrainHistory history;
    Candidate candidate;
    double validation_loss = std::numeric_limits<double>::infinity();
};

/// Trains every candidate on the fold's inner training set and keeps the one
/// with the lowest validation NLL (first wins on ties).
[[nodiscard]] inline TrainedCandidate fit_model(const ModelSpec& spec, const ViewSchema& schema,
                                                const PreparedFold& fold, const CvConfig& cfg, const FoldSeeds& seeds)
{
    std::optional<TrainedCandidate> best;
    for (const auto& cand : candidates(spec.kind, cfg.arch, cfg.train, cfg.sweep)) {
        TrainConfig tc = cfg.train;
        tc.lambda = cand.lambda;
        tc.dropout_rate = cand.dropout;
        tc.seed = seeds.train;
        ClassifierOptions opts{cand.arch, cfg.avg_independent, false};
        auto [model, history] =
            train_classifier(make_classifier(spec, schema, opts, seeds.init), fold.train, fold.validation, tc);
        const double val = validation_nll(model, fold.validation);
        if (!best || val < best->validation_loss)
            best = TrainedCandidate{std::move(model), std::move(history), cand, val};
    }
    return std::move(*best);
}

[[nodiscard]] inline FoldOutcome run_fold(const Dataset& data, const data::FoldPlan& plan, std::size_t fold,
                                          const ModelSpec& spec, const CvConfig& cfg)
{
    const auto prepared = prepare_fold(data, plan, fold, cfg);
    const auto seeds = fold_seeds(cfg.seed, fold);
    auto fitted = fit_model(spec, data.schema, prepared, cfg, seeds);

    FoldOutcome out;
    out.fold = fold;
    out.chosen = fitted.candidate;
    out.validation_loss = fitted.validation_loss;
    out.epochs = fitted.history.epochs();
    out.best_epoch = fitted.history.best_epoch;
    const auto* mov_model = std::get_if<MoVModel>(&fitted.model);
    for (const auto& s : prepared.test) {
        const auto proba = predict_proba(fitted.model, s);
        out.predictions.push_back(eval::make_prediction(s.id, s.label, proba.at(eval::kPositiveClass)));
        if (mov_model) out.gate_weights.push_back(mov_model->explain(s).gate_weights);
        out.informative_views.push_back(s.informative_view);
    }
    out.report = eval::evaluate(out.predictions);
    return out;
}

/// Runs `jobs` closures on up to `workers` threads. Results are written by
/// index, so the outcome does not depend on scheduling.
template <class Fn>
void run_parallel(std::size_t jobs, std::size_t workers, Fn&& fn)
{
    workers = std::max<std::size_t>(1, std::min(workers, jobs));
    if (workers == 1) {
        for (std::size_t j = 0; j < jobs; ++j) fn(j);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
                try {
                    fn(j);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

[[nodiscard]] inline Comparison compare(const Dataset& data, const std::vector<ModelSpec>& models, const CvConfig& cfg)
{
    cfg.validate();
    data.schema.validate();
    if (data.schema.classes() != 2) throw ConfigError("model comparison requires a binary class schema");
    Comparison cmp;
    cmp.plan = data::stratified_kfold(data, cfg.k_folds, derive_seed(cfg.seed, 0xF07D));

    cmp.models.resize(models.size());
    for (std::size_t m = 0; m < models.size(); ++m) {
        cmp.models[m].spec = models[m];
        cmp.models[m].name = models[m].name(data.schema);
        cmp.models[m].folds.resize(cfg.k_folds);
    }
    run_parallel(models.size() * cfg.k_folds, cfg.workers, [&](std::size_t job) {
        const std::size_t m = job / cfg.k_folds, f = job % cfg.k_folds;
        try {
            cmp.models[m].folds[f] = run_fold(data, cmp.plan, f, models[m], cfg);
        } catch (const Error& e) {
            throw Error(e.kind(), "fold " + std::to_string(f) + ", model " + cmp.models[m].name + ": " + e.what());
        }
    });

    for (auto& result : cmp.models) {
        std::vector<eval::EvalReport> reports;
        std::vector<std::vector<eval::ScoredPrediction>> preds;
        for (const auto& f : result.folds) {
            reports.push_back(f.report);
            preds.push_back(f.predictions);
        }
        result.cv = eval::aggregate_cv(std::move(reports), std::move(preds));
    }

    const auto mov_it = std::find_if(cmp.models.begin(), cmp.models.end(),
                                     [](const auto& r) { return r.spec.kind == ModelKind::mov; });
    if (mov_it != cmp.models.end()) {
        for (const auto& other : cmp.models) {
            if (other.spec.kind == ModelKind::mov) continue;
            DeLongEntry entry;
            entry.baseline = other.name;
            entry.pooled = eval::delong_test(mov_it->cv.pooled, other.cv.pooled);
            if (cfg.delong_per_fold)
                for (std::size_t f = 0; f < cfg.k_folds; ++f) {
                    try {
                        entry.per_fold.push_back(
                            eval::delong_test(mov_it->folds[f].predictions, other.folds[f].predictions));
                    } catch (const DataError&) {
                        entry.per_fold.push_back(std::nullopt);
                    }
                }
            cmp.delong.push_back(std::move(entry));
        }
    }
    return cmp;
}

/// Fraction of MoV test samples (with known ground truth) whose gate puts
/// more than half its weight on the informative view.
[[nodiscard]] inline double gate_agreement(const ModelResult& mov_result)
{
    std::size_t hits = 0, total = 0;
    for (const auto& f : mov_result.folds)
        for (std::size_t t = 0; t < f.gate_weights.size(); ++t) {
            const auto& z = f.informative_views[t];
            if (!z) continue;
            ++total;
            if (f.gate_weights[t].at(*z) > 0.5) ++hits;
        }
    if (total == 0) throw DataError("no ground-truth informative views available");
    return static_cast<double>(hits) / static_cast<double>(total);
}

[[nodiscard]] inline const ModelResult& find_model(const Comparison& cmp, ModelKind kind)
{
    for (const auto& r : cmp.models)
        if (r.spec.kind == kind) return r;
    throw ConfigError("model not present in comparison");
}

[[nodiscard]] inline nlohmann::json to_json(const Candidate& c)
{
    return {{"expert_hidden", c.arch.expert_hidden},
            {"gate_hidden", c.arch.gate_hidden},
            {"concat_hidden", c.arch.concat_hidden},
            {"lambda", c.lambda},
            {"dropout", c.dropout}};
}

[[nodiscard]] inline nlohmann::json to_json(const Comparison& cmp)
{
    nlohmann::json models = nlohmann::json::array();
    for (const auto& r : cmp.models) {
        auto j = eval::to_json(r.cv);
        j["name"] = r.name;
        j["model"] = model_spec_string(r.spec);
        nlohmann::json chosen = nlohmann::json::array();
        for (const auto& f : r.folds) {
            auto c = to_json(f.chosen);
            c["validation_nll"] = f.validation_loss;
            c["epochs"] = f.epochs;
            c["best_epoch"] = f.best_epoch;
            chosen.push_back(std::move(c));
        }
        j["selected"] = std::move(chosen);
        if (r.spec.kind == ModelKind::mov) {
            try {
                j["gate_agreement"] = gate_agreement(r);
            } catch (const DataError&) {
            }
        }
        models.push_back(std::move(j));
    }
    nlohmann::json delong = nlohmann::json::array();
    for (const auto& d : cmp.delong) {
        nlohmann::json e{{"a", "MoV"}, {"b", d.baseline}, {"pooled", eval::to_json(d.pooled)}};
        if (!d.per_fold.empty()) {
            nlohmann::json pf = nlohmann::json::array();
            for (const auto& r : d.per_fold) pf.push_back(r ? eval::to_json(*r) : nlohmann::json(nullptr));
            e["per_fold"] = std::move(pf);
        }
        delong.push_back(std::move(e));
    }
    return {{"positive_class_index", eval::kPositiveClass},
            {"decision_threshold", eval::kDecisionThreshold},
            {"selection_criterion", "validation mixture NLL (lambda excluded), best-validation snapshot"},
            {"models", std::move(models)},
            {"delong", std::move(delong)}};
}

/// Plain-text results table: mean accuracy, F-measure and AUC per model,
/// followed by the DeLong p-values.
[[nodiscard]] inline std::string format_table(const Comparison& cmp)
{
    std::ostringstream out;
    out << std::fixed << std::setprecision(3);
    out << std::left << std::setw(12) << "Method" << std::right << std::setw(10) << "Accuracy" << std::setw(11)
        << "F-measure" << std::setw(8) << "AUC" << '\n';
    for (const auto& r : cmp.models)
        out << std::left << std::setw(12) << r.name << std::right << std::setw(10) << r.cv.accuracy.mean
            << std::setw(11) << r.cv.f_measure.mean << std::setw(8) << r.cv.auc.mean << '\n';
    for (const auto& d : cmp.delong)
        out << "DeLong MoV vs " << d.baseline << ": z=" << std::fixed << std::setprecision(3) << d.pooled.z
            << " p=" << std::defaultfloat << std::setprecision(3) << d.pooled.p_value << '\n';
    return out.str();
}

} // namespace mov::harness
