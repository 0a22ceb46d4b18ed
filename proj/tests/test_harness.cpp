#include <gtest/gtest.h>

#include <cmath>

#include "laws.hpp"
#include "mov/harness.hpp"

using namespace mov;
using namespace mov::harness;

namespace {

data::SyntheticConfig small_data(std::size_t n, double separation, std::uint64_t seed)
{
    data::SyntheticConfig c;
    c.n_samples = n;
    c.view_dims = {4, 3};
    c.separation = separation;
    c.noise_std = 0.5;
    c.seed = seed;
    return c;
}

CvConfig quick_cv(std::size_t k, std::uint64_t seed)
{
    CvConfig cfg;
    cfg.k_folds = k;
    cfg.train.max_epochs = 12;
    cfg.train.batch_size = 16;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST(HarnessLaws, FoldPartition)
{
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto config = small_data(50 + seed * 13, 1.0, seed);
        const auto d = data::generate_synthetic(config);
        for (std::size_t k : {2, 3, 5, 10}) {
            const auto plan = data::stratified_kfold(d, k, seed);
            EXPECT_EQ(laws::fold_partition(d, plan), "") << "seed " << seed << " k " << k;
        }
    }
}

TEST(HarnessLaws, NoLeakageInAnyFold)
{
    const auto d = data::generate_synthetic(small_data(120, 1.0, 4));
    const auto cfg = quick_cv(4, 8);
    const auto plan = data::stratified_kfold(d, cfg.k_folds, 1);
    for (std::size_t f = 0; f < cfg.k_folds; ++f) EXPECT_EQ(laws::no_leakage(d, plan, f, cfg), "") << "fold " << f;
}

TEST(HarnessLaws, StandardizationCanBeDisabled)
{
    const auto d = data::generate_synthetic(small_data(60, 1.0, 4));
    auto cfg = quick_cv(3, 8);
    cfg.standardize = false;
    const auto plan = data::stratified_kfold(d, 3, 1);
    const auto fold = prepare_fold(d, plan, 0, cfg);
    EXPECT_EQ(fold.stats, data::identity_standardizer(d.schema));
    EXPECT_EQ(fold.test, gather(d, plan.test_indices(0)));
}

TEST(HarnessLaws, BitIdenticalRerunAndWorkerIndependence)
{
    const auto d = data::generate_synthetic(small_data(150, 2.0, 5));
    auto cfg = quick_cv(3, 42);
    const auto models = default_models(d.schema);
    const auto a = compare(d, models, cfg);
    const auto b = compare(d, models, cfg);
    EXPECT_EQ(laws::identical(a, b), "");
    cfg.workers = 3;
    const auto c = compare(d, models, cfg);
    EXPECT_EQ(laws::identical(a, c), "");
    cfg.seed = 43;
    EXPECT_NE(laws::identical(a, compare(d, models, cfg)), "");
}

TEST(Harness, FoldSeedsAreDistinct)
{
    const auto a = fold_seeds(1, 0), b = fold_seeds(1, 1), c = fold_seeds(2, 0);
    EXPECT_NE(a.init, b.init);
    EXPECT_NE(a.init, c.init);
    EXPECT_NE(a.carve, a.init);
    EXPECT_NE(a.train, a.init);
}

TEST(Harness, ReportShape)
{
    const auto d = data::generate_synthetic(small_data(120, 2.0, 6));
    auto cfg = quick_cv(3, 1);
    cfg.delong_per_fold = true;
    const auto cmp = compare(d, default_models(d.schema), cfg);
    ASSERT_EQ(cmp.models.size(), 5u);
    EXPECT_EQ(cmp.models[0].name, "view0");
    EXPECT_EQ(cmp.models[1].name, "view1");
    EXPECT_EQ(cmp.models[2].name, "Avg");
    EXPECT_EQ(cmp.models[3].name, "Concat");
    EXPECT_EQ(cmp.models[4].name, "MoV");
    ASSERT_EQ(cmp.delong.size(), 4u);
    for (const auto& e : cmp.delong) EXPECT_EQ(e.per_fold.size(), 3u);

    std::size_t pooled = 0;
    for (const auto& r : cmp.models) {
        EXPECT_EQ(r.cv.pooled.size(), d.size());
        EXPECT_EQ(r.folds.size(), 3u);
        pooled += r.cv.pooled.size();
    }
    const auto& mov = find_model(cmp, ModelKind::mov);
    for (const auto& f : mov.folds) {
        ASSERT_EQ(f.gate_weights.size(), f.predictions.size());
        for (const auto& g : f.gate_weights) EXPECT_NEAR(g[0] + g[1], 1.0, 1e-12);
    }
    const double agreement = gate_agreement(mov);
    EXPECT_GE(agreement, 0.0);
    EXPECT_LE(agreement, 1.0);

    const auto j = to_json(cmp);
    EXPECT_EQ(j["positive_class_index"], 1);
    EXPECT_EQ(j["models"].size(), 5u);
    EXPECT_EQ(j["delong"].size(), 4u);
    EXPECT_EQ(j["delong"][0]["a"], "MoV");
    EXPECT_TRUE(j["models"][4].contains("gate_agreement"));
    EXPECT_EQ(j["models"][4]["selected"].size(), 3u);

    const auto table = format_table(cmp);
    for (auto name : {"Method", "view0", "view1", "Avg", "Concat", "MoV", "DeLong MoV vs Avg"})
        EXPECT_NE(table.find(name), std::string::npos) << name;
}

TEST(Harness, NoSignalGivesChanceAuc)
{
    data::SyntheticConfig c;
    c.n_samples = 1400;
    c.separation = 0.0;
    c.seed = 7;
    const auto d = data::generate_synthetic(c);
    auto cfg = quick_cv(5, 3);
    cfg.train.max_epochs = 60;
    cfg.train.batch_size = 32;
    const auto cmp = compare(d, default_models(d.schema), cfg);
    for (const auto& r : cmp.models) {
        EXPECT_GE(r.cv.auc.mean, 0.45) << r.name;
        EXPECT_LE(r.cv.auc.mean, 0.55) << r.name;
    }
}

TEST(Harness, FailuresCarryFoldAndModel)
{
    auto d = data::generate_synthetic(small_data(60, 1.0, 8));
    d.samples[10].views[0][1] = std::numeric_limits<double>::infinity();
    try {
        (void)compare(d, {{ModelKind::concat_fusion, 0}}, quick_cv(3, 1));
        FAIL() << "expected NumericError";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric);
        const std::string msg = e.what();
        EXPECT_NE(msg.find("fold "), std::string::npos) << msg;
        EXPECT_NE(msg.find("model Concat"), std::string::npos) << msg;
    }
}

TEST(Harness, RejectsBadConfigs)
{
    const auto d = data::generate_synthetic(small_data(60, 1.0, 8));
    auto cfg = quick_cv(1, 1);
    EXPECT_THROW((void)compare(d, default_models(d.schema), cfg), ConfigError);
    cfg = quick_cv(3, 1);
    cfg.validation_fraction = 1.0;
    EXPECT_THROW((void)compare(d, default_models(d.schema), cfg), ConfigError);

    auto three = small_data(60, 1.0, 8);
    three.classes = 3;
    const auto multi = data::generate_synthetic(three);
    EXPECT_THROW((void)compare(multi, default_models(multi.schema), quick_cv(3, 1)), ConfigError);
}

TEST(Harness, GateAgreementNeedsTruth)
{
    auto d = data::generate_synthetic(small_data(60, 1.0, 9));
    for (auto& s : d.samples) s.informative_view.reset();
    const auto cmp = compare(d, {{ModelKind::mov, 0}}, quick_cv(3, 1));
    EXPECT_THROW((void)gate_agreement(find_model(cmp, ModelKind::mov)), DataError);
    EXPECT_FALSE(to_json(cmp)["models"][0].contains("gate_agreement"));
    EXPECT_TRUE(cmp.delong.empty());
}

TEST(Sweep, CandidateGrid)
{
    const TrainConfig base;
    const Architecture arch;
    const SweepGrid grid;
    EXPECT_EQ(candidates(ModelKind::mov, arch, base, std::nullopt).size(), 1u);
    EXPECT_EQ(candidates(ModelKind::mov, arch, base, grid).size(), 2u * 3u * 4u * 2u);
    EXPECT_EQ(candidates(ModelKind::avg_fusion, arch, base, grid).size(), 48u);
    EXPECT_EQ(candidates(ModelKind::concat_fusion, arch, base, grid).size(), 12u);
    EXPECT_EQ(candidates(ModelKind::single_view, arch, base, grid).size(), 12u);
    const auto concat = candidates(ModelKind::concat_fusion, arch, base, grid);
    EXPECT_EQ(concat.back().arch.concat_hidden, (std::vector<std::size_t>{48, 48}));
    EXPECT_EQ(concat.back().arch.expert_hidden, arch.expert_hidden);
    for (const auto& c : candidates(ModelKind::mov, arch, base, grid)) EXPECT_EQ(c.arch.gate_hidden, arch.gate_hidden);
}

TEST(Sweep, SelectsLowestValidationLoss)
{
    const auto d = data::generate_synthetic(small_data(90, 2.0, 10));
    auto cfg = quick_cv(3, 2);
    SweepGrid grid;
    grid.hidden_sizes = {2, 8};
    grid.layer_counts = {1};
    grid.lambdas = {1.0};
    grid.dropouts = {0.0};
    cfg.sweep = grid;
    const auto plan = data::stratified_kfold(d, 3, 0);
    const auto fold = prepare_fold(d, plan, 0, cfg);
    const auto seeds = fold_seeds(cfg.seed, 0);
    const auto chosen = fit_model({ModelKind::single_view, 0}, d.schema, fold, cfg, seeds);

    double best = std::numeric_limits<double>::infinity();
    for (const auto& cand : candidates(ModelKind::single_view, cfg.arch, cfg.train, grid)) {
        auto single = cfg;
        single.sweep.reset();
        single.arch = cand.arch;
        single.train.dropout_rate = cand.dropout;
        best = std::min(best, fit_model({ModelKind::single_view, 0}, d.schema, fold, single, seeds).validation_loss);
    }
    EXPECT_EQ(chosen.validation_loss, best);
}
