#include <gtest/gtest.h>

#include <random>

#include "mov/baselines.hpp"
#include "mov/data.hpp"
#include "mov/eval.hpp"

using namespace mov;

namespace {

nn::MLPParams constant_net(std::size_t inputs, std::vector<double> probs)
{
    auto net = nn::zero_mlp(std::vector<std::size_t>{inputs, 3, probs.size()});
    for (auto& p : probs) p = std::log(p);
    net.layers.back().biases = std::move(probs);
    return net;
}

data::SyntheticConfig small_config(std::size_t n, std::uint64_t seed)
{
    data::SyntheticConfig c;
    c.n_samples = n;
    c.view_dims = {4, 3};
    c.separation = 3.0;
    c.noise_std = 0.5;
    c.seed = seed;
    return c;
}

TrainConfig quick_config(std::uint64_t seed)
{
    TrainConfig cfg;
    cfg.max_epochs = 30;
    cfg.batch_size = 16;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST(AvgFusion, AveragesExpertDistributions)
{
    const AvgFusionModel avg({constant_net(1, {0.8, 0.2}), constant_net(2, {0.4, 0.6})});
    MultiViewSample s;
    s.views = {{1.0}, {0.0, 2.0}};
    const auto p = avg.predict_proba(s);
    EXPECT_NEAR(p[0], 0.6, 1e-15);
    EXPECT_NEAR(p[1], 0.4, 1e-15);

    const AvgFusionModel same({constant_net(1, {0.3, 0.7}), constant_net(2, {0.3, 0.7})});
    const auto q = same.predict_proba(s);
    EXPECT_NEAR(q[0], 0.3, 1e-15);
    EXPECT_NEAR(q[1], 0.7, 1e-15);
}

TEST(AvgFusion, NeedsTwoViews)
{
    EXPECT_THROW(AvgFusionModel({constant_net(1, {0.5, 0.5})}), ConfigError);
    EXPECT_THROW((void)avg_fusion_model(std::vector<std::size_t>{3}, 2, {}, 1), ConfigError);
}

// MoV whose gate starts at zero and never moves is the Avg model, bit for bit.
TEST(AvgFusion, EqualsMoVWithZeroFrozenGate)
{
    const auto data = data::generate_synthetic(small_config(200, 3));
    const std::vector<MultiViewSample> tr(data.samples.begin(), data.samples.begin() + 150);
    const std::vector<MultiViewSample> va(data.samples.begin() + 150, data.samples.end());
    auto cfg = quick_config(9);
    cfg.freeze_gate = true;

    ClassifierOptions opts;
    opts.zero_frozen_gate = true;
    const auto [mov_model, mov_history] =
        train_classifier(make_classifier({ModelKind::mov, 0}, data.schema, opts, 17), tr, va, cfg);
    const auto [avg_model, avg_history] =
        train_classifier(make_classifier({ModelKind::avg_fusion, 0}, data.schema, opts, 17), tr, va, cfg);

    EXPECT_EQ(mov_history, avg_history);
    const auto& trained_mov = std::get<MoVModel>(mov_model);
    for (auto block : trained_mov.parameters().gate.blocks())
        for (double v : block) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(trained_mov.parameters().experts, std::get<AvgFusionModel>(avg_model).parameters().experts);
    for (const auto& s : data.samples) EXPECT_EQ(predict_proba(mov_model, s), predict_proba(avg_model, s)) << s.id;
}

TEST(AvgFusion, IndependentVariantTrainsPerViewLikelihoods)
{
    const auto data = data::generate_synthetic(small_config(40, 4));
    const AvgFusionModel joint = avg_fusion_model(data.schema.view_dims, 2, {}, 5, false);
    const AvgFusionModel independent = avg_fusion_model(data.schema.view_dims, 2, {}, 5, true);
    auto cfg = quick_config(1);
    cfg.dropout_rate = 0.0;
    const auto [loss_j, grad_j] = joint.batch_objective(data.samples, cfg, 0);
    const auto [loss_i, grad_i] = independent.batch_objective(data.samples, cfg, 0);
    // Independent loss is the sum of per-view NLLs; each expert's gradient is its standalone one.
    double expected = 0.0;
    for (std::size_t v = 0; v < 2; ++v) {
        const SingleViewModel single(v, independent.parameters().experts[v]);
        const auto [lv, gv] = single.batch_objective(data.samples, cfg, 0);
        expected += lv;
        EXPECT_EQ(gv, grad_i.experts[v]);
    }
    EXPECT_NEAR(loss_i, expected, 1e-12);
    EXPECT_NE(loss_j, loss_i);
}

TEST(SingleView, IgnoresOtherViews)
{
    auto data = data::generate_synthetic(small_config(30, 5));
    const auto model = single_view_model(0, data.schema.view_dims, 2, {}, 3);
    std::vector<std::vector<double>> before;
    for (const auto& s : data.samples) before.push_back(model.predict_proba(s));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal(0.0, 100.0);
    for (auto& s : data.samples)
        for (auto& v : s.views[1]) v = normal(rng);
    for (std::size_t t = 0; t < data.samples.size(); ++t) EXPECT_EQ(model.predict_proba(data.samples[t]), before[t]);
}

TEST(SingleView, InvalidViewIndex)
{
    EXPECT_THROW((void)single_view_model(2, std::vector<std::size_t>{3, 3}, 2, {}, 1), ConfigError);
}

TEST(SingleView, UninformativeViewHasChanceAuc)
{
    auto config = small_config(1200, 6);
    config.informative_prior = {1.0, 0.0};
    const auto data = data::generate_synthetic(config);
    const std::vector<MultiViewSample> tr(data.samples.begin(), data.samples.begin() + 600);
    const std::vector<MultiViewSample> va(data.samples.begin() + 600, data.samples.begin() + 700);
    const std::vector<MultiViewSample> te(data.samples.begin() + 700, data.samples.end());
    const auto [model, _] = train_model(single_view_model(1, data.schema.view_dims, 2, {}, 3), tr, va, quick_config(2));
    std::vector<eval::ScoredPrediction> preds;
    for (const auto& s : te) preds.push_back(eval::make_prediction(s.id, s.label, model.predict_proba(s)[1]));
    EXPECT_NEAR(eval::roc_and_auc(preds).auc, 0.5, 0.05);
}

TEST(SingleView, Deterministic)
{
    const auto data = data::generate_synthetic(small_config(60, 7));
    const std::vector<MultiViewSample> tr(data.samples.begin(), data.samples.begin() + 50);
    const std::vector<MultiViewSample> va(data.samples.begin() + 50, data.samples.end());
    const auto a = train_model(single_view_model(0, data.schema.view_dims, 2, {}, 3), tr, va, quick_config(4));
    const auto b = train_model(single_view_model(0, data.schema.view_dims, 2, {}, 3), tr, va, quick_config(4));
    EXPECT_EQ(a.first.parameters(), b.first.parameters());
    EXPECT_EQ(a.second, b.second);
}

TEST(ConcatFusion, ViewPermutationWithPermutedInputLayer)
{
    const auto model = concat_fusion_model(std::vector<std::size_t>{2, 3}, 2, {}, 8);
    // Swap the view order and move the first-layer columns to match.
    auto swapped_net = model.parameters();
    auto& w = swapped_net.layers[0];
    const auto& orig = model.parameters().layers[0];
    for (std::size_t r = 0; r < w.outputs; ++r) {
        for (std::size_t c = 0; c < 3; ++c) w.weight(r, c) = orig.weight(r, 2 + c);
        for (std::size_t c = 0; c < 2; ++c) w.weight(r, 3 + c) = orig.weight(r, c);
    }
    const ConcatFusionModel swapped(swapped_net);
    MultiViewSample s, t;
    s.views = {{0.3, -1.0}, {2.0, 0.1, -0.4}};
    t.views = {s.views[1], s.views[0]};
    const auto a = model.predict_proba(s), b = swapped.predict_proba(t);
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(a[c], b[c], 1e-15);
}

// Labels are the XOR of the signs of view 0 and view 1, so no single view
// carries signal but the concatenation does.
TEST(ConcatFusion, LearnsCrossViewInteraction)
{
    std::mt19937_64 rng(12);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<MultiViewSample> samples;
    for (std::size_t t = 0; t < 400; ++t) {
        MultiViewSample s;
        s.id = "x" + std::to_string(t);
        const double a = normal(rng), b = normal(rng);
        s.views = {{a}, {b}};
        s.label = (a > 0) != (b > 0) ? 1 : 0;
        samples.push_back(std::move(s));
    }
    const std::vector<MultiViewSample> tr(samples.begin(), samples.begin() + 320);
    const std::vector<MultiViewSample> va(samples.begin() + 320, samples.end());
    TrainConfig cfg;
    cfg.max_epochs = 150;
    cfg.batch_size = 32;
    cfg.dropout_rate = 0.0;
    cfg.seed = 2;
    const std::vector<std::size_t> dims{1, 1};
    const auto concat = train_model(concat_fusion_model(dims, 2, {}, 1), tr, va, cfg);
    const auto single0 = train_model(single_view_model(0, dims, 2, {}, 1), tr, va, cfg);
    const auto single1 = train_model(single_view_model(1, dims, 2, {}, 1), tr, va, cfg);
    const double floor = std::min(*std::min_element(single0.second.train_loss.begin(), single0.second.train_loss.end()),
                                  *std::min_element(single1.second.train_loss.begin(), single1.second.train_loss.end()));
    EXPECT_LT(concat.second.train_loss.back(), floor - 0.2);
}

TEST(ModelSpec, ParseAndName)
{
    ViewSchema schema{{"cc", "mlo"}, {14, 14}, {"benign", "malignant"}};
    EXPECT_EQ(parse_model_spec("mov", schema).kind, ModelKind::mov);
    EXPECT_EQ(parse_model_spec("avg", schema).kind, ModelKind::avg_fusion);
    EXPECT_EQ(parse_model_spec("concat", schema).kind, ModelKind::concat_fusion);
    EXPECT_EQ(parse_model_spec("single:mlo", schema), (ModelSpec{ModelKind::single_view, 1}));
    EXPECT_EQ(parse_model_spec("single:0", schema), (ModelSpec{ModelKind::single_view, 0}));
    EXPECT_THROW((void)parse_model_spec("single:2", schema), ConfigError);
    EXPECT_THROW((void)parse_model_spec("single:axial", schema), ConfigError);
    EXPECT_THROW((void)parse_model_spec("svm", schema), ConfigError);
    EXPECT_EQ(ModelSpec({ModelKind::single_view, 1}).name(schema), "mlo");
    for (auto text : {"mov", "avg", "concat", "single:1"})
        EXPECT_EQ(model_spec_string(parse_model_spec(text, schema)), text);
}

TEST(Classifier, UniformContract)
{
    const auto data = data::generate_synthetic(small_config(40, 8));
    const std::vector<MultiViewSample> tr(data.samples.begin(), data.samples.begin() + 30);
    const std::vector<MultiViewSample> va(data.samples.begin() + 30, data.samples.end());
    for (auto spec : {ModelSpec{ModelKind::mov, 0}, ModelSpec{ModelKind::single_view, 1},
                      ModelSpec{ModelKind::avg_fusion, 0}, ModelSpec{ModelKind::concat_fusion, 0}}) {
        auto [model, history] = train_classifier(make_classifier(spec, data.schema, {}, 3), tr, va, quick_config(1));
        EXPECT_EQ(spec_of(model), spec);
        EXPECT_GT(history.epochs(), 0u);
        EXPECT_NEAR(validation_nll(model, va), history.validation_loss[history.best_epoch], 1e-12);
        const auto p = predict_proba(model, va.front());
        EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
    }
}
