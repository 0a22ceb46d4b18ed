// movctl: generate synthetic data, train and evaluate single models, run the
// cross-validated comparison, and check gradients.
//
// Exit codes: 0 ok, 1 unexpected, 2 config, 3 data, 4 numeric, 5 failed
// check, 6 checkpoint format.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mov/mov.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mov;

namespace {

constexpr const char* kVersion = "1.0.0";

enum ExitCode : int {
    exit_ok = 0,
    exit_other = 1,
    exit_config = 2,
    exit_data = 3,
    exit_numeric = 4,
    exit_check_failed = 5,
    exit_format = 6,
};

int exit_code_for(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::config: return exit_config;
    case ErrorKind::shape:
    case ErrorKind::data:
    case ErrorKind::pairing: return exit_data;
    case ErrorKind::numeric: return exit_numeric;
    case ErrorKind::format: return exit_format;
    }
    return exit_other;
}

// ---------------------------------------------------------------------------
// Run configuration

struct DataSource {
    std::optional<data::SyntheticConfig> synthetic;
    std::optional<std::string> csv;
    std::vector<std::string> class_names{"benign", "malignant"};
    std::optional<std::string> truth;
    std::optional<std::string> group;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::string out = "movctl_out";
    std::optional<DataSource> data;
    std::vector<std::string> models;
    std::string model = "mov";
    std::optional<std::string> checkpoint;
    harness::CvConfig cv;
    std::size_t trials = 60;
};

/// Reads known keys from a JSON object and rejects anything left over, so a
/// misspelt key is an error rather than a silently ignored setting.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
    }

    template <class T>
    void get(const char* key, T& out)
    {
        seen_.push_back(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where_ + "." + key + " has the wrong type");
        }
    }

    [[nodiscard]] const json* child(const char* key)
    {
        seen_.push_back(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const
    {
        for (const auto& [key, _] : j_.items())
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
                throw ConfigError("unknown key '" + key + "' in " + where_);
    }

private:
    const json& j_;
    std::string where_;
    std::vector<std::string> seen_;
};

data::SyntheticConfig parse_synthetic(const json& j)
{
    data::SyntheticConfig c;
    Fields f(j, "data.synthetic");
    f.get("n_samples", c.n_samples);
    f.get("view_dims", c.view_dims);
    f.get("view_names", c.view_names);
    f.get("class_names", c.class_names);
    f.get("classes", c.classes);
    f.get("separation", c.separation);
    f.get("informative_prior", c.informative_prior);
    f.get("noise_std", c.noise_std);
    f.get("seed", c.seed);
    f.finish();
    c.validate();
    return c;
}

json synthetic_to_json(const data::SyntheticConfig& c)
{
    return {{"n_samples", c.n_samples},       {"view_dims", c.view_dims},   {"view_names", c.view_names},
            {"class_names", c.class_names},   {"classes", c.classes},       {"separation", c.separation},
            {"informative_prior", c.informative_prior}, {"noise_std", c.noise_std}, {"seed", c.seed}};
}

DataSource parse_data(const json& j)
{
    DataSource d;
    Fields f(j, "data");
    if (const auto* s = f.child("synthetic")) d.synthetic = parse_synthetic(*s);
    std::string csv, truth, group;
    f.get("csv", csv);
    f.get("truth", truth);
    f.get("group", group);
    f.get("class_names", d.class_names);
    f.finish();
    if (!csv.empty()) d.csv = csv;
    if (!truth.empty()) d.truth = truth;
    if (!group.empty()) d.group = group;
    if (d.synthetic.has_value() == d.csv.has_value())
        throw ConfigError("data must name exactly one source: 'csv' or 'synthetic'");
    return d;
}

json data_to_json(const DataSource& d)
{
    json j{{"class_names", d.class_names}};
    if (d.synthetic) j["synthetic"] = synthetic_to_json(*d.synthetic);
    if (d.csv) j["csv"] = *d.csv;
    if (d.truth) j["truth"] = *d.truth;
    if (d.group) j["group"] = *d.group;
    return j;
}

void parse_train(const json& j, TrainConfig& t)
{
    Fields f(j, "train");
    f.get("lambda", t.lambda);
    f.get("max_epochs", t.max_epochs);
    f.get("batch_size", t.batch_size);
    f.get("plateau_patience", t.plateau_patience);
    f.get("plateau_factor", t.plateau_factor);
    f.get("early_stop_patience", t.early_stop_patience);
    f.get("dropout", t.dropout_rate);
    f.get("gate_dropout", t.gate_dropout);
    f.get("learning_rate", t.adam.learning_rate);
    f.get("beta1", t.adam.beta1);
    f.get("beta2", t.adam.beta2);
    f.get("epsilon", t.adam.epsilon);
    f.finish();
}

json train_to_json(const TrainConfig& t)
{
    return {{"lambda", t.lambda},
            {"max_epochs", t.max_epochs},
            {"batch_size", t.batch_size},
            {"plateau_patience", t.plateau_patience},
            {"plateau_factor", t.plateau_factor},
            {"early_stop_patience", t.early_stop_patience},
            {"dropout", t.dropout_rate},
            {"gate_dropout", t.gate_dropout},
            {"learning_rate", t.adam.learning_rate},
            {"beta1", t.adam.beta1},
            {"beta2", t.adam.beta2},
            {"epsilon", t.adam.epsilon}};
}

void parse_arch(const json& j, Architecture& a)
{
    Fields f(j, "arch");
    f.get("expert_hidden", a.expert_hidden);
    f.get("gate_hidden", a.gate_hidden);
    f.get("concat_hidden", a.concat_hidden);
    f.finish();
}

json arch_to_json(const Architecture& a)
{
    return {{"expert_hidden", a.expert_hidden}, {"gate_hidden", a.gate_hidden}, {"concat_hidden", a.concat_hidden}};
}

harness::SweepGrid parse_sweep(const json& j)
{
    harness::SweepGrid g;
    Fields f(j, "cv.sweep");
    f.get("hidden_sizes", g.hidden_sizes);
    f.get("layer_counts", g.layer_counts);
    f.get("lambdas", g.lambdas);
    f.get("dropouts", g.dropouts);
    f.finish();
    return g;
}

void parse_cv(const json& j, harness::CvConfig& cv)
{
    Fields f(j, "cv");
    f.get("k_folds", cv.k_folds);
    f.get("validation_fraction", cv.validation_fraction);
    f.get("standardize", cv.standardize);
    f.get("avg_independent", cv.avg_independent);
    f.get("delong_per_fold", cv.delong_per_fold);
    if (const auto* s = f.child("sweep")) {
        if (s->is_boolean()) {
            if (s->get<bool>()) cv.sweep = harness::SweepGrid{};
        } else {
            cv.sweep = parse_sweep(*s);
        }
    }
    f.finish();
}

json cv_to_json(const harness::CvConfig& cv)
{
    json j{{"k_folds", cv.k_folds},
           {"validation_fraction", cv.validation_fraction},
           {"standardize", cv.standardize},
           {"avg_independent", cv.avg_independent},
           {"delong_per_fold", cv.delong_per_fold},
           {"sweep", false}};
    if (cv.sweep)
        j["sweep"] = {{"hidden_sizes", cv.sweep->hidden_sizes},
                      {"layer_counts", cv.sweep->layer_counts},
                      {"lambdas", cv.sweep->lambdas},
                      {"dropouts", cv.sweep->dropouts}};
    return j;
}

RunConfig parse_config(const json& root)
{
    // A manifest is accepted as a config: its "config" member is the resolved run.
    const json& j = root.contains("manifest_version") ? root.at("config") : root;
    RunConfig rc;
    Fields f(j, "config");
    f.get("seed", rc.seed);
    f.get("workers", rc.workers);
    f.get("out", rc.out);
    f.get("models", rc.models);
    f.get("model", rc.model);
    f.get("trials", rc.trials);
    std::string checkpoint;
    f.get("checkpoint", checkpoint);
    if (!checkpoint.empty()) rc.checkpoint = checkpoint;
    if (const auto* d = f.child("data")) rc.data = parse_data(*d);
    if (const auto* t = f.child("train")) parse_train(*t, rc.cv.train);
    if (const auto* a = f.child("arch")) parse_arch(*a, rc.cv.arch);
    if (const auto* c = f.child("cv")) parse_cv(*c, rc.cv);
    f.finish();
    return rc;
}

json config_to_json(const RunConfig& rc)
{
    json j{{"seed", rc.seed},
           {"workers", rc.workers},
           {"out", rc.out},
           {"model", rc.model},
           {"models", rc.models},
           {"trials", rc.trials},
           {"train", train_to_json(rc.cv.train)},
           {"arch", arch_to_json(rc.cv.arch)},
           {"cv", cv_to_json(rc.cv)}};
    if (rc.data) j["data"] = data_to_json(*rc.data);
    if (rc.checkpoint) j["checkpoint"] = *rc.checkpoint;
    return j;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// Outputs

std::uint64_t fnv1a(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t v)
{
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

std::string file_safe(const std::string& name)
{
    std::string out;
    for (char c : name) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
    return out;
}

void write_roc(const fs::path& path, const std::vector<eval::RocPoint>& curve)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    eval::write_roc_csv(out, curve);
}

class Run {
public:
    Run(std::string command, RunConfig rc, bool writes_files = true)
        : command_(std::move(command)), rc_(std::move(rc)), dir_(rc_.out)
    {
        if (writes_files) fs::create_directories(dir_);
    }

    [[nodiscard]] const RunConfig& config() const { return rc_; }
    [[nodiscard]] fs::path path(const std::string& name) const { return dir_ / name; }

    void note(const std::string& key, json value) { extra_[key] = std::move(value); }

    void input_file(const std::string& role, const std::string& path)
    {
        inputs_[role] = {{"path", path}, {"fnv1a64", hex(fnv1a(path))}};
    }

    void write_manifest() const
    {
        json m{{"manifest_version", 1},
               {"command", command_},
               {"config", config_to_json(rc_)},
               {"seed", rc_.seed},
               {"workers", rc_.workers},
               {"versions", {{"movctl", kVersion}, {"compiler", __VERSION__}, {"cplusplus", __cplusplus}}},
               {"conventions",
                {{"positive_class_index", eval::kPositiveClass},
                 {"decision_threshold", eval::kDecisionThreshold},
                 {"validation_criterion", "mixture NLL without the lambda term"},
                 {"snapshot", "best validation epoch"}}},
               {"inputs", inputs_}};
        for (const auto& [k, v] : extra_.items()) m[k] = v;
        write_json(path("manifest.json"), m);
    }

private:
    std::string command_;
    RunConfig rc_;
    fs::path dir_;
    json extra_ = json::object();
    json inputs_ = json::object();
};

Dataset load_data(Run& run, const std::optional<std::vector<std::string>>& class_names = std::nullopt)
{
    const auto& rc = run.config();
    if (!rc.data) throw ConfigError("no data source: set data.csv or data.synthetic in the config, or pass --data");
    const auto& src = *rc.data;
    Dataset d;
    if (src.synthetic) {
        d = data::generate_synthetic(*src.synthetic);
    } else {
        d = data::load_csv(*src.csv, class_names ? *class_names : src.class_names);
        run.input_file("data", *src.csv);
        if (src.truth) {
            std::ifstream in(*src.truth);
            if (!in) throw DataError("cannot open truth sidecar '" + *src.truth + "'");
            data::attach_truth_csv(in, d);
            run.input_file("truth", *src.truth);
        }
    }
    if (src.group) d = data::filter_group(d, *src.group);
    if (d.samples.empty()) throw DataError("dataset is empty");
    return d;
}

json gate_histogram(const std::vector<std::vector<double>>& gates, std::size_t views, std::size_t bins = 10)
{
    json out = json::array();
    for (std::size_t v = 0; v < views; ++v) {
        std::vector<std::size_t> counts(bins, 0);
        for (const auto& g : gates) ++counts[std::min(bins - 1, static_cast<std::size_t>(g[v] * bins))];
        out.push_back(counts);
    }
    return out;
}

void write_gates(const fs::path& path, const ViewSchema& schema, const std::vector<std::string>& ids,
                 const std::vector<std::optional<std::size_t>>& folds, const std::vector<std::vector<double>>& gates,
                 const std::vector<std::optional<std::size_t>>& truth)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << "id";
    const bool with_folds = !folds.empty();
    if (with_folds) out << ",fold";
    for (const auto& name : schema.view_names) out << ",gate_" << name;
    out << ",informative_view\n";
    for (std::size_t t = 0; t < ids.size(); ++t) {
        out << ids[t];
        if (with_folds) out << ',' << *folds[t];
        for (double g : gates[t]) out << ',' << data::format_double(g);
        out << ',' << (truth[t] ? schema.view_names[*truth[t]] : "") << '\n';
    }
}

// ---------------------------------------------------------------------------
// Commands

int cmd_generate(Run& run)
{
    auto rc = run.config();
    data::SyntheticConfig sc = rc.data && rc.data->synthetic ? *rc.data->synthetic : data::SyntheticConfig{};
    if (rc.data && rc.data->csv) throw ConfigError("generate needs a synthetic data source, not a CSV");
    const auto d = data::generate_synthetic(sc);
    data::save_csv(run.path("data.csv").string(), d);
    std::ofstream truth(run.path("truth.csv"));
    data::write_truth_csv(truth, d);
    truth.close();

    std::vector<std::size_t> per_view(sc.view_dims.size(), 0);
    for (const auto& s : d.samples) ++per_view[*s.informative_view];
    run.note("generator", synthetic_to_json(sc));
    run.note("informative_view_counts", per_view);
    run.write_manifest();
    std::cout << "wrote " << d.size() << " samples to " << run.path("data.csv").string() << '\n';
    return exit_ok;
}

int cmd_train(Run& run)
{
    const auto& rc = run.config();
    const auto d = load_data(run);
    const auto spec = parse_model_spec(rc.model, d.schema);
    const auto seeds = harness::fold_seeds(rc.seed, 0);

    std::vector<std::size_t> all(d.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto split = data::carve_validation(d, all, rc.cv.validation_fraction, seeds.carve);
    auto train_set = gather(d, split.inner_train);
    auto val_set = gather(d, split.validation);
    const auto stats = rc.cv.standardize ? data::fit_standardizer(train_set) : data::identity_standardizer(d.schema);
    train_set = data::apply_standardizer(stats, std::move(train_set));
    val_set = data::apply_standardizer(stats, std::move(val_set));

    TrainConfig tc = rc.cv.train;
    tc.seed = seeds.train;
    ClassifierOptions opts{rc.cv.arch, rc.cv.avg_independent, false};
    auto [model, history] = train_classifier(make_classifier(spec, d.schema, opts, seeds.init), train_set, val_set, tc);

    save_checkpoint(run.path("model.mov1").string(), {model, d.schema, tc.lambda, rc.seed, stats});
    {
        std::ofstream h(run.path("history.csv"));
        h << "epoch,train_loss,validation_loss,learning_rate\n";
        for (std::size_t e = 0; e < history.epochs(); ++e)
            h << e << ',' << data::format_double(history.train_loss[e]) << ','
              << data::format_double(history.validation_loss[e]) << ',' << data::format_double(history.learning_rate[e])
              << '\n';
    }
    json report{{"model", model_spec_string(spec)},
                {"epochs", history.epochs()},
                {"best_epoch", history.best_epoch},
                {"stopped_early", history.stopped_early},
                {"train_size", train_set.size()},
                {"validation_size", val_set.size()},
                {"validation_nll", validation_nll(model, val_set)}};
    if (d.schema.classes() == 2) {
        std::vector<eval::ScoredPrediction> preds;
        for (const auto& s : val_set)
            preds.push_back(eval::make_prediction(s.id, s.label, predict_proba(model, s)[eval::kPositiveClass]));
        try {
            report["validation"] = eval::to_json(eval::evaluate(preds), false);
        } catch (const DataError&) {
            // single-class validation carve: AUC undefined
        }
    }
    write_json(run.path("report.json"), report);
    run.note("validation_ids", [&] {
        std::vector<std::string> ids;
        for (const auto& s : val_set) ids.push_back(s.id);
        return ids;
    }());
    run.write_manifest();
    std::cout << "trained " << model_spec_string(spec) << " for " << history.epochs() << " epochs (best "
              << history.best_epoch << "), checkpoint " << run.path("model.mov1").string() << '\n';
    return exit_ok;
}

int cmd_evaluate(Run& run)
{
    const auto& rc = run.config();
    if (!rc.checkpoint) throw ConfigError("evaluate needs a checkpoint (--checkpoint or config.checkpoint)");
    const auto ckpt = load_checkpoint(*rc.checkpoint);
    run.input_file("checkpoint", *rc.checkpoint);
    auto d = load_data(run, ckpt.schema.class_names);
    require_compatible(ckpt, d.schema);
    if (ckpt.standardization) d = data::apply_standardizer(*ckpt.standardization, std::move(d));

    const auto spec = spec_of(ckpt.model);
    const auto name = spec.name(d.schema);
    std::vector<eval::ScoredPrediction> preds;
    std::vector<std::vector<double>> gates;
    std::vector<std::string> ids;
    std::vector<std::optional<std::size_t>> truth;
    std::ofstream pred_out(run.path("predictions.csv"));
    pred_out << "id,label";
    for (const auto& c : d.schema.class_names) pred_out << ",p_" << c;
    pred_out << '\n';
    const auto* mov_model = std::get_if<MoVModel>(&ckpt.model);
    for (const auto& s : d.samples) {
        const auto p = predict_proba(ckpt.model, s);
        preds.push_back(eval::make_prediction(s.id, s.label, p[eval::kPositiveClass]));
        pred_out << s.id << ',' << d.schema.class_names[s.label];
        for (double v : p) pred_out << ',' << data::format_double(v);
        pred_out << '\n';
        if (mov_model) {
            gates.push_back(mov_model->explain(s).gate_weights);
            ids.push_back(s.id);
            truth.push_back(s.informative_view);
        }
    }
    pred_out.close();

    const auto report = eval::evaluate(preds);
    json j{{"model", model_spec_string(spec)}, {"samples", d.size()}, {"metrics", eval::to_json(report)}};
    write_roc(run.path("roc_" + file_safe(name) + ".csv"), report.roc);
    if (mov_model) {
        write_gates(run.path("gates.csv"), d.schema, ids, {}, gates, truth);
        j["gate_histogram"] = {{"bins", 10}, {"views", d.schema.view_names}, {"counts", gate_histogram(gates, d.schema.views())}};
        std::size_t hits = 0, known = 0;
        for (std::size_t t = 0; t < gates.size(); ++t)
            if (truth[t]) {
                ++known;
                hits += gates[t][*truth[t]] > 0.5;
            }
        if (known) j["gate_agreement"] = static_cast<double>(hits) / static_cast<double>(known);
    }
    write_json(run.path("report.json"), j);
    run.write_manifest();
    std::cout << std::fixed << std::setprecision(4) << name << ": accuracy " << report.accuracy << ", F-measure "
              << report.f_measure << ", AUC " << report.auc << '\n';
    return exit_ok;
}

int cmd_compare(Run& run)
{
    const auto& rc = run.config();
    const auto d = load_data(run);
    std::vector<ModelSpec> models;
    if (rc.models.empty())
        models = harness::default_models(d.schema);
    else
        for (const auto& m : rc.models) models.push_back(parse_model_spec(m, d.schema));

    auto cv = rc.cv;
    cv.seed = rc.seed;
    cv.workers = rc.workers;
    const auto cmp = harness::compare(d, models, cv);

    write_json(run.path("report.json"), harness::to_json(cmp));
    write_json(run.path("fold_plan.json"), data::fold_plan_to_json(cmp.plan, d));
    for (const auto& r : cmp.models) write_roc(run.path("roc_" + file_safe(r.name) + ".csv"), eval::roc_and_auc(r.cv.pooled).curve);
    for (const auto& r : cmp.models) {
        if (r.spec.kind != ModelKind::mov) continue;
        std::vector<std::string> ids;
        std::vector<std::optional<std::size_t>> folds, truth;
        std::vector<std::vector<double>> gates;
        for (const auto& f : r.folds)
            for (std::size_t t = 0; t < f.predictions.size(); ++t) {
                ids.push_back(f.predictions[t].id);
                folds.push_back(f.fold);
                gates.push_back(f.gate_weights[t]);
                truth.push_back(f.informative_views[t]);
            }
        write_gates(run.path("gates.csv"), d.schema, ids, folds, gates, truth);
    }
    run.note("fold_plan", "fold_plan.json");
    run.write_manifest();
    std::cout << harness::format_table(cmp);
    return exit_ok;
}

int cmd_gradcheck(Run& run, bool write_outputs)
{
    const auto& rc = run.config();
    if (rc.trials < 1) throw ConfigError("trials must be at least 1");
    const auto outcome = run_gradcheck(rc.seed, rc.trials);
    const bool pass = outcome.worst_relative_error < kGradCheckTolerance;
    std::cout << "cases " << outcome.cases << ", scalars " << outcome.scalars_checked << ", lambda in {0, 1, 5}\n";
    std::cout << std::scientific << std::setprecision(3);
    for (const auto& [block, err] : outcome.worst_by_block) std::cout << "  " << block << "  " << err << '\n';
    std::cout << "worst relative error " << outcome.worst_relative_error << " (tolerance " << kGradCheckTolerance
              << "): " << (pass ? "PASS" : "FAIL") << '\n';
    if (write_outputs) {
        write_json(run.path("report.json"), {{"cases", outcome.cases},
                                             {"scalars", outcome.scalars_checked},
                                             {"worst_relative_error", outcome.worst_relative_error},
                                             {"worst_absolute_error", outcome.worst_absolute_error},
                                             {"tolerance", kGradCheckTolerance},
                                             {"by_block", outcome.worst_by_block},
                                             {"pass", pass}});
        run.write_manifest();
    }
    return pass ? exit_ok : exit_check_failed;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Mixture-of-Views classifier toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string config_path, out_dir, data_path, truth_path, checkpoint_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers, trials;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration (a manifest.json also works)");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--workers", workers, "concurrent fold workers");
        sub->add_option("--out", out_dir, "output directory");
    };
    auto* gen = app.add_subcommand("generate", "write a synthetic multi-view dataset and its ground truth");
    auto* train = app.add_subcommand("train", "train one model on a carved train/validation split");
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on a CSV");
    auto* compare = app.add_subcommand("compare", "cross-validated comparison of all models with DeLong tests");
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the composite-loss gradients");
    for (auto* sub : {gen, train, evaluate, compare, gradcheck}) common(sub);
    for (auto* sub : {train, evaluate, compare}) {
        sub->add_option("--data", data_path, "CSV dataset (replaces the config's data source)");
        sub->add_option("--truth", truth_path, "informative-view sidecar for --data");
    }
    std::string model_name;
    train->add_option("--model", model_name, "mov | avg | concat | single:<view>");
    evaluate->add_option("--checkpoint", checkpoint_path, "MOV1 checkpoint");
    gradcheck->add_option("--trials", trials, "number of random configurations");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        RunConfig rc = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (seed) rc.seed = *seed;
        if (workers) rc.workers = *workers;
        if (trials) rc.trials = *trials;
        if (!out_dir.empty()) rc.out = out_dir;
        if (!model_name.empty()) rc.model = model_name;
        if (!checkpoint_path.empty()) rc.checkpoint = checkpoint_path;
        if (!data_path.empty()) {
            DataSource src;
            if (rc.data) src.class_names = rc.data->class_names;
            src.csv = data_path;
            if (!truth_path.empty()) src.truth = truth_path;
            rc.data = src;
        }
        if (rc.workers < 1) throw ConfigError("workers must be at least 1");
        rc.cv.validate();

        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "generate" && seed) {
            // the generator seed is the run seed
            if (!rc.data) rc.data = DataSource{};
            if (!rc.data->synthetic && !rc.data->csv) rc.data->synthetic = data::SyntheticConfig{};
            if (rc.data->synthetic) rc.data->synthetic->seed = *seed;
        }
        // gradcheck only writes files when given somewhere to put them
        const bool writes_files = name != "gradcheck" || !out_dir.empty();
        Run run(name, rc, writes_files);
        if (name == "generate") return cmd_generate(run);
        if (name == "train") return cmd_train(run);
        if (name == "evaluate") return cmd_evaluate(run);
        if (name == "compare") return cmd_compare(run);
        return cmd_gradcheck(run, writes_files);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_other;
    }
}
