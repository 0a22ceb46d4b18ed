#pragma once

// Binary classification metrics: accuracy, F-measure, ROC curve, AUC (both
// trapezoidal and Mann-Whitney with midranks), the DeLong paired AUC test
// and cross-fold aggregation. The positive class is class index 1 (the
// "malignant" analogue) throughout.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "mov/error.hpp"

namespace mov::eval {

inline constexpr std::size_t kPositiveClass = 1;
inline constexpr double kDecisionThreshold = 0.5;

struct ScoredPrediction {
    std::string id;
    bool positive = false;    ///< true label is the positive class
    double score = 0.0;       ///< predicted probability of the positive class
    bool predicted = false;   ///< score >= threshold

    bool operator==(const ScoredPrediction&) const = default;
};

[[nodiscard]] inline ScoredPrediction make_prediction(std::string id, std::size_t label, double score,
                                                      double threshold = kDecisionThreshold)
{
    if (!std::isfinite(score)) throw NumericError("prediction score for '" + id + "' is not finite");
    return {std::move(id), label == kPositiveClass, score, score >= threshold};
}

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    [[nodiscard]] std::size_t total() const { return tp + fp + tn + fn; }
    bool operator==(const Confusion&) const = default;
};

[[nodiscard]] inline Confusion confusion(std::span<const ScoredPrediction> preds)
{
    Confusion c;
    for (const auto& p : preds) {
        if (p.positive)
            (p.predicted ? c.tp : c.fn) += 1;
        else
            (p.predicted ? c.fp : c.tn) += 1;
    }
    return c;
}

[[nodiscard]] inline double accuracy(const Confusion& c)
{
    if (c.total() == 0) throw DataError("accuracy of an empty prediction set");
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

/// Harmonic mean of precision and recall of the positive class; 0 when both vanish.
[[nodiscard]] inline double f_measure(const Confusion& c)
{
    if (c.total() == 0) throw DataError("F-measure of an empty prediction set");
    const double tp = static_cast<double>(c.tp);
    const double precision = c.tp + c.fp == 0 ? 0.0 : tp / static_cast<double>(c.tp + c.fp);
    const double recall = c.tp + c.fn == 0 ? 0.0 : tp / static_cast<double>(c.tp + c.fn);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

[[nodiscard]] inline double accuracy(std::span<const ScoredPrediction> preds) { return accuracy(confusion(preds)); }
[[nodiscard]] inline double f_measure(std::span<const ScoredPrediction> preds) { return f_measure(confusion(preds)); }

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0; ///< scores >= threshold are called positive at this point

    bool operator==(const RocPoint&) const = default;
};

struct Roc {
    std::vector<RocPoint> curve;
    double auc = 0.0;
};

namespace detail {

inline void class_counts(std::span<const ScoredPrediction> preds, std::size_t& pos, std::size_t& neg)
{
    pos = neg = 0;
    for (const auto& p : preds) {
        if (!std::isfinite(p.score)) throw NumericError("score for '" + p.id + "' is not finite");
        (p.positive ? pos : neg) += 1;
    }
}

/// Midranks (1-based, ties averaged) of `values`.
inline std::vector<double> midranks(std::span<const double> values)
{
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
        i = j;
    }
    return ranks;
}

} // namespace detail

/// Threshold sweep over distinct scores in descending order, anchored at
/// (0,0) and (1,1); AUC by the trapezoidal rule.
[[nodiscard]] inline Roc roc_and_auc(std::span<const ScoredPrediction> preds)
{
    std::size_t pos = 0, neg = 0;
    detail::class_counts(preds, pos, neg);
    if (pos == 0 || neg == 0) throw DataError("AUC is undefined without both positive and negative samples");

    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return preds[a].score > preds[b].score; });

    Roc roc;
    roc.curve.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    // twice the area in units of one (positive, negative) cell, kept integral
    std::size_t twice_area = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double threshold = preds[order[i]].score;
        const std::size_t tp_before = tp, fp_before = fp;
        while (i < order.size() && preds[order[i]].score == threshold) {
            (preds[order[i]].positive ? tp : fp) += 1;
            ++i;
        }
        twice_area += (fp - fp_before) * (tp + tp_before);
        roc.curve.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                             static_cast<double>(tp) / static_cast<double>(pos), threshold});
    }
    roc.auc = static_cast<double>(twice_area) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
    return roc;
}

/// Mann-Whitney U / (n_pos * n_neg) with midranks for ties.
[[nodiscard]] inline double mann_whitney_auc(std::span<const ScoredPrediction> preds)
{
    std::size_t pos = 0, neg = 0;
    detail::class_counts(preds, pos, neg);
    if (pos == 0 || neg == 0) throw DataError("AUC is undefined without both positive and negative samples");
    std::vector<double> scores(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) scores[i] = preds[i].score;
    const auto ranks = detail::midranks(scores);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i].positive) rank_sum += ranks[i];
    const double p = static_cast<double>(pos);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

struct DeLongResult {
    double auc_a = 0.0;
    double auc_b = 0.0;
    double variance = 0.0; ///< variance of auc_a - auc_b
    double z = 0.0;
    double p_value = 1.0;
    bool degenerate = false; ///< variance was zero
};

/// Two-sided p-value for a standard normal statistic.
[[nodiscard]] inline double two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

namespace detail {

struct StructuralComponents {
    std::vector<double> v10; ///< one per positive
    std::vector<double> v01; ///< one per negative
    double auc = 0.0;
};

/// Placement values from midranks: for positive i, V10 = (R_all - R_pos) / n;
/// for negative j, V01 = 1 - (R_all - R_neg) / m.
inline StructuralComponents structural_components(std::span<const double> pos_scores,
                                                  std::span<const double> neg_scores)
{
    const std::size_t m = pos_scores.size(), n = neg_scores.size();
    std::vector<double> all(pos_scores.begin(), pos_scores.end());
    all.insert(all.end(), neg_scores.begin(), neg_scores.end());
    const auto r_all = midranks(all);
    const auto r_pos = midranks(pos_scores);
    const auto r_neg = midranks(neg_scores);
    StructuralComponents sc;
    sc.v10.resize(m);
    sc.v01.resize(n);
    for (std::size_t i = 0; i < m; ++i) sc.v10[i] = (r_all[i] - r_pos[i]) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) sc.v01[j] = 1.0 - (r_all[m + j] - r_neg[j]) / static_cast<double>(m);
    sc.auc = std::accumulate(sc.v10.begin(), sc.v10.end(), 0.0) / static_cast<double>(m);
    return sc;
}

inline double covariance(std::span<const double> a, std::span<const double> b)
{
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / (n - 1.0);
}

} // namespace detail

/// Paired DeLong test on two prediction sets over the same samples (matched
/// by id). Uses the midrank formulation of the structural components.
[[nodiscard]] inline DeLongResult delong_test(std::span<const ScoredPrediction> preds_a,
                                              std::span<const ScoredPrediction> preds_b)
{
    if (preds_a.size() != preds_b.size()) throw PairingError("prediction sets differ in size");
    std::unordered_map<std::string, std::size_t> index_b;
    for (std::size_t i = 0; i < preds_b.size(); ++i)
        if (!index_b.emplace(preds_b[i].id, i).second) throw PairingError("duplicate id '" + preds_b[i].id + "'");

    std::vector<double> pos_a, pos_b, neg_a, neg_b;
    std::unordered_map<std::string, bool> seen;
    for (const auto& a : preds_a) {
        auto it = index_b.find(a.id);
        if (it == index_b.end()) throw PairingError("id '" + a.id + "' missing from the second prediction set");
        if (!seen.emplace(a.id, true).second) throw PairingError("duplicate id '" + a.id + "'");
        const auto& b = preds_b[it->second];
        if (a.positive != b.positive) throw PairingError("labels disagree for id '" + a.id + "'");
        if (!std::isfinite(a.score) || !std::isfinite(b.score)) throw NumericError("non-finite score for '" + a.id + "'");
        if (a.positive) {
            pos_a.push_back(a.score);
            pos_b.push_back(b.score);
        } else {
            neg_a.push_back(a.score);
            neg_b.push_back(b.score);
        }
    }
    if (pos_a.size() < 2 || neg_a.size() < 2)
        throw DataError("DeLong test needs at least two positive and two negative samples");

    const auto sa = detail::structural_components(pos_a, neg_a);
    const auto sb = detail::structural_components(pos_b, neg_b);
    const double m = static_cast<double>(pos_a.size()), n = static_cast<double>(neg_a.size());

    const double s10_aa = detail::covariance(sa.v10, sa.v10), s10_bb = detail::covariance(sb.v10, sb.v10),
                 s10_ab = detail::covariance(sa.v10, sb.v10);
    const double s01_aa = detail::covariance(sa.v01, sa.v01), s01_bb = detail::covariance(sb.v01, sb.v01),
                 s01_ab = detail::covariance(sa.v01, sb.v01);

    DeLongResult r;
    r.auc_a = sa.auc;
    r.auc_b = sb.auc;
    r.variance = (s10_aa + s10_bb - 2.0 * s10_ab) / m + (s01_aa + s01_bb - 2.0 * s01_ab) / n;
    const double diff = r.auc_a - r.auc_b;
    if (r.variance <= 0.0) {
        r.variance = 0.0;
        r.degenerate = true;
        r.z = 0.0;
        r.p_value = diff == 0.0 ? 1.0 : 0.0;
        return r;
    }
    r.z = diff / std::sqrt(r.variance);
    r.p_value = two_sided_p(r.z);
    return r;
}

// ---------------------------------------------------------------------------
// Reports

struct EvalReport {
    Confusion counts;
    double accuracy = 0.0;
    double f_measure = 0.0;
    double auc = 0.0;
    std::vector<RocPoint> roc;
};

/// Full report for one prediction set. AUC is computed both ways and the two
/// must agree.
[[nodiscard]] inline EvalReport evaluate(std::span<const ScoredPrediction> preds)
{
    if (preds.empty()) throw DataError("cannot evaluate an empty prediction set");
    EvalReport r;
    r.counts = confusion(preds);
    r.accuracy = accuracy(r.counts);
    r.f_measure = f_measure(r.counts);
    auto roc = roc_and_auc(preds);
    const double mw = mann_whitney_auc(preds);
    if (std::abs(mw - roc.auc) > 1e-12) throw NumericError("trapezoidal and rank AUC disagree");
    r.auc = roc.auc;
    r.roc = std::move(roc.curve);
    return r;
}

struct MetricSummary {
    double mean = 0.0;
    double stddev = 0.0;
};

struct CvReport {
    std::vector<EvalReport> folds;
    MetricSummary accuracy, f_measure, auc;
    std::vector<ScoredPrediction> pooled; ///< all test-fold predictions, fold order
};

[[nodiscard]] inline MetricSummary summarize(std::span<const double> values)
{
    MetricSummary s;
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

/// Unweighted mean and sample standard deviation of each metric across folds.
[[nodiscard]] inline CvReport aggregate_cv(std::vector<EvalReport> folds,
                                           std::vector<std::vector<ScoredPrediction>> fold_predictions = {})
{
    if (folds.empty()) throw DataError("aggregate_cv needs at least one fold");
    CvReport r;
    std::vector<double> acc, f, auc;
    for (const auto& fold : folds) {
        acc.push_back(fold.accuracy);
        f.push_back(fold.f_measure);
        auc.push_back(fold.auc);
    }
    r.accuracy = summarize(acc);
    r.f_measure = summarize(f);
    r.auc = summarize(auc);
    r.folds = std::move(folds);
    for (auto& preds : fold_predictions) r.pooled.insert(r.pooled.end(), preds.begin(), preds.end());
    return r;
}

// ---------------------------------------------------------------------------
// Serialization

[[nodiscard]] inline nlohmann::json to_json(const Confusion& c)
{
    return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

[[nodiscard]] inline nlohmann::json to_json(const EvalReport& r, bool include_roc = true)
{
    nlohmann::json j{{"counts", to_json(r.counts)}, {"accuracy", r.accuracy}, {"f_measure", r.f_measure}, {"auc", r.auc}};
    if (include_roc) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : r.roc) pts.push_back({p.fpr, p.tpr});
        j["roc"] = std::move(pts);
    }
    return j;
}

[[nodiscard]] inline nlohmann::json to_json(const MetricSummary& s) { return {{"mean", s.mean}, {"std", s.stddev}}; }

[[nodiscard]] inline nlohmann::json to_json(const CvReport& r)
{
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : r.folds) folds.push_back(to_json(f, false));
    return {{"folds", std::move(folds)},
            {"accuracy", to_json(r.accuracy)},
            {"f_measure", to_json(r.f_measure)},
            {"auc", to_json(r.auc)},
            {"pooled_count", r.pooled.size()}};
}

[[nodiscard]] inline nlohmann::json to_json(const DeLongResult& r)
{
    return {{"auc_a", r.auc_a}, {"auc_b", r.auc_b}, {"variance", r.variance},
            {"z", r.z},         {"p_value", r.p_value}, {"degenerate", r.degenerate}};
}

/// Two-column CSV (fpr,tpr) for plotting.
inline void write_roc_csv(std::ostream& out, std::span<const RocPoint> curve)
{
    out << "fpr,tpr\n";
    out.precision(17);
    for (const auto& p : curve) out << p.fpr << ',' << p.tpr << '\n';
}

} // namespace mov::eval
