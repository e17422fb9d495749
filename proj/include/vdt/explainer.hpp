#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vdt/trees.hpp"

namespace vdt {

struct Attribution {
    double base_value = 0.0;
    std::array<double, kNumFeatures> contributions{};
    double prediction = 0.0;
};

// Exact Shapley values under the tree-path-dependent feature distribution (node covers).
Attribution tree_shap(const RegressionTree& tree, const FeatureVector& x);
// Mean of the per-tree attributions.
Attribution tree_shap(const ForestModel& forest, const FeatureVector& x);
// initial + Σ shrinkage·stage attributions.
Attribution tree_shap(const BoostedModel& model, const FeatureVector& x);
Attribution tree_shap(const AnyModel& model, const FeatureVector& x);

// Cover-weighted mean leaf value.
double expected_value(const RegressionTree& tree);

struct FeatureImportance {
    Feature feature{};
    double mean_abs = 0.0;
};

struct ScatterPoint {
    std::size_t row = 0;
    Feature feature{};
    double value = 0.0;
    double contribution = 0.0;
};

struct ShapSummary {
    std::vector<FeatureImportance> ranking;  // descending mean |contribution|, ties by feature order
    std::vector<ScatterPoint> scatter;
    std::vector<Attribution> attributions;
};

ShapSummary shap_summary(const AnyModel& model, std::span<const FeatureVector> rows);
ShapSummary summarize(std::span<const Attribution> attributions, std::span<const FeatureVector> rows);

struct PathStep {
    std::size_t node = 0;
    Feature feature{};
    double threshold = 0.0;
    double value = 0.0;  // the row's feature value
    bool went_left = true;
    std::size_t count = 0;
    double mean = 0.0;
};

struct DecisionPath {
    std::vector<PathStep> steps;  // internal nodes from the root
    std::size_t leaf = 0;
    std::size_t leaf_count = 0;
    double prediction = 0.0;
};

DecisionPath decision_path(const RegressionTree& tree, const FeatureVector& x);

struct DistillParams {
    int max_depth = 8;
    std::size_t min_samples_leaf = 1;
    std::size_t histogram_bins = 10;
};

// Tree fitted on (rows, teacher predictions).
RegressionTree distill(const ForestModel& teacher, std::span<const FeatureVector> rows, const DistillParams& params = {});
RegressionTree distill(const AnyModel& teacher, std::span<const FeatureVector> rows, const DistillParams& params = {});

struct SnrCurvePoint {
    double t = 0.0;
    std::string label;  // "normal" or "abnormal"
    std::size_t n = 0;
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

// Cumulative SNR mean per session at each whole second 1..horizon, averaged per class with a
// normal-approximation 95% CI. `abnormal` maps session id to label; unlabeled sessions are ignored.
std::vector<SnrCurvePoint> cumulative_snr_curves(const Dataset& d, const std::map<std::string, bool>& abnormal,
                                                 double horizon_s = kSessionDurationCap);

void write_attributions_csv(std::span<const Attribution> attributions, std::span<const FeatureVector> rows,
                            std::span<const std::string> row_ids, const std::filesystem::path& path);
void write_decision_path_json(const RegressionTree& tree, const DecisionPath& path, const FeatureVector& x,
                              const std::filesystem::path& out);
void write_snr_curves_csv(std::span<const SnrCurvePoint> curves, const std::filesystem::path& path);

}  // namespace vdt
