#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vdt/features.hpp"
#include "vdt/stats.hpp"

namespace vdt {

using FeatureMask = std::array<bool, kNumFeatures>;

inline FeatureMask all_features() {
    FeatureMask m;
    m.fill(true);
    return m;
}

FeatureMask only_feature(Feature f);

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::size_t> counts;

    bool operator==(const Histogram&) const = default;
};

/// Internal nodes route x[feature] <= threshold to the left child. Leaves have feature < 0.
/// `value` is the mean training target of the node; `histogram` holds the split feature's
/// training values for internal nodes and the training targets for leaves (when enabled).
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    std::size_t count = 0;
    Histogram histogram;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct TreeParams {
    int max_depth = -1;  // negative = unlimited
    std::size_t min_samples_leaf = 1;
    std::size_t histogram_bins = 0;

    bool operator==(const TreeParams&) const = default;
};

class RegressionTree {
public:
    RegressionTree() = default;
    RegressionTree(std::vector<TreeNode> nodes, TreeParams params) : nodes_(std::move(nodes)), params_(params) {}

    double predict(const FeatureVector& x) const { return nodes_[leaf_of(x)].value; }
    std::size_t leaf_of(const FeatureVector& x) const;
    // Node ids from the root to the leaf reached by x.
    std::vector<std::size_t> path_of(const FeatureVector& x) const;

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const TreeParams& params() const { return params_; }
    int depth() const;
    std::size_t leaf_count() const;

    bool operator==(const RegressionTree&) const = default;

private:
    std::vector<TreeNode> nodes_;
    TreeParams params_;
};

/// Greedy CART regression. The split maximizing the weighted variance decrease is taken;
/// candidate thresholds are midpoints of consecutive distinct values. Ties go to the lowest
/// feature index, then the lowest threshold.
RegressionTree fit_tree(std::span<const FeatureVector> x, std::span<const double> y, const TreeParams& params,
                        const FeatureMask& mask = all_features());

// Fit on a multiset of row indices (bootstrap samples repeat indices). When `features_per_split`
// is non-zero that many masked features are drawn per split from `rng_seed`.
RegressionTree fit_tree_indexed(std::span<const FeatureVector> x, std::span<const double> y,
                                std::vector<std::size_t> indices, const TreeParams& params, const FeatureMask& mask,
                                std::size_t features_per_split = 0, std::uint64_t rng_seed = 0);

struct ForestParams {
    std::size_t n_trees = 100;
    int max_depth = -1;
    std::size_t min_samples_leaf = 2;
    double feature_rate = 1.0 / 3.0;  // share of masked features drawn per split
    bool bootstrap = true;
    std::uint64_t seed = 1;
    FeatureMask mask = all_features();
};

struct ForestModel {
    std::vector<RegressionTree> trees;
    std::vector<std::uint64_t> tree_seeds;
    ForestParams params;

    double predict(const FeatureVector& x) const;
};

ForestModel fit_forest(std::span<const FeatureVector> x, std::span<const double> y, const ForestParams& params);

struct BoostParams {
    std::size_t n_stages = 200;
    double shrinkage = 0.1;
    int max_depth = 3;
    std::size_t min_samples_leaf = 1;
    std::uint64_t seed = 1;
    FeatureMask mask = all_features();
};

/// F(x) = initial + Σ shrinkage·tree_t(x), each stage fitted to the residuals of the previous.
struct BoostedModel {
    double initial = 0.0;
    std::vector<RegressionTree> stages;
    std::vector<double> shrinkage;
    std::vector<double> train_mse;  // after each stage
    BoostParams params;

    double predict(const FeatureVector& x) const;
    double predict_stages(const FeatureVector& x, std::size_t n_stages) const;
};

BoostedModel fit_boosted(std::span<const FeatureVector> x, std::span<const double> y, const BoostParams& params);

double r2_score(std::span<const double> y, std::span<const double> yhat);

struct Prediction {
    std::string session_id;
    double y = 0.0;
    double yhat = 0.0;
};

// Mean over sessions of the within-session mean squared error.
double mse_per_session(std::span<const Prediction> predictions);

enum class LearnerKind { tree, forest, boosted };

struct LearnerSpec {
    std::string name;
    LearnerKind kind = LearnerKind::forest;
    TreeParams tree{-1, 2, 0};
    ForestParams forest;
    BoostParams boost;
    FeatureMask mask = all_features();
};

struct SessionSplit {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

// Session-level random partition; |test| = round((1 - train_ratio)·n).
SessionSplit split_by_session(std::span<const FeatureRow> rows, double train_ratio, std::uint64_t seed);

struct TrialRecord {
    std::uint64_t seed = 0;
    double r2 = 0.0;
    double mse_per_session = 0.0;
    std::size_t train_sessions = 0;
    std::size_t test_sessions = 0;
};

struct EvalReport {
    std::string learner;
    std::vector<TrialRecord> trials;
    stats::Interval r2;
    stats::Interval mse_per_session;
};

/// Fitted learner of any kind behind one predict().
struct AnyModel {
    LearnerKind kind = LearnerKind::forest;
    RegressionTree tree;
    ForestModel forest;
    BoostedModel boosted;

    double predict(const FeatureVector& x) const;
};

AnyModel fit_learner(std::span<const FeatureRow> rows, const LearnerSpec& spec, std::uint64_t seed);

// Per-trial session split (75/25 by default), fit, and test-set R² / MSE-per-session.
EvalReport run_trials(std::span<const FeatureRow> rows, const LearnerSpec& spec, std::size_t n_trials = 50,
                      double train_ratio = 0.75, std::uint64_t seed = 1);

// Each row is predicted by a model fitted without its session. Sessions are dealt into
// `folds` groups after a seeded shuffle; fold f is fitted with seed session_seed(seed, f).
std::vector<double> out_of_fold_predictions(std::span<const FeatureRow> rows, const LearnerSpec& spec,
                                            std::size_t folds, std::uint64_t seed);

}  // namespace vdt
