#include "vdt/trees.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "vdt/error.hpp"
#include "vdt/synthetic_gen.hpp"

namespace vdt {

FeatureMask only_feature(Feature f) {
    FeatureMask m{};
    m[static_cast<std::size_t>(f)] = true;
    return m;
}

std::size_t RegressionTree::leaf_of(const FeatureVector& x) const {
    std::size_t id = 0;
    while (!nodes_[id].is_leaf()) {
        const auto& n = nodes_[id];
        id = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return id;
}

std::vector<std::size_t> RegressionTree::path_of(const FeatureVector& x) const {
    std::vector<std::size_t> path{0};
    while (!nodes_[path.back()].is_leaf()) {
        const auto& n = nodes_[path.back()];
        path.push_back(static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right));
    }
    return path;
}

int RegressionTree::depth() const {
    if (nodes_.empty()) return 0;
    std::vector<int> d(nodes_.size(), 0);
    int best = 0;
    // children always have larger ids than their parent
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (n.is_leaf()) {
            best = std::max(best, d[i]);
        } else {
            d[static_cast<std::size_t>(n.left)] = d[i] + 1;
            d[static_cast<std::size_t>(n.right)] = d[i] + 1;
        }
    }
    return best;
}

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

namespace {

// Splits with a gain below this share of the parent's squared error are treated as no gain.
constexpr double kRelativeMinGain = 1e-12;
// Gains closer than this share of the parent's squared error count as ties, so identical
// partitions reached through different features resolve to the lowest feature index
// regardless of summation order.
constexpr double kRelativeTie = 1e-12;

Histogram make_histogram(const std::vector<double>& values, std::size_t bins) {
    Histogram h;
    if (bins == 0 || values.empty()) return h;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    h.lo = *lo;
    h.hi = *hi;
    h.counts.assign(bins, 0);
    const double width = (h.hi - h.lo) / static_cast<double>(bins);
    for (double v : values) {
        std::size_t b = width > 0.0 ? static_cast<std::size_t>((v - h.lo) / width) : 0;
        h.counts[std::min(b, bins - 1)] += 1;
    }
    return h;
}

using Presorted = std::array<std::vector<std::size_t>, kNumFeatures>;

Presorted presort(std::span<const FeatureVector> x, const FeatureMask& mask) {
    Presorted out;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (!mask[f]) continue;
        auto& order = out[f];
        order.resize(x.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
    }
    return out;
}

RegressionTree fit_presorted(std::span<const FeatureVector> x, std::span<const double> y,
                             std::vector<std::size_t> indices, const Presorted& presorted, const TreeParams& params,
                             const FeatureMask& mask, std::size_t features_per_split, std::uint64_t rng_seed);

class TreeBuilder {
public:
    TreeBuilder(std::span<const FeatureVector> x, std::span<const double> y, const TreeParams& params,
                const FeatureMask& mask, std::size_t features_per_split, std::uint64_t seed)
        : x_(x), y_(y), params_(params), features_per_split_(features_per_split), rng_(seed) {
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            if (mask[f]) candidates_.push_back(f);
        }
        if (candidates_.empty()) throw ValidationError("feature mask selects no feature");
        if (params_.min_samples_leaf == 0) params_.min_samples_leaf = 1;
    }

    // `presorted[f]` lists every row 0..n-1 ascending by (x[f], index); rows absent from
    // `indices` are skipped and repeated rows are emitted once per occurrence.
    std::vector<TreeNode> build(std::vector<std::size_t> indices, const Presorted& presorted) {
        std::vector<std::size_t> multiplicity(x_.size(), 0);
        for (std::size_t i : indices) ++multiplicity[i];
        NodeRows root;
        root.by_feature.resize(candidates_.size());
        for (std::size_t c = 0; c < candidates_.size(); ++c) {
            auto& order = root.by_feature[c];
            order.reserve(indices.size());
            for (std::size_t i : presorted[candidates_[c]]) order.insert(order.end(), multiplicity[i], i);
        }
        root.idx = std::move(indices);
        grow(std::move(root), 0);
        return std::move(nodes_);
    }

private:
    struct Split {
        std::size_t feature = 0;
        double threshold = 0.0;
        double gain = 0.0;
        bool found = false;
    };

    // Row multiset of a node: ascending by index, and per candidate feature ascending by (x, index).
    struct NodeRows {
        std::vector<std::size_t> idx;
        std::vector<std::vector<std::size_t>> by_feature;
    };

    std::vector<std::size_t> slots_for_split() {
        std::vector<std::size_t> pool(candidates_.size());
        std::iota(pool.begin(), pool.end(), 0);
        if (features_per_split_ == 0 || features_per_split_ >= pool.size()) return pool;
        for (std::size_t i = 0; i < features_per_split_; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
            std::swap(pool[i], pool[pick(rng_)]);
        }
        pool.resize(features_per_split_);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    Split best_split(const NodeRows& rows, double sum, double sse) {
        Split best;
        const std::size_t n = rows.idx.size();
        const std::size_t min_leaf = params_.min_samples_leaf;
        const double parent_term = sum * sum / static_cast<double>(n);
        for (std::size_t slot : slots_for_split()) {
            const std::size_t f = candidates_[slot];
            const auto& order = rows.by_feature[slot];
            double left_sum = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_sum += y_[order[i]];
                const std::size_t n_left = i + 1;
                const std::size_t n_right = n - n_left;
                if (n_left < min_leaf) continue;
                if (n_right < min_leaf) break;
                const double a = x_[order[i]][f];
                const double b = x_[order[i + 1]][f];
                if (!(a < b)) continue;
                const double right_sum = sum - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                                    right_sum * right_sum / static_cast<double>(n_right) - parent_term;
                if (gain > best.gain + kRelativeTie * sse) {
                    double threshold = (a + b) / 2.0;
                    if (!(threshold < b)) threshold = a;
                    best = {f, threshold, gain, true};
                }
            }
        }
        if (best.found && !(best.gain > kRelativeMinGain * sse)) best.found = false;
        return best;
    }

    std::size_t grow(NodeRows rows, int depth) {
        const std::size_t id = nodes_.size();
        nodes_.emplace_back();
        const auto& idx = rows.idx;

        double sum = 0.0;
        for (std::size_t i : idx) sum += y_[i];
        const double mean = sum / static_cast<double>(idx.size());
        double sse = 0.0;
        bool constant = true;
        for (std::size_t i : idx) {
            sse += (y_[i] - mean) * (y_[i] - mean);
            constant = constant && y_[i] == y_[idx.front()];
        }
        nodes_[id].value = mean;
        nodes_[id].count = idx.size();

        const bool depth_done = params_.max_depth >= 0 && depth >= params_.max_depth;
        const bool too_small = idx.size() < 2 * params_.min_samples_leaf;
        Split split;
        if (!depth_done && !too_small && !constant) split = best_split(rows, sum, sse);

        if (!split.found) {
            if (params_.histogram_bins > 0) {
                std::vector<double> targets;
                targets.reserve(idx.size());
                for (std::size_t i : idx) targets.push_back(y_[i]);
                nodes_[id].histogram = make_histogram(targets, params_.histogram_bins);
            }
            return id;
        }

        if (params_.histogram_bins > 0) {
            std::vector<double> values;
            values.reserve(idx.size());
            for (std::size_t i : idx) values.push_back(x_[i][split.feature]);
            nodes_[id].histogram = make_histogram(values, params_.histogram_bins);
        }
        auto goes_left = [&](std::size_t i) { return x_[i][split.feature] <= split.threshold; };
        auto divide = [&](std::vector<std::size_t>& from, std::vector<std::size_t>& l, std::vector<std::size_t>& r) {
            for (std::size_t i : from) (goes_left(i) ? l : r).push_back(i);
            std::vector<std::size_t>().swap(from);
        };
        NodeRows left, right;
        left.by_feature.resize(rows.by_feature.size());
        right.by_feature.resize(rows.by_feature.size());
        divide(rows.idx, left.idx, right.idx);
        for (std::size_t c = 0; c < rows.by_feature.size(); ++c) {
            divide(rows.by_feature[c], left.by_feature[c], right.by_feature[c]);
        }
        nodes_[id].feature = static_cast<int>(split.feature);
        nodes_[id].threshold = split.threshold;
        const std::size_t l = grow(std::move(left), depth + 1);
        const std::size_t r = grow(std::move(right), depth + 1);
        nodes_[id].left = static_cast<int>(l);
        nodes_[id].right = static_cast<int>(r);
        return id;
    }

    std::span<const FeatureVector> x_;
    std::span<const double> y_;
    TreeParams params_;
    std::size_t features_per_split_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> candidates_;
    std::vector<TreeNode> nodes_;
};

RegressionTree fit_presorted(std::span<const FeatureVector> x, std::span<const double> y,
                             std::vector<std::size_t> indices, const Presorted& presorted, const TreeParams& params,
                             const FeatureMask& mask, std::size_t features_per_split, std::uint64_t rng_seed) {
    std::sort(indices.begin(), indices.end());
    TreeBuilder builder(x, y, params, mask, features_per_split, rng_seed);
    return RegressionTree(builder.build(std::move(indices), presorted), params);
}

}  // namespace

RegressionTree fit_tree_indexed(std::span<const FeatureVector> x, std::span<const double> y,
                                std::vector<std::size_t> indices, const TreeParams& params, const FeatureMask& mask,
                                std::size_t features_per_split, std::uint64_t rng_seed) {
    if (x.size() != y.size()) throw ValidationError("fit_tree: feature and target counts differ");
    if (indices.empty()) throw ValidationError("fit_tree: no rows");
    return fit_presorted(x, y, std::move(indices), presort(x, mask), params, mask, features_per_split, rng_seed);
}

RegressionTree fit_tree(std::span<const FeatureVector> x, std::span<const double> y, const TreeParams& params,
                        const FeatureMask& mask) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    return fit_tree_indexed(x, y, std::move(idx), params, mask);
}

double ForestModel::predict(const FeatureVector& x) const {
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict(x);
    return sum / static_cast<double>(trees.size());
}

ForestModel fit_forest(std::span<const FeatureVector> x, std::span<const double> y, const ForestParams& params) {
    if (params.n_trees == 0) throw ValidationError("fit_forest: n_trees must be positive");
    if (x.empty()) throw ValidationError("fit_forest: no rows");
    const auto n_masked = static_cast<std::size_t>(std::count(params.mask.begin(), params.mask.end(), true));
    std::size_t per_split = 0;
    if (params.feature_rate < 1.0) {
        per_split = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(params.feature_rate * static_cast<double>(n_masked))));
    }
    const TreeParams tree_params{params.max_depth, params.min_samples_leaf, 0};
    if (std::none_of(params.mask.begin(), params.mask.end(), [](bool b) { return b; })) {
        throw ValidationError("feature mask selects no feature");
    }
    const auto presorted = presort(x, params.mask);

    ForestModel model;
    model.params = params;
    for (std::size_t t = 0; t < params.n_trees; ++t) {
        const std::uint64_t tree_seed = session_seed(params.seed, t);
        std::vector<std::size_t> idx(x.size());
        if (params.bootstrap) {
            std::mt19937_64 rng(tree_seed);
            std::uniform_int_distribution<std::size_t> draw(0, x.size() - 1);
            for (auto& i : idx) i = draw(rng);
        } else {
            std::iota(idx.begin(), idx.end(), 0);
        }
        model.trees.push_back(fit_presorted(x, y, std::move(idx), presorted, tree_params, params.mask, per_split,
                                            session_seed(tree_seed, 1)));
        model.tree_seeds.push_back(tree_seed);
    }
    return model;
}

double BoostedModel::predict(const FeatureVector& x) const { return predict_stages(x, stages.size()); }

double BoostedModel::predict_stages(const FeatureVector& x, std::size_t n_stages) const {
    double f = initial;
    for (std::size_t t = 0; t < std::min(n_stages, stages.size()); ++t) f += shrinkage[t] * stages[t].predict(x);
    return f;
}

BoostedModel fit_boosted(std::span<const FeatureVector> x, std::span<const double> y, const BoostParams& params) {
    if (params.n_stages == 0) throw ValidationError("fit_boosted: n_stages must be positive");
    if (x.empty() || x.size() != y.size()) throw ValidationError("fit_boosted: need matching non-empty rows");
    if (!(params.shrinkage > 0.0 && params.shrinkage <= 1.0)) throw ValidationError("fit_boosted: shrinkage must lie in (0,1]");

    BoostedModel model;
    model.params = params;
    model.initial = stats::mean(y);
    std::vector<double> fitted(x.size(), model.initial);
    std::vector<double> residual(x.size());
    const TreeParams tree_params{params.max_depth, params.min_samples_leaf, 0};
    const auto presorted = presort(x, params.mask);
    std::vector<std::size_t> all(x.size());
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t t = 0; t < params.n_stages; ++t) {
        for (std::size_t i = 0; i < x.size(); ++i) residual[i] = y[i] - fitted[i];
        auto tree = fit_presorted(x, residual, all, presorted, tree_params, params.mask, 0, 0);
        double sse = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            fitted[i] += params.shrinkage * tree.predict(x[i]);
            sse += (y[i] - fitted[i]) * (y[i] - fitted[i]);
        }
        model.stages.push_back(std::move(tree));
        model.shrinkage.push_back(params.shrinkage);
        model.train_mse.push_back(sse / static_cast<double>(x.size()));
    }
    return model;
}

double r2_score(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw ValidationError("r2_score: length mismatch");
    if (y.size() < 2) throw ValidationError("r2_score: need at least 2 values");
    const double m = stats::mean(y);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        ss_tot += (y[i] - m) * (y[i] - m);
    }
    if (ss_tot == 0.0) throw ValidationError("r2_score: constant targets");
    return 1.0 - ss_res / ss_tot;
}

double mse_per_session(std::span<const Prediction> predictions) {
    if (predictions.empty()) throw ValidationError("mse_per_session: empty input");
    std::map<std::string, std::pair<double, std::size_t>> per;
    for (const auto& p : predictions) {
        auto& [sse, n] = per[p.session_id];
        sse += (p.y - p.yhat) * (p.y - p.yhat);
        ++n;
    }
    double total = 0.0;
    for (const auto& [id, acc] : per) total += acc.first / static_cast<double>(acc.second);
    return total / static_cast<double>(per.size());
}

double AnyModel::predict(const FeatureVector& x) const {
    switch (kind) {
        case LearnerKind::tree: return tree.predict(x);
        case LearnerKind::forest: return forest.predict(x);
        case LearnerKind::boosted: return boosted.predict(x);
    }
    return 0.0;
}

AnyModel fit_learner(std::span<const FeatureRow> rows, const LearnerSpec& spec, std::uint64_t seed) {
    std::vector<FeatureVector> x;
    std::vector<double> y;
    x.reserve(rows.size());
    y.reserve(rows.size());
    for (const auto& r : rows) {
        x.push_back(r.x);
        y.push_back(r.mos);
    }
    AnyModel m;
    m.kind = spec.kind;
    switch (spec.kind) {
        case LearnerKind::tree: m.tree = fit_tree(x, y, spec.tree, spec.mask); break;
        case LearnerKind::forest: {
            auto p = spec.forest;
            p.mask = spec.mask;
            p.seed = seed;
            m.forest = fit_forest(x, y, p);
            break;
        }
        case LearnerKind::boosted: {
            auto p = spec.boost;
            p.mask = spec.mask;
            p.seed = seed;
            m.boosted = fit_boosted(x, y, p);
            break;
        }
    }
    return m;
}

SessionSplit split_by_session(std::span<const FeatureRow> rows, double train_ratio, std::uint64_t seed) {
    std::vector<std::string> ids;
    std::unordered_set<std::string> seen;
    for (const auto& r : rows) {
        if (seen.insert(r.session_id).second) ids.push_back(r.session_id);
    }
    if (ids.size() < 2) throw ValidationError("session split needs at least 2 sessions");
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    auto n_test = static_cast<std::size_t>(std::lround((1.0 - train_ratio) * static_cast<double>(ids.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, ids.size() - 1);
    SessionSplit s;
    s.test.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.train.begin(), s.train.end());
    return s;
}

EvalReport run_trials(std::span<const FeatureRow> rows, const LearnerSpec& spec, std::size_t n_trials,
                      double train_ratio, std::uint64_t seed) {
    if (n_trials < 2) throw ValidationError("run_trials: need at least 2 trials for a confidence interval");
    EvalReport report;
    report.learner = spec.name;
    std::vector<double> r2s, mses;
    for (std::size_t t = 0; t < n_trials; ++t) {
        const std::uint64_t trial_seed = session_seed(seed, t);
        const auto split = split_by_session(rows, train_ratio, trial_seed);
        const std::unordered_set<std::string> test_ids(split.test.begin(), split.test.end());
        std::vector<FeatureRow> train;
        std::vector<const FeatureRow*> test;
        for (const auto& r : rows) {
            if (test_ids.count(r.session_id) != 0) {
                test.push_back(&r);
            } else {
                train.push_back(r);
            }
        }
        const auto model = fit_learner(train, spec, trial_seed);
        std::vector<double> y, yhat;
        std::vector<Prediction> preds;
        for (const auto* r : test) {
            const double p = model.predict(r->x);
            y.push_back(r->mos);
            yhat.push_back(p);
            preds.push_back({r->session_id, r->mos, p});
        }
        TrialRecord rec;
        rec.seed = trial_seed;
        rec.r2 = r2_score(y, yhat);
        rec.mse_per_session = mse_per_session(preds);
        rec.train_sessions = split.train.size();
        rec.test_sessions = split.test.size();
        r2s.push_back(rec.r2);
        mses.push_back(rec.mse_per_session);
        report.trials.push_back(rec);
    }
    report.r2 = stats::normal_ci95(r2s);
    report.mse_per_session = stats::normal_ci95(mses);
    return report;
}

std::vector<double> out_of_fold_predictions(std::span<const FeatureRow> rows, const LearnerSpec& spec,
                                            std::size_t folds, std::uint64_t seed) {
    std::vector<std::string> ids;
    std::unordered_set<std::string> seen;
    for (const auto& r : rows) {
        if (seen.insert(r.session_id).second) ids.push_back(r.session_id);
    }
    if (folds < 2 || ids.size() < folds) throw ValidationError("out_of_fold_predictions: need 2 <= folds <= sessions");
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::unordered_map<std::string, std::size_t> fold_of;
    for (std::size_t i = 0; i < ids.size(); ++i) fold_of[ids[i]] = i % folds;

    std::vector<double> out(rows.size(), 0.0);
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<FeatureRow> train;
        for (const auto& r : rows) {
            if (fold_of.at(r.session_id) != f) train.push_back(r);
        }
        const auto model = fit_learner(train, spec, session_seed(seed, f));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (fold_of.at(rows[i].session_id) == f) out[i] = model.predict(rows[i].x);
        }
    }
    return out;
}

}  // namespace vdt
