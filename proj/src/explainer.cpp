#include "vdt/explainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "vdt/error.hpp"
#include "vdt/features.hpp"
#include "vdt/stats.hpp"
#include "vdt/text.hpp"

namespace vdt {

namespace {

struct PathElement {
    int feature = -1;
    double zero_fraction = 0.0;
    double one_fraction = 0.0;
    double weight = 0.0;
};

void extend_path(PathElement* path, std::size_t depth, double zero_fraction, double one_fraction, int feature) {
    path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
    const auto d1 = static_cast<double>(depth + 1);
    for (std::size_t i = depth; i-- > 0;) {
        path[i + 1].weight += one_fraction * path[i].weight * static_cast<double>(i + 1) / d1;
        path[i].weight = zero_fraction * path[i].weight * static_cast<double>(depth - i) / d1;
    }
}

void unwind_path(PathElement* path, std::size_t depth, std::size_t index) {
    const double one = path[index].one_fraction;
    const double zero = path[index].zero_fraction;
    const auto d1 = static_cast<double>(depth + 1);
    double next = path[depth].weight;
    for (std::size_t i = depth; i-- > 0;) {
        if (one != 0.0) {
            const double tmp = path[i].weight;
            path[i].weight = next * d1 / (static_cast<double>(i + 1) * one);
            next = tmp - path[i].weight * zero * static_cast<double>(depth - i) / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * static_cast<double>(depth - i));
        }
    }
    for (std::size_t i = index; i < depth; ++i) {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

// Total weight of the path with element `index` removed, without modifying it.
double unwound_sum(const PathElement* path, std::size_t depth, std::size_t index) {
    const double one = path[index].one_fraction;
    const double zero = path[index].zero_fraction;
    const auto d1 = static_cast<double>(depth + 1);
    double next = path[depth].weight;
    double total = 0.0;
    for (std::size_t i = depth; i-- > 0;) {
        if (one != 0.0) {
            const double tmp = next * d1 / (static_cast<double>(i + 1) * one);
            total += tmp;
            next = path[i].weight - tmp * zero * static_cast<double>(depth - i) / d1;
        } else if (zero != 0.0) {
            total += path[i].weight / zero / (static_cast<double>(depth - i) / d1);
        }
    }
    return total;
}

class ShapWalker {
public:
    ShapWalker(const RegressionTree& tree, const FeatureVector& x, std::array<double, kNumFeatures>& phi)
        : nodes_(tree.nodes()), x_(x), phi_(phi) {
        const auto d = static_cast<std::size_t>(tree.depth()) + 2;
        buffer_.resize(d * (d + 1) / 2 + d);
    }

    void run() { recurse(0, 0, buffer_.data(), 1.0, 1.0, -1); }

private:
    void recurse(std::size_t node, std::size_t depth, PathElement* parent, double zero_fraction, double one_fraction,
                 int parent_feature) {
        PathElement* path = parent + depth + 1;
        std::copy(parent, parent + depth + 1, path);
        extend_path(path, depth, zero_fraction, one_fraction, parent_feature);

        const auto& n = nodes_[node];
        if (n.is_leaf()) {
            for (std::size_t i = 1; i <= depth; ++i) {
                const double w = unwound_sum(path, depth, i);
                phi_[static_cast<std::size_t>(path[i].feature)] += w * (path[i].one_fraction - path[i].zero_fraction) * n.value;
            }
            return;
        }
        const bool left = x_[static_cast<std::size_t>(n.feature)] <= n.threshold;
        const auto hot = static_cast<std::size_t>(left ? n.left : n.right);
        const auto cold = static_cast<std::size_t>(left ? n.right : n.left);
        const auto cover = static_cast<double>(n.count);
        const double hot_zero = static_cast<double>(nodes_[hot].count) / cover;
        const double cold_zero = static_cast<double>(nodes_[cold].count) / cover;

        double incoming_zero = 1.0, incoming_one = 1.0;
        std::size_t k = 0;
        while (k <= depth && path[k].feature != n.feature) ++k;
        if (k <= depth) {
            incoming_zero = path[k].zero_fraction;
            incoming_one = path[k].one_fraction;
            unwind_path(path, depth, k);
            --depth;
        }
        recurse(hot, depth + 1, path, hot_zero * incoming_zero, incoming_one, n.feature);
        recurse(cold, depth + 1, path, cold_zero * incoming_zero, 0.0, n.feature);
    }

    const std::vector<TreeNode>& nodes_;
    const FeatureVector& x_;
    std::array<double, kNumFeatures>& phi_;
    std::vector<PathElement> buffer_;
};

void check_row(const FeatureVector& x) {
    for (double v : x) {
        if (!std::isfinite(v)) throw ValidationError("tree_shap: row has a missing or non-finite feature");
    }
}

}  // namespace

double expected_value(const RegressionTree& tree) {
    const auto& nodes = tree.nodes();
    if (nodes.empty()) throw ValidationError("expected_value of an empty tree");
    double sum = 0.0;
    for (const auto& n : nodes) {
        if (n.is_leaf()) sum += static_cast<double>(n.count) * n.value;
    }
    return sum / static_cast<double>(nodes.front().count);
}

Attribution tree_shap(const RegressionTree& tree, const FeatureVector& x) {
    check_row(x);
    if (tree.nodes().empty()) throw ValidationError("tree_shap on an empty tree");
    Attribution a;
    a.base_value = expected_value(tree);
    a.prediction = tree.predict(x);
    ShapWalker(tree, x, a.contributions).run();
    return a;
}

Attribution tree_shap(const ForestModel& forest, const FeatureVector& x) {
    if (forest.trees.empty()) throw ValidationError("tree_shap on an empty forest");
    Attribution a;
    for (const auto& t : forest.trees) {
        const auto ta = tree_shap(t, x);
        a.base_value += ta.base_value;
        for (std::size_t f = 0; f < kNumFeatures; ++f) a.contributions[f] += ta.contributions[f];
    }
    const auto n = static_cast<double>(forest.trees.size());
    a.base_value /= n;
    for (auto& c : a.contributions) c /= n;
    a.prediction = forest.predict(x);
    return a;
}

Attribution tree_shap(const BoostedModel& model, const FeatureVector& x) {
    Attribution a;
    a.base_value = model.initial;
    for (std::size_t s = 0; s < model.stages.size(); ++s) {
        const auto ta = tree_shap(model.stages[s], x);
        a.base_value += model.shrinkage[s] * ta.base_value;
        for (std::size_t f = 0; f < kNumFeatures; ++f) a.contributions[f] += model.shrinkage[s] * ta.contributions[f];
    }
    a.prediction = model.predict(x);
    return a;
}

Attribution tree_shap(const AnyModel& model, const FeatureVector& x) {
    switch (model.kind) {
        case LearnerKind::tree: return tree_shap(model.tree, x);
        case LearnerKind::forest: return tree_shap(model.forest, x);
        case LearnerKind::boosted: return tree_shap(model.boosted, x);
    }
    throw ValidationError("unknown learner kind");
}

ShapSummary summarize(std::span<const Attribution> attributions, std::span<const FeatureVector> rows) {
    if (attributions.size() != rows.size()) throw ValidationError("summarize: attributions and rows differ in length");
    if (rows.empty()) throw ValidationError("shap summary needs at least one row");
    ShapSummary s;
    s.attributions.assign(attributions.begin(), attributions.end());
    std::array<double, kNumFeatures> total{};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            total[f] += std::abs(attributions[r].contributions[f]);
            s.scatter.push_back({r, static_cast<Feature>(f), rows[r][f], attributions[r].contributions[f]});
        }
    }
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        s.ranking.push_back({static_cast<Feature>(f), total[f] / static_cast<double>(rows.size())});
    }
    std::stable_sort(s.ranking.begin(), s.ranking.end(),
                     [](const FeatureImportance& a, const FeatureImportance& b) { return a.mean_abs > b.mean_abs; });
    return s;
}

ShapSummary shap_summary(const AnyModel& model, std::span<const FeatureVector> rows) {
    std::vector<Attribution> attributions;
    attributions.reserve(rows.size());
    for (const auto& x : rows) attributions.push_back(tree_shap(model, x));
    return summarize(attributions, rows);
}

DecisionPath decision_path(const RegressionTree& tree, const FeatureVector& x) {
    if (tree.nodes().empty()) throw ValidationError("decision_path on an empty tree");
    DecisionPath p;
    const auto& nodes = tree.nodes();
    const auto ids = tree.path_of(x);
    for (std::size_t k = 0; k + 1 < ids.size(); ++k) {
        const auto& n = nodes[ids[k]];
        const auto f = static_cast<std::size_t>(n.feature);
        p.steps.push_back({ids[k], static_cast<Feature>(f), n.threshold, x[f], x[f] <= n.threshold, n.count, n.value});
    }
    p.leaf = ids.back();
    p.leaf_count = nodes[p.leaf].count;
    p.prediction = nodes[p.leaf].value;
    return p;
}

namespace {

template <class Model>
RegressionTree distill_from(const Model& teacher, std::span<const FeatureVector> rows, const DistillParams& params) {
    if (rows.empty()) throw ValidationError("distill needs at least one row");
    std::vector<double> y;
    y.reserve(rows.size());
    for (const auto& x : rows) y.push_back(teacher.predict(x));
    return fit_tree(rows, y, TreeParams{params.max_depth, params.min_samples_leaf, params.histogram_bins});
}

}  // namespace

RegressionTree distill(const ForestModel& teacher, std::span<const FeatureVector> rows, const DistillParams& params) {
    return distill_from(teacher, rows, params);
}

RegressionTree distill(const AnyModel& teacher, std::span<const FeatureVector> rows, const DistillParams& params) {
    return distill_from(teacher, rows, params);
}

std::vector<SnrCurvePoint> cumulative_snr_curves(const Dataset& d, const std::map<std::string, bool>& abnormal,
                                                 double horizon_s) {
    struct Member {
        std::vector<TimedValue> snr;
    };
    std::vector<Member> groups[2];
    for (const auto& s : d.sessions) {
        const auto it = abnormal.find(s.id);
        if (it == abnormal.end()) continue;
        groups[it->second ? 1 : 0].push_back({kpi_series(s.kpi, Kpi::snr)});
    }
    if (groups[0].empty() || groups[1].empty()) throw ValidationError("cumulative_snr_curves: a class has no sessions");

    std::vector<SnrCurvePoint> out;
    const auto last = static_cast<int>(std::floor(horizon_s));
    for (int cls = 0; cls < 2; ++cls) {
        for (int second = 1; second <= last; ++second) {
            const auto t = static_cast<double>(second);
            std::vector<double> values;
            for (const auto& m : groups[cls]) {
                // Same causal fill as the feature rows: only samples up to t are visible.
                std::size_t prefix = 0;
                while (prefix < m.snr.size() && m.snr[prefix].t <= t) ++prefix;
                const auto filled = backward_fill(std::span(m.snr).first(prefix));
                if (const auto v = cumulative_mean(filled, t)) values.push_back(*v);
            }
            if (values.empty()) continue;
            const auto ci = stats::normal_ci95(values);
            out.push_back({t, cls == 1 ? "abnormal" : "normal", values.size(), ci.mean, ci.lo, ci.hi});
        }
    }
    return out;
}

void write_attributions_csv(std::span<const Attribution> attributions, std::span<const FeatureVector> rows,
                            std::span<const std::string> row_ids, const std::filesystem::path& path) {
    if (attributions.size() != rows.size() || rows.size() != row_ids.size()) {
        throw ValidationError("write_attributions_csv: input lengths differ");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path.string());
    out << "row_id,feature,value,contribution\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            out << row_ids[r] << ',' << feature_names()[f] << ',' << text::format_exact(rows[r][f]) << ','
                << text::format_exact(attributions[r].contributions[f]) << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void write_decision_path_json(const RegressionTree& tree, const DecisionPath& path, const FeatureVector& x,
                              const std::filesystem::path& out_path) {
    nlohmann::json j;
    auto steps = nlohmann::json::array();
    for (const auto& s : path.steps) {
        const auto& h = tree.nodes()[s.node].histogram;
        steps.push_back({{"node", s.node},
                         {"feature", std::string(feature_names()[static_cast<std::size_t>(s.feature)])},
                         {"threshold", s.threshold},
                         {"value", s.value},
                         {"direction", s.went_left ? "left" : "right"},
                         {"count", s.count},
                         {"mean", s.mean},
                         {"histogram", {{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}}}});
    }
    j["path"] = std::move(steps);
    const auto& leaf_hist = tree.nodes()[path.leaf].histogram;
    j["leaf"] = {{"node", path.leaf},
                 {"count", path.leaf_count},
                 {"prediction", path.prediction},
                 {"histogram", {{"lo", leaf_hist.lo}, {"hi", leaf_hist.hi}, {"counts", leaf_hist.counts}}}};
    j["row"] = nlohmann::json::object();
    for (std::size_t f = 0; f < kNumFeatures; ++f) j["row"][std::string(feature_names()[f])] = x[f];

    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + out_path.string());
    out << j.dump(1) << '\n';
    if (!out) throw IoError("write failed: " + out_path.string());
}

void write_snr_curves_csv(std::span<const SnrCurvePoint> curves, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path.string());
    out << "t,class,mean,lo,hi\n";
    for (const auto& c : curves) {
        out << text::format_exact(c.t) << ',' << c.label << ',' << text::format_exact(c.mean) << ','
            << text::format_exact(c.lo) << ',' << text::format_exact(c.hi) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace vdt
