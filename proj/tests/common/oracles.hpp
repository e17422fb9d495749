#pragma once

// Slow reference implementations used to cross-check the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <set>
#include <vector>

#include "vdt/explainer.hpp"
#include "vdt/trees.hpp"

namespace oracle {

using vdt::FeatureVector;
using vdt::RegressionTree;

struct Node {
    int feature = -1;
    double threshold = 0.0;
    double value = 0.0;
    std::unique_ptr<Node> left, right;
};

inline double sse_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double m = 0.0;
    for (double a : v) m += a;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double a : v) s += (a - m) * (a - m);
    return s;
}

// Exhaustive CART: every feature, every midpoint of distinct values, child SSE from two-pass sums.
// A candidate must beat the best so far by more than 1e-12 of the parent SSE.
inline std::unique_ptr<Node> grow(const std::vector<FeatureVector>& x, const std::vector<double>& y,
                                  const std::vector<std::size_t>& idx, int depth, int max_depth, std::size_t nfeat) {
    auto node = std::make_unique<Node>();
    std::vector<double> ys;
    for (auto i : idx) ys.push_back(y[i]);
    double sum = 0.0;
    for (double v : ys) sum += v;
    node->value = sum / static_cast<double>(ys.size());
    const double parent = sse_of(ys);
    if (depth >= max_depth || parent <= 0.0) return node;

    double best = parent;
    int best_f = -1;
    double best_t = 0.0;
    for (std::size_t f = 0; f < nfeat; ++f) {
        std::vector<double> vals;
        for (auto i : idx) vals.push_back(x[i][f]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
            const double t = (vals[k] + vals[k + 1]) / 2.0;
            std::vector<double> l, r;
            for (auto i : idx) (x[i][f] <= t ? l : r).push_back(y[i]);
            const double s = sse_of(l) + sse_of(r);
            if (s < best - 1e-12 * parent) {
                best = s;
                best_f = static_cast<int>(f);
                best_t = t;
            }
        }
    }
    if (best_f < 0) return node;
    node->feature = best_f;
    node->threshold = best_t;
    std::vector<std::size_t> li, ri;
    for (auto i : idx) (x[i][static_cast<std::size_t>(best_f)] <= best_t ? li : ri).push_back(i);
    node->left = grow(x, y, li, depth + 1, max_depth, nfeat);
    node->right = grow(x, y, ri, depth + 1, max_depth, nfeat);
    return node;
}

inline double predict(const Node& n, const FeatureVector& x) {
    if (n.feature < 0) return n.value;
    return predict(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? *n.left : *n.right, x);
}

// Same split features and thresholds everywhere, leaf values within `tol`.
inline bool same_tree(const RegressionTree& t, std::size_t id, const Node& o, double tol) {
    const auto& n = t.nodes()[id];
    if (n.feature != o.feature) return false;
    if (std::abs(n.value - o.value) > tol) return false;
    if (o.feature < 0) return true;
    return n.threshold == o.threshold && same_tree(t, static_cast<std::size_t>(n.left), *o.left, tol) &&
           same_tree(t, static_cast<std::size_t>(n.right), *o.right, tol);
}

// E[f(x) | x_S] under node covers: follow x on features in S, otherwise average the children.
inline double conditional(const RegressionTree& t, std::size_t id, const FeatureVector& x, const std::set<int>& S) {
    const auto& n = t.nodes()[id];
    if (n.is_leaf()) return n.value;
    const auto l = static_cast<std::size_t>(n.left), r = static_cast<std::size_t>(n.right);
    if (S.count(n.feature) != 0) return conditional(t, x[static_cast<std::size_t>(n.feature)] <= n.threshold ? l : r, x, S);
    const double cl = static_cast<double>(t.nodes()[l].count), cr = static_cast<double>(t.nodes()[r].count);
    return (cl * conditional(t, l, x, S) + cr * conditional(t, r, x, S)) / (cl + cr);
}

// Shapley values by enumerating coalitions of the features the tree uses; the rest are null players.
inline std::array<double, vdt::kNumFeatures> shapley(const RegressionTree& t, const FeatureVector& x) {
    std::vector<int> used;
    for (const auto& n : t.nodes()) {
        if (!n.is_leaf() && std::find(used.begin(), used.end(), n.feature) == used.end()) used.push_back(n.feature);
    }
    const std::size_t M = used.size();
    std::vector<double> fact(M + 1, 1.0);
    for (std::size_t k = 1; k <= M; ++k) fact[k] = fact[k - 1] * static_cast<double>(k);
    std::array<double, vdt::kNumFeatures> phi{};
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t mask = 0; mask < (std::size_t{1} << M); ++mask) {
            if (mask & (std::size_t{1} << i)) continue;
            std::set<int> S;
            for (std::size_t k = 0; k < M; ++k) {
                if (mask & (std::size_t{1} << k)) S.insert(used[k]);
            }
            const double w = fact[S.size()] * fact[M - S.size() - 1] / fact[M];
            auto Si = S;
            Si.insert(used[i]);
            phi[static_cast<std::size_t>(used[i])] += w * (conditional(t, 0, x, Si) - conditional(t, 0, x, S));
        }
    }
    return phi;
}

// Direct-formula statistics.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
        saa += a[i] * a[i];
        sbb += b[i] * b[i];
        sab += a[i] * b[i];
    }
    return (n * sab - sa * sb) / (std::sqrt(n * saa - sa * sa) * std::sqrt(n * sbb - sb * sb));
}

inline double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double r2(const std::vector<double>& y, const std::vector<double>& yhat) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    return 1.0 - ss_res / ss_tot;
}

}  // namespace oracle
