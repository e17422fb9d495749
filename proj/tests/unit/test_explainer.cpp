#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "json.hpp"

#include "vdt/error.hpp"
#include "vdt/explainer.hpp"
#include "vdt/synthetic_gen.hpp"

using namespace vdt;

namespace {

struct Data {
    std::vector<FeatureVector> x;
    std::vector<double> y;
};

Data synthetic(std::size_t n_sessions, std::uint64_t seed) {
    GenConfig c;
    c.n_sessions = n_sessions;
    c.anomaly_fraction = 0.1;
    c.seed = seed;
    Data d;
    for (const auto& r : build_rows(generate(c).dataset).rows) {
        d.x.push_back(r.x);
        d.y.push_back(r.mos);
    }
    return d;
}

FeatureVector vec(std::initializer_list<std::pair<Feature, double>> values) {
    FeatureVector x{};
    for (const auto& [f, v] : values) x[static_cast<std::size_t>(f)] = v;
    return x;
}

double total(const Attribution& a) {
    double s = a.base_value;
    for (double c : a.contributions) s += c;
    return s;
}

}  // namespace

TEST_SUITE("explainer") {

TEST_CASE("a single leaf attributes nothing") {
    const RegressionTree t({TreeNode{-1, 0.0, -1, -1, 3.7, 10, {}}}, {});
    const auto a = tree_shap(t, FeatureVector{});
    CHECK(a.base_value == 3.7);
    CHECK(a.prediction == 3.7);
    for (double c : a.contributions) CHECK(c == 0.0);
}

TEST_CASE("a stump credits only its split feature") {
    const int f = static_cast<int>(Feature::snr_s);
    const RegressionTree t({TreeNode{f, 1.0, 1, 2, 3.0, 4, {}}, TreeNode{-1, 0, -1, -1, 2.0, 1, {}},
                            TreeNode{-1, 0, -1, -1, 10.0 / 3.0, 3, {}}},
                           {});
    CHECK(expected_value(t) == doctest::Approx(3.0));
    const auto lo = tree_shap(t, vec({{Feature::snr_s, 0.0}, {Feature::prb_c, 9.0}}));
    CHECK(lo.contributions[static_cast<std::size_t>(f)] == doctest::Approx(-1.0));
    const auto hi = tree_shap(t, vec({{Feature::snr_s, 5.0}}));
    CHECK(hi.contributions[static_cast<std::size_t>(f)] == doctest::Approx(1.0 / 3.0));
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        if (k != static_cast<std::size_t>(f)) CHECK(lo.contributions[k] == 0.0);
    }
    FeatureVector bad{};
    bad[0] = std::nan("");
    CHECK_THROWS_AS(tree_shap(t, bad), ValidationError);
}

TEST_CASE("tree SHAP equals the enumerated Shapley values") {
    const auto d = synthetic(12, 21);
    std::mt19937_64 rng(21);
    for (int depth : {2, 3, 5}) {
        const auto t = fit_tree(d.x, d.y, {depth, 2, 0});
        for (int k = 0; k < 15; ++k) {
            const auto& x = d.x[std::uniform_int_distribution<std::size_t>(0, d.x.size() - 1)(rng)];
            const auto fast = tree_shap(t, x);
            const auto slow = oracle::shapley(t, x);
            for (std::size_t f = 0; f < kNumFeatures; ++f) CHECK(fast.contributions[f] == doctest::Approx(slow[f]).epsilon(1e-9).scale(1.0));
            CHECK(std::abs(total(fast) - t.predict(x)) < 1e-9);
        }
    }
}

TEST_CASE("local accuracy for ensembles") {
    const auto d = synthetic(20, 22);
    ForestParams fp;
    fp.n_trees = 10;
    const auto forest = fit_forest(d.x, d.y, fp);
    BoostParams bp;
    bp.n_stages = 30;
    const auto boosted = fit_boosted(d.x, d.y, bp);
    for (std::size_t i = 0; i < d.x.size(); i += 7) {
        const auto a = tree_shap(forest, d.x[i]);
        CHECK(std::abs(total(a) - forest.predict(d.x[i])) < 1e-9);
        CHECK(a.prediction == doctest::Approx(forest.predict(d.x[i])));
        const auto b = tree_shap(boosted, d.x[i]);
        CHECK(std::abs(total(b) - boosted.predict(d.x[i])) < 1e-9);
    }
}

TEST_CASE("attributions are linear in the ensemble") {
    const auto d = synthetic(15, 23);
    ForestParams fp;
    fp.n_trees = 2;
    const auto forest = fit_forest(d.x, d.y, fp);
    for (std::size_t i = 0; i < d.x.size(); i += 11) {
        const auto a = tree_shap(forest.trees[0], d.x[i]);
        const auto b = tree_shap(forest.trees[1], d.x[i]);
        const auto both = tree_shap(forest, d.x[i]);
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            CHECK(both.contributions[f] == doctest::Approx((a.contributions[f] + b.contributions[f]) / 2.0));
        }
        CHECK(both.base_value == doctest::Approx((a.base_value + b.base_value) / 2.0));
    }
}

TEST_CASE("summary ranking") {
    const auto d = synthetic(20, 24);
    LearnerSpec spec;
    spec.kind = LearnerKind::forest;
    spec.forest.n_trees = 8;
    spec.mask = all_features();
    spec.mask[static_cast<std::size_t>(Feature::rsrq_b)] = false;
    std::vector<FeatureRow> rows;
    for (std::size_t i = 0; i < d.x.size(); ++i) rows.push_back({"s" + std::to_string(i / 10), i % 10, d.x[i], d.y[i]});
    const auto model = fit_learner(rows, spec, 3);
    const std::vector<FeatureVector> sample(d.x.begin(), d.x.begin() + 40);
    const auto s = shap_summary(model, sample);
    REQUIRE(s.ranking.size() == kNumFeatures);
    for (std::size_t k = 1; k < s.ranking.size(); ++k) CHECK(s.ranking[k].mean_abs <= s.ranking[k - 1].mean_abs);
    const auto ignored = std::find_if(s.ranking.begin(), s.ranking.end(),
                                      [](const FeatureImportance& f) { return f.feature == Feature::rsrq_b; });
    CHECK(ignored->mean_abs == 0.0);
    CHECK(s.scatter.size() == sample.size() * kNumFeatures);

    auto reversed = sample;
    std::reverse(reversed.begin(), reversed.end());
    const auto r = shap_summary(model, reversed);
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        CHECK(r.ranking[k].feature == s.ranking[k].feature);
        CHECK(r.ranking[k].mean_abs == doctest::Approx(s.ranking[k].mean_abs).epsilon(1e-12));
    }
}

TEST_CASE("decision paths") {
    const RegressionTree leaf({TreeNode{-1, 0, -1, -1, 4.1, 3, {}}}, {});
    const auto p0 = decision_path(leaf, FeatureVector{});
    CHECK(p0.steps.empty());
    CHECK(p0.prediction == 4.1);

    const int st = static_cast<int>(Feature::sess_time), snr = static_cast<int>(Feature::snr_s);
    const RegressionTree t({TreeNode{st, 15.5, 1, 2, 3.9, 100, {}},
                            TreeNode{-1, 0, -1, -1, 3.5, 40, {}},
                            TreeNode{st, 28.5, 3, 4, 4.16, 60, {}},
                            TreeNode{snr, -3.17, 5, 6, 3.9, 20, {}},
                            TreeNode{-1, 0, -1, -1, 4.29, 40, {}},
                            TreeNode{-1, 0, -1, -1, 2.89, 5, {}},
                            TreeNode{-1, 0, -1, -1, 4.24, 15, {}}},
                           {});
    const auto x = vec({{Feature::sess_time, 20.0}, {Feature::snr_s, -3.85}});
    const auto p = decision_path(t, x);
    REQUIRE(p.steps.size() == 3);
    CHECK(p.steps[0].threshold == 15.5);
    CHECK_FALSE(p.steps[0].went_left);
    CHECK(p.steps[1].threshold == 28.5);
    CHECK(p.steps[1].went_left);
    CHECK(p.steps[2].feature == Feature::snr_s);
    CHECK(p.steps[2].value == -3.85);
    CHECK(p.steps[2].went_left);
    CHECK(p.prediction == 2.89);
    CHECK(p.leaf == 5);
    CHECK(p.leaf_count == 5);

    testing::TempDir dir;
    write_decision_path_json(t, p, x, dir / "p.json");
    const auto j = nlohmann::json::parse(testing::read_file(dir / "p.json"));
    CHECK(j["path"].size() == 3);
    CHECK(j["path"][0]["direction"] == "right");
    CHECK(j["leaf"]["prediction"] == 2.89);

    const auto d = synthetic(10, 25);
    const auto fitted = fit_tree(d.x, d.y, {4, 2, 0});
    for (const auto& row : d.x) CHECK(decision_path(fitted, row).steps.size() <= 4);
}

TEST_CASE("distillation") {
    const auto d = synthetic(20, 26);
    ForestParams fp;
    fp.n_trees = 5;
    const std::vector<double> constant(d.y.size(), 3.3);
    const auto flat_teacher = fit_forest(d.x, constant, fp);
    CHECK(distill(flat_teacher, d.x).nodes().size() == 1);

    const auto teacher = fit_forest(d.x, d.y, fp);
    const auto student = distill(teacher, d.x, {8, 1, 10});
    CHECK(student.depth() <= 8);
    double to_teacher = 0.0, to_targets = 0.0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        const double s = student.predict(d.x[i]);
        to_teacher += std::pow(s - teacher.predict(d.x[i]), 2);
        to_targets += std::pow(s - d.y[i], 2);
    }
    CHECK(to_teacher < to_targets);
    CHECK_FALSE(student.nodes()[0].histogram.counts.empty());
}

TEST_CASE("cumulative SNR curves") {
    Dataset d;
    d.sessions = {testing::make_session("a", 60, 4, 10.0), testing::make_session("b", 60, 4, 10.0),
                  testing::make_session("c", 60, 4, -2.0), testing::make_session("d", 60, 4, -2.0)};
    const std::map<std::string, bool> labels = {{"a", false}, {"b", false}, {"c", true}, {"d", true}};
    const auto curves = cumulative_snr_curves(d, labels, 60.0);
    CHECK(curves.size() == 120);
    for (const auto& p : curves) {
        CHECK(p.lo == doctest::Approx(p.mean));
        CHECK(p.hi == doctest::Approx(p.mean));
        CHECK(p.n == 2);
    }
    // make_session's SNR is base + 0.01 t, so the running mean at t is base + 0.01 (t + 1) / 2.
    CHECK(curves[59].mean == doctest::Approx(10.0 + 0.01 * 30.5));
    CHECK(curves[60].label == "abnormal");
    CHECK(curves[60].mean == doctest::Approx(-2.0 + 0.01));

    std::map<std::string, bool> one_class = {{"a", false}, {"b", false}};
    CHECK_THROWS_AS(cumulative_snr_curves(d, one_class), ValidationError);

    Dataset rev = d;
    std::reverse(rev.sessions.begin(), rev.sessions.end());
    const auto again = cumulative_snr_curves(rev, labels, 60.0);
    for (std::size_t i = 0; i < curves.size(); ++i) CHECK(again[i].mean == doctest::Approx(curves[i].mean).epsilon(1e-12));

    // A shorter horizon is a prefix of the longer one.
    const auto short_curves = cumulative_snr_curves(d, labels, 30.0);
    CHECK(short_curves.size() == 60);
    CHECK(short_curves[29].mean == curves[29].mean);

    testing::TempDir dir;
    write_snr_curves_csv(curves, dir / "c.csv");
    CHECK(testing::read_file(dir / "c.csv").rfind("t,class,mean,lo,hi\n", 0) == 0);
}

}
