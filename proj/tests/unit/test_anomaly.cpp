#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

#include "vdt/anomaly.hpp"
#include "vdt/error.hpp"

using namespace vdt;

namespace {

Pattern flat(double v) {
    Pattern p;
    p.fill(v);
    return p;
}

std::vector<FeatureRow> rows_for(const std::string& id, std::size_t n, double mos) {
    std::vector<FeatureRow> out;
    for (std::size_t i = 0; i < n; ++i) {
        FeatureRow r;
        r.session_id = id;
        r.mos_index = i;
        r.mos = mos;
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST_SUITE("anomaly") {

TEST_CASE("session MSE against the pattern") {
    const std::vector<double> same(15, 4.0);
    CHECK(session_mse(same, flat(4.0)) == 0.0);
    const std::vector<double> off(15, 4.5);
    CHECK(session_mse(off, flat(4.0)) == doctest::Approx(0.25));
    // Twelve aligned points, half off by one.
    std::vector<double> twelve(12, 4.0);
    for (std::size_t i = 0; i < 6; ++i) twelve[i] = 3.0;
    CHECK(session_mse(twelve, flat(4.0)) == doctest::Approx(0.5));
    // Points past index 14 are ignored.
    std::vector<double> long_series(20, 4.0);
    for (std::size_t i = 15; i < 20; ++i) long_series[i] = 1.0;
    CHECK(session_mse(long_series, flat(4.0)) == 0.0);
    CHECK_THROWS_AS(session_mse(std::vector<double>(11, 4.0), flat(4.0)), ValidationError);

    const IndexedSeries gappy = {{0, 4}, {1, 4}, {2, 4}, {3, 4}, {5, 4}, {6, 4}, {7, 4}, {8, 4}, {9, 4}, {10, 4}, {11, 4}, {14, 2}};
    CHECK(session_mse(gappy, flat(4.0)) == doctest::Approx(4.0 / 12.0));
}

TEST_CASE("scoring groups rows by session and skips short ones") {
    auto rows = rows_for("a", 15, 4.0);
    auto b = rows_for("b", 11, 3.0);
    auto c = rows_for("c", 13, 5.0);
    rows.insert(rows.end(), b.begin(), b.end());
    rows.insert(rows.end(), c.begin(), c.end());
    std::vector<double> preds(rows.size(), 4.5);
    const auto s = score_sessions(rows, preds, flat(4.0));
    REQUIRE(s.scores.size() == 2);
    CHECK(s.scores[0].session_id == "a");
    CHECK(s.scores[0].predicted_mse == doctest::Approx(0.25));
    CHECK(s.scores[0].actual_mse == 0.0);
    CHECK(s.scores[1].session_id == "c");
    CHECK(s.scores[1].actual_mse == doctest::Approx(1.0));
    CHECK(s.scores[1].aligned_len == 13);
    CHECK(s.skipped == std::vector<std::string>{"b"});
    CHECK_THROWS_AS(score_sessions(rows, std::vector<double>(3, 1.0), flat(4.0)), ValidationError);
}

TEST_CASE("percentile threshold and labelling") {
    std::vector<double> s;
    for (int i = 1; i <= 11; ++i) s.push_back(i);
    CHECK(percentile_threshold(s, 0.9) == doctest::Approx(10.0));
    CHECK(percentile_threshold(s, 0.95) == doctest::Approx(10.5));
    const auto labels = label_actual(s, 10.0);
    CHECK(std::count(labels.begin(), labels.end(), true) == 1);
    CHECK(labels.back());
    CHECK_THROWS_AS(percentile_threshold(std::vector<double>{}), ValidationError);
}

TEST_CASE("confusion arithmetic") {
    const auto c = confusion_from_counts(21, 4, 7);
    CHECK(*c.precision() == doctest::Approx(0.84));
    CHECK(*c.recall() == doctest::Approx(0.75));
    CHECK(*c.f1() == doctest::Approx(0.792453).epsilon(1e-6));

    CHECK_FALSE(confusion_from_counts(0, 0, 3).precision().has_value());
    CHECK_FALSE(confusion_from_counts(0, 0, 3).f1().has_value());
    CHECK(*confusion_from_counts(0, 2, 3).f1() == 0.0);

    const std::vector<bool> pred = {true, true, false, false, true};
    const std::vector<bool> act = {true, false, true, false, true};
    const auto k = confusion(pred, act);
    CHECK(k.tp == 2);
    CHECK(k.fp == 1);
    CHECK(k.fn == 1);
    CHECK(k.tn == 1);
}

TEST_CASE("threshold sweep") {
    const std::vector<double> scores = {0.1, 0.2, 0.3, 0.9, 0.8};
    const std::vector<bool> actual = {false, false, false, true, true};
    const auto s = threshold_sweep(scores, actual);
    REQUIRE(s.points.size() == 6);
    for (std::size_t i = 1; i < s.points.size(); ++i) {
        CHECK(s.points[i].threshold > s.points[i - 1].threshold);
        CHECK(s.points[i].recall <= s.points[i - 1].recall);
        CHECK(s.points[i].flagged <= s.points[i - 1].flagged);
    }
    // Below every score: everything flagged.
    CHECK(s.points.front().flagged == 5);
    CHECK(s.points.front().recall == 1.0);
    CHECK(*s.points.front().precision == doctest::Approx(0.4));
    // At the maximum score nothing is flagged.
    CHECK(s.points.back().flagged == 0);
    CHECK_FALSE(s.points.back().precision.has_value());
    CHECK(s.points.back().recall == 0.0);
    // A perfect ranking reaches F1 = 1 at the largest normal score.
    CHECK(*s.points[s.best].f1 == 1.0);
    CHECK(s.points[s.best].threshold == 0.3);

    CHECK_THROWS_AS(threshold_sweep(scores, std::vector<bool>(5, false)), ValidationError);
    CHECK_THROWS_AS(threshold_sweep(scores, std::vector<bool>(4, true)), ValidationError);
}

TEST_CASE("F1 is zero exactly when no true positive is flagged") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> scores(30);
        std::vector<bool> actual(30);
        for (std::size_t i = 0; i < 30; ++i) {
            scores[i] = u(rng);
            actual[i] = u(rng) < 0.2;
        }
        actual[0] = true;
        const auto s = threshold_sweep(scores, actual);
        for (const auto& p : s.points) {
            if (!p.f1) continue;
            std::size_t tp = 0;
            for (std::size_t i = 0; i < 30; ++i) tp += (scores[i] > p.threshold && actual[i]) ? 1 : 0;
            CHECK((*p.f1 == 0.0) == (tp == 0));
            CHECK(*p.f1 <= 1.0);
        }
        // The best point dominates every other F1.
        for (const auto& p : s.points) {
            if (p.f1) CHECK(*p.f1 <= *s.points[s.best].f1);
        }
    }
}

TEST_CASE("detect wires thresholds, labels and sweep together") {
    std::vector<SessionScore> scores;
    for (int i = 0; i < 20; ++i) {
        scores.push_back({"s" + std::to_string(i), 0.01 * i, 0.02 * i, 15});
    }
    DetectorParams p;
    p.q = 0.9;
    p.actual_threshold = 0.35;
    const auto r = detect(scores, p);
    CHECK(r.threshold == doctest::Approx(percentile_threshold(std::vector<double>{0, .01, .02, .03, .04, .05, .06, .07, .08, .09, .1, .11, .12, .13, .14, .15, .16, .17, .18, .19}, 0.9)));
    CHECK(r.actual_threshold == 0.35);
    CHECK(std::count(r.actual.begin(), r.actual.end(), true) == 2);
    CHECK(r.counts.tp == 2);
    CHECK(*r.sweep.points[r.sweep.best].f1 == 1.0);
    CHECK_THROWS_AS(detect(std::span<const SessionScore>{}), ValidationError);

    testing::TempDir dir;
    write_detection_json(r, dir / "d.json");
    write_sweep_csv(r.sweep, dir / "s.csv");
    const auto j = nlohmann::json::parse(testing::read_file(dir / "d.json"));
    CHECK(j["confusion"]["tp"] == 2);
    CHECK(j["sessions"].size() == 20);
    CHECK(j["max_f1"]["f1"] == 1.0);
    const auto csv = testing::read_file(dir / "s.csv");
    CHECK(csv.rfind("threshold,precision,recall,f1\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == r.sweep.points.size() + 1);
}

}
