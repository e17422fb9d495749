#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"

#include "vdt/error.hpp"
#include "vdt/features.hpp"
#include "vdt/stats.hpp"
#include "vdt/synthetic_gen.hpp"

using namespace vdt;

namespace {

std::vector<TimedValue> series(std::initializer_list<std::optional<double>> values) {
    std::vector<TimedValue> out;
    double t = 1.0;
    for (const auto& v : values) out.push_back({t++, v});
    return out;
}

std::vector<std::optional<double>> values_of(const std::vector<TimedValue>& s) {
    std::vector<std::optional<double>> out;
    for (const auto& v : s) out.push_back(v.value);
    return out;
}

// Reverse scan written independently of the library.
std::vector<std::optional<double>> reference_fill(std::vector<std::optional<double>> v) {
    std::optional<double> next;
    for (std::size_t i = v.size(); i-- > 0;) {
        if (v[i]) {
            next = v[i];
        } else {
            v[i] = next;
        }
    }
    return v;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("backward fill takes the next later value") {
    using V = std::vector<std::optional<double>>;
    CHECK(values_of(backward_fill(series({std::nullopt, 5.0, std::nullopt, 7.0}))) == V{5.0, 5.0, 7.0, 7.0});
    CHECK(values_of(backward_fill(series({1.0, 2.0, 3.0}))) == V{1.0, 2.0, 3.0});
    CHECK(values_of(backward_fill(series({3.0, std::nullopt, std::nullopt}))) == V{3.0, std::nullopt, std::nullopt});

    std::mt19937_64 rng(3);
    std::bernoulli_distribution present(0.5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<TimedValue> s;
        V raw;
        for (int i = 0; i < 20; ++i) {
            const auto v = present(rng) ? std::optional<double>(i) : std::nullopt;
            s.push_back({static_cast<double>(i), v});
            raw.push_back(v);
        }
        CHECK(values_of(backward_fill(s)) == reference_fill(raw));
    }
}

TEST_CASE("backward fill on KPI samples works per column") {
    std::vector<KpiSample> kpi = {{1.0, -90.0, std::nullopt, std::nullopt, 10.0},
                                  {2.0, std::nullopt, -9.0, 4.0, std::nullopt},
                                  {3.0, -80.0, std::nullopt, std::nullopt, std::nullopt}};
    const auto f = backward_fill(kpi);
    REQUIRE(f.size() == 3);
    CHECK(*f[1].rsrp == -80.0);
    CHECK(*f[0].rsrq == -9.0);
    CHECK_FALSE(f[2].rsrq.has_value());
    CHECK(*f[0].snr == 4.0);
    CHECK_FALSE(f[1].prb.has_value());
}

TEST_CASE("cumulative mean") {
    const std::vector<TimedValue> v = {{1, 2.0}, {2, 4.0}, {3, 6.0}};
    CHECK(*cumulative_mean(v, 3.0) == 4.0);
    CHECK(*cumulative_mean(std::vector<TimedValue>{{1, 7.5}}, 10.0) == 7.5);
    const auto filled = backward_fill(series({1.0, std::nullopt, 5.0}));
    CHECK(*cumulative_mean(filled, 3.0) == doctest::Approx(11.0 / 3.0));
    CHECK_FALSE(cumulative_mean(v, 0.5).has_value());
}

TEST_CASE("block mean over (t_prev, t_now]") {
    std::vector<TimedValue> v;
    for (int t = 1; t <= 10; ++t) v.push_back({static_cast<double>(t), static_cast<double>(t)});
    CHECK(*block_mean(v, 5.0, 8.0) == doctest::Approx((6.0 + 7.0 + 8.0) / 3.0));
    CHECK(*block_mean(v, 4.5, 5.0) == 5.0);
    CHECK_FALSE(block_mean(v, 10.0, 12.0).has_value());
    CHECK_THROWS_AS(block_mean(v, 5.0, 5.0), std::invalid_argument);
}

TEST_CASE("one row per MOS sample with 14 features") {
    Dataset d;
    d.sessions = {testing::make_session("A", 60, 4)};
    const auto b = build_rows(d);
    CHECK(b.rows.size() == 15);
    CHECK(b.dropped == 0);
    CHECK(feature_names().size() == 14);
    for (std::size_t i = 0; i < b.rows.size(); ++i) {
        CHECK(b.rows[i].mos_index == i);
        CHECK(b.rows[i][Feature::sess_time] >= b.rows[i][Feature::block_len]);
        CHECK(b.rows[i][Feature::block_len] > 0.0);
    }
}

TEST_CASE("row 0 block spans the whole prefix") {
    Session s;
    s.id = "A";
    for (int t = 1; t <= 5; ++t) s.kpi.push_back({static_cast<double>(t), -90.0 - t, -10.0 + 0.1 * t, 1.0 * t, 30.0 + t});
    for (int i = 0; i < 12; ++i) s.mos.push_back({5.0 + 4.0 * i, 4.0});
    const auto b = build_session_rows(s);
    REQUIRE(!b.rows.empty());
    const auto& r = b.rows[0];
    CHECK(r[Feature::sess_time] == 5.0);
    CHECK(r[Feature::block_len] == 5.0);
    CHECK(r[Feature::snr_b] == r[Feature::snr_s]);
    CHECK(r[Feature::rsrp_b] == r[Feature::rsrp_s]);
    CHECK(r[Feature::snr_s] == doctest::Approx(3.0));
    CHECK(r[Feature::snr_c] == 5.0);
}

TEST_CASE("sessions without SNR lose every row") {
    auto s = testing::make_session("A", 60, 5);
    for (auto& k : s.kpi) k.snr.reset();
    Dataset d;
    d.sessions = {s};
    const auto b = build_rows(d);
    CHECK(b.rows.empty());
    CHECK(b.dropped == s.mos.size());
}

TEST_CASE("features never read measurements after the MOS timestamp") {
    GenConfig c;
    c.n_sessions = 20;
    c.anomaly_fraction = 0.2;
    const auto d = generate(c).dataset;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> jitter(0.0, 3.0);
    for (const auto& s : d.sessions) {
        const auto base = build_session_rows(s).rows;
        for (const auto& row : base) {
            const double t_mos = row[Feature::sess_time];
            Session perturbed = s;
            for (auto& k : perturbed.kpi) {
                if (k.t > t_mos) {
                    if (k.snr) k.snr = *k.snr + jitter(rng);
                    if (k.rsrp) k.rsrp.reset();
                    k.prb = 1.0;
                }
            }
            const auto again = build_session_rows(perturbed).rows;
            const auto it = std::find_if(again.begin(), again.end(), [&](const FeatureRow& r) { return r.mos_index == row.mos_index; });
            REQUIRE(it != again.end());
            CHECK(it->x == row.x);
        }
    }
}

TEST_CASE("session aggregate is a running mean") {
    Dataset d;
    d.sessions = {testing::make_session("A", 60, 5)};
    const auto rows = build_rows(d).rows;
    const auto snr = kpi_series(d.sessions[0].kpi, Kpi::snr);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double prev_t = rows[i - 1][Feature::sess_time];
        const double t = rows[i][Feature::sess_time];
        const double n_prev = prev_t, n_block = t - prev_t;
        const double combined = (rows[i - 1][Feature::snr_s] * n_prev + rows[i][Feature::snr_b] * n_block) / t;
        CHECK(rows[i][Feature::snr_s] == doctest::Approx(combined).epsilon(1e-12));
    }
    CHECK(rows.back()[Feature::snr_s] == doctest::Approx(*cumulative_mean(snr, rows.back()[Feature::sess_time])));
}

TEST_CASE("build_rows is order independent and deterministic") {
    GenConfig c;
    c.n_sessions = 15;
    auto d = generate(c).dataset;
    const auto a = build_rows(d).rows;
    std::reverse(d.sessions.begin(), d.sessions.end());
    auto b = build_rows(d).rows;
    std::stable_sort(b.begin(), b.end(), [](const FeatureRow& x, const FeatureRow& y) { return x.session_id < y.session_id; });
    CHECK(a == b);
}

TEST_CASE("pearson matrix") {
    std::vector<FeatureRow> rows;
    for (int i = 0; i < 5; ++i) {
        FeatureRow r;
        r.session_id = "A";
        r.mos_index = static_cast<std::size_t>(i);
        for (std::size_t f = 0; f < kNumFeatures; ++f) r.x[f] = std::sin(1.0 + i * (f + 1));
        r.x[static_cast<std::size_t>(Feature::block_len)] = 4.0;  // constant column
        r.x[static_cast<std::size_t>(Feature::rsrp_b)] = -r.x[static_cast<std::size_t>(Feature::rsrp_c)];
        r.mos = 1.0 + i;
        rows.push_back(r);
    }
    const auto m = pearson_matrix(rows);
    CHECK(m.excluded == std::vector<std::string>{"block_len"});
    REQUIRE(m.names.size() == 14);
    CHECK(m.names.back() == "mos");
    for (std::size_t i = 0; i < m.names.size(); ++i) {
        CHECK(m.values[i][i] == doctest::Approx(1.0));
        for (std::size_t j = 0; j < m.names.size(); ++j) {
            CHECK(m.values[i][j] == m.values[j][i]);
            CHECK(std::abs(m.values[i][j]) <= 1.0);
        }
    }
    const auto c = std::find(m.names.begin(), m.names.end(), "rsrp_c") - m.names.begin();
    const auto b = std::find(m.names.begin(), m.names.end(), "rsrp_b") - m.names.begin();
    CHECK(m.values[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)] == doctest::Approx(-1.0));
    CHECK_THROWS_AS(pearson_matrix(std::span(rows).first(1)), ValidationError);
}

TEST_CASE("feature CSV round trip") {
    testing::TempDir dir;
    GenConfig c;
    c.n_sessions = 5;
    const auto rows = build_rows(generate(c).dataset).rows;
    write_features_csv(rows, dir / "f.csv");
    const auto body = testing::read_file(dir / "f.csv");
    CHECK(body.substr(0, body.find('\n')) ==
          "session_id,mos_index,sess_time,block_len,rsrp_c,rsrp_b,rsrp_s,rsrq_c,rsrq_b,rsrq_s,snr_c,snr_b,snr_s,prb_c,prb_b,prb_s,mos");
    CHECK(read_features_csv(dir / "f.csv") == rows);
}

}
