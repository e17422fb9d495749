#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "vdt/error.hpp"
#include "vdt/features.hpp"
#include "vdt/synthetic_gen.hpp"

using namespace vdt;

namespace {

std::vector<double> times_every(double step, double until) {
    std::vector<double> t;
    for (double x = step; x <= until; x += step) t.push_back(x);
    return t;
}

std::optional<double> snr_mean_at(const Session& s, double t) {
    return cumulative_mean(backward_fill(kpi_series(s.kpi, Kpi::snr)), t);
}

GenConfig small(std::size_t n, double anomaly_fraction, std::uint64_t seed = 7) {
    GenConfig c;
    c.n_sessions = n;
    c.anomaly_fraction = anomaly_fraction;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_SUITE("synthetic_gen") {

TEST_CASE("same seed gives identical datasets, different seeds differ") {
    const auto a = generate(small(40, 0.1));
    const auto b = generate(small(40, 0.1));
    CHECK(a.dataset.sessions == b.dataset.sessions);
    CHECK(a.clean_mos == b.clean_mos);
    const auto c = generate(small(40, 0.1, 8));
    CHECK_FALSE(a.dataset.sessions == c.dataset.sessions);
}

TEST_CASE("scenario tags match round(fraction * n)") {
    for (std::size_t n : {10u, 100u, 1199u}) {
        const auto g = generate(small(n, 0.0234));
        const auto tagged = std::count_if(g.dataset.sessions.begin(), g.dataset.sessions.end(),
                                          [](const Session& s) { return s.meta.at("scenario") == "anomalous"; });
        const double expected = 0.0234 * static_cast<double>(n);
        CHECK(static_cast<std::size_t>(tagged) == (expected < 1.0 ? 0u : static_cast<std::size_t>(std::llround(expected))));
    }
    const auto g = generate(small(10, 0.0234));
    CHECK(g.warnings.size() == 1);
    CHECK(generate(GenConfig{}).dataset.sessions.size() == 1199);
}

TEST_CASE("invalid configurations are rejected") {
    auto c = small(0, 0.1);
    CHECK_THROWS_AS(generate(c), ValidationError);
    c = small(10, 1.5);
    CHECK_THROWS_AS(generate(c), ValidationError);
    c = small(10, 0.1);
    c.mos_period_min_s = 0.0;
    CHECK_THROWS_AS(generate(c), ValidationError);
}

TEST_CASE("samples respect the trace invariants") {
    const auto g = generate(small(60, 0.1));
    validate(g.dataset);
    for (const auto& s : g.dataset.sessions) {
        CHECK(s.kpi.size() == 60);
        for (std::size_t i = 1; i < s.mos.size(); ++i) {
            const double gap = s.mos[i].t - s.mos[i - 1].t;
            CHECK(gap >= 4.0 - 1e-6);
            CHECK(gap <= 5.0 + 1e-6);
        }
    }
}

TEST_CASE("cumulative SNR at 60 s lands in the calibrated bands") {
    const auto g = generate(small(600, 0.1));
    std::size_t normal = 0, normal_in = 0, anomalous = 0, anomalous_in = 0, dipped = 0;
    for (const auto& s : g.dataset.sessions) {
        const double v = *snr_mean_at(s, 60.0);
        const bool is_anomalous = s.meta.at("scenario") == "anomalous";
        if (is_anomalous) {
            ++anomalous;
            anomalous_in += (v >= -4.0 && v <= -0.5) ? 1 : 0;
            const bool dip = std::any_of(s.mos.begin(), s.mos.end(), [](const MosSample& m) { return m.mos < 3.0; });
            dipped += dip ? 1 : 0;
        } else {
            ++normal;
            normal_in += (v >= 3.3 && v <= 4.5) ? 1 : 0;
        }
    }
    CHECK(static_cast<double>(normal_in) >= 0.9 * static_cast<double>(normal));
    CHECK(static_cast<double>(anomalous_in) >= 0.9 * static_cast<double>(anomalous));
    CHECK(static_cast<double>(dipped) >= 0.9 * static_cast<double>(anomalous));
}

TEST_CASE("normal sessions stay above 4.1 MOS after the startup phase") {
    const auto g = generate(small(300, 0.0));
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : g.dataset.sessions) {
        for (const auto& m : s.mos) {
            if (m.t >= 20.0 && m.t <= 60.0) {
                sum += m.mos;
                ++n;
            }
        }
    }
    CHECK(sum / static_cast<double>(n) > 4.1);
}

TEST_CASE("average normal trajectory ramps up then plateaus") {
    const auto g = generate(small(1199, 0.0));
    std::array<double, 15> sum{}, sq{};
    std::array<std::size_t, 15> cnt{};
    for (const auto& s : g.dataset.sessions) {
        if (!s.model_eligible()) continue;
        for (std::size_t i = 0; i < 15; ++i) {
            const double v = s.mos[std::min(i, s.mos.size() - 1)].mos;
            sum[i] += v;
            sq[i] += v * v;
            ++cnt[i];
        }
    }
    std::array<double, 15> avg{}, se{};
    for (std::size_t i = 0; i < 15; ++i) {
        const auto n = static_cast<double>(cnt[i]);
        avg[i] = sum[i] / n;
        se[i] = std::sqrt(std::max(0.0, sq[i] / n - avg[i] * avg[i]) / n);
    }
    for (std::size_t i = 5; i < 15; ++i) CHECK(avg[i] > 4.0);
    // Past the ramp the mean is flat up to sampling noise: allow drops within 3 standard errors.
    for (std::size_t i = 4; i < 15; ++i) {
        const double tol = 3.0 * std::hypot(se[i], se[i - 1]);
        CHECK_MESSAGE(avg[i] >= avg[i - 1] - tol, "point " << i << ": " << avg[i - 1] << " -> " << avg[i]);
    }
    CHECK(avg[0] < avg[14]);
}

TEST_CASE("mos_oracle saturates at the top rung under strong signal") {
    GenConfig c;
    const std::vector<double> snr(60, 30.0), prb(60, 50.0);
    const auto times = times_every(4.5, 60.0);
    const auto mos = mos_oracle(snr, prb, c, times);
    CHECK(mos.back().mos == doctest::Approx(c.abr_ladder.back().quality));
    std::vector<double> thr;
    for (std::size_t k = 0; k < 60; ++k) thr.push_back(throughput_kbps(snr[k], prb[k], c.throughput));
    const auto states = simulate_player(thr, c);
    CHECK(std::none_of(states.begin(), states.end(), [](const PlayerState& s) { return s.stalled; }));
    // Startup ramp reaches the ladder steady state within 15 s.
    const auto q = quality_trace(states, c);
    for (std::size_t k = 14; k < q.size(); ++k) CHECK(q[k] == doctest::Approx(c.abr_ladder.back().quality));
}

TEST_CASE("mos_oracle stalls under a dead link") {
    GenConfig c;
    const std::vector<double> snr(60, -15.0), prb(60, 10.0);
    std::vector<double> thr;
    for (std::size_t k = 0; k < 60; ++k) thr.push_back(throughput_kbps(snr[k], prb[k], c.throughput));
    const auto states = simulate_player(thr, c);
    CHECK(std::any_of(states.begin(), states.end(), [](const PlayerState& s) { return s.stalled; }));
    for (const auto& s : states) {
        CHECK(s.buffer_s >= 0.0);
        if (s.stalled) CHECK(s.buffer_s == 0.0);
    }
    const auto mos = mos_oracle(snr, prb, c, times_every(4.5, 60.0));
    const auto lowest = std::min_element(mos.begin(), mos.end(), [](auto& a, auto& b) { return a.mos < b.mos; });
    CHECK(lowest->mos <= 2.0);
    CHECK_THROWS_AS(mos_oracle(std::vector<double>{}, std::vector<double>{}, c, times_every(4.5, 60.0)), ValidationError);
}

TEST_CASE("mos_oracle is monotone in pointwise SNR") {
    GenConfig c;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 6.0);
    std::uniform_real_distribution<double> lift(0.0, 4.0);
    const auto times = times_every(1.0, 60.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> lo(60), hi(60), prb(60);
        for (std::size_t k = 0; k < 60; ++k) {
            lo[k] = std::clamp(noise(rng), -20.0, 40.0);
            hi[k] = std::min(40.0, lo[k] + (k % 3 == 0 ? lift(rng) : 0.0));
            prb[k] = 30.0 + static_cast<double>(k % 7);
        }
        const auto a = mos_oracle(hi, prb, c, times);
        const auto b = mos_oracle(lo, prb, c, times);
        for (std::size_t i = 0; i < a.size(); ++i) {
            REQUIRE(a[i].mos >= b[i].mos);
            REQUIRE(a[i].mos >= 1.0);
            REQUIRE(a[i].mos <= 5.0);
        }
    }
}

}
