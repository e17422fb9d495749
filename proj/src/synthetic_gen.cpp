#include "vdt/synthetic_gen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "vdt/error.hpp"
#include "vdt/text.hpp"

namespace vdt {

void GenConfig::validate() const {
    auto fail = [](const std::string& what) { throw ValidationError("generator config: " + what); };
    if (n_sessions == 0) fail("n_sessions must be positive");
    if (!(anomaly_fraction >= 0.0 && anomaly_fraction <= 1.0)) fail("anomaly_fraction must lie in [0,1]");
    if (!(duration_s > 0.0 && duration_s <= kSessionDurationCap)) fail("duration_s must lie in (0, 60]");
    if (kpi_period_s != 1.0) fail("kpi_period_s must be 1 (the player steps once per second)");
    if (!(mos_period_min_s > 0.0 && mos_period_min_s <= mos_period_max_s)) fail("mos periods must be positive and ordered");
    if (abr_ladder.empty()) fail("abr_ladder is empty");
    for (std::size_t i = 1; i < abr_ladder.size(); ++i) {
        if (abr_ladder[i].quality < abr_ladder[i - 1].quality) fail("ladder qualities must be non-decreasing");
    }
    if (!(std::abs(snr_process.ar_coefficient) < 1.0)) fail("ar_coefficient must lie in (-1, 1)");
    if (snr_process.noise_std < 0.0 || mos_noise_std < 0.0) fail("noise std must be non-negative");
    if (player.segment_s < 1) fail("segment_s must be at least 1");
    if (!(player.reference_bitrate_kbps > 0.0)) fail("reference_bitrate_kbps must be positive");
    if (!(player.down_threshold_s < player.up_threshold_s)) fail("down threshold must be below up threshold");
    if (!(anomaly.onset_min_s <= anomaly.onset_max_s)) fail("anomaly onset range inverted");
    for (double p : {missing_rsrp, missing_rsrq, missing_snr, missing_prb}) {
        if (!(p >= 0.0 && p < 1.0)) fail("missing fractions must lie in [0,1)");
    }
}

double throughput_kbps(double snr_db, double prb, const ThroughputModel& model) {
    const double spectral_efficiency = std::log2(1.0 + std::pow(10.0, snr_db / 10.0));
    return model.kbps_per_spectral_efficiency * spectral_efficiency * std::max(prb, 0.0) / model.prb_reference;
}

std::vector<PlayerState> simulate_player(std::span<const double> throughput, const GenConfig& config) {
    if (throughput.empty()) throw ValidationError("player needs a non-empty throughput series");
    const auto& p = config.player;
    const int top = static_cast<int>(config.abr_ladder.size()) - 1;

    std::vector<PlayerState> out;
    out.reserve(throughput.size());
    PlayerState st;
    for (std::size_t k = 0; k < throughput.size(); ++k) {
        const double arrived = std::max(throughput[k], 0.0) / p.reference_bitrate_kbps;
        const double available = st.buffer_s + arrived;
        st.stalled = available < 1.0;
        st.buffer_s = std::min(p.buffer_max_s, std::max(0.0, available - 1.0));
        st.startup_done = st.startup_done || !st.stalled;
        const auto second = static_cast<int>(k + 1);
        if (second % p.segment_s == 0) {
            if (st.buffer_s > p.up_threshold_s && st.current_rung < top) {
                ++st.current_rung;
            } else if (st.buffer_s < p.down_threshold_s && st.current_rung > 0) {
                --st.current_rung;
            }
        }
        out.push_back(st);
    }
    return out;
}

std::vector<double> quality_trace(std::span<const PlayerState> states, const GenConfig& config) {
    const auto& p = config.player;
    std::vector<double> q(states.size());
    for (std::size_t k = 0; k < states.size(); ++k) {
        const double second = static_cast<double>(k + 1);
        double v = config.abr_ladder[static_cast<std::size_t>(states[k].current_rung)].quality;
        if (states[k].stalled) v -= p.stall_penalty;
        v -= p.startup_ramp_amplitude * std::max(0.0, 1.0 - second / p.startup_ramp_s);
        q[k] = std::clamp(v, 1.0, 5.0);
    }
    return q;
}

std::vector<MosSample> mos_oracle(std::span<const double> snr, std::span<const double> prb,
                                  const GenConfig& config, std::span<const double> sample_times) {
    if (snr.empty() || prb.empty()) throw ValidationError("mos_oracle: empty input series");
    if (snr.size() != prb.size()) throw ValidationError("mos_oracle: snr and prb lengths differ");
    std::vector<double> thr(snr.size());
    for (std::size_t k = 0; k < snr.size(); ++k) thr[k] = throughput_kbps(snr[k], prb[k], config.throughput);
    const auto states = simulate_player(thr, config);
    const auto quality = quality_trace(states, config);

    std::vector<MosSample> out;
    out.reserve(sample_times.size());
    const auto last = static_cast<long>(quality.size());
    for (double t : sample_times) {
        const long second = std::clamp(static_cast<long>(std::floor(t)), 1L, last);
        out.push_back({t, quality[static_cast<std::size_t>(second - 1)]});
    }
    return out;
}

std::vector<double> draw_mos_times(std::mt19937_64& rng, const GenConfig& config) {
    std::uniform_real_distribution<double> gap(config.mos_period_min_s, config.mos_period_max_s);
    std::vector<double> times;
    double t = text::quantize6(gap(rng));
    while (t <= config.duration_s) {
        times.push_back(t);
        t = text::quantize6(t + gap(rng));
    }
    return times;
}

std::uint64_t session_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 over the (seed, index) pair
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

enum class Scenario { normal, late_fade, oscillation };

// Mean SNR at second s (1-based) for a fade that starts at `onset` and settles at `level`.
double fade_mean(double s, double pre, double level, double onset, Scenario shape, const AnomalyShape& a) {
    if (s < onset) return pre;
    double target = level;
    if (shape == Scenario::oscillation) {
        target += a.oscillation_amplitude_db * std::sin(2.0 * std::numbers::pi * (s - onset) / a.oscillation_period_s);
    }
    if (a.transition_s > 0.0 && s < onset + a.transition_s) {
        const double w = (s - onset) / a.transition_s;
        return (1.0 - w) * pre + w * target;
    }
    return target;
}

Session make_session(std::size_t index, Scenario scenario, const GenConfig& cfg, std::vector<double>& clean) {
    std::mt19937_64 rng(session_seed(cfg.seed, index));
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const auto n = static_cast<std::size_t>(std::lround(cfg.duration_s / cfg.kpi_period_s));
    const auto& sp = cfg.snr_process;
    const double pre = sp.mean_normal + sp.session_offset_std * unit(rng);

    std::vector<double> mean(n, pre);
    if (scenario != Scenario::normal) {
        const auto& a = cfg.anomaly;
        const double onset = a.onset_min_s + (a.onset_max_s - a.onset_min_s) * uniform(rng);
        const double target = sp.mean_anomalous + a.level_jitter_db * (2.0 * uniform(rng) - 1.0);
        // The session mean is affine in the fade level; solve for the level hitting the target.
        auto session_mean = [&](double level) {
            double sum = 0.0;
            for (std::size_t k = 0; k < n; ++k) sum += fade_mean(static_cast<double>(k + 1), pre, level, onset, scenario, a);
            return sum / static_cast<double>(n);
        };
        const double base = session_mean(0.0);
        const double slope = session_mean(1.0) - base;
        const double level = (target - base) / slope;
        for (std::size_t k = 0; k < n; ++k) mean[k] = fade_mean(static_cast<double>(k + 1), pre, level, onset, scenario, a);
    }

    const double stationary = sp.noise_std / std::sqrt(1.0 - sp.ar_coefficient * sp.ar_coefficient);
    double e = stationary * unit(rng);
    std::vector<double> snr(n), prb(n);
    Session s;
    s.kpi.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (k > 0) e = sp.ar_coefficient * e + sp.noise_std * unit(rng);
        snr[k] = text::quantize6(std::clamp(mean[k] + e, -20.0, 40.0));

        KpiSample row;
        row.t = static_cast<double>(k + 1) * cfg.kpi_period_s;
        const double rsrp = cfg.rsrp_map.intercept + cfg.rsrp_map.slope * snr[k] + cfg.rsrp_map.noise_std * unit(rng);
        const double rsrq = cfg.rsrq_map.intercept + cfg.rsrq_map.slope * snr[k] + cfg.rsrq_map.noise_std * unit(rng);
        const double prb_raw = cfg.prb_map.intercept + cfg.prb_map.slope * snr[k] + cfg.prb_map.noise_std * unit(rng);
        prb[k] = std::round(std::clamp(prb_raw, 0.0, cfg.prb_max));

        if (uniform(rng) >= cfg.missing_rsrp) row.rsrp = text::quantize6(std::clamp(rsrp, -140.0, -44.0));
        if (uniform(rng) >= cfg.missing_rsrq) row.rsrq = text::quantize6(std::clamp(rsrq, -19.5, -3.0));
        if (uniform(rng) >= cfg.missing_snr) row.snr = snr[k];
        if (uniform(rng) >= cfg.missing_prb) row.prb = prb[k];
        s.kpi.push_back(row);
    }

    const auto times = draw_mos_times(rng, cfg);
    const auto oracle = mos_oracle(snr, prb, cfg, times);
    clean.clear();
    for (const auto& m : oracle) {
        clean.push_back(m.mos);
        const double noisy = std::clamp(m.mos + cfg.mos_noise_std * unit(rng), 1.0, 5.0);
        s.mos.push_back({m.t, text::quantize6(noisy)});
    }

    char id[32];
    std::snprintf(id, sizeof(id), "S%05zu", index);
    s.id = id;
    switch (scenario) {
        case Scenario::normal: s.meta["scenario"] = "normal"; break;
        case Scenario::late_fade:
            s.meta["scenario"] = "anomalous";
            s.meta["shape"] = "late_fade";
            break;
        case Scenario::oscillation:
            s.meta["scenario"] = "anomalous";
            s.meta["shape"] = "oscillation";
            break;
    }
    return s;
}

}  // namespace

Generated generate(const GenConfig& config) {
    config.validate();
    Generated out;

    const double expected = config.anomaly_fraction * static_cast<double>(config.n_sessions);
    auto n_anomalous = static_cast<std::size_t>(std::llround(expected));
    if (config.anomaly_fraction > 0.0 && expected < 1.0) {
        out.warnings.push_back("anomaly_fraction * n_sessions < 1: generating zero anomalous sessions");
        n_anomalous = 0;
    }

    // Which sessions are anomalous, and with which shape, depends only on the global seed.
    std::vector<std::size_t> order(config.n_sessions);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 assign(session_seed(config.seed, 0xA55A'A55AULL));
    std::shuffle(order.begin(), order.end(), assign);
    std::vector<Scenario> scenario(config.n_sessions, Scenario::normal);
    for (std::size_t i = 0; i < n_anomalous; ++i) {
        scenario[order[i]] = (i % 2 == 0) ? Scenario::late_fade : Scenario::oscillation;
    }

    out.dataset.sessions.reserve(config.n_sessions);
    out.clean_mos.resize(config.n_sessions);
    for (std::size_t i = 0; i < config.n_sessions; ++i) {
        out.dataset.sessions.push_back(make_session(i, scenario[i], config, out.clean_mos[i]));
    }
    out.dataset.provenance = "generator:seed=" + std::to_string(config.seed) +
                             ",n_sessions=" + std::to_string(config.n_sessions);
    return out;
}

}  // namespace vdt
