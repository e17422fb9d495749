#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vdt/trace_model.hpp"

namespace vdt {

struct LadderRung {
    double bitrate_kbps = 0.0;
    double quality = 1.0;  // MOS at steady state on this rung
};

/// First-order autoregressive SNR around a scenario mean.
struct SnrProcess {
    double mean_normal = 3.9;
    // Session-average SNR targeted for anomalous sessions; the post-onset fade level is solved from it.
    double mean_anomalous = -2.25;
    double ar_coefficient = 0.7;
    double noise_std = 0.6;
    double session_offset_std = 0.15;
};

/// Buffer-driven HAS player used by the MOS oracle. One simulation step is one second.
struct PlayerParams {
    double buffer_max_s = 12.0;
    double up_threshold_s = 8.0;
    double down_threshold_s = 3.0;
    // Rung decisions happen only at segment boundaries (t a multiple of this), identical for every run.
    int segment_s = 2;
    // Media seconds arriving per second = throughput / reference bitrate, independent of the rung.
    double reference_bitrate_kbps = 1500.0;
    double stall_penalty = 1.5;
    double startup_ramp_amplitude = 0.8;
    double startup_ramp_s = 12.0;
};

struct ThroughputModel {
    double kbps_per_spectral_efficiency = 2500.0;  // at the reference PRB allocation
    double prb_reference = 50.0;
};

/// Affine KPI = intercept + slope·SNR + N(0, noise_std²), clamped to the valid range.
struct AffineKpiMap {
    double intercept = 0.0;
    double slope = 0.0;
    double noise_std = 0.0;
};

struct AnomalyShape {
    double onset_min_s = 11.0;
    double onset_max_s = 16.0;
    double transition_s = 3.0;
    double level_jitter_db = 0.5;
    double oscillation_amplitude_db = 2.0;
    double oscillation_period_s = 10.0;
};

struct GenConfig {
    std::size_t n_sessions = 1199;
    double anomaly_fraction = 0.0234;
    double duration_s = 60.0;
    double kpi_period_s = 1.0;
    double mos_period_min_s = 4.0;
    double mos_period_max_s = 5.0;
    std::uint64_t seed = 1;

    SnrProcess snr_process;
    std::vector<LadderRung> abr_ladder = {
        {300.0, 2.0}, {750.0, 2.9}, {1500.0, 3.6}, {3000.0, 4.1}, {4500.0, 4.4}};
    PlayerParams player;
    ThroughputModel throughput;

    AffineKpiMap rsrp_map{-95.0, 2.0, 3.0};
    AffineKpiMap rsrq_map{-11.0, 0.5, 1.0};
    AffineKpiMap prb_map{40.0, 2.0, 5.0};
    double prb_max = 100.0;

    // Fraction of KPI samples dropped per column (asynchronous collection).
    double missing_rsrp = 0.27;
    double missing_rsrq = 0.27;
    double missing_snr = 0.0;
    double missing_prb = 0.4;

    double mos_noise_std = 0.1;
    AnomalyShape anomaly;

    // Throws ValidationError on out-of-range parameters.
    void validate() const;
};

struct PlayerState {
    double buffer_s = 0.0;
    int current_rung = 0;
    bool stalled = false;
    bool startup_done = false;
};

double throughput_kbps(double snr_db, double prb, const ThroughputModel& model);

// Per-second player trajectory; element k is the state at the end of second k+1.
std::vector<PlayerState> simulate_player(std::span<const double> throughput, const GenConfig& config);

// Noise-free per-second quality implied by a player trajectory, clamped to [1, 5].
std::vector<double> quality_trace(std::span<const PlayerState> states, const GenConfig& config);

/// Stand-in for a perceptual video-quality tool: per-second SNR and PRB series in, MOS samples out
/// at the given sample times. Pointwise monotone non-decreasing in SNR.
std::vector<MosSample> mos_oracle(std::span<const double> snr, std::span<const double> prb,
                                  const GenConfig& config, std::span<const double> sample_times);

// MOS sample times with gaps uniform in [mos_period_min_s, mos_period_max_s], up to duration_s.
std::vector<double> draw_mos_times(std::mt19937_64& rng, const GenConfig& config);

std::uint64_t session_seed(std::uint64_t seed, std::uint64_t index);

struct Generated {
    Dataset dataset;
    // Oracle MOS before observation noise, aligned with dataset.sessions[i].mos.
    std::vector<std::vector<double>> clean_mos;
    std::vector<std::string> warnings;
};

// Sessions carry meta["scenario"] in {"normal", "anomalous"} and meta["shape"] for anomalies.
Generated generate(const GenConfig& config);

}  // namespace vdt
