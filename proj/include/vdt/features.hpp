#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vdt/trace_model.hpp"

namespace vdt {

inline constexpr std::size_t kNumFeatures = 14;

// Column order used everywhere: two temporal features, then (current, block, session) per KPI.
enum class Feature : std::size_t {
    sess_time = 0,
    block_len,
    rsrp_c, rsrp_b, rsrp_s,
    rsrq_c, rsrq_b, rsrq_s,
    snr_c, snr_b, snr_s,
    prb_c, prb_b, prb_s,
};

const std::array<std::string_view, kNumFeatures>& feature_names();
std::optional<Feature> feature_from_name(std::string_view name);

using FeatureVector = std::array<double, kNumFeatures>;

struct FeatureRow {
    std::string session_id;
    std::size_t mos_index = 0;
    FeatureVector x{};
    double mos = 0.0;

    double operator[](Feature f) const { return x[static_cast<std::size_t>(f)]; }
    bool operator==(const FeatureRow&) const = default;
};

struct TimedValue {
    double t = 0.0;
    std::optional<double> value;
};

std::vector<TimedValue> kpi_series(std::span<const KpiSample> kpi, Kpi k);

// Each absent KPI takes the next later present value of the same KPI; trailing gaps stay absent.
std::vector<KpiSample> backward_fill(std::span<const KpiSample> kpi);
std::vector<TimedValue> backward_fill(std::span<const TimedValue> values);

// Mean of present values with t <= upto_t; nullopt when there are none.
std::optional<double> cumulative_mean(std::span<const TimedValue> values, double upto_t);

// Mean of present values with t in (t_prev, t_now]; nullopt when the block is empty.
// Throws std::invalid_argument unless t_prev < t_now.
std::optional<double> block_mean(std::span<const TimedValue> values, double t_prev, double t_now);

struct FeatureBuild {
    std::vector<FeatureRow> rows;
    std::size_t dropped = 0;  // MOS samples whose row had an absent feature
};

// One row per MOS sample. Only KPI samples with t <= the MOS timestamp are read.
FeatureBuild build_session_rows(const Session& s);
FeatureBuild build_rows(const Dataset& d);

struct CorrelationMatrix {
    std::vector<std::string> names;         // retained columns, features then "mos"
    std::vector<std::vector<double>> values;
    std::vector<std::string> excluded;      // constant columns
};

// Pearson correlation over the 14 features plus MOS. Throws ValidationError on fewer than 2 rows.
CorrelationMatrix pearson_matrix(std::span<const FeatureRow> rows);

void write_features_csv(std::span<const FeatureRow> rows, const std::filesystem::path& path);
std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path);

}  // namespace vdt
