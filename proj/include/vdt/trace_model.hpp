#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vdt {

enum class Kpi { rsrp = 0, rsrq = 1, snr = 2, prb = 3 };

inline constexpr std::array<Kpi, 4> kAllKpis = {Kpi::rsrp, Kpi::rsrq, Kpi::snr, Kpi::prb};

std::string_view kpi_name(Kpi k);

inline constexpr double kSessionDurationCap = 60.0;
inline constexpr std::size_t kMinMosSamples = 12;

/// One timestamped RF measurement row. Any subset of the KPIs may be absent.
struct KpiSample {
    double t = 0.0;
    std::optional<double> rsrp;
    std::optional<double> rsrq;
    std::optional<double> snr;
    std::optional<double> prb;

    std::optional<double> get(Kpi k) const;
    void set(Kpi k, std::optional<double> v);

    bool operator==(const KpiSample&) const = default;
};

struct MosSample {
    double t = 0.0;
    double mos = 0.0;

    bool operator==(const MosSample&) const = default;
};

/// A benchmark video test of at most 60 s: KPI series, MOS series and free-form tags.
struct Session {
    std::string id;
    std::vector<KpiSample> kpi;
    std::vector<MosSample> mos;
    std::map<std::string, std::string> meta;

    bool model_eligible() const { return mos.size() >= kMinMosSamples; }

    bool operator==(const Session&) const = default;
};

struct Dataset {
    std::vector<Session> sessions;
    std::string provenance;

    const Session* find(std::string_view id) const;
};

/// Value ranges a sample must satisfy. SNR bounds are a validation choice, not a radio limit.
struct Limits {
    double duration_cap = kSessionDurationCap;
    double rsrp_min = -140.0, rsrp_max = -44.0;
    double rsrq_min = -19.5, rsrq_max = -3.0;
    double snr_min = -20.0, snr_max = 40.0;
    double prb_min = 0.0;
    double mos_min = 1.0, mos_max = 5.0;
};

// Rejection reason, or nullopt when the sample is valid.
std::optional<std::string> check_kpi(const KpiSample& s, const Limits& limits = {});
std::optional<std::string> check_mos(const MosSample& s, const Limits& limits = {});

// Throws ValidationError on the first violated invariant (ordering, ranges, unique ids).
void validate(const Dataset& d, const Limits& limits = {});

Dataset filter_model_eligible(const Dataset& d);

/// Maps logical fields onto CSV header names.
struct CsvSchema {
    std::string session_id = "session_id";
    std::string t = "t";
    std::string rsrp = "rsrp";
    std::string rsrq = "rsrq";
    std::string snr = "snr";
    std::string prb = "prb";
    std::string mos = "mos";
};

struct RowRejection {
    std::size_t line = 0;  // 1-based, header is line 1
    std::string reason;
};

struct IngestResult {
    Dataset dataset;
    std::size_t total_rows = 0;
    std::size_t accepted_rows = 0;
    std::vector<RowRejection> rejections;
};

// Rows are long-format: a row carries KPI cells, a MOS cell, or both. Sessions are contiguous
// runs of rows sharing a session id; an id that reappears later is a duplicate.
IngestResult ingest_csv(const std::filesystem::path& path, const CsvSchema& schema = {},
                        const Limits& limits = {});

// Six fractional digits. Meta tags go to the sidecar returned by meta_sidecar_path().
void write_csv(const Dataset& d, const std::filesystem::path& path);

std::filesystem::path meta_sidecar_path(const std::filesystem::path& csv_path);

}  // namespace vdt
