#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vdt/autoencoder.hpp"
#include "vdt/features.hpp"

namespace vdt {

inline constexpr std::size_t kMinAlignedLen = 12;

// (MOS index, value) pairs; index i is compared with pattern point i.
using IndexedSeries = std::vector<std::pair<std::size_t, double>>;

// Mean squared difference over indices < 15. Throws ValidationError when fewer than 12 are aligned.
double session_mse(std::span<const double> series, const Pattern& pattern);
double session_mse(const IndexedSeries& series, const Pattern& pattern);

struct SessionScore {
    std::string session_id;
    double predicted_mse = 0.0;
    double actual_mse = 0.0;
    std::size_t aligned_len = 0;
};

struct ScoreSet {
    std::vector<SessionScore> scores;
    std::vector<std::string> skipped;  // fewer than 12 aligned rows
};

// predictions[i] belongs to rows[i]. Sessions appear in first-seen order.
ScoreSet score_sessions(std::span<const FeatureRow> rows, std::span<const double> predictions, const Pattern& pattern);

// Linear-interpolation percentile.
double percentile_threshold(std::span<const double> scores, double q = 0.90);

// Strictly above the threshold.
std::vector<bool> label_actual(std::span<const double> scores, double threshold);

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::optional<double> precision() const;
    std::optional<double> recall() const;
    std::optional<double> f1() const;
};

Confusion confusion(const std::vector<bool>& predicted, const std::vector<bool>& actual);
Confusion confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn = 0);

struct SweepPoint {
    double threshold = 0.0;
    std::size_t flagged = 0;
    std::optional<double> precision;
    double recall = 0.0;
    std::optional<double> f1;
};

struct Sweep {
    std::vector<SweepPoint> points;  // ascending threshold
    std::size_t best = 0;            // max F1, lowest threshold on ties
};

// Default grid: one value below the minimum score, then every distinct score.
std::vector<double> default_grid(std::span<const double> scores);

// Throws ValidationError when there are no actual positives.
Sweep threshold_sweep(std::span<const double> scores, const std::vector<bool>& actual, std::span<const double> grid);
Sweep threshold_sweep(std::span<const double> scores, const std::vector<bool>& actual);

struct DetectorParams {
    double q = 0.90;
    double actual_quantile = 1.0 - 0.0234;
    std::optional<double> actual_threshold;  // overrides actual_quantile
};

struct DetectionReport {
    DetectorParams params;
    double threshold = 0.0;
    double actual_threshold = 0.0;
    std::vector<SessionScore> scores;
    std::vector<bool> predicted;
    std::vector<bool> actual;
    Confusion counts;
    Sweep sweep;
};

DetectionReport detect(std::span<const SessionScore> scores, const DetectorParams& params = {});

void write_detection_json(const DetectionReport& r, const std::filesystem::path& path);
void write_sweep_csv(const Sweep& s, const std::filesystem::path& path);

}  // namespace vdt
