#include "vdt/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"

#include "vdt/error.hpp"
#include "vdt/stats.hpp"
#include "vdt/text.hpp"

namespace vdt {

double session_mse(std::span<const double> series, const Pattern& pattern) {
    IndexedSeries s;
    for (std::size_t i = 0; i < series.size(); ++i) s.emplace_back(i, series[i]);
    return session_mse(s, pattern);
}

double session_mse(const IndexedSeries& series, const Pattern& pattern) {
    double sse = 0.0;
    std::size_t n = 0;
    for (const auto& [i, v] : series) {
        if (i >= kSeqLen) continue;
        sse += (v - pattern[i]) * (v - pattern[i]);
        ++n;
    }
    if (n < kMinAlignedLen) {
        throw ValidationError("session_mse: " + std::to_string(n) + " aligned points, need " + std::to_string(kMinAlignedLen));
    }
    return sse / static_cast<double>(n);
}

ScoreSet score_sessions(std::span<const FeatureRow> rows, std::span<const double> predictions, const Pattern& pattern) {
    if (rows.size() != predictions.size()) throw ValidationError("score_sessions: rows and predictions differ in length");
    std::vector<std::string> order;
    std::map<std::string, std::pair<IndexedSeries, IndexedSeries>> series;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto [it, fresh] = series.try_emplace(rows[i].session_id);
        if (fresh) order.push_back(rows[i].session_id);
        it->second.first.emplace_back(rows[i].mos_index, predictions[i]);
        it->second.second.emplace_back(rows[i].mos_index, rows[i].mos);
    }
    ScoreSet out;
    for (const auto& id : order) {
        const auto& [pred, actual] = series.at(id);
        const auto aligned = static_cast<std::size_t>(
            std::count_if(actual.begin(), actual.end(), [](const auto& p) { return p.first < kSeqLen; }));
        if (aligned < kMinAlignedLen) {
            out.skipped.push_back(id);
            continue;
        }
        out.scores.push_back({id, session_mse(pred, pattern), session_mse(actual, pattern), aligned});
    }
    return out;
}

double percentile_threshold(std::span<const double> scores, double q) {
    if (scores.empty()) throw ValidationError("percentile of an empty score list");
    return stats::percentile(scores, q);
}

std::vector<bool> label_actual(std::span<const double> scores, double threshold) {
    std::vector<bool> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] > threshold;
    return out;
}

std::optional<double> Confusion::precision() const {
    if (tp + fp == 0) return std::nullopt;
    return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

std::optional<double> Confusion::recall() const {
    if (tp + fn == 0) return std::nullopt;
    return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

std::optional<double> Confusion::f1() const {
    const auto p = precision();
    const auto r = recall();
    if (!p || !r) return std::nullopt;
    if (*p + *r == 0.0) return 0.0;
    return 2.0 * *p * *r / (*p + *r);
}

Confusion confusion(const std::vector<bool>& predicted, const std::vector<bool>& actual) {
    if (predicted.size() != actual.size()) throw ValidationError("confusion: label sets differ in size");
    Confusion c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i]) {
            ++(actual[i] ? c.tp : c.fp);
        } else {
            ++(actual[i] ? c.fn : c.tn);
        }
    }
    return c;
}

Confusion confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    return Confusion{tp, fp, fn, tn};
}

std::vector<double> default_grid(std::span<const double> scores) {
    if (scores.empty()) throw ValidationError("threshold grid needs scores");
    std::vector<double> grid(scores.begin(), scores.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    const double below = grid.front() - std::max(1.0, std::abs(grid.front()));
    grid.insert(grid.begin(), below);
    return grid;
}

Sweep threshold_sweep(std::span<const double> scores, const std::vector<bool>& actual, std::span<const double> grid) {
    if (scores.size() != actual.size()) throw ValidationError("threshold_sweep: scores and labels differ in size");
    if (std::none_of(actual.begin(), actual.end(), [](bool b) { return b; })) {
        throw ValidationError("threshold_sweep: no actual anomalies, recall is undefined");
    }
    if (grid.empty()) throw ValidationError("threshold_sweep: empty grid");
    std::vector<double> sorted_grid(grid.begin(), grid.end());
    std::sort(sorted_grid.begin(), sorted_grid.end());

    Sweep s;
    std::vector<bool> flagged(scores.size());
    std::optional<double> best_f1;
    for (double thr : sorted_grid) {
        for (std::size_t i = 0; i < scores.size(); ++i) flagged[i] = scores[i] > thr;
        const auto c = confusion(flagged, actual);
        SweepPoint p{thr, c.tp + c.fp, c.precision(), *c.recall(), c.f1()};
        if (p.f1 && (!best_f1 || *p.f1 > *best_f1)) {
            best_f1 = p.f1;
            s.best = s.points.size();
        }
        s.points.push_back(p);
    }
    return s;
}

Sweep threshold_sweep(std::span<const double> scores, const std::vector<bool>& actual) {
    const auto grid = default_grid(scores);
    return threshold_sweep(scores, actual, grid);
}

DetectionReport detect(std::span<const SessionScore> scores, const DetectorParams& params) {
    if (scores.empty()) throw ValidationError("detect: no scored sessions");
    DetectionReport r;
    r.params = params;
    r.scores.assign(scores.begin(), scores.end());
    std::vector<double> pred, act;
    for (const auto& s : scores) {
        pred.push_back(s.predicted_mse);
        act.push_back(s.actual_mse);
    }
    r.threshold = percentile_threshold(pred, params.q);
    r.actual_threshold = params.actual_threshold ? *params.actual_threshold : percentile_threshold(act, params.actual_quantile);
    r.predicted = label_actual(pred, r.threshold);
    r.actual = label_actual(act, r.actual_threshold);
    r.counts = confusion(r.predicted, r.actual);
    r.sweep = threshold_sweep(pred, r.actual);
    return r;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

void write_detection_json(const DetectionReport& r, const std::filesystem::path& path) {
    nlohmann::json j;
    j["q"] = r.params.q;
    j["threshold"] = r.threshold;
    j["actual_threshold"] = r.actual_threshold;
    j["actual_quantile"] = r.params.actual_threshold ? nlohmann::json(nullptr) : nlohmann::json(r.params.actual_quantile);
    j["confusion"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}};
    j["precision"] = opt(r.counts.precision());
    j["recall"] = opt(r.counts.recall());
    j["f1"] = opt(r.counts.f1());
    const auto& best = r.sweep.points.at(r.sweep.best);
    j["max_f1"] = {{"threshold", best.threshold}, {"precision", opt(best.precision)}, {"recall", best.recall}, {"f1", opt(best.f1)}};
    auto sessions = nlohmann::json::array();
    for (std::size_t i = 0; i < r.scores.size(); ++i) {
        const auto& s = r.scores[i];
        sessions.push_back({{"session_id", s.session_id},
                            {"predicted_mse", s.predicted_mse},
                            {"actual_mse", s.actual_mse},
                            {"aligned_len", s.aligned_len},
                            {"predicted_anomalous", static_cast<bool>(r.predicted[i])},
                            {"actual_anomalous", static_cast<bool>(r.actual[i])}});
    }
    j["sessions"] = std::move(sessions);
    auto sweep = nlohmann::json::array();
    for (const auto& p : r.sweep.points) {
        sweep.push_back({{"threshold", p.threshold}, {"flagged", p.flagged}, {"precision", opt(p.precision)},
                         {"recall", p.recall}, {"f1", opt(p.f1)}});
    }
    j["sweep"] = std::move(sweep);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path.string());
    out << j.dump(1) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

void write_sweep_csv(const Sweep& s, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path.string());
    out << "threshold,precision,recall,f1\n";
    auto cell = [](const std::optional<double>& v) { return v ? text::format_exact(*v) : std::string(); };
    for (const auto& p : s.points) {
        out << text::format_exact(p.threshold) << ',' << cell(p.precision) << ',' << text::format_exact(p.recall) << ','
            << cell(p.f1) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace vdt
