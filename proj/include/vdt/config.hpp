#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "vdt/anomaly.hpp"
#include "vdt/autoencoder.hpp"
#include "vdt/explainer.hpp"
#include "vdt/synthetic_gen.hpp"
#include "vdt/trees.hpp"

namespace vdt {

struct PatternConfig {
    bool grid_search = true;
    HyperGrid grid;
    Hyper hyper;  // used when grid_search is off
    double split_ratio = 0.75;
};

struct PredictorConfig {
    std::size_t trials = 50;
    double train_ratio = 0.75;
    std::size_t folds = 5;
    TreeParams tree{-1, 2, 0};
    ForestParams forest;
    BoostParams boost;
    // Learner whose out-of-fold predictions feed detection and whose full fit is explained.
    LearnerKind detect_learner = LearnerKind::forest;
};

struct ExplainConfig {
    std::size_t shap_rows = 100;
    DistillParams distill;
    double snr_horizon_s = kSessionDurationCap;
    bool snr_labels_actual = true;  // false: use the detector's predicted labels
};

/// Stage seeds default to values derived from the global seed.
struct RunConfig {
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> generate_seed;
    std::optional<std::uint64_t> pattern_seed;
    std::optional<std::uint64_t> predictor_seed;

    std::filesystem::path input;  // CSV for `ingest`
    std::filesystem::path out = "vdt-out";

    GenConfig gen;
    PatternConfig pattern;
    PredictorConfig predictor;
    DetectorParams detector;
    ExplainConfig explain;

    std::uint64_t resolved_generate_seed() const;
    std::uint64_t resolved_pattern_seed() const;
    std::uint64_t resolved_predictor_seed() const;
};

// `key = value` lines; '#' starts a comment. Unknown keys and bad values throw ValidationError.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
void apply_setting(RunConfig& c, const std::string& key, const std::string& value);

// Every key with its current value, one per line in a fixed order. Paths are left out so the
// text (and its hash) does not depend on where a run writes.
std::string serialize_config(const RunConfig& c);

}  // namespace vdt
