#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "vdt/trees.hpp"

namespace vdt {

struct LearnerArtifact {
    LearnerSpec spec;
    std::uint64_t seed = 0;
    AnyModel model;
};

// JSON with the full node arrays, per-tree seeds and a hash of the model body.
void save_learner(const LearnerArtifact& a, const std::filesystem::path& path);
// MissingArtifactError when absent, ValidationError when malformed or the hash does not match.
LearnerArtifact load_learner(const std::filesystem::path& path);

void write_eval_reports_json(std::span<const EvalReport> reports, const std::filesystem::path& path);

}  // namespace vdt
