#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "vdt/config.hpp"

namespace vdt::pipeline {

// Every stage reads its inputs from and writes its outputs to `config.out`. Inputs are checked
// against the hashes in manifest.json; a missing or changed upstream file raises
// MissingArtifactError naming the artifact.
void generate(const RunConfig& config, std::ostream& log);
void ingest(const RunConfig& config, std::ostream& log);
void features(const RunConfig& config, std::ostream& log);
void train_pattern(const RunConfig& config, std::ostream& log);
void train_predictor(const RunConfig& config, std::ostream& log);
void detect(const RunConfig& config, std::ostream& log);
void explain(const RunConfig& config, std::ostream& log);
void report(const RunConfig& config, std::ostream& log);

// generate through report.
void run_all(const RunConfig& config, std::ostream& log);

// File name of an artifact inside the output directory.
std::string artifact_file(const std::string& name);

}  // namespace vdt::pipeline
