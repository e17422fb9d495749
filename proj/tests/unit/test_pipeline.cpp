#include <filesystem>
#include <sstream>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

#include "vdt/config.hpp"
#include "vdt/error.hpp"
#include "vdt/pipeline.hpp"

using namespace vdt;
namespace fs = std::filesystem;

namespace {

RunConfig quick(const fs::path& out) {
    auto c = load_config(fs::path(VDT_SOURCE_DIR) / "configs" / "quick.conf");
    c.gen.n_sessions = 150;
    c.predictor.trials = 2;
    c.out = out;
    return c;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config parsing") {
    const auto c = parse_config("# comment\nseed = 7\n\ngen.n_sessions = 40  # trailing\npattern.dropout=0.1\n");
    CHECK(c.seed == 7);
    CHECK(c.gen.n_sessions == 40);
    CHECK(c.pattern.hyper.dropout == 0.1);
    CHECK(c.resolved_generate_seed() == 7);
    CHECK(c.resolved_pattern_seed() != c.resolved_predictor_seed());

    CHECK_THROWS_AS(parse_config("no.such.key = 1\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("gen.n_sessions = many\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("gen.n_sessions = 0\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("just text\n"), ValidationError);
    CHECK_THROWS_AS(load_config("/nonexistent/vdt.conf"), IoError);

    RunConfig custom = c;
    apply_setting(custom, "predictor.forest.n_trees", "17");
    apply_setting(custom, "detector.actual_threshold", "0.3");
    apply_setting(custom, "gen.abr_ladder", "300:2,900:3.5,2500:4.6");
    const auto text = serialize_config(custom);
    const auto back = parse_config(text);
    CHECK(serialize_config(back) == text);
    CHECK(back.predictor.forest.n_trees == 17);
    CHECK(*back.detector.actual_threshold == 0.3);
    CHECK(back.gen.abr_ladder.size() == 3);
    CHECK(serialize_config(parse_config(serialize_config(RunConfig{}))) == serialize_config(RunConfig{}));
}

TEST_CASE("the quick pipeline emits every artifact and is reproducible") {
    testing::TempDir a, b;
    std::ostringstream log;
    pipeline::run_all(quick(a.path()), log);
    for (const char* name : {"config", "sessions", "features", "pearson", "autoencoder", "pattern",
                             "pattern_training", "eval", "predictor", "predictions", "detection", "sweep",
                             "explanation", "attributions", "distilled_tree", "decision_path", "snr_curves", "report"}) {
        CAPTURE(name);
        CHECK(fs::exists(a.path() / pipeline::artifact_file(name)));
    }
    CHECK(fs::exists(a.path() / "manifest.json"));

    const auto report = nlohmann::json::parse(testing::read_file(a.path() / "report.json"));
    CHECK(report["typical_pattern"]["values"].size() == 15);
    CHECK(report.contains("config_sha256"));

    pipeline::run_all(quick(b.path()), log);
    CHECK(testing::read_file(a.path() / "report.json") == testing::read_file(b.path() / "report.json"));
    CHECK(testing::read_file(a.path() / "predictions.csv") == testing::read_file(b.path() / "predictions.csv"));
}

TEST_CASE("stages refuse missing or stale upstream artifacts") {
    testing::TempDir dir;
    std::ostringstream log;
    const auto c = quick(dir.path());
    CHECK_THROWS_AS(pipeline::features(c, log), MissingArtifactError);

    pipeline::generate(c, log);
    pipeline::features(c, log);
    CHECK_THROWS_WITH_AS(pipeline::detect(c, log), doctest::Contains("predictions"), MissingArtifactError);
    pipeline::train_predictor(c, log);
    CHECK_THROWS_WITH_AS(pipeline::detect(c, log), doctest::Contains("'pattern'"), MissingArtifactError);

    auto text = testing::read_file(dir / "features.csv");
    text += "S99999,0,1,1,-90,-90,-90,-10,-10,-10,5,5,5,40,40,40,4\n";
    testing::write_file(dir / "features.csv", text);
    CHECK_THROWS_WITH_AS(pipeline::train_predictor(c, log), doctest::Contains("stale"), MissingArtifactError);

    pipeline::features(c, log);
    fs::remove(dir / "sessions.csv");
    CHECK_THROWS_AS(pipeline::features(c, log), MissingArtifactError);
}

TEST_CASE("regenerated sessions invalidate downstream stages") {
    testing::TempDir dir;
    std::ostringstream log;
    auto c = quick(dir.path());
    pipeline::generate(c, log);
    pipeline::features(c, log);
    c.gen.n_sessions = 160;
    pipeline::generate(c, log);
    CHECK_THROWS_WITH_AS(pipeline::train_predictor(c, log), doctest::Contains("features"), MissingArtifactError);
    pipeline::features(c, log);
}

TEST_CASE("ingest replaces generated sessions with an external CSV") {
    testing::TempDir src, dir;
    std::ostringstream log;
    auto c = quick(src.path());
    pipeline::generate(c, log);

    auto d = quick(dir.path());
    CHECK_THROWS_AS(pipeline::ingest(d, log), ValidationError);
    d.input = src.path() / "sessions.csv";
    pipeline::ingest(d, log);
    CHECK(testing::read_file(dir / "sessions.csv") == testing::read_file(src / "sessions.csv"));
    const auto r = nlohmann::json::parse(testing::read_file(dir / "ingest_report.json"));
    CHECK(r["rejected_rows"] == 0);
    CHECK(r["sessions"] == 150);
    pipeline::features(d, log);
    CHECK(fs::exists(dir / "features.csv"));
}

}
