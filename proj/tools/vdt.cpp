#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "vdt/config.hpp"
#include "vdt/error.hpp"
#include "vdt/pipeline.hpp"

namespace {

// Exit codes: 0 ok, 1 usage or unexpected failure, 2 I/O, 3 validation, 4 divergence, 5 missing artifact.
constexpr int kUsage = 1;

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string input;
    std::vector<std::string> sets;
};

vdt::RunConfig resolve(const Options& o) {
    vdt::RunConfig c;
    if (!o.config_path.empty()) c = vdt::load_config(o.config_path);
    for (const auto& s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw vdt::ValidationError("--set expects key=value, got '" + s + "'");
        vdt::apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
    }
    if (o.seed) c.seed = *o.seed;
    if (!o.out.empty()) c.out = o.out;
    if (!o.input.empty()) c.input = o.input;
    // Re-validate after command-line overrides.
    return vdt::parse_config("", c);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Virtual drive test pipeline: MOS pattern learning, MOS prediction, anomaly detection, explanation"};
    app.require_subcommand(1);
    app.fallthrough();
    Options opt;
    app.add_option("--config", opt.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", opt.seed, "global seed (stage seeds derive from it unless set)");
    app.add_option("--out", opt.out, "artifact directory");
    app.add_option("--set", opt.sets, "override one config key, key=value (repeatable)");

    using Stage = std::function<void(const vdt::RunConfig&, std::ostream&)>;
    const std::vector<std::tuple<std::string, std::string, Stage>> stages = {
        {"generate", "generate a synthetic session dataset", vdt::pipeline::generate},
        {"ingest", "validate and import a session CSV", vdt::pipeline::ingest},
        {"features", "build feature rows and the Pearson matrix", vdt::pipeline::features},
        {"train-pattern", "train the autoencoder and write the typical MOS pattern", vdt::pipeline::train_pattern},
        {"train-predictor", "evaluate learners and fit the MOS predictor", vdt::pipeline::train_predictor},
        {"detect", "score sessions against the pattern and flag anomalies", vdt::pipeline::detect},
        {"explain", "attributions, distilled tree, decision path and SNR curves", vdt::pipeline::explain},
        {"report", "assemble report.json", vdt::pipeline::report},
        {"all", "run generate through report", vdt::pipeline::run_all},
    };
    std::vector<std::pair<CLI::App*, Stage>> commands;
    for (const auto& [name, help, fn] : stages) {
        auto* sub = app.add_subcommand(name, help);
        if (name == "ingest") sub->add_option("--input", opt.input, "session CSV to import");
        commands.emplace_back(sub, fn);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try {
        const auto config = resolve(opt);
        for (const auto& [sub, fn] : commands) {
            if (sub->parsed()) fn(config, std::cout);
        }
    } catch (const vdt::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return 0;
}
