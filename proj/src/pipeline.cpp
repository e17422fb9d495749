#include "vdt/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

#include "json.hpp"

#include "vdt/error.hpp"
#include "vdt/hash.hpp"
#include "vdt/model_io.hpp"
#include "vdt/text.hpp"

namespace vdt::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string artifact_file(const std::string& name) {
    static const std::map<std::string, std::string> files = {
        {"config", "config.conf"},
        {"sessions", "sessions.csv"},
        {"sessions_meta", "sessions.meta.csv"},
        {"ingest_report", "ingest_report.json"},
        {"features", "features.csv"},
        {"pearson", "pearson.json"},
        {"autoencoder", "autoencoder.json"},
        {"pattern", "pattern.csv"},
        {"pattern_training", "pattern_training.json"},
        {"eval", "eval.json"},
        {"predictor", "predictor.json"},
        {"predictions", "predictions.csv"},
        {"detection", "detection.json"},
        {"sweep", "sweep.csv"},
        {"explanation", "explanation.json"},
        {"attributions", "attributions.csv"},
        {"distilled_tree", "distilled_tree.json"},
        {"decision_path", "decision_path.json"},
        {"snr_curves", "snr_curves.csv"},
        {"report", "report.json"},
    };
    const auto it = files.find(name);
    if (it == files.end()) throw ValidationError("unknown artifact: " + name);
    return it->second;
}

namespace {

class Manifest {
public:
    explicit Manifest(fs::path dir) : dir_(std::move(dir)) {
        const auto p = dir_ / "manifest.json";
        if (fs::exists(p)) {
            std::ifstream in(p);
            try {
                j_ = json::parse(in);
            } catch (const json::exception& e) {
                throw ValidationError("corrupt manifest " + p.string() + ": " + e.what());
            }
        }
        if (!j_.is_object()) j_ = json::object();
        if (!j_.contains("artifacts")) j_["artifacts"] = json::object();
    }

    bool has(const std::string& name) const { return j_["artifacts"].contains(name); }

    fs::path require(const std::string& name) const {
        const auto& arts = j_["artifacts"];
        if (!arts.contains(name)) {
            throw MissingArtifactError("missing upstream artifact '" + name + "': not recorded in " +
                                       (dir_ / "manifest.json").string());
        }
        const auto& e = arts[name];
        const auto path = dir_ / e["file"].get<std::string>();
        if (!fs::exists(path)) {
            throw MissingArtifactError("missing upstream artifact '" + name + "': " + path.string() + " does not exist");
        }
        if (sha256_file(path) != e["sha256"].get<std::string>()) {
            throw MissingArtifactError("stale upstream artifact '" + name + "': " + path.string() +
                                       " changed since the " + e["stage"].get<std::string>() + " stage wrote it");
        }
        for (const auto& [input, sha] : e["inputs"].items()) {
            if (!arts.contains(input) || arts[input]["sha256"] != sha) {
                throw MissingArtifactError("stale upstream artifact '" + name + "': its input '" + input +
                                           "' changed; rerun the " + e["stage"].get<std::string>() + " stage");
            }
        }
        return path;
    }

    void record(const std::string& name, const std::string& stage, const std::vector<std::string>& inputs,
                const std::string& config_sha) {
        json in = json::object();
        for (const auto& i : inputs) in[i] = j_["artifacts"][i]["sha256"];
        const auto file = artifact_file(name);
        j_["artifacts"][name] = {{"file", file},
                                 {"sha256", sha256_file(dir_ / file)},
                                 {"stage", stage},
                                 {"config_sha256", config_sha},
                                 {"inputs", std::move(in)}};
    }

    void forget(const std::string& name) { j_["artifacts"].erase(name); }

    std::string sha(const std::string& name) const { return j_["artifacts"][name]["sha256"].get<std::string>(); }

    void save() const {
        std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write manifest in " + dir_.string());
        out << j_.dump(1) << '\n';
        if (!out) throw IoError("write failed: manifest in " + dir_.string());
    }

private:
    fs::path dir_;
    json j_;
};

/// Shared bookkeeping of one stage run.
class Stage {
public:
    Stage(const RunConfig& c, std::string name, bool writes)
        : config(c), name_(std::move(name)), manifest_(c.out), config_text_(serialize_config(c)),
          config_sha_(sha256_hex(config_text_)) {
        if (writes) fs::create_directories(c.out);
    }

    fs::path require(const std::string& artifact) const { return manifest_.require(artifact); }
    fs::path path(const std::string& artifact) const { return config.out / artifact_file(artifact); }
    bool has(const std::string& artifact) const { return manifest_.has(artifact); }
    std::string sha(const std::string& artifact) const { return manifest_.sha(artifact); }
    const std::string& config_sha() const { return config_sha_; }

    // Sessions plus the tag sidecar when one was recorded.
    Dataset load_sessions() const {
        const auto csv = require("sessions");
        if (has("sessions_meta")) require("sessions_meta");
        auto r = ingest_csv(csv);
        if (!r.rejections.empty()) {
            throw ValidationError("sessions artifact has " + std::to_string(r.rejections.size()) + " invalid rows");
        }
        return std::move(r.dataset);
    }

    void produced(const std::string& artifact, const std::vector<std::string>& inputs) {
        manifest_.record(artifact, name_, inputs, config_sha_);
    }

    void forget(const std::string& artifact) { manifest_.forget(artifact); }

    void finish() {
        write_text(path("config"), config_text_);
        manifest_.record("config", name_, {}, config_sha_);
        manifest_.save();
    }

    static void write_text(const fs::path& p, const std::string& s) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write file: " + p.string());
        out << s;
        if (!out) throw IoError("write failed: " + p.string());
    }

    static void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(1) + '\n'); }

    static json read_json(const fs::path& p) {
        std::ifstream in(p);
        if (!in) throw IoError("cannot read file: " + p.string());
        try {
            return json::parse(in);
        } catch (const json::exception& e) {
            throw ValidationError("malformed JSON in " + p.string() + ": " + e.what());
        }
    }

    const RunConfig& config;

private:
    std::string name_;
    Manifest manifest_;
    std::string config_text_;
    std::string config_sha_;
};

void record_sessions(Stage& st, const Dataset& d, const std::vector<std::string>& inputs) {
    const auto csv = st.path("sessions");
    fs::remove(meta_sidecar_path(csv));
    write_csv(d, csv);
    st.produced("sessions", inputs);
    if (fs::exists(meta_sidecar_path(csv))) {
        st.produced("sessions_meta", inputs);
    } else {
        st.forget("sessions_meta");
    }
}

LearnerSpec learner_spec(const RunConfig& c, LearnerKind kind, const std::string& name, const FeatureMask& mask) {
    LearnerSpec s;
    s.name = name;
    s.kind = kind;
    s.tree = c.predictor.tree;
    s.forest = c.predictor.forest;
    s.boost = c.predictor.boost;
    s.mask = mask;
    return s;
}

const char* learner_name(LearnerKind k) {
    switch (k) {
        case LearnerKind::tree: return "tree";
        case LearnerKind::forest: return "forest";
        case LearnerKind::boosted: return "boosted";
    }
    return "?";
}

std::vector<double> read_predictions(const fs::path& p, std::span<const FeatureRow> rows) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot read file: " + p.string());
    std::string line;
    std::getline(in, line);
    std::vector<double> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const auto cells = text::split(line, ',');
        const auto where = p.string() + ":" + std::to_string(lineno);
        if (cells.size() != 4) throw ValidationError(where + ": expected 4 cells");
        const auto idx = text::parse_int(cells[1]);
        const auto pred = text::parse_double(cells[3]);
        if (!idx || !pred) throw ValidationError(where + ": bad number");
        const auto i = out.size();
        if (i >= rows.size() || rows[i].session_id != cells[0] || rows[i].mos_index != static_cast<std::size_t>(*idx)) {
            throw ValidationError(where + ": predictions do not line up with the feature rows");
        }
        out.push_back(*pred);
    }
    if (out.size() != rows.size()) throw ValidationError(p.string() + ": prediction count differs from feature rows");
    return out;
}

json pattern_json(const TypicalPattern& p) {
    return {{"values", p.values}, {"n_sessions_aggregated", p.n_sessions_aggregated}};
}

}  // namespace

void generate(const RunConfig& config, std::ostream& log) {
    Stage st(config, "generate", true);
    auto gen = config.gen;
    gen.seed = config.resolved_generate_seed();
    gen.validate();
    const auto g = generate(gen);
    for (const auto& w : g.warnings) log << "warning: " << w << '\n';
    record_sessions(st, g.dataset, {});
    st.forget("ingest_report");
    st.finish();
    log << "generate: " << g.dataset.sessions.size() << " sessions -> " << st.path("sessions").string() << '\n';
}

void ingest(const RunConfig& config, std::ostream& log) {
    if (config.input.empty()) throw ValidationError("ingest needs an input CSV (paths.input or --input)");
    Stage st(config, "ingest", true);
    const auto r = ingest_csv(config.input);
    if (r.dataset.sessions.empty()) throw ValidationError("ingest: no valid sessions in " + config.input.string());
    auto rejections = json::array();
    for (const auto& rej : r.rejections) rejections.push_back({{"line", rej.line}, {"reason", rej.reason}});
    record_sessions(st, r.dataset, {});
    Stage::write_json(st.path("ingest_report"), {{"source_sha256", sha256_file(config.input)},
                                                 {"total_rows", r.total_rows},
                                                 {"accepted_rows", r.accepted_rows},
                                                 {"rejected_rows", r.rejections.size()},
                                                 {"sessions", r.dataset.sessions.size()},
                                                 {"rejections", std::move(rejections)}});
    st.produced("ingest_report", {});
    st.finish();
    log << "ingest: " << r.accepted_rows << " of " << r.total_rows << " rows accepted, " << r.dataset.sessions.size()
        << " sessions\n";
}

void features(const RunConfig& config, std::ostream& log) {
    Stage st(config, "features", true);
    const auto d = filter_model_eligible(st.load_sessions());
    const auto built = build_rows(d);
    if (built.rows.size() < 2) throw ValidationError("features: fewer than 2 usable rows");
    write_features_csv(built.rows, st.path("features"));

    const auto corr = pearson_matrix(built.rows);
    Stage::write_json(st.path("pearson"), {{"names", corr.names},
                                           {"values", corr.values},
                                           {"excluded", corr.excluded},
                                           {"rows", built.rows.size()},
                                           {"dropped_rows", built.dropped},
                                           {"eligible_sessions", d.sessions.size()}});
    st.produced("features", {"sessions"});
    st.produced("pearson", {"features"});
    st.finish();
    log << "features: " << built.rows.size() << " rows from " << d.sessions.size() << " eligible sessions, "
        << built.dropped << " dropped\n";
}

void train_pattern(const RunConfig& config, std::ostream& log) {
    Stage st(config, "train-pattern", true);
    const auto seqs = to_sequences(st.load_sessions());
    const auto split_seed = config.resolved_pattern_seed();
    const auto parts = split_sessions(seqs, config.pattern.split_ratio, split_seed);
    const auto train_seed = session_seed(split_seed, 1);

    json training;
    AutoencoderModel model;
    if (config.pattern.grid_search) {
        auto result = grid_search(parts.train, parts.validation, config.pattern.grid, train_seed);
        auto cells = json::array();
        for (const auto& c : result.cells) {
            cells.push_back({{"epochs", c.hyper.epochs},
                             {"batch_size", c.hyper.batch_size},
                             {"learning_rate", c.hyper.learning_rate},
                             {"dropout", c.hyper.dropout},
                             {"val_mse", c.diverged ? json(nullptr) : json(c.val_mse)},
                             {"diverged", c.diverged}});
        }
        training["grid"] = std::move(cells);
        model = std::move(result.best);
    } else {
        model = train_autoencoder(parts.train, parts.validation, config.pattern.hyper, train_seed);
    }
    model.split_seed = split_seed;
    model.validation_ids.clear();
    model.test_ids.clear();
    for (const auto& s : parts.validation) model.validation_ids.push_back(s.session_id);
    for (const auto& s : parts.test) model.test_ids.push_back(s.session_id);
    save_model(model, st.path("autoencoder"));

    const auto pattern = typical_pattern(model.net, seqs);
    write_pattern_csv(pattern, st.path("pattern"));

    // Held-out check against the mean predictor: variance of the valid test MOS values.
    std::vector<double> held;
    for (const auto& s : parts.test) held.insert(held.end(), s.values.begin(), s.values.begin() + static_cast<long>(s.valid_len));
    const double held_mean = stats::mean(held);
    double held_var = 0.0;
    for (double v : held) held_var += (v - held_mean) * (v - held_mean);
    held_var /= static_cast<double>(held.size());

    training["selected"] = {{"epochs", model.hyper.epochs},
                            {"batch_size", model.hyper.batch_size},
                            {"learning_rate", model.hyper.learning_rate},
                            {"dropout", model.hyper.dropout}};
    training["split"] = {{"train", parts.train.size()}, {"validation", parts.validation.size()}, {"test", parts.test.size()}};
    training["initial_val_mse"] = model.initial_val_mse;
    training["final_train_mse"] = model.curve.back().train_mse;
    training["final_val_mse"] = model.curve.back().val_mse;
    training["test_reconstruction_mse"] = model.net.loss(parts.test);
    training["test_mos_variance"] = held_var;
    training["pattern"] = pattern_json(pattern);
    Stage::write_json(st.path("pattern_training"), training);

    st.produced("autoencoder", {"sessions"});
    st.produced("pattern", {"autoencoder"});
    st.produced("pattern_training", {"autoencoder"});
    st.finish();
    log << "train-pattern: " << seqs.size() << " sequences, selected epochs=" << model.hyper.epochs
        << " batch=" << model.hyper.batch_size << " lr=" << model.hyper.learning_rate
        << " dropout=" << model.hyper.dropout << ", test MSE " << training["test_reconstruction_mse"].get<double>()
        << " vs variance " << held_var << '\n';
}

void train_predictor(const RunConfig& config, std::ostream& log) {
    Stage st(config, "train-predictor", true);
    const auto rows = read_features_csv(st.require("features"));
    const auto seed = config.resolved_predictor_seed();
    const auto& pc = config.predictor;

    const std::vector<LearnerSpec> specs = {
        learner_spec(config, LearnerKind::forest, "forest", all_features()),
        learner_spec(config, LearnerKind::boosted, "boosted", all_features()),
        learner_spec(config, LearnerKind::tree, "tree", all_features()),
        learner_spec(config, LearnerKind::tree, "tree_sess_time", only_feature(Feature::sess_time)),
    };
    std::vector<EvalReport> reports;
    for (const auto& spec : specs) {
        reports.push_back(run_trials(rows, spec, pc.trials, pc.train_ratio, seed));
        const auto& r = reports.back();
        log << "train-predictor: " << spec.name << " R2 " << r.r2.mean << " [" << r.r2.lo << ", " << r.r2.hi
            << "], MSE/session " << r.mse_per_session.mean << '\n';
    }
    write_eval_reports_json(reports, st.path("eval"));

    const auto spec = learner_spec(config, pc.detect_learner, learner_name(pc.detect_learner), all_features());
    save_learner({spec, seed, fit_learner(rows, spec, seed)}, st.path("predictor"));

    const auto oof = out_of_fold_predictions(rows, spec, pc.folds, seed);
    std::ostringstream csv;
    csv << "session_id,mos_index,mos,predicted\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        csv << rows[i].session_id << ',' << rows[i].mos_index << ',' << text::format_exact(rows[i].mos) << ','
            << text::format_exact(oof[i]) << '\n';
    }
    Stage::write_text(st.path("predictions"), csv.str());

    st.produced("eval", {"features"});
    st.produced("predictor", {"features"});
    st.produced("predictions", {"features"});
    st.finish();
}

void detect(const RunConfig& config, std::ostream& log) {
    Stage st(config, "detect", true);
    const auto rows = read_features_csv(st.require("features"));
    const auto predictions = read_predictions(st.require("predictions"), rows);
    const auto pattern = read_pattern_csv(st.require("pattern"));

    const auto scored = score_sessions(rows, predictions, pattern.values);
    const auto report = vdt::detect(scored.scores, config.detector);
    write_detection_json(report, st.path("detection"));
    write_sweep_csv(report.sweep, st.path("sweep"));

    st.produced("detection", {"features", "predictions", "pattern"});
    st.produced("sweep", {"detection"});
    st.finish();
    const auto& best = report.sweep.points[report.sweep.best];
    log << "detect: " << report.scores.size() << " sessions scored (" << scored.skipped.size() << " skipped), "
        << report.counts.tp + report.counts.fp << " flagged, " << report.counts.tp + report.counts.fn
        << " actual; F1 at q=" << config.detector.q << ": " << report.counts.f1().value_or(0.0)
        << ", max F1 " << best.f1.value_or(0.0) << " at threshold " << best.threshold << '\n';
}

void explain(const RunConfig& config, std::ostream& log) {
    Stage st(config, "explain", true);
    const auto rows = read_features_csv(st.require("features"));
    const auto learner = load_learner(st.require("predictor"));
    const auto detection = Stage::read_json(st.require("detection"));
    const auto sessions = st.load_sessions();
    const auto& ec = config.explain;

    std::vector<FeatureVector> x;
    x.reserve(rows.size());
    for (const auto& r : rows) x.push_back(r.x);

    // Evenly spaced rows keep the attribution cost bounded on large datasets.
    const auto k = std::min(ec.shap_rows, rows.size());
    std::vector<std::size_t> picked;
    for (std::size_t i = 0; i < k; ++i) picked.push_back(i * rows.size() / k);
    std::vector<FeatureVector> shap_x;
    std::vector<std::string> shap_ids;
    for (auto i : picked) {
        shap_x.push_back(x[i]);
        shap_ids.push_back(rows[i].session_id + "#" + std::to_string(rows[i].mos_index));
    }
    const auto summary = shap_summary(learner.model, shap_x);
    write_attributions_csv(summary.attributions, shap_x, shap_ids, st.path("attributions"));

    double max_local_error = 0.0;
    for (const auto& a : summary.attributions) {
        double total = a.base_value;
        for (double c : a.contributions) total += c;
        max_local_error = std::max(max_local_error, std::abs(total - a.prediction));
    }

    const auto student = distill(learner.model, x, ec.distill);
    LearnerSpec student_spec;
    student_spec.name = "distilled";
    student_spec.kind = LearnerKind::tree;
    student_spec.tree = {ec.distill.max_depth, ec.distill.min_samples_leaf, ec.distill.histogram_bins};
    AnyModel student_model;
    student_model.kind = LearnerKind::tree;
    student_model.tree = student;
    save_learner({student_spec, 0, student_model}, st.path("distilled_tree"));

    std::vector<double> teacher_y, student_y, actual_y;
    for (std::size_t i = 0; i < x.size(); ++i) {
        teacher_y.push_back(learner.model.predict(x[i]));
        student_y.push_back(student.predict(x[i]));
        actual_y.push_back(rows[i].mos);
    }
    auto mse = [](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return s / static_cast<double>(a.size());
    };

    // Decision path of the worst-scored flagged session at its lowest true MOS.
    std::map<std::string, bool> predicted_label, actual_label;
    std::string worst;
    double worst_score = -1.0;
    for (const auto& s : detection.at("sessions")) {
        const auto id = s.at("session_id").get<std::string>();
        predicted_label[id] = s.at("predicted_anomalous").get<bool>();
        actual_label[id] = s.at("actual_anomalous").get<bool>();
        const double score = s.at("predicted_mse").get<double>();
        if (score > worst_score) {
            worst_score = score;
            worst = id;
        }
    }
    std::size_t path_row = 0;
    double lowest = 6.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].session_id == worst && rows[i].mos < lowest) {
            lowest = rows[i].mos;
            path_row = i;
        }
    }
    const auto path = decision_path(student, x[path_row]);
    write_decision_path_json(student, path, x[path_row], st.path("decision_path"));

    const auto curves = cumulative_snr_curves(sessions, ec.snr_labels_actual ? actual_label : predicted_label,
                                              ec.snr_horizon_s);
    write_snr_curves_csv(curves, st.path("snr_curves"));

    auto ranking = json::array();
    for (const auto& r : summary.ranking) {
        ranking.push_back({{"feature", std::string(feature_names()[static_cast<std::size_t>(r.feature)])},
                           {"mean_abs_contribution", r.mean_abs}});
    }
    auto curve_json = json::array();
    for (const auto& c : curves) {
        curve_json.push_back({{"t", c.t}, {"class", c.label}, {"n", c.n}, {"mean", c.mean}, {"lo", c.lo}, {"hi", c.hi}});
    }
    Stage::write_json(st.path("explanation"),
                      {{"shap",
                        {{"learner", learner.spec.name},
                         {"rows", picked.size()},
                         {"ranking", std::move(ranking)},
                         {"max_local_accuracy_error", max_local_error}}},
                       {"distillation",
                        {{"max_depth", ec.distill.max_depth},
                         {"leaves", student.leaf_count()},
                         {"depth", student.depth()},
                         {"r2_vs_teacher", r2_score(teacher_y, student_y)},
                         {"mse_vs_teacher", mse(student_y, teacher_y)},
                         {"student_mse_vs_actual", mse(student_y, actual_y)},
                         {"teacher_mse_vs_actual", mse(teacher_y, actual_y)}}},
                       {"decision_path",
                        {{"session_id", rows[path_row].session_id},
                         {"mos_index", rows[path_row].mos_index},
                         {"actual_mos", rows[path_row].mos},
                         {"prediction", path.prediction},
                         {"steps", path.steps.size()}}},
                       {"snr_labels", ec.snr_labels_actual ? "actual" : "predicted"},
                       {"snr_curves", std::move(curve_json)}});

    st.produced("attributions", {"features", "predictor"});
    st.produced("distilled_tree", {"features", "predictor"});
    st.produced("decision_path", {"distilled_tree", "detection"});
    st.produced("snr_curves", {"sessions", "detection"});
    st.produced("explanation", {"attributions", "distilled_tree", "decision_path", "snr_curves"});
    st.finish();
    log << "explain: " << picked.size() << " rows attributed, top feature "
        << feature_names()[static_cast<std::size_t>(summary.ranking.front().feature)] << ", distilled tree R2 vs teacher "
        << r2_score(teacher_y, student_y) << '\n';
}

void report(const RunConfig& config, std::ostream& log) {
    Stage st(config, "report", true);
    const auto pattern = read_pattern_csv(st.require("pattern"));
    const auto training = Stage::read_json(st.require("pattern_training"));
    const auto eval = Stage::read_json(st.require("eval"));
    const auto detection = Stage::read_json(st.require("detection"));
    const auto explanation = Stage::read_json(st.require("explanation"));

    json det = detection;
    det.erase("sessions");
    det.erase("sweep");
    std::size_t flagged = 0, actual = 0;
    for (const auto& s : detection.at("sessions")) {
        flagged += s.at("predicted_anomalous").get<bool>() ? 1 : 0;
        actual += s.at("actual_anomalous").get<bool>() ? 1 : 0;
    }
    det["sessions"] = detection.at("sessions").size();
    det["flagged"] = flagged;
    det["actual_anomalous"] = actual;

    json artifacts = json::object();
    for (const auto* name : {"sessions", "features", "autoencoder", "pattern", "eval", "predictor", "predictions",
                             "detection", "explanation", "attributions", "distilled_tree", "decision_path", "snr_curves"}) {
        artifacts[name] = st.sha(name);
    }

    json j;
    j["config_sha256"] = st.config_sha();
    j["typical_pattern"] = pattern_json(pattern);
    j["pattern_training"] = {{"selected", training.at("selected")},
                             {"final_val_mse", training.at("final_val_mse")},
                             {"test_reconstruction_mse", training.at("test_reconstruction_mse")},
                             {"test_mos_variance", training.at("test_mos_variance")}};
    j["evaluation"] = eval.at("learners");
    j["detection"] = std::move(det);
    j["shap"] = explanation.at("shap");
    j["distillation"] = explanation.at("distillation");
    j["decision_path"] = explanation.at("decision_path");
    j["root_cause"] = {{"labels", explanation.at("snr_labels")}, {"curves", explanation.at("snr_curves")}};
    j["artifacts"] = std::move(artifacts);
    Stage::write_json(st.path("report"), j);

    st.produced("report", {"pattern", "pattern_training", "eval", "detection", "explanation"});
    st.finish();
    log << "report: " << st.path("report").string() << '\n';
}

void run_all(const RunConfig& config, std::ostream& log) {
    generate(config, log);
    features(config, log);
    train_pattern(config, log);
    train_predictor(config, log);
    detect(config, log);
    explain(config, log);
    report(config, log);
}

}  // namespace vdt::pipeline
