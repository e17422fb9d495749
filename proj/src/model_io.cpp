#include "vdt/model_io.hpp"

#include <fstream>

#include "json.hpp"

#include "vdt/error.hpp"
#include "vdt/hash.hpp"

namespace vdt {

namespace {

using nlohmann::json;

json mask_json(const FeatureMask& m) {
    auto out = json::array();
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (m[f]) out.push_back(std::string(feature_names()[f]));
    }
    return out;
}

FeatureMask mask_from(const json& j) {
    FeatureMask m{};
    for (const auto& name : j) {
        const auto f = feature_from_name(name.get<std::string>());
        if (!f) throw ValidationError("unknown feature in mask: " + name.get<std::string>());
        m[static_cast<std::size_t>(*f)] = true;
    }
    return m;
}

json tree_params_json(const TreeParams& p) {
    return {{"max_depth", p.max_depth}, {"min_samples_leaf", p.min_samples_leaf}, {"histogram_bins", p.histogram_bins}};
}

TreeParams tree_params_from(const json& j) {
    return {j.at("max_depth").get<int>(), j.at("min_samples_leaf").get<std::size_t>(),
            j.at("histogram_bins").get<std::size_t>()};
}

json tree_json(const RegressionTree& t) {
    auto nodes = json::array();
    for (const auto& n : t.nodes()) {
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"value", n.value},
                         {"count", n.count},
                         {"histogram", {{"lo", n.histogram.lo}, {"hi", n.histogram.hi}, {"counts", n.histogram.counts}}}});
    }
    return {{"params", tree_params_json(t.params())}, {"nodes", std::move(nodes)}};
}

RegressionTree tree_from(const json& j) {
    std::vector<TreeNode> nodes;
    for (const auto& n : j.at("nodes")) {
        TreeNode node;
        node.feature = n.at("feature").get<int>();
        node.threshold = n.at("threshold").get<double>();
        node.left = n.at("left").get<int>();
        node.right = n.at("right").get<int>();
        node.value = n.at("value").get<double>();
        node.count = n.at("count").get<std::size_t>();
        const auto& h = n.at("histogram");
        node.histogram = {h.at("lo").get<double>(), h.at("hi").get<double>(), h.at("counts").get<std::vector<std::size_t>>()};
        nodes.push_back(std::move(node));
    }
    const auto size = static_cast<int>(nodes.size());
    for (const auto& n : nodes) {
        if (n.is_leaf()) continue;
        if (n.feature >= static_cast<int>(kNumFeatures) || n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size) {
            throw ValidationError("tree node refers outside the node array");
        }
    }
    if (nodes.empty()) throw ValidationError("tree without nodes");
    return RegressionTree(std::move(nodes), tree_params_from(j.at("params")));
}

const char* kind_name(LearnerKind k) {
    switch (k) {
        case LearnerKind::tree: return "tree";
        case LearnerKind::forest: return "forest";
        case LearnerKind::boosted: return "boosted";
    }
    return "?";
}

LearnerKind kind_from(const std::string& s) {
    if (s == "tree") return LearnerKind::tree;
    if (s == "forest") return LearnerKind::forest;
    if (s == "boosted") return LearnerKind::boosted;
    throw ValidationError("unknown learner kind: " + s);
}

json spec_json(const LearnerSpec& s) {
    const auto& f = s.forest;
    const auto& b = s.boost;
    return {{"name", s.name},
            {"kind", kind_name(s.kind)},
            {"mask", mask_json(s.mask)},
            {"tree", tree_params_json(s.tree)},
            {"forest",
             {{"n_trees", f.n_trees},
              {"max_depth", f.max_depth},
              {"min_samples_leaf", f.min_samples_leaf},
              {"feature_rate", f.feature_rate},
              {"bootstrap", f.bootstrap}}},
            {"boost",
             {{"n_stages", b.n_stages},
              {"shrinkage", b.shrinkage},
              {"max_depth", b.max_depth},
              {"min_samples_leaf", b.min_samples_leaf}}}};
}

LearnerSpec spec_from(const json& j) {
    LearnerSpec s;
    s.name = j.at("name").get<std::string>();
    s.kind = kind_from(j.at("kind").get<std::string>());
    s.mask = mask_from(j.at("mask"));
    s.tree = tree_params_from(j.at("tree"));
    const auto& f = j.at("forest");
    s.forest.n_trees = f.at("n_trees").get<std::size_t>();
    s.forest.max_depth = f.at("max_depth").get<int>();
    s.forest.min_samples_leaf = f.at("min_samples_leaf").get<std::size_t>();
    s.forest.feature_rate = f.at("feature_rate").get<double>();
    s.forest.bootstrap = f.at("bootstrap").get<bool>();
    s.forest.mask = s.mask;
    const auto& b = j.at("boost");
    s.boost.n_stages = b.at("n_stages").get<std::size_t>();
    s.boost.shrinkage = b.at("shrinkage").get<double>();
    s.boost.max_depth = b.at("max_depth").get<int>();
    s.boost.min_samples_leaf = b.at("min_samples_leaf").get<std::size_t>();
    s.boost.mask = s.mask;
    return s;
}

json model_json(const AnyModel& m) {
    json j;
    switch (m.kind) {
        case LearnerKind::tree: j["tree"] = tree_json(m.tree); break;
        case LearnerKind::forest: {
            auto trees = json::array();
            for (const auto& t : m.forest.trees) trees.push_back(tree_json(t));
            j["trees"] = std::move(trees);
            j["tree_seeds"] = m.forest.tree_seeds;
            break;
        }
        case LearnerKind::boosted: {
            auto stages = json::array();
            for (const auto& t : m.boosted.stages) stages.push_back(tree_json(t));
            j["initial"] = m.boosted.initial;
            j["stages"] = std::move(stages);
            j["shrinkage"] = m.boosted.shrinkage;
            j["train_mse"] = m.boosted.train_mse;
            break;
        }
    }
    return j;
}

AnyModel model_from(const json& j, const LearnerSpec& spec, std::uint64_t seed) {
    AnyModel m;
    m.kind = spec.kind;
    switch (spec.kind) {
        case LearnerKind::tree: m.tree = tree_from(j.at("tree")); break;
        case LearnerKind::forest:
            for (const auto& t : j.at("trees")) m.forest.trees.push_back(tree_from(t));
            m.forest.tree_seeds = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
            m.forest.params = spec.forest;
            m.forest.params.seed = seed;
            if (m.forest.trees.empty()) throw ValidationError("forest without trees");
            break;
        case LearnerKind::boosted:
            m.boosted.initial = j.at("initial").get<double>();
            for (const auto& t : j.at("stages")) m.boosted.stages.push_back(tree_from(t));
            m.boosted.shrinkage = j.at("shrinkage").get<std::vector<double>>();
            m.boosted.train_mse = j.at("train_mse").get<std::vector<double>>();
            m.boosted.params = spec.boost;
            m.boosted.params.seed = seed;
            if (m.boosted.shrinkage.size() != m.boosted.stages.size()) throw ValidationError("stage/shrinkage count mismatch");
            break;
    }
    return m;
}

json interval_json(const stats::Interval& i) { return {{"mean", i.mean}, {"lo", i.lo}, {"hi", i.hi}}; }

}  // namespace

void save_learner(const LearnerArtifact& a, const std::filesystem::path& path) {
    json j;
    j["format"] = "vdt-learner";
    j["version"] = 1;
    j["spec"] = spec_json(a.spec);
    j["seed"] = a.seed;
    j["model"] = model_json(a.model);
    j["model_sha256"] = sha256_hex(j["model"].dump());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path.string());
    out << j.dump() << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

LearnerArtifact load_learner(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("missing model file: " + path.string());
    try {
        const auto j = json::parse(in);
        if (j.at("format") != "vdt-learner" || j.at("version") != 1) {
            throw ValidationError("unsupported model format in " + path.string());
        }
        if (sha256_hex(j.at("model").dump()) != j.at("model_sha256").get<std::string>()) {
            throw ValidationError("model hash mismatch in " + path.string());
        }
        LearnerArtifact a;
        a.spec = spec_from(j.at("spec"));
        a.seed = j.at("seed").get<std::uint64_t>();
        a.model = model_from(j.at("model"), a.spec, a.seed);
        return a;
    } catch (const json::exception& e) {
        throw ValidationError("malformed model file " + path.string() + ": " + e.what());
    }
}

void write_eval_reports_json(std::span<const EvalReport> reports, const std::filesystem::path& path) {
    auto arr = json::array();
    for (const auto& r : reports) {
        auto trials = json::array();
        for (const auto& t : r.trials) {
            trials.push_back({{"seed", t.seed},
                              {"r2", t.r2},
                              {"mse_per_session", t.mse_per_session},
                              {"train_sessions", t.train_sessions},
                              {"test_sessions", t.test_sessions}});
        }
        arr.push_back({{"learner", r.learner},
                       {"r2", interval_json(r.r2)},
                       {"mse_per_session", interval_json(r.mse_per_session)},
                       {"trials", std::move(trials)}});
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path.string());
    out << json{{"learners", std::move(arr)}}.dump(1) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace vdt
