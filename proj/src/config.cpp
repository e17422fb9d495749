#include "vdt/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>
#include <vector>

#include "vdt/error.hpp"
#include "vdt/text.hpp"

namespace vdt {

std::uint64_t RunConfig::resolved_generate_seed() const { return generate_seed.value_or(seed); }
std::uint64_t RunConfig::resolved_pattern_seed() const { return pattern_seed.value_or(session_seed(seed, 101)); }
std::uint64_t RunConfig::resolved_predictor_seed() const { return predictor_seed.value_or(session_seed(seed, 102)); }

namespace {

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view what) {
    throw ValidationError("config: " + std::string(key) + " = '" + std::string(value) + "': " + std::string(what));
}

double to_real(std::string_view key, std::string_view v) {
    const auto d = text::parse_double(v);
    if (!d) bad(key, v, "expected a number");
    return *d;
}

long long to_int(std::string_view key, std::string_view v) {
    const auto i = text::parse_int(v);
    if (!i) bad(key, v, "expected an integer");
    return *i;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const std::string s(v);
    std::size_t used = 0;
    try {
        if (s.empty() || s[0] == '-') throw std::invalid_argument("sign");
        out = std::stoull(s, &used, 10);
    } catch (const std::exception&) {
        bad(key, v, "expected an unsigned integer");
    }
    if (used != s.size()) bad(key, v, "expected an unsigned integer");
    return out;
}

std::size_t to_count(std::string_view key, std::string_view v) {
    const auto i = to_int(key, v);
    if (i < 0) bad(key, v, "must be non-negative");
    return static_cast<std::size_t>(i);
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad(key, v, "expected true or false");
}

std::vector<std::string_view> list_items(std::string_view v) {
    std::vector<std::string_view> out;
    for (auto item : text::split(v, ',')) {
        item = text::trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i > 0) out += ',';
        if constexpr (std::is_floating_point_v<T>) {
            out += text::format_exact(xs[i]);
        } else {
            out += std::to_string(xs[i]);
        }
    }
    return out;
}

struct Entry {
    std::string key;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

// One parser/printer per field type; the accessor must accept both const and mutable configs.
template <class Acc>
Entry field(std::string key, Acc acc) {
    using T = std::remove_cvref_t<decltype(acc(std::declval<RunConfig&>()))>;
    Entry e;
    e.key = key;
    e.set = [key, acc](RunConfig& c, std::string_view v) {
        auto& ref = acc(c);
        if constexpr (std::is_same_v<T, bool>) {
            ref = to_bool(key, v);
        } else if constexpr (std::is_same_v<T, double>) {
            ref = to_real(key, v);
        } else if constexpr (std::is_same_v<T, int>) {
            ref = static_cast<int>(to_int(key, v));
        } else if constexpr (std::is_same_v<T, std::size_t>) {
            ref = to_count(key, v);
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            ref = to_u64(key, v);
        } else if constexpr (std::is_same_v<T, std::optional<std::uint64_t>>) {
            ref = (v.empty() || v == "auto") ? std::nullopt : std::optional(to_u64(key, v));
        } else if constexpr (std::is_same_v<T, std::optional<double>>) {
            ref = (v.empty() || v == "auto") ? std::nullopt : std::optional(to_real(key, v));
        } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
            ref.clear();
            for (auto item : list_items(v)) ref.push_back(to_count(key, item));
            if (ref.empty()) bad(key, v, "empty list");
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            ref.clear();
            for (auto item : list_items(v)) ref.push_back(to_real(key, item));
            if (ref.empty()) bad(key, v, "empty list");
        } else if constexpr (std::is_same_v<T, std::vector<LadderRung>>) {
            ref.clear();
            for (auto item : list_items(v)) {
                const auto parts = text::split(item, ':');
                if (parts.size() != 2) bad(key, v, "ladder items are bitrate_kbps:quality");
                ref.push_back({to_real(key, text::trim(parts[0])), to_real(key, text::trim(parts[1]))});
            }
            if (ref.empty()) bad(key, v, "empty ladder");
        } else if constexpr (std::is_same_v<T, LearnerKind>) {
            if (v == "forest") {
                ref = LearnerKind::forest;
            } else if (v == "boosted") {
                ref = LearnerKind::boosted;
            } else if (v == "tree") {
                ref = LearnerKind::tree;
            } else {
                bad(key, v, "expected forest, boosted or tree");
            }
        } else {
            static_assert(sizeof(T) == 0, "unsupported config field type");
        }
    };
    e.get = [acc](const RunConfig& c) -> std::string {
        const auto& ref = acc(c);
        if constexpr (std::is_same_v<T, bool>) {
            return ref ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
            return text::format_exact(ref);
        } else if constexpr (std::is_same_v<T, std::optional<std::uint64_t>>) {
            return ref ? std::to_string(*ref) : "auto";
        } else if constexpr (std::is_same_v<T, std::optional<double>>) {
            return ref ? text::format_exact(*ref) : "auto";
        } else if constexpr (std::is_same_v<T, std::vector<std::size_t>> || std::is_same_v<T, std::vector<double>>) {
            return join(ref);
        } else if constexpr (std::is_same_v<T, std::vector<LadderRung>>) {
            std::string out;
            for (std::size_t i = 0; i < ref.size(); ++i) {
                if (i > 0) out += ',';
                out += text::format_exact(ref[i].bitrate_kbps) + ':' + text::format_exact(ref[i].quality);
            }
            return out;
        } else if constexpr (std::is_same_v<T, LearnerKind>) {
            return ref == LearnerKind::forest ? "forest" : ref == LearnerKind::boosted ? "boosted" : "tree";
        } else {
            return std::to_string(ref);
        }
    };
    return e;
}

#define VDT_FIELD(key, expr) field(key, [](auto& c) -> auto& { return c.expr; })

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = {
        VDT_FIELD("seed", seed),
        VDT_FIELD("seed.generate", generate_seed),
        VDT_FIELD("seed.pattern", pattern_seed),
        VDT_FIELD("seed.predictor", predictor_seed),

        VDT_FIELD("gen.n_sessions", gen.n_sessions),
        VDT_FIELD("gen.anomaly_fraction", gen.anomaly_fraction),
        VDT_FIELD("gen.duration_s", gen.duration_s),
        VDT_FIELD("gen.kpi_period_s", gen.kpi_period_s),
        VDT_FIELD("gen.mos_period_min_s", gen.mos_period_min_s),
        VDT_FIELD("gen.mos_period_max_s", gen.mos_period_max_s),
        VDT_FIELD("gen.mos_noise_std", gen.mos_noise_std),
        VDT_FIELD("gen.snr.mean_normal", gen.snr_process.mean_normal),
        VDT_FIELD("gen.snr.mean_anomalous", gen.snr_process.mean_anomalous),
        VDT_FIELD("gen.snr.ar_coefficient", gen.snr_process.ar_coefficient),
        VDT_FIELD("gen.snr.noise_std", gen.snr_process.noise_std),
        VDT_FIELD("gen.snr.session_offset_std", gen.snr_process.session_offset_std),
        VDT_FIELD("gen.abr_ladder", gen.abr_ladder),
        VDT_FIELD("gen.player.buffer_max_s", gen.player.buffer_max_s),
        VDT_FIELD("gen.player.up_threshold_s", gen.player.up_threshold_s),
        VDT_FIELD("gen.player.down_threshold_s", gen.player.down_threshold_s),
        VDT_FIELD("gen.player.segment_s", gen.player.segment_s),
        VDT_FIELD("gen.player.reference_bitrate_kbps", gen.player.reference_bitrate_kbps),
        VDT_FIELD("gen.player.stall_penalty", gen.player.stall_penalty),
        VDT_FIELD("gen.player.startup_ramp_amplitude", gen.player.startup_ramp_amplitude),
        VDT_FIELD("gen.player.startup_ramp_s", gen.player.startup_ramp_s),
        VDT_FIELD("gen.throughput.kbps_per_spectral_efficiency", gen.throughput.kbps_per_spectral_efficiency),
        VDT_FIELD("gen.throughput.prb_reference", gen.throughput.prb_reference),
        VDT_FIELD("gen.rsrp.intercept", gen.rsrp_map.intercept),
        VDT_FIELD("gen.rsrp.slope", gen.rsrp_map.slope),
        VDT_FIELD("gen.rsrp.noise_std", gen.rsrp_map.noise_std),
        VDT_FIELD("gen.rsrq.intercept", gen.rsrq_map.intercept),
        VDT_FIELD("gen.rsrq.slope", gen.rsrq_map.slope),
        VDT_FIELD("gen.rsrq.noise_std", gen.rsrq_map.noise_std),
        VDT_FIELD("gen.prb.intercept", gen.prb_map.intercept),
        VDT_FIELD("gen.prb.slope", gen.prb_map.slope),
        VDT_FIELD("gen.prb.noise_std", gen.prb_map.noise_std),
        VDT_FIELD("gen.prb.max", gen.prb_max),
        VDT_FIELD("gen.missing.rsrp", gen.missing_rsrp),
        VDT_FIELD("gen.missing.rsrq", gen.missing_rsrq),
        VDT_FIELD("gen.missing.snr", gen.missing_snr),
        VDT_FIELD("gen.missing.prb", gen.missing_prb),
        VDT_FIELD("gen.anomaly.onset_min_s", gen.anomaly.onset_min_s),
        VDT_FIELD("gen.anomaly.onset_max_s", gen.anomaly.onset_max_s),
        VDT_FIELD("gen.anomaly.transition_s", gen.anomaly.transition_s),
        VDT_FIELD("gen.anomaly.level_jitter_db", gen.anomaly.level_jitter_db),
        VDT_FIELD("gen.anomaly.oscillation_amplitude_db", gen.anomaly.oscillation_amplitude_db),
        VDT_FIELD("gen.anomaly.oscillation_period_s", gen.anomaly.oscillation_period_s),

        VDT_FIELD("pattern.grid_search", pattern.grid_search),
        VDT_FIELD("pattern.grid.epochs", pattern.grid.epochs),
        VDT_FIELD("pattern.grid.batch_sizes", pattern.grid.batch_sizes),
        VDT_FIELD("pattern.grid.learning_rates", pattern.grid.learning_rates),
        VDT_FIELD("pattern.grid.dropouts", pattern.grid.dropouts),
        VDT_FIELD("pattern.epochs", pattern.hyper.epochs),
        VDT_FIELD("pattern.batch_size", pattern.hyper.batch_size),
        VDT_FIELD("pattern.learning_rate", pattern.hyper.learning_rate),
        VDT_FIELD("pattern.dropout", pattern.hyper.dropout),
        VDT_FIELD("pattern.split_ratio", pattern.split_ratio),

        VDT_FIELD("predictor.trials", predictor.trials),
        VDT_FIELD("predictor.train_ratio", predictor.train_ratio),
        VDT_FIELD("predictor.folds", predictor.folds),
        VDT_FIELD("predictor.detect_learner", predictor.detect_learner),
        VDT_FIELD("predictor.tree.max_depth", predictor.tree.max_depth),
        VDT_FIELD("predictor.tree.min_samples_leaf", predictor.tree.min_samples_leaf),
        VDT_FIELD("predictor.forest.n_trees", predictor.forest.n_trees),
        VDT_FIELD("predictor.forest.max_depth", predictor.forest.max_depth),
        VDT_FIELD("predictor.forest.min_samples_leaf", predictor.forest.min_samples_leaf),
        VDT_FIELD("predictor.forest.feature_rate", predictor.forest.feature_rate),
        VDT_FIELD("predictor.forest.bootstrap", predictor.forest.bootstrap),
        VDT_FIELD("predictor.boost.n_stages", predictor.boost.n_stages),
        VDT_FIELD("predictor.boost.shrinkage", predictor.boost.shrinkage),
        VDT_FIELD("predictor.boost.max_depth", predictor.boost.max_depth),
        VDT_FIELD("predictor.boost.min_samples_leaf", predictor.boost.min_samples_leaf),

        VDT_FIELD("detector.q", detector.q),
        VDT_FIELD("detector.actual_quantile", detector.actual_quantile),
        VDT_FIELD("detector.actual_threshold", detector.actual_threshold),

        VDT_FIELD("explain.shap_rows", explain.shap_rows),
        VDT_FIELD("explain.distill_max_depth", explain.distill.max_depth),
        VDT_FIELD("explain.distill_min_samples_leaf", explain.distill.min_samples_leaf),
        VDT_FIELD("explain.histogram_bins", explain.distill.histogram_bins),
        VDT_FIELD("explain.snr_horizon_s", explain.snr_horizon_s),
        VDT_FIELD("explain.snr_labels_actual", explain.snr_labels_actual),
    };
    return table;
}

#undef VDT_FIELD

void check(const RunConfig& c) {
    c.gen.validate();
    auto fail = [](const std::string& what) { throw ValidationError("config: " + what); };
    if (c.pattern.split_ratio <= 0.0 || c.pattern.split_ratio >= 1.0) fail("pattern.split_ratio must be in (0, 1)");
    if (c.pattern.hyper.epochs == 0 || c.pattern.hyper.batch_size == 0) fail("pattern epochs and batch size must be positive");
    if (c.pattern.hyper.dropout < 0.0 || c.pattern.hyper.dropout >= 1.0) fail("pattern.dropout must be in [0, 1)");
    if (c.predictor.trials < 2) fail("predictor.trials must be at least 2");
    if (c.predictor.train_ratio <= 0.0 || c.predictor.train_ratio >= 1.0) fail("predictor.train_ratio must be in (0, 1)");
    if (c.predictor.folds < 2) fail("predictor.folds must be at least 2");
    if (c.predictor.forest.n_trees == 0) fail("predictor.forest.n_trees must be positive");
    if (c.predictor.boost.n_stages == 0) fail("predictor.boost.n_stages must be positive");
    if (c.predictor.boost.shrinkage <= 0.0 || c.predictor.boost.shrinkage > 1.0) fail("predictor.boost.shrinkage must be in (0, 1]");
    if (c.detector.q < 0.0 || c.detector.q > 1.0) fail("detector.q must be in [0, 1]");
    if (c.detector.actual_quantile < 0.0 || c.detector.actual_quantile > 1.0) fail("detector.actual_quantile must be in [0, 1]");
    if (c.explain.shap_rows == 0) fail("explain.shap_rows must be positive");
    if (c.explain.snr_horizon_s < 1.0) fail("explain.snr_horizon_s must be at least 1");
}

}  // namespace

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "paths.input") {
        c.input = value;
        return;
    }
    if (key == "paths.out") {
        c.out = value;
        return;
    }
    for (const auto& e : entries()) {
        if (e.key == key) {
            e.set(c, value);
            return;
        }
    }
    throw ValidationError("config: unknown key '" + key + "'");
}

RunConfig parse_config(const std::string& text_in, RunConfig base) {
    std::istringstream in(text_in);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = text::trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        apply_setting(base, std::string(text::trim(view.substr(0, eq))), std::string(text::trim(view.substr(eq + 1))));
    }
    check(base);
    return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), std::move(base));
}

std::string serialize_config(const RunConfig& c) {
    std::string out;
    for (const auto& e : entries()) out += e.key + " = " + e.get(c) + '\n';
    return out;
}

}  // namespace vdt
