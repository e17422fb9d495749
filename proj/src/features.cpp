#include "vdt/features.hpp"

#include <fstream>
#include <stdexcept>

#include "vdt/error.hpp"
#include "vdt/stats.hpp"
#include "vdt/text.hpp"

namespace vdt {

const std::array<std::string_view, kNumFeatures>& feature_names() {
    static const std::array<std::string_view, kNumFeatures> names = {
        "sess_time", "block_len", "rsrp_c", "rsrp_b", "rsrp_s", "rsrq_c", "rsrq_b",
        "rsrq_s",    "snr_c",     "snr_b",  "snr_s",  "prb_c",  "prb_b",  "prb_s"};
    return names;
}

std::optional<Feature> feature_from_name(std::string_view name) {
    const auto& names = feature_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<Feature>(i);
    }
    return std::nullopt;
}

std::vector<TimedValue> kpi_series(std::span<const KpiSample> kpi, Kpi k) {
    std::vector<TimedValue> out;
    out.reserve(kpi.size());
    for (const auto& s : kpi) out.push_back({s.t, s.get(k)});
    return out;
}

std::vector<TimedValue> backward_fill(std::span<const TimedValue> values) {
    std::vector<TimedValue> out(values.begin(), values.end());
    std::optional<double> next;
    for (auto it = out.rbegin(); it != out.rend(); ++it) {
        if (it->value) {
            next = it->value;
        } else {
            it->value = next;
        }
    }
    return out;
}

std::vector<KpiSample> backward_fill(std::span<const KpiSample> kpi) {
    std::vector<KpiSample> out(kpi.begin(), kpi.end());
    for (Kpi k : kAllKpis) {
        std::optional<double> next;
        for (auto it = out.rbegin(); it != out.rend(); ++it) {
            if (auto v = it->get(k)) {
                next = v;
            } else {
                it->set(k, next);
            }
        }
    }
    return out;
}

std::optional<double> cumulative_mean(std::span<const TimedValue> values, double upto_t) {
    // accumulator + counter, reset per session
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& v : values) {
        if (v.t > upto_t) break;
        if (v.value) {
            acc += *v.value;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return acc / static_cast<double>(count);
}

std::optional<double> block_mean(std::span<const TimedValue> values, double t_prev, double t_now) {
    if (!(t_prev < t_now)) throw std::invalid_argument("block_mean requires t_prev < t_now");
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& v : values) {
        if (v.t <= t_prev) continue;
        if (v.t > t_now) break;
        if (v.value) {
            acc += *v.value;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return acc / static_cast<double>(count);
}

namespace {

std::optional<double> latest_at_or_before(std::span<const TimedValue> values, double t) {
    std::optional<double> latest;
    for (const auto& v : values) {
        if (v.t > t) break;
        if (v.value) latest = v.value;
    }
    return latest;
}

}  // namespace

FeatureBuild build_session_rows(const Session& s) {
    FeatureBuild out;
    std::array<std::vector<TimedValue>, 4> raw;
    for (Kpi k : kAllKpis) raw[static_cast<std::size_t>(k)] = kpi_series(s.kpi, k);

    double t_prev = 0.0;
    for (std::size_t i = 0; i < s.mos.size(); ++i) {
        const double t_now = s.mos[i].t;
        FeatureRow row;
        row.session_id = s.id;
        row.mos_index = i;
        row.mos = s.mos[i].mos;
        row.x[static_cast<std::size_t>(Feature::sess_time)] = t_now;
        row.x[static_cast<std::size_t>(Feature::block_len)] = i == 0 ? t_now : t_now - t_prev;

        bool complete = true;
        for (Kpi k : kAllKpis) {
            const auto& series = raw[static_cast<std::size_t>(k)];
            // Fill only within [0, t_now] so no later measurement leaks into this row.
            std::size_t prefix = 0;
            while (prefix < series.size() && series[prefix].t <= t_now) ++prefix;
            const auto filled = backward_fill(std::span(series).first(prefix));

            const auto current = latest_at_or_before(filled, t_now);
            const auto session = cumulative_mean(filled, t_now);
            const auto block = (i == 0) ? session : block_mean(filled, t_prev, t_now);
            if (!current || !session || !block) {
                complete = false;
                break;
            }
            const std::size_t base = 2 + 3 * static_cast<std::size_t>(k);
            row.x[base] = *current;
            row.x[base + 1] = *block;
            row.x[base + 2] = *session;
        }
        if (complete) {
            out.rows.push_back(std::move(row));
        } else {
            ++out.dropped;
        }
        t_prev = t_now;
    }
    return out;
}

FeatureBuild build_rows(const Dataset& d) {
    FeatureBuild out;
    for (const auto& s : d.sessions) {
        auto part = build_session_rows(s);
        out.dropped += part.dropped;
        for (auto& r : part.rows) out.rows.push_back(std::move(r));
    }
    return out;
}

CorrelationMatrix pearson_matrix(std::span<const FeatureRow> rows) {
    if (rows.size() < 2) throw ValidationError("pearson_matrix needs at least 2 rows");

    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    CorrelationMatrix out;
    auto consider = [&](std::string name, std::vector<double> col) {
        bool constant = true;
        for (double v : col) constant = constant && v == col.front();
        if (constant) {
            out.excluded.push_back(std::move(name));
        } else {
            names.push_back(std::move(name));
            columns.push_back(std::move(col));
        }
    };
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        std::vector<double> col(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) col[r] = rows[r].x[f];
        consider(std::string(feature_names()[f]), std::move(col));
    }
    {
        std::vector<double> col(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) col[r] = rows[r].mos;
        consider("mos", std::move(col));
    }

    const std::size_t n = columns.size();
    out.names = std::move(names);
    out.values.assign(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double r = stats::pearson(columns[i], columns[j]);
            out.values[i][j] = r;
            out.values[j][i] = r;
        }
    }
    return out;
}

void write_features_csv(std::span<const FeatureRow> rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path.string());
    out << "session_id,mos_index";
    for (auto name : feature_names()) out << ',' << name;
    out << ",mos\n";
    for (const auto& r : rows) {
        out << r.session_id << ',' << r.mos_index;
        for (double v : r.x) out << ',' << text::format_exact(v);
        out << ',' << text::format_exact(r.mos) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read file: " + path.string());
    std::string line;
    std::getline(in, line);
    const std::size_t width = 2 + kNumFeatures + 1;
    if (text::split(line, ',').size() != width) throw ValidationError("unexpected feature header in " + path.string());

    std::vector<FeatureRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const auto cells = text::split(line, ',');
        auto bad = [&] { return ValidationError(path.string() + ":" + std::to_string(lineno) + ": malformed feature row"); };
        if (cells.size() != width) throw bad();
        FeatureRow r;
        r.session_id = std::string(text::trim(cells[0]));
        const auto idx = text::parse_int(cells[1]);
        if (!idx || *idx < 0) throw bad();
        r.mos_index = static_cast<std::size_t>(*idx);
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            const auto v = text::parse_double(cells[2 + f]);
            if (!v) throw bad();
            r.x[f] = *v;
        }
        const auto mos = text::parse_double(cells[width - 1]);
        if (!mos) throw bad();
        r.mos = *mos;
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace vdt
