#include "vdt/trace_model.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "vdt/error.hpp"
#include "vdt/text.hpp"

namespace vdt {

std::string_view kpi_name(Kpi k) {
    switch (k) {
        case Kpi::rsrp: return "rsrp";
        case Kpi::rsrq: return "rsrq";
        case Kpi::snr: return "snr";
        case Kpi::prb: return "prb";
    }
    return "?";
}

std::optional<double> KpiSample::get(Kpi k) const {
    switch (k) {
        case Kpi::rsrp: return rsrp;
        case Kpi::rsrq: return rsrq;
        case Kpi::snr: return snr;
        case Kpi::prb: return prb;
    }
    return std::nullopt;
}

void KpiSample::set(Kpi k, std::optional<double> v) {
    switch (k) {
        case Kpi::rsrp: rsrp = v; break;
        case Kpi::rsrq: rsrq = v; break;
        case Kpi::snr: snr = v; break;
        case Kpi::prb: prb = v; break;
    }
}

const Session* Dataset::find(std::string_view id) const {
    for (const auto& s : sessions) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

namespace {

std::string range_text(double lo, double hi) {
    std::ostringstream os;
    os << "[" << lo << "," << hi << "]";
    return os.str();
}

std::optional<std::string> check_time(double t, const Limits& limits) {
    if (!(t >= 0.0)) return std::string("t negative");
    if (t > limits.duration_cap) return "t beyond session cap " + text::format_exact(limits.duration_cap);
    return std::nullopt;
}

}  // namespace

std::optional<std::string> check_kpi(const KpiSample& s, const Limits& limits) {
    if (auto e = check_time(s.t, limits)) return e;
    auto outside = [](std::optional<double> v, double lo, double hi) {
        return v.has_value() && !(*v >= lo && *v <= hi);
    };
    if (outside(s.rsrp, limits.rsrp_min, limits.rsrp_max)) {
        return "rsrp out of " + range_text(limits.rsrp_min, limits.rsrp_max);
    }
    if (outside(s.rsrq, limits.rsrq_min, limits.rsrq_max)) {
        return "rsrq out of " + range_text(limits.rsrq_min, limits.rsrq_max);
    }
    if (outside(s.snr, limits.snr_min, limits.snr_max)) {
        return "snr out of " + range_text(limits.snr_min, limits.snr_max);
    }
    if (s.prb.has_value() && !(*s.prb >= limits.prb_min)) {
        return std::string("prb negative");
    }
    return std::nullopt;
}

std::optional<std::string> check_mos(const MosSample& s, const Limits& limits) {
    if (auto e = check_time(s.t, limits)) return e;
    if (!(s.mos >= limits.mos_min && s.mos <= limits.mos_max)) {
        return "mos out of " + range_text(limits.mos_min, limits.mos_max);
    }
    return std::nullopt;
}

void validate(const Dataset& d, const Limits& limits) {
    std::unordered_set<std::string> ids;
    for (const auto& s : d.sessions) {
        if (s.id.empty()) throw ValidationError("empty session id");
        if (!ids.insert(s.id).second) throw ValidationError("duplicate session id: " + s.id);
        for (std::size_t i = 0; i < s.kpi.size(); ++i) {
            if (auto e = check_kpi(s.kpi[i], limits)) {
                throw ValidationError("session " + s.id + ": " + *e);
            }
            if (i > 0 && s.kpi[i].t < s.kpi[i - 1].t) {
                throw ValidationError("session " + s.id + ": kpi samples not sorted by t");
            }
        }
        for (std::size_t i = 0; i < s.mos.size(); ++i) {
            if (auto e = check_mos(s.mos[i], limits)) {
                throw ValidationError("session " + s.id + ": " + *e);
            }
            if (i > 0 && !(s.mos[i].t > s.mos[i - 1].t)) {
                throw ValidationError("session " + s.id + ": mos samples not strictly increasing in t");
            }
        }
    }
}

Dataset filter_model_eligible(const Dataset& d) {
    Dataset out;
    out.provenance = d.provenance;
    for (const auto& s : d.sessions) {
        if (s.model_eligible()) out.sessions.push_back(s);
    }
    return out;
}

std::filesystem::path meta_sidecar_path(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".meta.csv");
    return p;
}

namespace {

struct ColumnIndex {
    std::size_t id, t, mos;
    std::array<std::size_t, 4> kpi;
    std::size_t width;
};

ColumnIndex resolve_header(std::string_view header, const CsvSchema& schema) {
    const auto cells = text::split(header, ',');
    auto find = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (text::trim(cells[i]) == name) return i;
        }
        throw ValidationError("schema column missing: " + name);
    };
    ColumnIndex ix{};
    ix.id = find(schema.session_id);
    ix.t = find(schema.t);
    ix.kpi = {find(schema.rsrp), find(schema.rsrq), find(schema.snr), find(schema.prb)};
    ix.mos = find(schema.mos);
    ix.width = cells.size();
    return ix;
}

void read_meta_sidecar(const std::filesystem::path& path, Dataset& d) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read meta sidecar: " + path.string());
    std::string line;
    std::getline(in, line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const auto cells = text::split(line, ',');
        if (cells.size() != 3) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected 3 cells");
        }
        const std::string id(text::trim(cells[0]));
        auto it = std::find_if(d.sessions.begin(), d.sessions.end(),
                               [&](const Session& s) { return s.id == id; });
        if (it == d.sessions.end()) continue;  // session had no accepted rows
        it->meta[std::string(text::trim(cells[1]))] = std::string(text::trim(cells[2]));
    }
}

}  // namespace

IngestResult ingest_csv(const std::filesystem::path& path, const CsvSchema& schema, const Limits& limits) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ValidationError("missing header row: " + path.string());
    const ColumnIndex ix = resolve_header(line, schema);

    IngestResult result;
    result.dataset.provenance = "csv:" + path.string();
    auto& sessions = result.dataset.sessions;
    std::set<std::string> finished;
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::size_t cur = kNone;

    std::size_t lineno = 1;
    auto reject = [&](std::string reason) { result.rejections.push_back({lineno, std::move(reason)}); };

    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        ++result.total_rows;

        const auto cells = text::split(line, ',');
        if (cells.size() != ix.width) {
            reject("expected " + std::to_string(ix.width) + " cells, found " + std::to_string(cells.size()));
            continue;
        }
        const std::string id(text::trim(cells[ix.id]));
        if (id.empty()) {
            reject("empty session id");
            continue;
        }
        if (cur == kNone || sessions[cur].id != id) {
            if (cur != kNone) finished.insert(sessions[cur].id);
            if (finished.count(id) != 0) {
                throw ValidationError("duplicate session id: " + id + " (line " + std::to_string(lineno) + ")");
            }
            // A session whose earlier rows were all rejected may already exist.
            auto it = std::find_if(sessions.begin(), sessions.end(), [&](const Session& s) { return s.id == id; });
            if (it == sessions.end()) {
                sessions.push_back(Session{id, {}, {}, {}});
                cur = sessions.size() - 1;
            } else {
                cur = static_cast<std::size_t>(it - sessions.begin());
            }
        }
        Session* current = &sessions[cur];

        const auto t = text::parse_double(cells[ix.t]);
        if (!t) {
            reject("unparseable t");
            continue;
        }

        KpiSample kpi;
        kpi.t = *t;
        bool bad_cell = false;
        bool any_kpi = false;
        for (Kpi k : kAllKpis) {
            const auto cell = text::trim(cells[ix.kpi[static_cast<int>(k)]]);
            if (cell.empty()) continue;
            const auto v = text::parse_double(cell);
            if (!v) {
                reject("unparseable " + std::string(kpi_name(k)));
                bad_cell = true;
                break;
            }
            kpi.set(k, *v);
            any_kpi = true;
        }
        if (bad_cell) continue;

        std::optional<MosSample> mos;
        const auto mos_cell = text::trim(cells[ix.mos]);
        if (!mos_cell.empty()) {
            const auto v = text::parse_double(mos_cell);
            if (!v) {
                reject("unparseable mos");
                continue;
            }
            mos = MosSample{*t, *v};
        }

        // A row with no KPI and no MOS cell is a KPI sample with every KPI absent.
        const bool is_kpi_row = any_kpi || !mos.has_value();
        if (is_kpi_row) {
            if (auto e = check_kpi(kpi, limits)) {
                reject(*e);
                continue;
            }
            if (!current->kpi.empty() && kpi.t < current->kpi.back().t) {
                reject("kpi timestamp out of order");
                continue;
            }
        }
        if (mos) {
            if (auto e = check_mos(*mos, limits)) {
                reject(*e);
                continue;
            }
            if (!current->mos.empty() && !(mos->t > current->mos.back().t)) {
                reject("mos timestamp not strictly increasing");
                continue;
            }
        }
        if (is_kpi_row) current->kpi.push_back(kpi);
        if (mos) current->mos.push_back(*mos);
        ++result.accepted_rows;
    }

    std::erase_if(sessions, [](const Session& s) { return s.kpi.empty() && s.mos.empty(); });
    if (sessions.empty()) throw ValidationError("zero valid sessions in " + path.string());

    const auto sidecar = meta_sidecar_path(path);
    if (std::filesystem::exists(sidecar)) read_meta_sidecar(sidecar, result.dataset);
    return result;
}

void write_csv(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path.string());

    auto cell = [](std::optional<double> v) { return v ? text::format_fixed(*v, 6) : std::string(); };

    out << "session_id,t,rsrp,rsrq,snr,prb,mos\n";
    bool any_meta = false;
    for (const auto& s : d.sessions) {
        any_meta = any_meta || !s.meta.empty();
        std::size_t i = 0, j = 0;
        // Merge by time; KPI rows precede MOS rows at equal t.
        while (i < s.kpi.size() || j < s.mos.size()) {
            const bool take_kpi = j >= s.mos.size() || (i < s.kpi.size() && s.kpi[i].t <= s.mos[j].t);
            if (take_kpi) {
                const auto& k = s.kpi[i++];
                out << s.id << ',' << text::format_fixed(k.t, 6) << ',' << cell(k.rsrp) << ',' << cell(k.rsrq)
                    << ',' << cell(k.snr) << ',' << cell(k.prb) << ",\n";
            } else {
                const auto& m = s.mos[j++];
                out << s.id << ',' << text::format_fixed(m.t, 6) << ",,,,," << text::format_fixed(m.mos, 6) << '\n';
            }
        }
    }
    if (!out) throw IoError("write failed: " + path.string());

    const auto sidecar = meta_sidecar_path(path);
    if (any_meta) {
        std::ofstream meta(sidecar, std::ios::binary | std::ios::trunc);
        if (!meta) throw IoError("cannot write file: " + sidecar.string());
        meta << "session_id,key,value\n";
        for (const auto& s : d.sessions) {
            for (const auto& [k, v] : s.meta) meta << s.id << ',' << k << ',' << v << '\n';
        }
    } else if (std::filesystem::exists(sidecar)) {
        std::filesystem::remove(sidecar);
    }
}

}  // namespace vdt
