#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>
#include <unordered_set>

#include "vdt/anomaly.hpp"
#include "vdt/config.hpp"
#include "vdt/error.hpp"
#include "vdt/explainer.hpp"
#include "vdt/features.hpp"
#include "vdt/pipeline.hpp"
#include "vdt/stats.hpp"
#include "vdt/synthetic_gen.hpp"
#include "vdt/trace_model.hpp"
#include "vdt/trees.hpp"

namespace py = pybind11;
using namespace vdt;

namespace {

using Matrix = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<FeatureVector> rows_of(const Matrix& x) {
    if (x.ndim() != 2 || x.shape(1) != static_cast<py::ssize_t>(kNumFeatures)) {
        throw ValidationError("expected an (n, 14) feature matrix");
    }
    const auto v = x.unchecked<2>();
    std::vector<FeatureVector> out(static_cast<std::size_t>(x.shape(0)));
    for (py::ssize_t i = 0; i < x.shape(0); ++i) {
        for (py::ssize_t f = 0; f < x.shape(1); ++f) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)] = v(i, f);
    }
    return out;
}

std::vector<double> vector_of(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) throw ValidationError("expected a 1-d array");
    return {a.data(), a.data() + a.size()};
}

RunConfig make_config(const std::optional<std::filesystem::path>& path, const std::map<std::string, std::string>& settings) {
    RunConfig c = path ? load_config(*path) : RunConfig{};
    for (const auto& [k, v] : settings) {
        if (k == "paths.out") {
            c.out = v;
        } else if (k == "paths.input") {
            c.input = v;
        } else {
            apply_setting(c, k, v);
        }
    }
    return parse_config("", c);
}

LearnerKind kind_of(const std::string& name) {
    if (name == "tree") return LearnerKind::tree;
    if (name == "forest") return LearnerKind::forest;
    if (name == "boosted") return LearnerKind::boosted;
    throw ValidationError("unknown learner kind: " + name);
}

py::dict sweep_point(const SweepPoint& p) {
    py::dict d;
    d["threshold"] = p.threshold;
    d["flagged"] = p.flagged;
    d["precision"] = p.precision ? py::cast(*p.precision) : py::none();
    d["recall"] = p.recall;
    d["f1"] = p.f1 ? py::cast(*p.f1) : py::none();
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Video QoE diagnosis core: generator, features, tree learners, TreeSHAP, detector and pipeline";

    static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
    static py::exception<IoError> io(m, "IoError", base.ptr());
    static py::exception<ValidationError> validation(m, "ValidationError", base.ptr());
    static py::exception<DivergenceError> divergence(m, "DivergenceError", base.ptr());
    static py::exception<MissingArtifactError> missing(m, "MissingArtifactError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const IoError& e) {
            PyErr_SetString(io.ptr(), e.what());
        } catch (const ValidationError& e) {
            PyErr_SetString(validation.ptr(), e.what());
        } catch (const DivergenceError& e) {
            PyErr_SetString(divergence.ptr(), e.what());
        } catch (const MissingArtifactError& e) {
            PyErr_SetString(missing.ptr(), e.what());
        } catch (const Error& e) {
            PyErr_SetString(base.ptr(), e.what());
        }
    });

    m.def("feature_names", [] {
        std::vector<std::string> out;
        for (auto n : feature_names()) out.emplace_back(n);
        return out;
    });

    py::class_<RunConfig>(m, "Config")
        .def(py::init(&make_config), py::arg("path") = std::nullopt,
             py::arg("settings") = std::map<std::string, std::string>{},
             "Defaults, optionally overlaid by a config file, then by `key -> value` settings.")
        .def("set", [](RunConfig& c, const std::string& key, const std::string& value) {
            apply_setting(c, key, value);
            c = parse_config("", c);
        })
        .def("text", &serialize_config)
        .def_property("out", [](const RunConfig& c) { return c.out; },
                      [](RunConfig& c, const std::filesystem::path& p) { c.out = p; })
        .def_property("input", [](const RunConfig& c) { return c.input; },
                      [](RunConfig& c, const std::filesystem::path& p) { c.input = p; })
        .def_readwrite("seed", &RunConfig::seed);

    m.def(
        "run",
        [](const RunConfig& c, const std::string& stage) {
            std::ostringstream log;
            if (stage == "all") {
                pipeline::run_all(c, log);
            } else if (stage == "generate") {
                pipeline::generate(c, log);
            } else if (stage == "ingest") {
                pipeline::ingest(c, log);
            } else if (stage == "features") {
                pipeline::features(c, log);
            } else if (stage == "train-pattern") {
                pipeline::train_pattern(c, log);
            } else if (stage == "train-predictor") {
                pipeline::train_predictor(c, log);
            } else if (stage == "detect") {
                pipeline::detect(c, log);
            } else if (stage == "explain") {
                pipeline::explain(c, log);
            } else if (stage == "report") {
                pipeline::report(c, log);
            } else {
                throw ValidationError("unknown stage: " + stage);
            }
            return log.str();
        },
        py::arg("config"), py::arg("stage") = "all", "Run one pipeline stage (or `all`); returns the log.");

    m.def(
        "generate_csv",
        [](const RunConfig& c, const std::filesystem::path& path) {
            auto gen = c.gen;
            gen.seed = c.resolved_generate_seed();
            const auto g = generate(gen);
            write_csv(g.dataset, path);
            return py::make_tuple(g.dataset.sessions.size(), g.warnings);
        },
        py::arg("config"), py::arg("path"), "Write a synthetic dataset; returns (n_sessions, warnings).");

    m.def(
        "load_features",
        [](const std::filesystem::path& csv) {
            const auto ingested = ingest_csv(csv);
            const auto built = build_rows(filter_model_eligible(ingested.dataset));
            const auto n = static_cast<py::ssize_t>(built.rows.size());
            py::array_t<double> x({n, static_cast<py::ssize_t>(kNumFeatures)});
            py::array_t<double> y(std::vector<py::ssize_t>{n});
            py::array_t<std::int64_t> index(std::vector<py::ssize_t>{n});
            auto xv = x.mutable_unchecked<2>();
            auto yv = y.mutable_unchecked<1>();
            auto iv = index.mutable_unchecked<1>();
            std::vector<std::string> ids;
            ids.reserve(built.rows.size());
            for (py::ssize_t i = 0; i < n; ++i) {
                const auto& r = built.rows[static_cast<std::size_t>(i)];
                for (std::size_t f = 0; f < kNumFeatures; ++f) xv(i, static_cast<py::ssize_t>(f)) = r.x[f];
                yv(i) = r.mos;
                iv(i) = static_cast<std::int64_t>(r.mos_index);
                ids.push_back(r.session_id);
            }
            py::dict d;
            d["session_id"] = ids;
            d["mos_index"] = index;
            d["X"] = x;
            d["y"] = y;
            d["dropped"] = built.dropped;
            d["rejected_rows"] = ingested.rejections.size();
            return d;
        },
        py::arg("csv"), "Ingest a session CSV and build the 14-feature rows.");

    py::class_<AnyModel>(m, "Model")
        .def_static(
            "fit",
            [](const Matrix& X, const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
               const std::string& kind, std::uint64_t seed, std::size_t n_trees, int max_depth,
               std::size_t min_samples_leaf, std::size_t n_stages, double shrinkage,
               const std::optional<std::vector<std::string>>& features) {
                const auto xs = rows_of(X);
                const auto ys = vector_of(y);
                if (xs.size() != ys.size()) throw ValidationError("X and y differ in length");
                LearnerSpec spec;
                spec.kind = kind_of(kind);
                spec.forest.n_trees = n_trees;
                spec.forest.max_depth = max_depth;
                spec.forest.min_samples_leaf = min_samples_leaf;
                spec.tree = {max_depth, min_samples_leaf, 0};
                spec.boost.n_stages = n_stages;
                spec.boost.shrinkage = shrinkage;
                if (kind == "boosted" && max_depth >= 0) spec.boost.max_depth = max_depth;
                if (features) {
                    spec.mask.fill(false);
                    for (const auto& name : *features) {
                        const auto f = feature_from_name(name);
                        if (!f) throw ValidationError("unknown feature: " + name);
                        spec.mask[static_cast<std::size_t>(*f)] = true;
                    }
                }
                std::vector<FeatureRow> rows(xs.size());
                for (std::size_t i = 0; i < xs.size(); ++i) {
                    rows[i].x = xs[i];
                    rows[i].mos = ys[i];
                }
                return fit_learner(rows, spec, seed);
            },
            py::arg("X"), py::arg("y"), py::arg("kind") = "forest", py::arg("seed") = 1, py::arg("n_trees") = 100,
            py::arg("max_depth") = -1, py::arg("min_samples_leaf") = 2, py::arg("n_stages") = 200,
            py::arg("shrinkage") = 0.1, py::arg("features") = std::nullopt)
        .def_property_readonly("kind",
                               [](const AnyModel& a) {
                                   switch (a.kind) {
                                       case LearnerKind::tree: return "tree";
                                       case LearnerKind::forest: return "forest";
                                       case LearnerKind::boosted: return "boosted";
                                   }
                                   return "?";
                               })
        .def("predict",
             [](const AnyModel& a, const Matrix& X) {
                 const auto xs = rows_of(X);
                 py::array_t<double> out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(xs.size())});
                 auto o = out.mutable_unchecked<1>();
                 for (std::size_t i = 0; i < xs.size(); ++i) o(static_cast<py::ssize_t>(i)) = a.predict(xs[i]);
                 return out;
             })
        .def(
            "shap",
            [](const AnyModel& a, const Matrix& X) {
                const auto xs = rows_of(X);
                const auto n = static_cast<py::ssize_t>(xs.size());
                py::array_t<double> base(std::vector<py::ssize_t>{n});
                py::array_t<double> contrib({n, static_cast<py::ssize_t>(kNumFeatures)});
                auto b = base.mutable_unchecked<1>();
                auto c = contrib.mutable_unchecked<2>();
                for (py::ssize_t i = 0; i < n; ++i) {
                    const auto at = tree_shap(a, xs[static_cast<std::size_t>(i)]);
                    b(i) = at.base_value;
                    for (std::size_t f = 0; f < kNumFeatures; ++f) c(i, static_cast<py::ssize_t>(f)) = at.contributions[f];
                }
                return py::make_tuple(base, contrib);
            },
            "Returns (base_values, contributions) with contributions of shape (n, 14).");

    m.def("r2_score", [](const std::vector<double>& y, const std::vector<double>& yhat) { return r2_score(y, yhat); });
    m.def("mse_per_session", [](const std::vector<std::string>& ids, const std::vector<double>& y,
                                const std::vector<double>& yhat) {
        if (ids.size() != y.size() || y.size() != yhat.size()) throw ValidationError("input lengths differ");
        std::vector<Prediction> p;
        for (std::size_t i = 0; i < ids.size(); ++i) p.push_back({ids[i], y[i], yhat[i]});
        return mse_per_session(p);
    });
    m.def("percentile", [](const std::vector<double>& xs, double q) { return stats::percentile(xs, q); },
          py::arg("xs"), py::arg("q"));
    m.def("pearson", [](const std::vector<double>& a, const std::vector<double>& b) { return stats::pearson(a, b); });
    m.def(
        "confusion",
        [](std::size_t tp, std::size_t fp, std::size_t fn) {
            const auto c = confusion_from_counts(tp, fp, fn);
            py::dict d;
            d["precision"] = c.precision() ? py::cast(*c.precision()) : py::none();
            d["recall"] = c.recall() ? py::cast(*c.recall()) : py::none();
            d["f1"] = c.f1() ? py::cast(*c.f1()) : py::none();
            return d;
        },
        py::arg("tp"), py::arg("fp"), py::arg("fn"));
    m.def(
        "threshold_sweep",
        [](const std::vector<double>& scores, const std::vector<bool>& actual) {
            const auto s = threshold_sweep(scores, actual);
            py::list points;
            for (const auto& p : s.points) points.append(sweep_point(p));
            return py::make_tuple(points, s.best);
        },
        py::arg("scores"), py::arg("actual"), "Returns (points, index of the max-F1 point).");
}
