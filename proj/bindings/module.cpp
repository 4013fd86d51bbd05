// Python bindings for the spinney core. The surface speaks state names:
// regions are lists of names (empty list = the model's default region) and
// measures are numpy vectors in model.states order. Configuration errors map
// to ValueError, numeric failures (divergent Green's function, bad solves)
// to ArithmeticError.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <utility>

#include "spinney/acceptance.hpp"
#include "spinney/bmc.hpp"
#include "spinney/decorability.hpp"
#include "spinney/errors.hpp"
#include "spinney/forest.hpp"
#include "spinney/interlacement.hpp"
#include "spinney/model.hpp"
#include "spinney/model_io.hpp"
#include "spinney/potential.hpp"
#include "spinney/verify.hpp"

namespace py = pybind11;
using namespace spinney;

namespace {

StateSet region_from(const Model& model, const std::vector<std::string>& names) {
    if (names.empty()) return model.default_b();
    StateSet b;
    b.reserve(names.size());
    for (const auto& name : names) b.push_back(model.index_of(name));
    return normalize_state_set(model, std::move(b));
}

std::vector<std::string> region_names(const Model& model, const StateSet& b) {
    std::vector<std::string> names;
    names.reserve(b.size());
    for (StateIndex x : b) names.push_back(model.name_of(x));
    return names;
}

Measure measure_from(const Model& model, const Eigen::VectorXd& values) {
    if (values.size() != model.size())
        throw DimensionMismatch("measure has " + std::to_string(values.size()) +
                                " entries for " + std::to_string(model.size()) +
                                " states");
    return Measure{values};
}

std::vector<std::string> spine_names(const Model& model, const SpinePath& spine) {
    std::vector<std::string> names;
    names.reserve(spine.states.size());
    for (StateIndex x : spine.states) names.push_back(model.name_of(x));
    return names;
}

const char* spine_end_name(SpinePath::End end) {
    switch (end) {
        case SpinePath::End::EnteredB: return "entered-region";
        case SpinePath::End::KilledBeforeB: return "killed";
        default: return "truncated";
    }
}

std::string forest_text(const Forest& forest, const Model& model) {
    std::ostringstream os;
    write_forest(os, forest, model);
    return os.str();
}

Model build_from_laws(std::vector<std::string> states, Eigen::MatrixXd motion,
                      const std::vector<std::map<int, double>>& laws) {
    std::vector<OffspringLaw> offspring;
    offspring.reserve(laws.size());
    for (const auto& law : laws)
        offspring.push_back(OffspringLaw::from_entries(
            std::vector<std::pair<int, double>>(law.begin(), law.end())));
    return Model::build(std::move(states), std::move(motion), std::move(offspring));
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "potential theory and branching interlacements for "
              "branching Markov chains";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Numeric)
                PyErr_SetString(PyExc_ArithmeticError, e.what());
            else
                PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    py::class_<SamplerCaps>(m, "SamplerCaps")
        .def(py::init<>())
        .def(py::init([](std::int64_t generations, std::int64_t population) {
                 return SamplerCaps{generations, population};
             }),
             py::arg("max_generations"), py::arg("max_population"))
        .def_readwrite("max_generations", &SamplerCaps::max_generations)
        .def_readwrite("max_population", &SamplerCaps::max_population)
        .def("__repr__", [](const SamplerCaps& c) {
            return "SamplerCaps(max_generations=" +
                   std::to_string(c.max_generations) +
                   ", max_population=" + std::to_string(c.max_population) + ")";
        });

    py::class_<Model>(m, "Model")
        .def_static("build", &build_from_laws, py::arg("states"),
                    py::arg("motion"), py::arg("offspring"),
                    "Build a model from state names, a sub-stochastic motion "
                    "matrix and one {count: prob} offspring law per state.")
        .def_property_readonly("states", &Model::states)
        .def_property_readonly("motion",
                               [](const Model& m_) { return m_.motion(); })
        .def_property_readonly("intensity",
                               [](const Model& m_) { return m_.intensity(); })
        .def_property_readonly(
            "mean_offspring",
            [](const Model& m_) -> Eigen::VectorXd { return m_.mean_offspring(); })
        .def_property_readonly("default_region",
                               [](const Model& m_) {
                                   return region_names(m_, m_.default_b());
                               })
        .def("spectral_radius", &Model::spectral_radius)
        .def("green",
             [](const Model& m_) -> Eigen::MatrixXd { return m_.green(); },
             "Green's function G = sum_n Q^n; raises ArithmeticError when the "
             "intensity is not subcritical.")
        .def("index_of", &Model::index_of, py::arg("state"))
        .def("name_of", &Model::name_of, py::arg("index"))
        .def("offspring_law",
             [](const Model& m_, const std::string& state) {
                 std::map<int, double> law;
                 for (auto [count, prob] :
                      m_.offspring(m_.index_of(state)).entries())
                     law[count] = prob;
                 return law;
             },
             py::arg("state"))
        .def("__len__", &Model::size)
        .def("__repr__", [](const Model& m_) {
            std::string r = "Model(states=[";
            for (int i = 0; i < m_.size(); ++i)
                r += (i ? ", " : "") + m_.states()[i];
            return r + "])";
        });

    m.def("load_model", &load_model, py::arg("spec"),
          "Load a model file; 'path#name' picks one model out of a "
          "multi-model file.");
    m.def(
        "model_text",
        [](const Model& model, const std::string& name) {
            std::ostringstream os;
            write_model_file(os, model, name);
            return os.str();
        },
        py::arg("model"), py::arg("name") = std::string(),
        "Canonical model-file text; load_model reads it back unchanged.");

    m.def(
        "h_function",
        [](const Model& model, const std::vector<std::string>& b) {
            return h_function(model, region_from(model, b)).values;
        },
        py::arg("model"), py::arg("region") = std::vector<std::string>{},
        "Hitting probability of the region for the single-particle motion: "
        "h = 1 on the region, h = Qh off it.");
    m.def(
        "taboo_return_kernel",
        [](const Model& model, const std::vector<std::string>& b) {
            return taboo_return_kernel(model, region_from(model, b));
        },
        py::arg("model"), py::arg("region") = std::vector<std::string>{});
    m.def(
        "entrance_measure",
        [](const Eigen::VectorXd& nu, const Model& model,
           const std::vector<std::string>& b) {
            return entrance_measure(measure_from(model, nu), model,
                                    region_from(model, b))
                .values;
        },
        py::arg("nu"), py::arg("model"),
        py::arg("region") = std::vector<std::string>{});
    m.def(
        "is_excessive",
        [](const Eigen::VectorXd& nu, const Model& model) {
            auto check = is_excessive(measure_from(model, nu), model);
            return py::make_tuple(check.excessive, check.slack);
        },
        py::arg("nu"), py::arg("model"),
        "Returns (excessive, slack) where slack is the worst violation of "
        "nu Q <= nu.");
    m.def(
        "riesz_decomposition",
        [](const Eigen::VectorXd& nu, const Model& model) {
            auto pair = riesz_decomposition(measure_from(model, nu), model);
            return py::make_tuple(pair.potential_part.values,
                                  pair.invariant_part.values);
        },
        py::arg("nu"), py::arg("model"),
        "Splits an excessive measure as charge.G + invariant; returns "
        "(charge, invariant).");
    m.def(
        "occupation_to_excessive",
        [](const Eigen::VectorXd& mu, const Model& model,
           const std::vector<std::string>& b) {
            return occupation_to_excessive(measure_from(model, mu), model,
                                           region_from(model, b))
                .values;
        },
        py::arg("mu"), py::arg("model"),
        py::arg("region") = std::vector<std::string>{});
    m.def(
        "excessive_to_occupation",
        [](const Eigen::VectorXd& nu, const Model& model,
           const std::vector<std::string>& b) {
            return excessive_to_occupation(measure_from(model, nu), model,
                                           region_from(model, b))
                .values;
        },
        py::arg("nu"), py::arg("model"),
        py::arg("region") = std::vector<std::string>{});

    py::class_<Forest>(m, "Forest")
        .def_static(
            "from_text",
            [](const std::string& text, const Model& model) {
                std::istringstream is(text);
                return read_forest(is, model);
            },
            py::arg("text"), py::arg("model"))
        .def("__len__", &Forest::size)
        .def("roots", &Forest::roots)
        .def("children", &Forest::children, py::arg("label"))
        .def("location",
             [](const Forest& f, Label label, const Model& model) {
                 return model.name_of(f.by_label(label).location);
             },
             py::arg("label"), py::arg("model"))
        .def("occupation",
             [](const Forest& f, const Model& model) {
                 return occupation_of(f, model).values;
             },
             py::arg("model"),
             "Per-state individual counts as a vector in model.states order.")
        .def("entrance_set",
             [](const Forest& f, const Model& model,
                const std::vector<std::string>& b) {
                 return entrance_set(f, region_from(model, b));
             },
             py::arg("model"), py::arg("region") = std::vector<std::string>{})
        .def("progeny_of_entrance",
             [](const Forest& f, const Model& model,
                const std::vector<std::string>& b) {
                 return progeny_of_entrance(f, region_from(model, b));
             },
             py::arg("model"), py::arg("region") = std::vector<std::string>{})
        .def("to_text", &forest_text, py::arg("model"))
        .def_readonly("generation_capped", &Forest::generation_capped)
        .def_readonly("population_capped", &Forest::population_capped)
        .def("__repr__", [](const Forest& f) {
            return "Forest(" + std::to_string(f.size()) + " individuals)";
        });

    m.def(
        "sample_forest",
        [](const Model& model, const std::string& x, std::uint64_t seed,
           const SamplerCaps& caps) {
            Rng rng(seed);
            return sample_bmc(model, model.index_of(x), rng, caps);
        },
        py::arg("model"), py::arg("x"), py::arg("seed"),
        py::arg("caps") = SamplerCaps{},
        py::call_guard<py::gil_scoped_release>(),
        "Plain branching Markov chain tree from one root at x.");
    m.def(
        "sample_biased_forest",
        [](const Model& model, const std::vector<std::string>& b,
           const std::string& x, std::uint64_t seed, const SamplerCaps& caps) {
            Rng rng(seed);
            return sample_biased_bmc(model, region_from(model, b),
                                     model.index_of(x), rng, caps);
        },
        py::arg("model"), py::arg("region"), py::arg("x"), py::arg("seed"),
        py::arg("caps") = SamplerCaps{},
        py::call_guard<py::gil_scoped_release>(),
        "Entrance-count-reweighted tree with its blue spine coloured.");
    m.def(
        "sample_spine",
        [](const Model& model, const std::vector<std::string>& b,
           const std::string& x, std::uint64_t seed, const SamplerCaps& caps) {
            Rng rng(seed);
            auto spine = sample_spine(model, region_from(model, b),
                                      model.index_of(x), rng, caps);
            return py::make_tuple(spine_names(model, spine),
                                  spine_end_name(spine.end));
        },
        py::arg("model"), py::arg("region"), py::arg("x"), py::arg("seed"),
        py::arg("caps") = SamplerCaps{},
        "Doob-transformed motion stopped on entering the region; returns "
        "(states, end) with end one of 'entered-region', 'killed', "
        "'truncated'.");

    py::class_<KuznetsovPath>(m, "AnchoredPath")
        .def_property_readonly(
            "states",
            [](const KuznetsovPath& p) { return p.states; },
            "State indices; use Model.name_of for names.")
        .def_readonly("anchor", &KuznetsovPath::anchor)
        .def_readonly("born", &KuznetsovPath::born)
        .def("__repr__", [](const KuznetsovPath& p) {
            return "AnchoredPath(" + std::to_string(p.states.size()) +
                   " states, anchor=" + std::to_string(p.anchor) + ")";
        });

    py::class_<KuznetsovSampler>(m, "AnchoredPathSampler")
        .def(py::init([](const Eigen::VectorXd& nu, const Model& model,
                         const std::vector<std::string>& b) {
                 return KuznetsovSampler(measure_from(model, nu), model,
                                         region_from(model, b));
             }),
             py::arg("nu"), py::arg("model"),
             py::arg("region") = std::vector<std::string>{},
             "Two-sided path measure anchored on first entry of the region, "
             "for an excessive nu.")
        .def_property_readonly(
            "entrance",
            [](const KuznetsovSampler& s) { return s.entrance().values; })
        .def("sample",
             [](const KuznetsovSampler& s, std::uint64_t seed,
                const SamplerCaps& caps) {
                 Rng rng(seed);
                 return s.sample(rng, caps);
             },
             py::arg("seed"), py::arg("caps") = SamplerCaps{});

    py::class_<InterlacementSample>(m, "InterlacementSample")
        .def_readonly("trees", &InterlacementSample::trees)
        .def_readonly("intensity_mass", &InterlacementSample::intensity_mass)
        .def_readonly("u", &InterlacementSample::u)
        .def_readonly("seed", &InterlacementSample::seed)
        .def_readonly("advisory", &InterlacementSample::advisory)
        .def(
            "occupation_rows",
            [](const InterlacementSample& sample, const Model& model) {
                std::vector<py::tuple> rows;
                StateSet b = sample.region;
                for (const auto& row :
                     progeny_occupation_rows(sample, model, b))
                    rows.push_back(py::make_tuple(model.name_of(row.state),
                                                  row.empirical, row.target,
                                                  row.z));
                return rows;
            },
            py::arg("model"),
            "Per-state (state, empirical per unit u, exact target, z).")
        .def(
            "to_text",
            [](const InterlacementSample& sample, const Model& model) {
                std::ostringstream os;
                write_interlacement_sample(os, sample, model);
                return os.str();
            },
            py::arg("model"))
        .def("__repr__", [](const InterlacementSample& s) {
            return "InterlacementSample(" + std::to_string(s.trees.size()) +
                   " trees, u=" + std::to_string(s.u) + ")";
        });

    m.def(
        "sample_interlacement",
        [](const Eigen::VectorXd& nu, const Model& model,
           const std::vector<std::string>& b, double u, std::uint64_t seed,
           const SamplerCaps& caps) {
            return sample_branching_interlacement(measure_from(model, nu),
                                                  model, region_from(model, b),
                                                  u, seed, caps);
        },
        py::arg("nu"), py::arg("model"), py::arg("region"), py::arg("u"),
        py::arg("seed"), py::arg("caps") = SamplerCaps{},
        py::call_guard<py::gil_scoped_release>(),
        "Poisson cloud of hitting trees at level u for an excessive nu.");

    py::class_<CriterionRow>(m, "CriterionRow")
        .def_readonly("name", &CriterionRow::name)
        .def_readonly("applicable", &CriterionRow::applicable)
        .def_readonly("verdict", &CriterionRow::verdict)
        .def_readonly("value", &CriterionRow::value)
        .def_readonly("detail", &CriterionRow::detail)
        .def("__repr__", [](const CriterionRow& r) {
            return "CriterionRow(" + r.name + ": " + r.verdict + ")";
        });

    py::class_<DecorabilityReport>(m, "DecorabilityReport")
        .def_readonly("constant", &DecorabilityReport::constant)
        .def_readonly("bounds", &DecorabilityReport::bounds)
        .def_readonly("criteria", &DecorabilityReport::criteria)
        .def_readonly("truncation", &DecorabilityReport::truncation);

    m.def(
        "decorability_constant",
        [](const Model& model, const std::vector<std::string>& b) {
            return decorability_constant(model, region_from(model, b));
        },
        py::arg("model"), py::arg("region") = std::vector<std::string>{},
        "Supremum over states of the h-weighted Green sum; +inf when it "
        "diverges.");
    m.def(
        "hit_probability_bounds",
        [](const Model& model, const std::vector<std::string>& b) {
            return hit_probability_bounds(model, region_from(model, b));
        },
        py::arg("model"), py::arg("region") = std::vector<std::string>{},
        "Per-state (lower, upper) envelope for the tree hitting the region.");
    m.def(
        "decorability_advisory",
        [](const Model& model, const std::vector<std::string>& b) {
            return decorability_advisory(model, region_from(model, b));
        },
        py::arg("model"), py::arg("region") = std::vector<std::string>{});
    m.def(
        "criteria_report",
        [](const Model& model, const std::vector<std::string>& b,
           std::int64_t truncation) {
            return criteria_report(model, region_from(model, b), truncation);
        },
        py::arg("model"), py::arg("region") = std::vector<std::string>{},
        py::arg("truncation") = 500);

    py::class_<TestReport>(m, "TestReport")
        .def_readonly("name", &TestReport::name)
        .def_readonly("statistic", &TestReport::statistic)
        .def_readonly("threshold", &TestReport::threshold)
        .def_property_readonly("passed",
                               [](const TestReport& r) { return r.pass; })
        .def_readonly("sample_size", &TestReport::sample_size)
        .def_readonly("seed", &TestReport::seed)
        .def_readonly("notes", &TestReport::notes)
        .def("__repr__", &report_text);

    m.def(
        "spine_identity_test",
        [](const Model& model, const std::vector<std::string>& b,
           const std::string& x, int depth, std::int64_t n,
           std::uint64_t seed, double corrupt_h_scale, int workers) {
            return spine_identity_test(model, region_from(model, b),
                                       model.index_of(x), depth, n, seed,
                                       corrupt_h_scale, workers);
        },
        py::arg("model"), py::arg("region"), py::arg("x"), py::arg("depth"),
        py::arg("n"), py::arg("seed"), py::arg("corrupt_h_scale") = 1.0,
        py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>(),
        "Reweighted-vs-biased tree law check; returns [exact leg, sampled "
        "leg].");
    m.def(
        "anchored_markov_test",
        [](const Eigen::VectorXd& nu, const Model& model,
           const std::vector<std::string>& b, const std::string& probe,
           std::int64_t n, std::uint64_t seed, int workers) {
            return kuznetsov_markov_test(measure_from(model, nu), model,
                                         region_from(model, b),
                                         model.index_of(probe), n, seed,
                                         workers);
        },
        py::arg("nu"), py::arg("model"), py::arg("region"), py::arg("probe"),
        py::arg("n"), py::arg("seed"), py::arg("workers") = 1,
        py::call_guard<py::gil_scoped_release>(),
        "Forward-law chi-square and two-sample check for the anchored path "
        "measure.");
    m.def(
        "interlacement_occupation_test",
        [](const Model& model, const std::vector<std::string>& b,
           const Eigen::VectorXd& nu, double u, std::int64_t n_runs,
           std::uint64_t seed, int workers) {
            StateSet region = region_from(model, b);
            return interlacement_qp_test(model, region, region,
                                         measure_from(model, nu), u, n_runs,
                                         seed, workers);
        },
        py::arg("model"), py::arg("region"), py::arg("nu"), py::arg("u"),
        py::arg("n_runs"), py::arg("seed"), py::arg("workers") = 1,
        py::call_guard<py::gil_scoped_release>(),
        "Worst per-state z of quasi-path progeny occupation against the "
        "exact target.");

    m.def(
        "run_acceptance",
        [](std::uint64_t seed, std::int64_t scale, int stability_rounds,
           double corrupt_h_scale, int workers) {
            AcceptanceConfig config;
            config.seed = seed;
            config.scale = scale;
            config.stability_rounds = stability_rounds;
            config.corrupt_h_scale = corrupt_h_scale;
            config.workers = workers;
            std::ostringstream os;
            bool ok;
            {
                py::gil_scoped_release release;
                ok = acceptance_matrix(os, config);
            }
            return py::make_tuple(ok, os.str());
        },
        py::arg("seed") = 20260818, py::arg("scale") = 0,
        py::arg("stability_rounds") = 10, py::arg("corrupt_h_scale") = 1.0,
        py::arg("workers") = 1,
        "Runs the ten-criterion acceptance matrix; returns (ok, text). "
        "scale=0 keeps the pinned sample sizes.");
}
