#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "spinney/acceptance.hpp"
#include "spinney/bmc.hpp"
#include "spinney/decorability.hpp"
#include "spinney/errors.hpp"
#include "spinney/interlacement.hpp"
#include "spinney/model.hpp"
#include "spinney/model_io.hpp"
#include "spinney/potential.hpp"
#include "spinney/rng.hpp"
#include "spinney/verify.hpp"

namespace {

using namespace spinney;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// --B names resolved against the model; empty falls back to the model file's
// own B section.
StateSet region_of(const Model& model, const std::vector<std::string>& names) {
    if (names.empty()) return model.default_b();
    StateSet b;
    b.reserve(names.size());
    for (const std::string& name : names) b.push_back(model.index_of(name));
    return normalize_state_set(model, b);
}

StateSet required_region(const Model& model, const std::vector<std::string>& names) {
    StateSet b = region_of(model, names);
    if (b.empty())
        throw NotNormingRegion(
            "no region given: pass --B or add a B section to the model file");
    return b;
}

// "green-row:STATE" or a measure file path.
Measure load_nu(const std::string& spec, const Model& model) {
    const std::string key = "green-row:";
    if (spec.rfind(key, 0) == 0) {
        const StateIndex x = model.index_of(spec.substr(key.size()));
        return Measure{model.green().row(x).transpose()};
    }
    std::ifstream file(spec);
    if (!file) throw IoError("cannot open measure file '" + spec + "'");
    return read_measure(file, model);
}

// Replica r of a run seeded with s owns the derived stream mix64(s ^ mix64(r)),
// whatever the worker count.
std::uint64_t replica_seed(std::uint64_t seed, std::uint64_t replica) {
    return mix64(seed ^ mix64(replica));
}

void print_vector(std::ostream& os, const std::string& label,
                  const Eigen::VectorXd& v) {
    os << label << ":";
    for (Eigen::Index i = 0; i < v.size(); ++i) os << " " << fmt(v[i]);
    os << "\n";
}

void print_matrix(std::ostream& os, const std::string& label,
                  const Eigen::MatrixXd& mat,
                  const std::vector<std::string>& row_names) {
    for (Eigen::Index i = 0; i < mat.rows(); ++i) {
        os << label << " " << row_names[static_cast<std::size_t>(i)] << ":";
        for (Eigen::Index j = 0; j < mat.cols(); ++j) os << " " << fmt(mat(i, j));
        os << "\n";
    }
}

void write_report_or_stdout(const std::string& text, const std::string& out) {
    if (out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream file(out);
    if (!file) throw IoError("cannot open output file '" + out + "'");
    file << text;
}

// ---- model-inspect -----------------------------------------------------------

void cmd_model_inspect(const std::string& model_spec,
                       const std::vector<std::string>& b_names,
                       const std::string& out) {
    const Model model = load_model(model_spec);
    std::ostringstream os;
    os << "model-report-v1\n";
    os << "states:";
    for (const std::string& s : model.states()) os << " " << s;
    os << "\n";
    for (StateIndex x = 0; x < model.size(); ++x) {
        os << "offspring " << model.name_of(x) << ": mean "
           << fmt(model.mean_offspring(x)) << " law";
        for (const auto& [count, prob] : model.offspring(x).entries())
            os << " " << count << ":" << fmt(prob);
        os << "\n";
    }
    print_matrix(os, "motion", model.motion(), model.states());
    print_matrix(os, "intensity", model.intensity(), model.states());
    os << "spectral-radius: " << fmt(model.spectral_radius()) << "\n";
    print_matrix(os, "green", model.green(), model.states());

    const StateSet b = region_of(model, b_names);
    if (b.empty()) {
        os << "region: none (pass --B or add a B section for region diagnostics)\n";
        write_report_or_stdout(os.str(), out);
        return;
    }
    os << "region:";
    std::vector<std::string> region_names;
    for (StateIndex x : b) {
        os << " " << model.name_of(x);
        region_names.push_back(model.name_of(x));
    }
    os << "\n";
    print_vector(os, "h", h_function(model, b).values);
    print_matrix(os, "spine-kernel", h_transform_kernel(model, b), model.states());
    print_matrix(os, "taboo-return", taboo_return_kernel(model, b), region_names);
    write_decorability_report(os, criteria_report(model, b), model);
    write_report_or_stdout(os.str(), out);
}

// ---- simulate ----------------------------------------------------------------

struct SimulateOptions {
    std::string model_spec;
    std::vector<std::string> b_names;
    std::string x_name;
    std::int64_t n = 1;
    std::uint64_t seed = 0;
    std::int64_t depth = 0;
    std::string out;
};

void cmd_simulate(const std::string& kind, const SimulateOptions& opt) {
    const Model model = load_model(opt.model_spec);
    const StateIndex x = model.index_of(opt.x_name);
    SamplerCaps caps;
    if (opt.depth > 0) caps.max_generations = opt.depth;
    if (opt.n < 0) throw DimensionMismatch("negative forest count");

    std::ostringstream os;
    if (kind == "bmc") {
        for (std::int64_t r = 0; r < opt.n; ++r) {
            Rng rng = Rng::fork(opt.seed, static_cast<std::uint64_t>(r));
            const Forest f = sample_bmc(model, x, rng, caps);
            write_forest(os, f, model,
                         "replica=" + std::to_string(r) + " seed=" +
                             std::to_string(opt.seed) + " ");
            os << "\n";
        }
    } else if (kind == "biased") {
        const StateSet b = required_region(model, opt.b_names);
        for (std::int64_t r = 0; r < opt.n; ++r) {
            Rng rng = Rng::fork(opt.seed, static_cast<std::uint64_t>(r));
            const Forest f = sample_biased_bmc(model, b, x, rng, caps);
            write_forest(os, f, model,
                         "replica=" + std::to_string(r) + " seed=" +
                             std::to_string(opt.seed) + " ");
            os << "\n";
        }
    } else { // spine: the blue motion path alone, one record per line
        const StateSet b = required_region(model, opt.b_names);
        for (std::int64_t r = 0; r < opt.n; ++r) {
            Rng rng = Rng::fork(opt.seed, static_cast<std::uint64_t>(r));
            const SpinePath path = sample_spine(model, b, x, rng, caps);
            os << "# spine replica=" << r << " seed=" << opt.seed << " end="
               << (path.end == SpinePath::End::EnteredB      ? "entered-region"
                   : path.end == SpinePath::End::KilledBeforeB ? "killed"
                                                               : "truncated")
               << "\n";
            for (std::size_t i = 0; i < path.states.size(); ++i)
                os << (i ? " " : "") << model.name_of(path.states[i]);
            os << "\n\n";
        }
    }
    write_report_or_stdout(os.str(), opt.out);
}

// ---- interlace ---------------------------------------------------------------

struct InterlaceOptions {
    std::string model_spec;
    std::vector<std::string> b_names;
    std::vector<std::string> bprime_names;
    std::string nu_spec;
    double u = 1.0;
    std::int64_t n = 1;
    std::uint64_t seed = 0;
    std::int64_t depth = 0;
    std::string out = ".";
};

void cmd_interlace(const InterlaceOptions& opt) {
    const Model model = load_model(opt.model_spec);
    const StateSet b = required_region(model, opt.b_names);
    if (!opt.bprime_names.empty() && region_of(model, opt.bprime_names) != b)
        throw DimensionMismatch("the enclosing region must equal the region itself");
    const Measure nu = load_nu(opt.nu_spec, model);
    SamplerCaps caps;
    if (opt.depth > 0) caps.max_generations = opt.depth;
    if (opt.n < 1) throw DimensionMismatch("need at least one replica");

    namespace fs = std::filesystem;
    const fs::path dir(opt.out);
    fs::create_directories(dir);

    const int n_states = model.size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n_states);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(n_states);
    std::vector<OccupationRow> single;
    for (std::int64_t r = 0; r < opt.n; ++r) {
        const InterlacementSample sample = sample_branching_interlacement(
            nu, model, b, opt.u, replica_seed(opt.seed, static_cast<std::uint64_t>(r)),
            caps);
        char name[32];
        std::snprintf(name, sizeof name, "sample-%06lld.txt",
                      static_cast<long long>(r));
        std::ofstream file(dir / name);
        if (!file) throw IoError("cannot open sample file in '" + opt.out + "'");
        write_interlacement_sample(file, sample, model);

        const std::vector<OccupationRow> rows =
            progeny_occupation_rows(sample, model, b);
        if (opt.n == 1) single = rows;
        for (const OccupationRow& row : rows) {
            mean[row.state] += row.empirical;
            sumsq[row.state] += row.empirical * row.empirical;
        }
    }

    // one replica reports the sample's own compound-Poisson z; several
    // replicas report the between-replica spread instead
    std::vector<OccupationRow> rows;
    if (opt.n == 1) {
        rows = single;
    } else {
        const Measure bar = entrance_measure(nu, model, b);
        const Eigen::VectorXd target = model.green().transpose() * bar.values;
        const double dn = static_cast<double>(opt.n);
        for (StateIndex s = 0; s < n_states; ++s) {
            OccupationRow row;
            row.state = s;
            row.target = target[s];
            row.empirical = mean[s] / dn;
            const double var =
                std::max(sumsq[s] / dn - row.empirical * row.empirical, 0.0);
            const double se = std::sqrt(var / dn);
            row.z = opt.u == 0.0 ? 0.0
                    : se > 0.0   ? (row.empirical - row.target) / se
                    : std::sqrt(dn) * (row.empirical - row.target) /
                          std::sqrt(std::max(row.target, 1e-12));
            rows.push_back(row);
        }
    }
    std::ofstream csv(dir / "occupation.csv");
    if (!csv) throw IoError("cannot open occupation.csv in '" + opt.out + "'");
    write_occupation_rows(csv, rows, model);
    std::cout << "wrote " << opt.n << " sample file(s) and occupation.csv to "
              << dir.string() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"potential theory and interlacements for branching Markov chains"};
    app.require_subcommand(1);
    int exit_code = 0;

    // model-inspect
    std::string mi_model, mi_out;
    std::vector<std::string> mi_b;
    CLI::App* inspect = app.add_subcommand(
        "model-inspect", "exact operators, h, kernels and decorability");
    inspect->add_option("--model", mi_model, "model file, optionally path#name")
        ->required();
    inspect->add_option("--B", mi_b, "region states (default: the model's B section)")
        ->delimiter(',');
    inspect->add_option("--out", mi_out, "report file (default stdout)");
    inspect->callback([&] { cmd_model_inspect(mi_model, mi_b, mi_out); });

    // simulate bmc|biased|spine
    SimulateOptions sim;
    CLI::App* simulate = app.add_subcommand("simulate", "draw forests or spines");
    simulate->require_subcommand(1);
    for (const std::string kind : {"bmc", "biased", "spine"}) {
        CLI::App* cmd = simulate->add_subcommand(
            kind, kind == std::string("bmc")
                      ? "plain branching forests"
                      : kind == std::string("biased")
                            ? "forests with the distinguished blue line"
                            : "region-stopped spine paths");
        cmd->add_option("--model", sim.model_spec, "model file")->required();
        cmd->add_option("--x", sim.x_name, "starting state")->required();
        cmd->add_option("--n", sim.n, "number of draws")->capture_default_str();
        cmd->add_option("--seed", sim.seed, "rng seed")->required();
        cmd->add_option("--depth", sim.depth, "generation cap (default sampler cap)");
        cmd->add_option("--B", sim.b_names, "region states (default: model's B)")
            ->delimiter(',');
        cmd->add_option("--out", sim.out, "output file (default stdout)");
        cmd->callback([&, kind] { cmd_simulate(kind, sim); });
    }

    // interlace
    InterlaceOptions il;
    CLI::App* interlace = app.add_subcommand(
        "interlace", "branching interlacement samples and occupation CSV");
    interlace->add_option("--model", il.model_spec, "model file")->required();
    interlace->add_option("--nu", il.nu_spec,
                          "excessive measure: green-row:STATE or a measure file")
        ->required();
    interlace->add_option("--u", il.u, "intensity multiplier")->capture_default_str();
    interlace->add_option("--n", il.n, "replica count")->capture_default_str();
    interlace->add_option("--seed", il.seed, "rng seed")->required();
    interlace->add_option("--depth", il.depth, "generation cap");
    interlace->add_option("--B", il.b_names, "region states (default: model's B)")
        ->delimiter(',');
    interlace->add_option("--Bprime", il.bprime_names,
                          "occupation region; must equal --B")
        ->delimiter(',');
    interlace->add_option("--out", il.out, "output directory")
        ->capture_default_str();
    interlace->callback([&] { cmd_interlace(il); });

    // verify
    AcceptanceConfig acc;
    std::string verify_out;
    CLI::App* verify = app.add_subcommand(
        "verify", "run the full acceptance matrix (exit 0 iff all criteria pass)");
    verify->add_option("--seed", acc.seed, "base seed")->capture_default_str();
    verify->add_option("--workers", acc.workers, "worker threads")
        ->capture_default_str();
    verify->add_option("--corrupt-h", acc.corrupt_h_scale,
                       "debug: scale h off the region; any value != 1 must fail")
        ->capture_default_str();
    verify->add_option("--n", acc.scale,
                       "override every stochastic sample size (0 = pinned gate sizes)")
        ->capture_default_str();
    verify->add_option("--stability", acc.stability_rounds,
                       "seed rounds for the determinism criterion")
        ->capture_default_str();
    verify->add_option("--out", verify_out, "also write machine-readable CSV here");
    verify->callback([&] {
        std::ofstream csv;
        if (!verify_out.empty()) {
            csv.open(verify_out);
            if (!csv) throw IoError("cannot open output file '" + verify_out + "'");
        }
        const bool ok =
            acceptance_matrix(std::cout, acc, verify_out.empty() ? nullptr : &csv);
        if (!ok) exit_code = 1;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return e.kind() == ErrorKind::Config ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return exit_code;
}
