#include "spinney/interlacement.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spinney/decorability.hpp"
#include "spinney/potential.hpp"

namespace spinney {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void require_sub_markovian(const Model& model) {
    for (StateIndex x = 0; x < model.size(); ++x)
        if (model.mean_offspring(x) > 1.0 + 1e-12)
            throw NotSubMarkovian("mean offspring " +
                                  fmt(model.mean_offspring(x)) + " at state " +
                                  model.name_of(x) + " exceeds one");
}

void require_nonnegative_u(double u) {
    if (u < 0.0) throw RowSumViolation("negative intensity multiplier");
}

// One anchored path: backward part from the prepared sampler, forward part
// the killed chain from the anchor. The survival draw happens before the cap
// check, so the truncation flag fires exactly when the true part is longer
// than the cap allows.
QuasiPath draw_quasi_path(const KuznetsovSampler& engine, const Model& model,
                          Rng& rng, const SamplerCaps& caps) {
    const KuznetsovPath kp = engine.sample(rng, caps);
    QuasiPath qp;
    qp.anchor = kp.states[kp.anchor];
    qp.backward.assign(kp.states.begin(),
                       kp.states.begin() + static_cast<std::ptrdiff_t>(kp.anchor));
    qp.backward_truncated = !kp.born;
    StateIndex cur = qp.anchor;
    for (;;) {
        if (!rng.bernoulli(model.mean_offspring(cur))) break;
        if (static_cast<std::int64_t>(qp.forward.size()) >=
            caps.max_generations) {
            qp.forward_truncated = true;
            break;
        }
        cur = model.sample_motion(cur, rng);
        qp.forward.push_back(cur);
    }
    return qp;
}

struct DrawnTree {
    Forest tree;
    std::size_t entrances = 0;
    bool kept = false;
};

// Steps 3-5 for one path: drop the forward part, decorate the survivor as a
// spine, then thin. The thinning consumes exactly one draw whether or not
// the tree is kept, so retained samples stay a prefix-stable function of the
// stream. A tree whose decoration was capped before reaching the region
// cannot represent a hitting tree and is never kept.
DrawnTree grow_tree(QuasiPath qp, const Model& model, const StateSet& region,
                    Rng& rng, const SamplerCaps& caps) {
    qp = death_b(std::move(qp), region);
    SpinePath spine;
    spine.states = std::move(qp.backward);
    spine.states.push_back(qp.anchor);
    spine.end = SpinePath::End::EnteredB;
    DrawnTree out;
    out.tree = decorate(spine, model, region, rng, caps);
    if (qp.backward_truncated) out.tree.generation_capped = true;
    out.entrances = entrance_set(out.tree, region).size();
    const double keep =
        out.entrances > 0 ? 1.0 / static_cast<double>(out.entrances) : 0.0;
    out.kept = rng.bernoulli(keep);
    return out;
}

InterlacementSample run_pipeline(const Measure& nu, const Model& model,
                                 const StateSet& b, double u, Rng& rng,
                                 const SamplerCaps& caps, std::uint64_t seed) {
    require_sub_markovian(model);
    require_nonnegative_u(u);
    const KuznetsovSampler engine(nu, model, b);
    InterlacementSample out;
    out.intensity_mass = engine.entrance().total();
    out.u = u;
    out.seed = seed;
    out.nu = nu;
    out.region = engine.region();
    out.caps = caps;
    out.advisory = decorability_advisory(model, out.region);
    if (u == 0.0) return out;
    const std::int64_t count = rng.poisson(u * out.intensity_mass);
    for (std::int64_t i = 0; i < count; ++i) {
        DrawnTree drawn = grow_tree(draw_quasi_path(engine, model, rng, caps),
                                    model, out.region, rng, caps);
        if (drawn.kept) out.trees.push_back(std::move(drawn.tree));
    }
    return out;
}

double parse_double(const std::string& text, const std::string& what) {
    std::istringstream vs(text);
    double v = 0.0;
    char extra = 0;
    if (!(vs >> v) || vs >> extra || !std::isfinite(v))
        throw ParseError("bad " + what + ": " + text);
    return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
    std::istringstream vs(text);
    std::uint64_t v = 0;
    char extra = 0;
    if (!(vs >> v) || vs >> extra)
        throw ParseError("bad " + what + ": " + text);
    return v;
}

std::int64_t parse_i64(const std::string& text, const std::string& what) {
    std::istringstream vs(text);
    std::int64_t v = 0;
    char extra = 0;
    if (!(vs >> v) || vs >> extra)
        throw ParseError("bad " + what + ": " + text);
    return v;
}

} // namespace

std::vector<QuasiPath> sample_hitting_quasi_process(const Measure& nu,
                                                    const Model& model,
                                                    const StateSet& b, double u,
                                                    Rng& rng,
                                                    const SamplerCaps& caps) {
    require_sub_markovian(model);
    require_nonnegative_u(u);
    const KuznetsovSampler engine(nu, model, b);
    std::vector<QuasiPath> paths;
    if (u == 0.0) return paths;
    const std::int64_t count = rng.poisson(u * engine.entrance().total());
    paths.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i)
        paths.push_back(draw_quasi_path(engine, model, rng, caps));
    return paths;
}

QuasiPath death_b(QuasiPath path, const StateSet&) {
    path.forward.clear();
    path.forward_truncated = false;
    return path;
}

InterlacementSample sample_branching_interlacement(const Measure& nu,
                                                   const Model& model,
                                                   const StateSet& b, double u,
                                                   Rng& rng,
                                                   const SamplerCaps& caps) {
    return run_pipeline(nu, model, b, u, rng, caps, 0);
}

InterlacementSample sample_branching_interlacement(const Measure& nu,
                                                   const Model& model,
                                                   const StateSet& b, double u,
                                                   std::uint64_t seed,
                                                   const SamplerCaps& caps) {
    Rng rng(seed);
    return run_pipeline(nu, model, b, u, rng, caps, seed);
}

std::vector<OccupationRow> progeny_occupation_rows(
    const InterlacementSample& sample, const Model& model, const StateSet& b) {
    require_nonnegative_u(sample.u);
    StateSet bb = normalize_state_set(model, b);
    if (bb.empty()) throw NotNormingRegion("empty region");
    const Measure bar = entrance_measure(sample.nu, model, bb);
    const Eigen::VectorXd target = model.green().transpose() * bar.values;
    const int n = model.size();
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(n);
    for (const Forest& tree : sample.trees) {
        const Measure occ = occupation_of(progeny_of_entrance(tree, bb), model);
        s += occ.values;
        ss += occ.values.cwiseProduct(occ.values);
    }
    std::vector<OccupationRow> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (StateIndex y = 0; y < n; ++y) {
        OccupationRow row;
        row.state = y;
        row.target = target[y];
        if (sample.u > 0.0) {
            row.empirical = s[y] / sample.u;
            double se = std::sqrt(ss[y]);
            if (!(se > 0.0))
                se = std::sqrt(std::max(sample.u * target[y], 1.0));
            row.z = (s[y] - sample.u * target[y]) / se;
        }
        rows.push_back(row);
    }
    return rows;
}

TestReport progeny_occupation_check(const InterlacementSample& sample,
                                    const Model& model, const StateSet& b) {
    const std::vector<OccupationRow> rows =
        progeny_occupation_rows(sample, model, b);
    double worst = 0.0;
    StateIndex arg = 0;
    for (const OccupationRow& row : rows)
        if (std::abs(row.z) > worst) {
            worst = std::abs(row.z);
            arg = row.state;
        }
    std::string notes;
    if (sample.u == 0.0)
        notes = "vacuous: u=0";
    else
        notes = "u=" + fmt(sample.u) +
                " trees=" + std::to_string(sample.trees.size()) +
                " worst=" + model.name_of(arg);
    return make_report("interlacement-progeny", worst, 3.0,
                       static_cast<std::int64_t>(sample.trees.size()),
                       sample.seed, notes);
}

TestReport interlacement_qp_test(const Model& model, const StateSet& b,
                                 const StateSet& b_prime, const Measure& nu,
                                 double u, std::int64_t n_runs,
                                 std::uint64_t seed, int workers) {
    require_sub_markovian(model);
    StateSet bb = normalize_state_set(model, b);
    if (bb.empty()) throw NotNormingRegion("empty region");
    const StateSet bp = normalize_state_set(model, b_prime);
    if (bp != bb)
        throw DimensionMismatch(
            "the enclosing region must equal the region itself");
    require_nonnegative_u(u);
    if (n_runs < 0) throw DimensionMismatch("negative replica count");
    const KuznetsovSampler engine(nu, model, bb);
    if (u == 0.0 || n_runs == 0)
        return make_report("interlacement-qp", 0.0, 4.0, n_runs, seed,
                           "vacuous: zero mass drawn");
    const double mass = engine.entrance().total();
    const Eigen::VectorXd target =
        model.green().transpose() * engine.entrance().values;
    const int n = model.size();
    const SamplerCaps caps;
    struct Chunk {
        std::vector<double> s, ss;
        std::int64_t trees = 0;
    };
    const auto chunks = run_chunked<Chunk>(
        n_runs, workers, [&](std::int64_t cb, std::int64_t ce) {
            Chunk acc;
            acc.s.assign(static_cast<std::size_t>(n), 0.0);
            acc.ss.assign(static_cast<std::size_t>(n), 0.0);
            for (std::int64_t r = cb; r < ce; ++r) {
                Rng rng = Rng::fork(seed, static_cast<std::uint64_t>(r));
                const std::int64_t count = rng.poisson(u * mass);
                for (std::int64_t i = 0; i < count; ++i) {
                    const DrawnTree drawn =
                        grow_tree(draw_quasi_path(engine, model, rng, caps),
                                  model, bb, rng, caps);
                    if (!drawn.kept) continue;
                    const Measure occ = occupation_of(
                        progeny_of_entrance(drawn.tree, bb), model);
                    for (StateIndex y = 0; y < n; ++y) {
                        const double v = occ.values[y];
                        acc.s[static_cast<std::size_t>(y)] += v;
                        acc.ss[static_cast<std::size_t>(y)] += v * v;
                    }
                    ++acc.trees;
                }
            }
            return acc;
        });
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(n);
    std::int64_t trees = 0;
    for (const Chunk& c : chunks) {
        if (c.s.empty()) continue;
        for (StateIndex y = 0; y < n; ++y) {
            s[y] += c.s[static_cast<std::size_t>(y)];
            ss[y] += c.ss[static_cast<std::size_t>(y)];
        }
        trees += c.trees;
    }
    const double total_u = u * static_cast<double>(n_runs);
    double worst = 0.0;
    StateIndex arg = 0;
    for (StateIndex y = 0; y < n; ++y) {
        double se = std::sqrt(ss[y]);
        if (!(se > 0.0)) se = std::sqrt(std::max(total_u * target[y], 1.0));
        const double z = (s[y] - total_u * target[y]) / se;
        if (std::abs(z) > worst) {
            worst = std::abs(z);
            arg = y;
        }
    }
    return make_report("interlacement-qp", worst, 4.0, n_runs, seed,
                       "u=" + fmt(u) + " trees=" + std::to_string(trees) +
                           " worst=" + model.name_of(arg));
}

void write_occupation_rows(std::ostream& os,
                           const std::vector<OccupationRow>& rows,
                           const Model& model) {
    os << "state,empirical_occupation,exact_target,z_score\n";
    for (const OccupationRow& row : rows)
        os << model.name_of(row.state) << ',' << fmt(row.empirical) << ','
           << fmt(row.target) << ',' << fmt(row.z) << '\n';
}

void write_interlacement_sample(std::ostream& os,
                                const InterlacementSample& sample,
                                const Model& model) {
    if (sample.region.empty()) throw DimensionMismatch("sample region is empty");
    os << "# interlacement u=" << fmt(sample.u) << " seed=" << sample.seed
       << " mass=" << fmt(sample.intensity_mass)
       << " trees=" << sample.trees.size() << "\n";
    os << "# caps " << sample.caps.max_generations << ' '
       << sample.caps.max_population << "\n";
    os << "# region";
    for (StateIndex x : sample.region) os << ' ' << model.name_of(x);
    os << "\n";
    // derived, never parsed back: the reader recomputes it from the model
    if (!sample.advisory.empty()) os << "# advisory: " << sample.advisory << "\n";
    write_measure(os, sample.nu, model);
    for (std::size_t i = 0; i < sample.trees.size(); ++i) {
        os << "\n";
        write_forest(os, sample.trees[i], model,
                     "tree=" + std::to_string(i) + " ");
    }
}

InterlacementSample read_interlacement_sample(std::istream& is,
                                              const Model& model) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("empty interlacement file");
    const std::string head = "# interlacement ";
    if (line.rfind(head, 0) != 0)
        throw ParseError("missing interlacement header");
    InterlacementSample out;
    std::int64_t ntrees = -1;
    bool have_u = false, have_seed = false, have_mass = false;
    {
        std::istringstream hs(line.substr(head.size()));
        std::string tok;
        while (hs >> tok) {
            const std::size_t eq = tok.find('=');
            if (eq == std::string::npos)
                throw ParseError("bad header token: " + tok);
            const std::string key = tok.substr(0, eq);
            const std::string val = tok.substr(eq + 1);
            if (key == "u") {
                out.u = parse_double(val, "intensity multiplier");
                have_u = true;
            } else if (key == "seed") {
                out.seed = parse_u64(val, "seed");
                have_seed = true;
            } else if (key == "mass") {
                out.intensity_mass = parse_double(val, "intensity mass");
                have_mass = true;
            } else if (key == "trees") {
                ntrees = parse_i64(val, "tree count");
            } else {
                throw ParseError("unknown header key: " + key);
            }
        }
    }
    if (!have_u || !have_seed || !have_mass || ntrees < 0)
        throw ParseError("incomplete interlacement header");
    if (out.u < 0.0) throw ParseError("negative intensity multiplier");
    if (out.intensity_mass < 0.0) throw ParseError("negative intensity mass");
    if (!std::getline(is, line) || line.rfind("# caps ", 0) != 0)
        throw ParseError("missing caps line");
    {
        std::istringstream cs(line.substr(7));
        std::int64_t gen = 0, pop = 0;
        char extra = 0;
        if (!(cs >> gen >> pop) || cs >> extra || gen <= 0 || pop <= 0)
            throw ParseError("bad caps line: " + line);
        out.caps.max_generations = gen;
        out.caps.max_population = pop;
    }
    if (!std::getline(is, line) || line.rfind("# region", 0) != 0)
        throw ParseError("missing region line");
    {
        std::istringstream rs(line.substr(8));
        std::string name;
        StateSet region;
        while (rs >> name) region.push_back(model.index_of(name));
        if (region.empty()) throw ParseError("empty region line");
        out.region = normalize_state_set(model, region);
        out.advisory = decorability_advisory(model, out.region);
    }
    std::string measure_text;
    bool saw_measure = false;
    while (std::getline(is, line)) {
        if (line.empty()) break;
        measure_text += line;
        measure_text += '\n';
        saw_measure = true;
    }
    if (!saw_measure) throw ParseError("missing measure block");
    {
        std::istringstream ms(measure_text);
        out.nu = read_measure(ms, model);
    }
    for (std::int64_t i = 0; i < ntrees; ++i) {
        Forest tree = read_forest(is, model);
        if (tree.size() == 0)
            throw ParseError("missing tree block " + std::to_string(i));
        out.trees.push_back(std::move(tree));
    }
    while (std::getline(is, line))
        if (!line.empty())
            throw ParseError("trailing content after the last tree block");
    return out;
}

} // namespace spinney
