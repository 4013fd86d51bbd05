#include "spinney/potential.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace spinney {

namespace {

constexpr double kSlackTol = 1e-12;      // excessivity slack floor
constexpr double kClampTol = 1e-12;      // round-off clamp on derived measures
constexpr double kZeroPotential = 1e-14; // potential part treated as exactly 0
constexpr double kCriticalGap = 1e-9;
constexpr double kSolveTol = 1e-10;
constexpr double kFamilyTol = 1e-9;
constexpr double kChiSignificance = 1e-3;

void check_dims(const Measure& nu, const Model& model) {
    if (nu.values.size() != static_cast<Eigen::Index>(model.size()))
        throw DimensionMismatch("measure length does not match the state list");
}

void check_mass(const Measure& nu, const Model& model) {
    for (StateIndex x = 0; x < model.size(); ++x)
        if (nu.values[x] < 0.0)
            throw RowSumViolation("negative mass at state " + model.name_of(x));
}

StateSet normalized_region(const Model& model, const StateSet& b) {
    StateSet bb = normalize_state_set(model, b);
    if (bb.empty()) throw NotNormingRegion("empty region");
    return bb;
}

StateSet complement_of(const Model& model, const std::vector<char>& mask) {
    StateSet c;
    for (StateIndex x = 0; x < model.size(); ++x)
        if (!mask[static_cast<std::size_t>(x)]) c.push_back(x);
    return c;
}

// (I - M)^{-1} RHS for a nonnegative M the caller has already gated below
// spectral radius 1.
Eigen::MatrixXd neumann_solve(const Eigen::MatrixXd& m,
                              const Eigen::MatrixXd& rhs) {
    const Eigen::Index n = m.rows();
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - m;
    Eigen::MatrixXd x = a.partialPivLu().solve(rhs);
    const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
    const double residual = (a * x - rhs).cwiseAbs().maxCoeff();
    if (!(residual <= kSolveTol * scale))
        throw SolveFailure("linear solve residual too large");
    return x;
}

// F(x, j): total weight of intensity paths from x whose first meeting with
// the region happens at its j-th state, counting time 0 (so rows on the
// region are delta rows): F = 1_B + 1_{B^c}(I - Q_cc)^{-1} Q_cB.
Eigen::MatrixXd first_passage_to(const Model& model, const StateSet& bb) {
    const int n = model.size();
    const int k = static_cast<int>(bb.size());
    const std::vector<char> mask = state_mask(model, bb);
    const StateSet c = complement_of(model, mask);
    const int m = static_cast<int>(c.size());
    const Eigen::MatrixXd& q = model.intensity();
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, k);
    for (int j = 0; j < k; ++j) f(bb[static_cast<std::size_t>(j)], j) = 1.0;
    if (m == 0) return f;
    Eigen::MatrixXd qcc(m, m), qcb(m, k);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) qcc(i, j) = q(c[i], c[j]);
        for (int j = 0; j < k; ++j) qcb(i, j) = q(c[i], bb[j]);
    }
    if (power_iteration_radius(qcc) >= 1.0 - kCriticalGap)
        throw DivergentGreen("off-region intensity block is not subcritical");
    const Eigen::MatrixXd x = neumann_solve(qcc, qcb);
    for (int i = 0; i < m; ++i) f.row(c[i]) = x.row(i);
    return f;
}

void require_excessive(const Measure& nu, const Model& model) {
    const ExcessiveCheck check = is_excessive(nu, model);
    if (check.excessive) return;
    Eigen::Index worst = 0;
    check.slack.values.minCoeff(&worst);
    std::ostringstream os;
    os << "slack " << check.slack.values[worst] << " at state "
       << model.name_of(static_cast<StateIndex>(worst));
    throw NotExcessive(os.str());
}

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string strip_comment(const std::string& line) {
    std::string s = line.substr(0, line.find('#'));
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

} // namespace

ExcessiveCheck is_excessive(const Measure& nu, const Model& model) {
    check_dims(nu, model);
    check_mass(nu, model);
    ExcessiveCheck out;
    out.slack.values = nu.values - model.intensity().transpose() * nu.values;
    out.excessive = (out.slack.values.array() >= -kSlackTol).all();
    return out;
}

RieszPair riesz_decomposition(const Measure& nu, const Model& model) {
    require_excessive(nu, model);
    const Eigen::Index n = nu.values.size();
    Eigen::VectorXd pot =
        (nu.values - model.intensity().transpose() * nu.values).cwiseMax(0.0);
    RieszPair out;
    if (pot.maxCoeff() <= kZeroPotential) {
        // no potential mass: inv = nu without touching G, which may diverge
        out.potential_part.values = Eigen::VectorXd::Zero(n);
        out.invariant_part = nu;
        return out;
    }
    Eigen::VectorXd inv = nu.values - model.green().transpose() * pot;
    const double floor = -1e-9 * std::max(1.0, nu.values.maxCoeff());
    for (Eigen::Index x = 0; x < n; ++x) {
        if (inv[x] < floor)
            throw SolveFailure("invariant part came out negative");
        if (inv[x] < 0.0) inv[x] = 0.0;
    }
    out.potential_part.values = std::move(pot);
    out.invariant_part.values = std::move(inv);
    return out;
}

Eigen::MatrixXd adjoint_kernel(const Measure& nu, const Model& model) {
    check_dims(nu, model);
    check_mass(nu, model);
    const int n = model.size();
    for (StateIndex x = 0; x < n; ++x)
        if (nu.values[x] <= 0.0)
            throw ZeroMassState("state " + model.name_of(x) + " carries no mass");
    const Eigen::MatrixXd& q = model.intensity();
    Eigen::MatrixXd hat(n, n);
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            hat(x, y) = nu.values[y] * q(y, x) / nu.values[x];
    return hat;
}

Eigen::MatrixXd taboo_return_kernel(const Model& model, const StateSet& b) {
    const StateSet bb = normalized_region(model, b);
    const Eigen::MatrixXd f = first_passage_to(model, bb);
    const int k = static_cast<int>(bb.size());
    Eigen::MatrixXd qb(k, k);
    for (int i = 0; i < k; ++i) qb.row(i) = model.intensity().row(bb[i]) * f;
    return qb;
}

Measure entrance_measure(const Measure& nu, const Model& model,
                         const StateSet& b) {
    require_excessive(nu, model);
    const StateSet bb = normalized_region(model, b);
    const Eigen::MatrixXd qb = taboo_return_kernel(model, bb);
    const int k = static_cast<int>(bb.size());
    Eigen::VectorXd nub(k);
    for (int i = 0; i < k; ++i) nub[i] = nu.values[bb[i]];
    const Eigen::VectorXd bar = nub - qb.transpose() * nub;
    const double floor = -kClampTol * std::max(1.0, nu.values.maxCoeff());
    Measure out{Eigen::VectorXd::Zero(model.size())};
    for (int i = 0; i < k; ++i) {
        if (bar[i] < floor)
            throw NotExcessive("entrance measure negative at state " +
                               model.name_of(bb[i]));
        out.values[bb[i]] = std::max(0.0, bar[i]);
    }
    return out;
}

TestReport entrance_family_check(const EntranceFamily& family,
                                 const Model& model) {
    if (family.sets.size() != family.measures.size())
        throw DimensionMismatch("family needs one measure per set");
    std::vector<StateSet> sets;
    sets.reserve(family.sets.size());
    for (const StateSet& s : family.sets)
        sets.push_back(normalized_region(model, s));
    for (std::size_t i = 0; i < family.measures.size(); ++i) {
        const Measure& mu = family.measures[i];
        check_dims(mu, model);
        check_mass(mu, model);
        const std::vector<char> mask = state_mask(model, sets[i]);
        for (StateIndex x = 0; x < model.size(); ++x)
            if (!mask[static_cast<std::size_t>(x)] && mu.values[x] != 0.0)
                throw DimensionMismatch("measure " + std::to_string(i) +
                                        " has mass off its set");
    }
    for (std::size_t i = 0; i + 1 < sets.size(); ++i)
        if (!std::includes(sets[i + 1].begin(), sets[i + 1].end(),
                           sets[i].begin(), sets[i].end()))
            throw DimensionMismatch("family sets are not increasing");

    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < sets.size(); ++i) {
        const StateSet& bn = sets[i];
        const Eigen::MatrixXd f = first_passage_to(model, bn);
        const Eigen::VectorXd pushed =
            f.transpose() * family.measures[i + 1].values;
        for (std::size_t j = 0; j < bn.size(); ++j)
            worst = std::max(worst,
                             std::abs(pushed[static_cast<Eigen::Index>(j)] -
                                      family.measures[i].values[bn[j]]));
    }
    std::ostringstream notes;
    notes << "pairs=" << (sets.empty() ? 0 : sets.size() - 1);
    return make_report("entrance-family", worst, kFamilyTol, 0, 0, notes.str());
}

Measure occupation_to_excessive(const Measure& mu, const Model& model,
                                const StateSet& b) {
    check_dims(mu, model);
    check_mass(mu, model);
    const StateSet bb = normalized_region(model, b);
    const std::vector<char> mask = state_mask(model, bb);
    const Measure h = h_function(model, bb);
    const Eigen::MatrixXd& g = model.green();
    Measure out{Eigen::VectorXd::Zero(model.size())};
    for (StateIndex x = 0; x < model.size(); ++x) {
        double v = mask[static_cast<std::size_t>(x)]
                       ? 0.0
                       : mu.values[x] / h.values[x];
        for (StateIndex z : bb) v += mu.values[z] * g(z, x);
        out.values[x] = v;
    }
    return out;
}

Measure excessive_to_occupation(const Measure& nu, const Model& model,
                                const StateSet& b) {
    const StateSet bb = normalized_region(model, b);
    const Measure bar = entrance_measure(nu, model, bb); // checks excessivity
    const std::vector<char> mask = state_mask(model, bb);
    const Measure h = h_function(model, bb);
    const Eigen::MatrixXd& g = model.green();
    const double floor = -kClampTol * std::max(1.0, nu.values.maxCoeff());
    Measure out{Eigen::VectorXd::Zero(model.size())};
    for (StateIndex z : bb) out.values[z] = bar.values[z];
    for (StateIndex x = 0; x < model.size(); ++x) {
        if (mask[static_cast<std::size_t>(x)]) continue;
        double t = nu.values[x];
        for (StateIndex z : bb) t -= bar.values[z] * g(z, x);
        if (t < floor)
            throw NotExcessive("occupation negative at state " +
                               model.name_of(x));
        out.values[x] = h.values[x] * std::max(0.0, t);
    }
    return out;
}

Measure avoid_region_function(const Measure& nu, const Model& model,
                              const StateSet& b) {
    require_excessive(nu, model);
    const StateSet bb = normalized_region(model, b);
    const Eigen::MatrixXd hat = adjoint_kernel(nu, model);
    const int n = model.size();
    const std::vector<char> mask = state_mask(model, bb);
    const StateSet c = complement_of(model, mask);
    const int m = static_cast<int>(c.size());
    const Eigen::VectorXd lambda =
        (Eigen::VectorXd::Ones(n) - hat.rowwise().sum()).cwiseMax(0.0);
    Measure out{Eigen::VectorXd::Zero(n)};
    Eigen::VectorXd ac = Eigen::VectorXd::Zero(m);
    if (m > 0) {
        Eigen::MatrixXd hcc(m, m);
        Eigen::VectorXd lc(m);
        for (int i = 0; i < m; ++i) {
            lc[i] = lambda[c[i]];
            for (int j = 0; j < m; ++j) hcc(i, j) = hat(c[i], c[j]);
        }
        if (power_iteration_radius(hcc) >= 1.0 - kCriticalGap)
            throw BackwardNotAlmostSurelyFinite(
                "conditioned backward chain can avoid the region forever");
        ac = neumann_solve(hcc, lc).cwiseMax(0.0);
        for (int i = 0; i < m; ++i) out.values[c[i]] = ac[i];
    }
    for (StateIndex x : bb) {
        double v = lambda[x];
        for (int i = 0; i < m; ++i) v += hat(x, c[i]) * ac[i];
        out.values[x] = v;
    }
    return out;
}

KuznetsovSampler::KuznetsovSampler(const Measure& nu, const Model& model,
                                   const StateSet& b)
    : model_(&model), nu_(nu) {
    region_ = normalized_region(model, b);
    bar_ = entrance_measure(nu_, model, region_);
    if (!(bar_.total() > 0.0))
        throw ZeroEntranceMass("the entrance measure of the region vanishes");
    const Eigen::MatrixXd hat = adjoint_kernel(nu_, model);
    avoid_ = avoid_region_function(nu_, model, region_);
    const std::vector<char> mask = state_mask(model, region_);
    complement_ = complement_of(model, mask);
    const int n = model.size();
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x) w[static_cast<std::size_t>(x)] = bar_.values[x];
    anchor_cdf_ = CdfSampler(w);
    step_cdf_.reserve(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x) {
        std::vector<double> sw(complement_.size());
        for (std::size_t j = 0; j < complement_.size(); ++j)
            sw[j] = hat(x, complement_[j]) * avoid_.values[complement_[j]];
        step_cdf_.emplace_back(sw);
    }
}

// nu Q^k decreases to the invariant part; a non-vanishing limit means
// backward parts need not be finite. Iterated directly so the probe works
// even where the Green's function diverges.
bool KuznetsovSampler::has_invariant_mass() const {
    Eigen::VectorXd w = nu_.values;
    const double cut = 1e-10 * std::max(1.0, w.maxCoeff());
    const Eigen::MatrixXd qt = model_->intensity().transpose();
    for (int it = 0; it < 10000; ++it) {
        if (w.maxCoeff() <= cut) return false;
        w = qt * w;
    }
    return w.maxCoeff() > cut;
}

KuznetsovPath KuznetsovSampler::sample(Rng& rng, const SamplerCaps& caps) const {
    std::vector<StateIndex> rev;
    StateIndex cur = static_cast<StateIndex>(anchor_cdf_.sample(rng));
    rev.push_back(cur);
    bool born = false;
    for (;;) {
        const std::size_t pick =
            step_cdf_[static_cast<std::size_t>(cur)].sample_or_die(
                rng, avoid_.values[cur]);
        if (pick == complement_.size()) { // adjoint death = birth of the path
            born = true;
            break;
        }
        // truncated exactly when the true backward part outruns the cap
        if (static_cast<std::int64_t>(rev.size()) - 1 >= caps.max_generations) {
            if (has_invariant_mass())
                throw BackwardNotAlmostSurelyFinite(
                    "backward cap hit with non-vanishing invariant part");
            break; // truncation artifact on an almost surely finite part
        }
        cur = complement_[pick];
        rev.push_back(cur);
    }
    KuznetsovPath path;
    path.states.assign(rev.rbegin(), rev.rend());
    path.anchor = path.states.size() - 1;
    path.born = born;
    return path;
}

namespace {

struct SpinePathLaw {
    std::map<std::string, double> probs; // complete paths within the window
    double tail = 0.0;                   // paths longer than the window
};

// Exact law of spine paths from x0 by depth-first expansion of the h-kernel;
// prefixes still off the region at the window edge pool into tail.
SpinePathLaw enumerate_spine_paths(const Model& model, const StateSet& bb,
                                   StateIndex x0, const Eigen::MatrixXd& ph) {
    constexpr int kPathWindow = 60;
    constexpr std::int64_t kPathBudget = 200000;
    SpinePathLaw law;
    const std::vector<char> mask = state_mask(model, bb);
    std::int64_t visited = 0;
    std::vector<StateIndex> path{x0};
    auto expand = [&](auto&& self, double p) -> void {
        if (++visited > kPathBudget)
            throw BudgetExceeded("spine path enumeration budget");
        const StateIndex x = path.back();
        if (mask[static_cast<std::size_t>(x)]) {
            law.probs[encode_path(path, model)] += p;
            return;
        }
        if (static_cast<int>(path.size()) - 1 >= kPathWindow) {
            law.tail += p;
            return;
        }
        for (StateIndex y = 0; y < model.size(); ++y) {
            const double step = ph(x, y);
            if (step <= 0.0) continue;
            path.push_back(y);
            self(self, p * step);
            path.pop_back();
        }
    };
    expand(expand, 1.0);
    double total = law.tail;
    for (const auto& [enc, p] : law.probs) total += p;
    if (total <= 0.0) throw SolveFailure("spine path law has no mass");
    for (auto& [enc, p] : law.probs) p /= total;
    law.tail /= total;
    return law;
}

} // namespace

KuznetsovPath kuznetsov_sample(const Measure& nu, const Model& model,
                               const StateSet& b, Rng& rng,
                               const SamplerCaps& caps) {
    const KuznetsovSampler engine(nu, model, b);
    return engine.sample(rng, caps);
}

std::vector<TestReport> kuznetsov_markov_test(const Measure& nu,
                                              const Model& model,
                                              const StateSet& b,
                                              StateIndex probe,
                                              std::int64_t n_samples,
                                              std::uint64_t seed, int workers) {
    if (n_samples <= 0) throw DimensionMismatch("sample size must be positive");
    if (probe < 0 || probe >= model.size())
        throw UnknownState("probe state out of range");
    const StateSet bb = normalized_region(model, b);
    const std::vector<char> mask = state_mask(model, bb);
    if (mask[static_cast<std::size_t>(probe)])
        throw DimensionMismatch("probe state lies in the region");

    const KuznetsovSampler engine(nu, model, bb);
    const Eigen::MatrixXd ph = h_transform_kernel(model, bb);
    const SpinePathLaw exact = enumerate_spine_paths(model, bb, probe, ph);
    const SamplerCaps caps; // remainder lengths have geometric tails

    struct Chunk {
        std::map<std::string, std::int64_t> kept_paths;
        std::int64_t kept = 0;
        std::map<std::string, std::int64_t> spine_paths;
    };
    const std::vector<Chunk> chunks = run_chunked<Chunk>(
        n_samples, workers, [&](std::int64_t lo, std::int64_t hi) {
            Chunk out;
            for (std::int64_t r = lo; r < hi; ++r) {
                Rng rng = Rng::fork(seed, static_cast<std::uint64_t>(r));
                const KuznetsovPath path = engine.sample(rng, caps);
                std::size_t i = 0; // first visit to {probe} u B from birth
                while (path.states[i] != probe &&
                       !mask[static_cast<std::size_t>(path.states[i])])
                    ++i;
                if (path.states[i] == probe) {
                    ++out.kept;
                    const std::vector<StateIndex> rest(
                        path.states.begin() + static_cast<std::ptrdiff_t>(i),
                        path.states.end());
                    ++out.kept_paths[encode_path(rest, model)];
                }
                Rng srng = Rng::fork(mix64(seed) + 1,
                                     static_cast<std::uint64_t>(r));
                const SpinePath sp = sample_spine(model, bb, probe, srng, caps);
                ++out.spine_paths[encode_path(sp.states, model)];
            }
            return out;
        });

    std::map<std::string, std::int64_t> kept_paths, spine_paths;
    std::int64_t kept = 0;
    for (const Chunk& ch : chunks) {
        kept += ch.kept;
        for (const auto& [enc, cnt] : ch.kept_paths) kept_paths[enc] += cnt;
        for (const auto& [enc, cnt] : ch.spine_paths) spine_paths[enc] += cnt;
    }

    std::ostringstream meta;
    meta << "probe=" << model.name_of(probe) << " kept=" << kept;
    std::vector<TestReport> reports;

    if (kept == 0) {
        reports.push_back(make_report("kuznetsov-markov.chi2", 0.0, 0.0, 0,
                                      seed, meta.str() + " no qualifying paths"));
        reports.push_back(make_report("kuznetsov-markov.two-sample", 0.0, 0.0,
                                      0, seed,
                                      meta.str() + " no qualifying paths"));
        return reports;
    }

    // chi-square of remainder frequencies against the exact spine path law,
    // bins with expected count < 5 pooled (window tail included)
    {
        std::vector<double> expected;
        std::vector<double> observed;
        double rest_p = exact.tail;
        std::int64_t rest_obs = kept;
        for (const auto& [enc, p] : exact.probs) {
            const double e = static_cast<double>(kept) * p;
            const auto it = kept_paths.find(enc);
            const std::int64_t o = it == kept_paths.end() ? 0 : it->second;
            if (e >= 5.0) {
                expected.push_back(e);
                observed.push_back(static_cast<double>(o));
                rest_obs -= o;
            } else {
                rest_p += p;
            }
        }
        const double rest_e = static_cast<double>(kept) * rest_p;
        if (!expected.empty() && rest_e < 5.0) {
            // fold the sparse remainder into the smallest kept bin
            std::size_t smallest = 0;
            for (std::size_t i = 1; i < expected.size(); ++i)
                if (expected[i] < expected[smallest]) smallest = i;
            expected[smallest] += rest_e;
            observed[smallest] += static_cast<double>(rest_obs);
        } else if (rest_e > 0.0 || rest_obs > 0) {
            expected.push_back(rest_e);
            observed.push_back(static_cast<double>(rest_obs));
        }
        if (expected.size() < 2) {
            reports.push_back(make_report("kuznetsov-markov.chi2", 0.0, 0.0,
                                          kept, seed,
                                          meta.str() + " degenerate binning"));
        } else {
            double stat = 0.0;
            for (std::size_t i = 0; i < expected.size(); ++i) {
                const double d = observed[i] - expected[i];
                stat += d * d / expected[i];
            }
            const double dof = static_cast<double>(expected.size() - 1);
            const double critical = chi_square_quantile(kChiSignificance, dof);
            std::ostringstream notes;
            notes << meta.str() << " bins=" << expected.size()
                  << " p=" << chi_square_pvalue(stat, dof);
            reports.push_back(make_report("kuznetsov-markov.chi2", stat,
                                          critical, kept, seed, notes.str()));
        }
    }

    // two-sample TV: remainder paths against paths drawn by sample_spine
    {
        const TreePmf remainder = empirical_pmf(kept_paths, kept, "path-v1");
        const TreePmf direct = empirical_pmf(spine_paths, n_samples, "path-v1");
        std::map<std::string, char> support;
        for (const auto& [enc, p] : remainder.entries) support[enc] = 1;
        for (const auto& [enc, p] : direct.entries) support[enc] = 1;
        const double tv = tv_distance(remainder, direct);
        const double threshold =
            tv_threshold_two_sample(support.size(), kept, n_samples);
        meta << " spine-n=" << n_samples;
        reports.push_back(make_report("kuznetsov-markov.two-sample", tv,
                                      threshold, kept, seed, meta.str()));
    }
    return reports;
}

void write_measure(std::ostream& os, const Measure& nu, const Model& model) {
    check_dims(nu, model);
    for (StateIndex x = 0; x < model.size(); ++x)
        os << model.name_of(x) << ' ' << format_value(nu.values[x]) << '\n';
}

Measure read_measure(std::istream& is, const Model& model) {
    Measure out{Eigen::VectorXd::Zero(model.size())};
    std::vector<char> seen(static_cast<std::size_t>(model.size()), 0);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string body = strip_comment(line);
        if (body.empty()) continue;
        std::istringstream ls(body);
        std::string name;
        double value = 0.0;
        if (!(ls >> name >> value) || !std::isfinite(value))
            throw ParseError("expected 'state value' on line " +
                             std::to_string(lineno));
        std::string extra;
        if (ls >> extra)
            throw ParseError("trailing tokens on line " + std::to_string(lineno));
        const StateIndex x = model.index_of(name);
        if (seen[static_cast<std::size_t>(x)])
            throw ParseError("duplicate state " + name + " on line " +
                             std::to_string(lineno));
        if (value < 0.0)
            throw RowSumViolation("negative mass for state " + name);
        seen[static_cast<std::size_t>(x)] = 1;
        out.values[x] = value;
    }
    return out;
}

void write_kuznetsov_path(std::ostream& os, const KuznetsovPath& path,
                          const Model& model) {
    if (path.states.empty()) throw DimensionMismatch("empty path");
    if (path.anchor >= path.states.size())
        throw DimensionMismatch("anchor index out of range");
    os << "# birth=" << (path.born ? "born" : "truncated") << '\n';
    for (std::size_t i = 0; i < path.states.size(); ++i)
        os << static_cast<std::int64_t>(i) - static_cast<std::int64_t>(path.anchor)
           << ' ' << model.name_of(path.states[i]) << '\n';
}

KuznetsovPath read_kuznetsov_path(std::istream& is, const Model& model) {
    KuznetsovPath path;
    path.states.clear();
    std::vector<std::int64_t> offsets;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string::size_type hash = line.find('#');
        if (hash != std::string::npos) {
            const std::string::size_type at = line.find("birth=", hash);
            if (at != std::string::npos) {
                std::istringstream fs(line.substr(at + 6));
                std::string flag;
                fs >> flag;
                if (flag == "born") path.born = true;
                else if (flag == "truncated") path.born = false;
                else throw ParseError("unknown birth flag on line " +
                                      std::to_string(lineno));
            }
        }
        const std::string body = strip_comment(line);
        if (body.empty()) continue;
        std::istringstream ls(body);
        std::int64_t offset = 0;
        std::string name;
        if (!(ls >> offset >> name))
            throw ParseError("expected 'offset state' on line " +
                             std::to_string(lineno));
        std::string extra;
        if (ls >> extra)
            throw ParseError("trailing tokens on line " + std::to_string(lineno));
        offsets.push_back(offset);
        path.states.push_back(model.index_of(name));
    }
    if (path.states.empty()) throw ParseError("empty path");
    std::size_t anchor = offsets.size();
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        if (offsets[i] != offsets[0] + static_cast<std::int64_t>(i))
            throw ParseError("offsets are not consecutive");
        if (offsets[i] == 0) anchor = i;
    }
    if (anchor == offsets.size()) throw ParseError("no anchor line (offset 0)");
    path.anchor = anchor;
    return path;
}

} // namespace spinney
