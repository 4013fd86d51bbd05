#pragma once

#include <iosfwd>
#include <vector>

#include "spinney/bmc.hpp"
#include "spinney/model.hpp"
#include "spinney/verify.hpp"

namespace spinney {

// Excessivity check for a measure: slack(x) = nu(x) - (nu Q)(x). The measure
// is excessive iff every slack entry is >= -1e-12.
struct ExcessiveCheck {
    bool excessive = false;
    Measure slack;
};

ExcessiveCheck is_excessive(const Measure& nu, const Model& model);

// Riesz decomposition nu = pot.G + inv of an excessive measure, with
// pot = nu(I - Q) and inv.Q = inv. A potential part below 1e-14 is treated
// as exactly zero and the Green's function is never touched, so purely
// invariant measures decompose even when G diverges.
struct RieszPair {
    Measure potential_part;
    Measure invariant_part;
};

RieszPair riesz_decomposition(const Measure& nu, const Model& model);

// Time reversal of the intensity under nu: hat p(x,y) = nu(y) Q(y,x) / nu(x).
// Requires nu > 0 everywhere (ZeroMassState); rows are substochastic exactly
// when nu is excessive, with death mass slack(x)/nu(x) at x.
Eigen::MatrixXd adjoint_kernel(const Measure& nu, const Model& model);

// First-return kernel of the region: Q^B = Q_BB + Q_Bc (I - Q_cc)^{-1} Q_cB,
// indexed by the sorted region. Its Green's function is G restricted to BxB.
// Throws DivergentGreen when the off-region block is not subcritical.
Eigen::MatrixXd taboo_return_kernel(const Model& model, const StateSet& b);

// Entrance measure bar mu_B = nu|_B (I - Q^B) of an excessive measure,
// returned over the full state list with support in B. Recomposes as
// nu|_B = bar mu_B . G|_{BxB}.
Measure entrance_measure(const Measure& nu, const Model& model,
                         const StateSet& b);

// An increasing run of regions with one entrance measure each, measures[i]
// supported on sets[i].
struct EntranceFamily {
    std::vector<StateSet> sets;
    std::vector<Measure> measures;
};

// Consistency of consecutive pairs: each measure must equal the next one
// pushed through the first-passage weights into its region (taboo before
// arrival). Statistic = worst absolute discrepancy, threshold 1e-9; a family
// with fewer than two sets passes vacuously.
TestReport entrance_family_check(const EntranceFamily& family,
                                 const Model& model);

// The occupation <-> excessive bijection over a norming region:
//   nu(x) = 1_{B^c}(x) mu(x)/h(x) + sum_{z in B} mu(z) g(z,x),
// with inverse mu|_B = bar mu_B and mu(x) = h(x)(nu(x) - sum_z mu(z) g(z,x))
// off B. occupation_to_excessive yields an excessive measure exactly when mu
// is an occupation measure of the h-chain (it does not validate that);
// excessive_to_occupation requires an excessive input and round-trips.
Measure occupation_to_excessive(const Measure& mu, const Model& model,
                                const StateSet& b);
Measure excessive_to_occupation(const Measure& nu, const Model& model,
                                const StateSet& b);

// a(x) = probability that the nu-adjoint chain from x dies before entering
// the region at a later step: a = lambda + hat p|_{B^c} a with lambda the
// adjoint death mass. The Doob weight conditioning the backward part of
// anchored paths; satisfies bar mu_B(x) = nu(x) a(x) on B.
Measure avoid_region_function(const Measure& nu, const Model& model,
                              const StateSet& b);

// One path drawn from the measure-of-paths of nu, anchored at its first
// entry of the region: states runs birth -> anchor, the anchor lies in B,
// and everything before it avoids B. The forward continuation under the
// B-killed spine kernel is empty, so the anchor is the last state. born is
// false when the backward chain hit caps.max_generations before dying; with
// a divergence-free nu that is a truncation artifact, and when the iterated
// tail of nu keeps non-trivial invariant mass the sampler throws
// BackwardNotAlmostSurelyFinite instead.
struct KuznetsovPath {
    std::vector<StateIndex> states;
    std::size_t anchor = 0; // index into states
    bool born = true;
};

// Prepared anchored-path sampler for one (nu, region) pair: entrance measure,
// adjoint kernel and avoidance weights are assembled once at construction, so
// each draw costs only the path itself. Construction throws everything the
// one-shot kuznetsov_sample would.
class KuznetsovSampler {
public:
    KuznetsovSampler(const Measure& nu, const Model& model, const StateSet& b);

    // Unnormalized anchor intensity bar mu_B over the full state list.
    const Measure& entrance() const { return bar_; }
    const StateSet& region() const { return region_; }

    KuznetsovPath sample(Rng& rng, const SamplerCaps& caps = {}) const;

private:
    bool has_invariant_mass() const;

    const Model* model_ = nullptr;
    Measure nu_;
    StateSet region_;
    StateSet complement_;
    Measure bar_;
    Measure avoid_;
    CdfSampler anchor_cdf_;
    std::vector<CdfSampler> step_cdf_; // per state: hat(x,y) a(y), y off B
};

KuznetsovPath kuznetsov_sample(const Measure& nu, const Model& model,
                               const StateSet& b, Rng& rng,
                               const SamplerCaps& caps = {});

// Markov property of anchored paths at a probe state off the region: scan
// each sampled path from birth for its first visit to {probe} u B; given
// that visit happens at the probe, the remainder must follow the spine law
// from the probe regardless of the history before it. Report [0] is a
// chi-square of the remainder-path frequencies against the exact spine path
// law (threshold = critical value at significance 1e-3); report [1] is a
// two-sample TV against paths drawn directly by sample_spine.
std::vector<TestReport> kuznetsov_markov_test(const Measure& nu,
                                              const Model& model,
                                              const StateSet& b,
                                              StateIndex probe,
                                              std::int64_t n_samples,
                                              std::uint64_t seed,
                                              int workers = 1);

// Measures serialize as one "state value" line per state; '#' starts a
// comment. Reading accepts any subset of states (missing ones are zero) and
// rejects duplicates, unknown states and negative masses.
void write_measure(std::ostream& os, const Measure& nu, const Model& model);
Measure read_measure(std::istream& is, const Model& model);

// Anchored paths serialize as "offset state" lines, offset 0 at the anchor,
// preceded by a "# birth=born|truncated" header line.
void write_kuznetsov_path(std::ostream& os, const KuznetsovPath& path,
                          const Model& model);
KuznetsovPath read_kuznetsov_path(std::istream& is, const Model& model);

} // namespace spinney
