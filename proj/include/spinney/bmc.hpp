#pragma once

#include <utility>
#include <vector>

#include "spinney/forest.hpp"
#include "spinney/model.hpp"
#include "spinney/rng.hpp"

namespace spinney {

// Finite-resource guard for possibly infinite trees. Hitting a cap never
// throws; samplers set the matching flag on the returned forest instead.
struct SamplerCaps {
    std::int64_t max_generations = 10000;  // individuals at this generation do not reproduce
    std::int64_t max_population = 1000000; // a brood that would push past this is dropped
};

// The blue lineage of the biased process: a motion path that stops on its
// first entry of B. `KilledBeforeB` can only occur under a sub-stochastic
// h-kernel (debug corruptions); with a clean h the chain a.s. enters B.
struct SpinePath {
    enum class End { EnteredB, KilledBeforeB, Truncated };

    std::vector<StateIndex> states;
    End end = End::EnteredB;
};

// Plain branching Markov chain from the given initial individuals,
// generation by generation: each individual at x begets a d_x-distributed
// number of children at iid p(x,.) locations. Deterministic given the seed.
Forest sample_bmc(const Model& model,
                  const std::vector<std::pair<Label, StateIndex>>& initial,
                  Rng& rng, const SamplerCaps& caps = {});
Forest sample_bmc(const Model& model, StateIndex x, Rng& rng,
                  const SamplerCaps& caps = {});

// B-biased process from a blue root at x: blue individuals off B bear a
// size-biased count with one blue child at p_h(x,.) in a uniform slot and the
// rest white at iid p(x,.); blue individuals in B reproduce like whites and
// the blue line stops; whites follow the plain law.
Forest sample_biased_bmc(const Model& model, const StateSet& b, StateIndex x,
                         Rng& rng, const SamplerCaps& caps = {});

// Uniform entrance colouring: pick one of entrance_set(forest, B) uniformly,
// paint it and its ancestral line blue, everything else white.
Forest colour(const Forest& forest, const StateSet& b, Rng& rng);

// Markov chain with kernel p_h from x, stopped at its first entry of B.
SpinePath sample_spine(const Model& model, const StateSet& b, StateIndex x,
                       Rng& rng, const SamplerCaps& caps = {});
// As above but with a caller-supplied kernel (rows may be sub-stochastic, in
// which case the path can be killed before reaching B).
SpinePath sample_spine(const Model& model, const StateSet& b, StateIndex x,
                       const Eigen::MatrixXd& kernel, Rng& rng,
                       const SamplerCaps& caps = {});

// Grows a full coloured tree around a given spine. Off-B spine states get a
// size-biased brood whose non-spine children are white and grow plain trees;
// a spine endpoint in B reproduces once more with the plain law (all-white
// progeny). A spine that was killed or truncated ends with its off-B
// attachment only.
Forest decorate(const SpinePath& spine, const Model& model, const StateSet& b,
                Rng& rng, const SamplerCaps& caps = {});

// Importance sampler for the #H_B-reweighted law: a plain sample from x
// together with the weight #H_B(forest) / h(x).
std::pair<Forest, double> reweighted_biased_sampler(const Model& model,
                                                    const StateSet& b,
                                                    StateIndex x, Rng& rng,
                                                    const SamplerCaps& caps = {});

} // namespace spinney
