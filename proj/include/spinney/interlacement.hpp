#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spinney/bmc.hpp"
#include "spinney/forest.hpp"
#include "spinney/model.hpp"
#include "spinney/verify.hpp"

namespace spinney {

// Doubly infinite path that enters the region exactly once at time zero,
// stored as its canonical shift representative: anchor at index 0, backward
// part strictly before it (never in the region), forward part after it.
// Record equality is therefore shift-equivalence of paths.
struct QuasiPath {
    std::vector<StateIndex> backward; // chronological; backward.back() is time -1
    StateIndex anchor = 0;            // in the region, time 0
    std::vector<StateIndex> forward;  // forward.front() is time +1
    bool backward_truncated = false;
    bool forward_truncated = false;
};

// Poisson cloud of hitting trees. intensity_mass is the entrance mass of nu
// on the region, so the number of drawn paths is Poisson(u * intensity_mass);
// trees keeps the retained (thinned) ones. nu, region and caps are recorded
// so a sample file round-trips; seed is 0 when drawn from a caller-owned rng.
// advisory is the decorability note for (model, region) — derived state, so
// reading a sample file recomputes it rather than parsing it.
struct InterlacementSample {
    std::vector<Forest> trees;
    double intensity_mass = 0.0;
    double u = 0.0;
    std::uint64_t seed = 0;
    Measure nu;
    StateSet region;
    SamplerCaps caps;
    std::string advisory;
};

// Poisson(u * entrance mass) independent anchored paths: anchor distributed
// as the normalized entrance measure, forward part the killed chain from the
// anchor, backward part the conditioned adjoint chain avoiding the region.
// Truncation flags mark parts whose true extent outruns the caps.
std::vector<QuasiPath> sample_hitting_quasi_process(const Measure& nu,
                                                    const Model& model,
                                                    const StateSet& b,
                                                    double u, Rng& rng,
                                                    const SamplerCaps& caps = {});

// Removes everything after the entrance time: forward part emptied, anchor
// and backward part kept. Idempotent. The region argument names the
// correspondence; the canonical record already fixes the entrance at index 0.
QuasiPath death_b(QuasiPath path, const StateSet& b);

// Five-step pipeline: draw the hitting quasi-process, drop each forward part,
// decorate the surviving path as a spine, then keep each tree independently
// with probability 1 / (number of entrance individuals). The retained trees
// form a Poisson cloud whose entrance-progeny occupation per unit u matches
// the entrance measure pushed through the Green's function.
InterlacementSample sample_branching_interlacement(const Measure& nu,
                                                   const Model& model,
                                                   const StateSet& b, double u,
                                                   Rng& rng,
                                                   const SamplerCaps& caps = {});
// Same, seeding a fresh stream and recording the seed in the sample.
InterlacementSample sample_branching_interlacement(const Measure& nu,
                                                   const Model& model,
                                                   const StateSet& b, double u,
                                                   std::uint64_t seed,
                                                   const SamplerCaps& caps = {});

// One state of the entrance-progeny occupation summary. empirical is per
// unit u; z uses the per-tree sum of squares as the compound-Poisson
// variance estimate (falling back to the Poisson floor when no tree
// touched the state).
struct OccupationRow {
    StateIndex state = 0;
    double empirical = 0.0;
    double target = 0.0;
    double z = 0.0;
};

std::vector<OccupationRow> progeny_occupation_rows(
    const InterlacementSample& sample, const Model& model, const StateSet& b);

// Worst |z| across states against threshold 3.
TestReport progeny_occupation_check(const InterlacementSample& sample,
                                    const Model& model, const StateSet& b);

// "state,empirical_occupation,exact_target,z_score" lines.
void write_occupation_rows(std::ostream& os,
                           const std::vector<OccupationRow>& rows,
                           const Model& model);

// Header line with the drawing parameters, the measure block, then one
// forest block per retained tree, blank-line separated.
void write_interlacement_sample(std::ostream& os,
                                const InterlacementSample& sample,
                                const Model& model);
InterlacementSample read_interlacement_sample(std::istream& is,
                                              const Model& model);

} // namespace spinney
