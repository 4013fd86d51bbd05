#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spinney/model.hpp"

namespace spinney {

// One sufficient-condition line of the report. Inapplicable criteria carry an
// empty verdict; `value` is the headline diagnostic (a partial sum, a maximal
// asymmetry, the weighted-Green constant, ...) and `detail` the rest.
struct CriterionRow {
    std::string name;
    bool applicable = false;
    std::string verdict;
    double value = 0.0;
    std::string detail;
};

// Numerical diagnostics for whether spine decoration produces transient trees
// (finite population per location). `constant` is the supremum over states of
// the h-weighted Green sum; +infinity when that sum diverges. `bounds[x]` is
// the (lower, upper) envelope for the probability that the tree from x hits
// the region, with lower = h(x)/(4*constant + 2) (0 when the constant is
// infinite) and upper = min(h(x), 1).
struct DecorabilityReport {
    double constant = 0.0;
    std::vector<std::pair<double, double>> bounds;
    std::vector<CriterionRow> criteria;
    std::int64_t truncation = 0;
};

// Mean surplus of the size-biased brood: sum_k (k-1) k d(k) / m. Finite for
// any finitely supported law; zero iff no brood exceeds one child.
double bar_mean(const OffspringLaw& law);

// sup_x (1/h(x)) sum_{y off B} (bar m_y / m_y) g(x,y) h(y)^2. Returns 0 for
// an empty off-region sum or identically vanishing surplus means without
// touching the Green's function; otherwise DivergentGreen propagates.
double decorability_constant(const Model& model, const StateSet& b);

// (h(x)/(4C+2), min(h(x), 1)) sandwiching the probability that the tree
// started at x ever visits the region.
std::pair<double, double> hit_probability_bounds(const Model& model,
                                                 const StateSet& b,
                                                 StateIndex x);

// Evaluates the sufficient criteria as truncated diagnostics: the
// translation-invariant subcritical test (auto-declared only for single-state
// models unless the flag is given), the exact symmetry gate, the two
// symmetric series (partial sums to `truncation` terms with geometric tail
// extrapolation of the last-term ratio; "convergent" only when the tail bound
// drops below 1e-9, "divergent" when the ratio has reached 1), and the
// unconditional constant. `reference` picks the base state of the symmetric
// series.
DecorabilityReport criteria_report(
    const Model& model, const StateSet& b, std::int64_t truncation = 500,
    std::optional<bool> translation_invariant = std::nullopt,
    StateIndex reference = 0);

// One-line note attached to interlacement samples: whether the constant
// certifies decorability. Never throws for a model a sampler accepts.
std::string decorability_advisory(const Model& model, const StateSet& b);

// Structured text: constant, per-state bounds, one line per criterion.
void write_decorability_report(std::ostream& os,
                               const DecorabilityReport& report,
                               const Model& model);

// CSV rows `criterion,applicable,verdict,value`.
void write_criteria_csv(std::ostream& os, const DecorabilityReport& report);

} // namespace spinney
