#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "spinney/model.hpp"

namespace spinney {

using Label = std::uint64_t;

enum class Colour : unsigned char { Uncoloured, White, Blue };

char colour_char(Colour c);
Colour colour_from_char(char c);

// One individual of a forest. Roots store their own label as predecessor.
struct Individual {
    Label label;
    Label predecessor;
    StateIndex location;
    Colour colour;
    std::int32_t generation;

    bool is_root() const { return predecessor == label; }
};

// Forest in point-process representation. Individuals are stored in insertion
// order with parents strictly before children; labels are unique. Samplers
// draw child labels from their rng (collisions within a forest are redrawn),
// so sibling order under the label order is exchangeable; every query that
// returns a set of individuals reports labels in ascending order, so all
// iteration is deterministic given the seed.
class Forest {
public:
    void reserve(std::size_t n) { individuals_.reserve(n); }

    std::size_t size() const { return individuals_.size(); }
    const Individual& at(std::size_t i) const { return individuals_[i]; }
    const std::vector<Individual>& individuals() const { return individuals_; }

    bool contains(Label label) const { return by_label_.count(label) != 0; }
    const Individual& by_label(Label label) const;

    void add_root(Label label, StateIndex location,
                  Colour colour = Colour::Uncoloured);
    void add_child(Label parent, Label child, StateIndex location,
                   Colour colour = Colour::Uncoloured);

    // Stores the individual without any invariant checks (first label wins in
    // the lookup index). Lets tests and loaders build broken forests for
    // validate_forest to report on.
    void append_unchecked(const Individual& ind);

    // Fresh random label not yet present in this forest.
    Label fresh_label(Rng& rng) const {
        Label l;
        do { l = rng.u64(); } while (contains(l));
        return l;
    }

    std::vector<Label> roots() const;
    std::vector<Label> children(Label parent) const; // ascending label order
    void set_colour(Label label, Colour colour);

    // True when a cap cut the sampler short.
    bool generation_capped = false;
    bool population_capped = false;

private:
    std::vector<Individual> individuals_;
    std::unordered_map<Label, std::size_t> by_label_;
    std::unordered_map<Label, std::vector<Label>> children_;

    std::size_t index_of(Label label) const;
};

// One violated forest invariant, anchored at the offending individual.
// Kinds: duplicate-label, unknown-predecessor, circle, generation-mismatch,
// root-generation, location-range.
struct ForestIssue {
    std::string kind;
    Label label;
};

// Structural checks: labels unique, predecessors exist, no predecessor
// circles, generations consistent, locations within range when a model is
// given. Empty report means valid.
std::vector<ForestIssue> validate_forest(const Forest& forest);
std::vector<ForestIssue> validate_forest(const Forest& forest,
                                         const Model& model);

// Individuals located in B with no strict ancestor in B, ascending labels.
std::vector<Label> entrance_set(const Forest& forest, const StateSet& b);

std::int32_t generation(const Forest& forest, Label label);

// Subtree rooted at the given individual, copied into a fresh forest.
Forest progeny(const Forest& forest, Label root);

// Union of the subtrees of all B-entrance individuals (their roots become the
// roots of the result; entrance individuals are never nested so the subtrees
// are disjoint).
Forest progeny_of_entrance(const Forest& forest, const StateSet& b);

// Per-state individual counts, with multiplicity.
Measure occupation_of(const Forest& forest, int num_states);
Measure occupation_of(const Forest& forest, const Model& model);

// Debugging export: label -> Ulam-Harris word ("2.1.3"), children numbered in
// ascending-label order, roots numbered in ascending-label order.
std::unordered_map<Label, std::string> ulam_harris_index(const Forest& forest);

// Serialization: one '# ... flags=...' header line, then one line per
// individual, "label predecessor location colour", predecessor "-" for roots,
// colours b/w/u, locations by state name, insertion order. header_extra is
// spliced into the header before the flags field (e.g. "seed=7 caps=100:1000 ").
void write_forest(std::ostream& os, const Forest& forest, const Model& model,
                  const std::string& header_extra = "");
Forest read_forest(std::istream& is, const Model& model);
std::string forest_flags(const Forest& forest); // "" or comma-joined flag names

} // namespace spinney
