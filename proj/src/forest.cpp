#include "spinney/forest.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

namespace spinney {

char colour_char(Colour c) {
    switch (c) {
        case Colour::Blue: return 'b';
        case Colour::White: return 'w';
        default: return 'u';
    }
}

Colour colour_from_char(char c) {
    switch (c) {
        case 'b': return Colour::Blue;
        case 'w': return Colour::White;
        case 'u': return Colour::Uncoloured;
        default: throw ParseError(std::string("unknown colour code '") + c + "'");
    }
}

std::size_t Forest::index_of(Label label) const {
    auto it = by_label_.find(label);
    if (it == by_label_.end()) {
        std::ostringstream os;
        os << "label " << label << " not in forest";
        throw UnknownLabel(os.str());
    }
    return it->second;
}

const Individual& Forest::by_label(Label label) const {
    return individuals_[index_of(label)];
}

void Forest::add_root(Label label, StateIndex location, Colour colour) {
    if (contains(label)) throw DuplicateLabel(std::to_string(label));
    by_label_.emplace(label, individuals_.size());
    individuals_.push_back(Individual{label, label, location, colour, 0});
}

void Forest::add_child(Label parent, Label child, StateIndex location,
                       Colour colour) {
    const Individual& p = individuals_[index_of(parent)];
    if (contains(child)) throw DuplicateLabel(std::to_string(child));
    by_label_.emplace(child, individuals_.size());
    individuals_.push_back(Individual{child, parent, location, colour,
                                      p.generation + 1});
    children_[parent].push_back(child);
}

std::vector<Label> Forest::roots() const {
    std::vector<Label> out;
    for (const Individual& ind : individuals_)
        if (ind.is_root()) out.push_back(ind.label);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Label> Forest::children(Label parent) const {
    index_of(parent); // existence check
    auto it = children_.find(parent);
    if (it == children_.end()) return {};
    std::vector<Label> out = it->second;
    std::sort(out.begin(), out.end());
    return out;
}

void Forest::set_colour(Label label, Colour colour) {
    individuals_[index_of(label)].colour = colour;
}

void Forest::append_unchecked(const Individual& ind) {
    by_label_.emplace(ind.label, individuals_.size());
    if (ind.predecessor != ind.label)
        children_[ind.predecessor].push_back(ind.label);
    individuals_.push_back(ind);
}

std::vector<ForestIssue> validate_forest(const Forest& forest) {
    std::vector<ForestIssue> issues;
    std::unordered_map<Label, std::size_t> first; // label -> first index
    first.reserve(forest.size());
    for (std::size_t i = 0; i < forest.size(); ++i) {
        const Individual& ind = forest.at(i);
        if (!first.emplace(ind.label, i).second)
            issues.push_back({"duplicate-label", ind.label});
    }
    // Predecessor chains: walk each one upward, memoizing labels already
    // known to terminate. status: 1 = on the current walk, 2 = terminates.
    std::unordered_map<Label, int> status;
    status.reserve(forest.size());
    for (std::size_t i = 0; i < forest.size(); ++i) {
        const Individual& ind = forest.at(i);
        std::vector<Label> walk;
        Label cur = ind.label;
        for (;;) {
            auto st = status.find(cur);
            if (st != status.end()) {
                if (st->second == 1) {
                    issues.push_back({"circle", cur});
                    break;
                }
                break; // already known to terminate
            }
            status[cur] = 1;
            walk.push_back(cur);
            auto at = first.find(cur);
            const Individual& here = forest.at(at->second);
            if (here.is_root()) break;
            auto up = first.find(here.predecessor);
            if (up == first.end()) {
                issues.push_back({"unknown-predecessor", cur});
                break;
            }
            cur = here.predecessor;
        }
        for (Label l : walk) status[l] = 2;
    }
    // Generations, where the chain structure allows the check at all.
    for (std::size_t i = 0; i < forest.size(); ++i) {
        const Individual& ind = forest.at(i);
        if (ind.is_root()) {
            if (ind.generation != 0) issues.push_back({"root-generation", ind.label});
            continue;
        }
        auto up = first.find(ind.predecessor);
        if (up == first.end()) continue; // reported above
        const Individual& parent = forest.at(up->second);
        if (ind.generation != parent.generation + 1)
            issues.push_back({"generation-mismatch", ind.label});
    }
    return issues;
}

std::vector<ForestIssue> validate_forest(const Forest& forest,
                                         const Model& model) {
    std::vector<ForestIssue> issues = validate_forest(forest);
    for (const Individual& ind : forest.individuals())
        if (ind.location < 0 || ind.location >= model.size())
            issues.push_back({"location-range", ind.label});
    return issues;
}

std::vector<Label> entrance_set(const Forest& forest, const StateSet& b) {
    auto is_in_b = [&](StateIndex x) {
        for (StateIndex s : b)
            if (s == x) return true;
        return false;
    };
    // has_b_ancestor per stored index; parents precede children
    std::vector<char> tainted(forest.size(), 0);
    std::unordered_map<Label, std::size_t> pos;
    pos.reserve(forest.size());
    std::vector<Label> out;
    for (std::size_t i = 0; i < forest.size(); ++i) {
        const Individual& ind = forest.at(i);
        pos.emplace(ind.label, i);
        bool anc = false;
        if (!ind.is_root()) {
            const std::size_t pi = pos.at(ind.predecessor);
            anc = tainted[pi] || is_in_b(forest.at(pi).location);
        }
        tainted[i] = anc;
        if (!anc && is_in_b(ind.location)) out.push_back(ind.label);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::int32_t generation(const Forest& forest, Label label) {
    return forest.by_label(label).generation;
}

namespace {

// Collect the subtree below (and including) each requested root, in stored
// order, re-rooting the copies.
Forest copy_subtrees(const Forest& forest, const std::vector<Label>& subroots) {
    std::unordered_map<Label, char> keep;
    keep.reserve(forest.size());
    for (Label r : subroots) keep.emplace(r, 1);
    Forest out;
    std::unordered_map<Label, std::size_t> pos;
    pos.reserve(forest.size());
    for (std::size_t i = 0; i < forest.size(); ++i) {
        const Individual& ind = forest.at(i);
        pos.emplace(ind.label, i);
        const bool is_subroot = keep.count(ind.label) != 0;
        if (!is_subroot && !ind.is_root() && keep.count(ind.predecessor)) {
            keep.emplace(ind.label, 0);
        }
        auto it = keep.find(ind.label);
        if (it == keep.end()) continue;
        if (it->second)
            out.add_root(ind.label, ind.location, ind.colour);
        else
            out.add_child(ind.predecessor, ind.label, ind.location, ind.colour);
    }
    out.generation_capped = forest.generation_capped;
    out.population_capped = forest.population_capped;
    return out;
}

} // namespace

Forest progeny(const Forest& forest, Label root) {
    forest.by_label(root); // existence check
    return copy_subtrees(forest, {root});
}

Forest progeny_of_entrance(const Forest& forest, const StateSet& b) {
    return copy_subtrees(forest, entrance_set(forest, b));
}

Measure occupation_of(const Forest& forest, int num_states) {
    Measure occ;
    occ.values = Eigen::VectorXd::Zero(num_states);
    for (const Individual& ind : forest.individuals()) {
        if (ind.location < 0 || ind.location >= num_states)
            throw UnknownState("forest location out of range");
        occ.values[ind.location] += 1.0;
    }
    return occ;
}

Measure occupation_of(const Forest& forest, const Model& model) {
    return occupation_of(forest, model.size());
}

std::unordered_map<Label, std::string> ulam_harris_index(const Forest& forest) {
    std::unordered_map<Label, std::string> words;
    words.reserve(forest.size());
    const std::vector<Label> roots = forest.roots();
    for (std::size_t i = 0; i < roots.size(); ++i)
        words[roots[i]] = std::to_string(i + 1);
    // children() is ascending-label; insertion order has parents first, so a
    // single stored-order pass after seeding roots cannot resolve sibling
    // ranks. Walk breadth via the children lists instead.
    std::vector<Label> queue = roots;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const Label parent = queue[qi];
        const std::vector<Label> kids = forest.children(parent);
        for (std::size_t k = 0; k < kids.size(); ++k) {
            words[kids[k]] = words[parent] + "." + std::to_string(k + 1);
            queue.push_back(kids[k]);
        }
    }
    return words;
}

std::string forest_flags(const Forest& forest) {
    std::string flags;
    if (forest.generation_capped) flags += "generation_capped";
    if (forest.population_capped) {
        if (!flags.empty()) flags += ",";
        flags += "population_capped";
    }
    return flags;
}

void write_forest(std::ostream& os, const Forest& forest, const Model& model,
                  const std::string& header_extra) {
    os << "# " << header_extra << "flags=" << forest_flags(forest) << "\n";
    for (const Individual& ind : forest.individuals()) {
        os << ind.label << ' ';
        if (ind.is_root())
            os << '-';
        else
            os << ind.predecessor;
        os << ' ' << model.name_of(ind.location) << ' ' << colour_char(ind.colour)
           << "\n";
    }
}

Forest read_forest(std::istream& is, const Model& model) {
    Forest out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) break; // blank line terminates a forest block
        if (line[0] == '#') {
            const auto at = line.find("flags=");
            if (at != std::string::npos) {
                const std::string flags = line.substr(at + 6);
                if (flags.find("generation_capped") != std::string::npos)
                    out.generation_capped = true;
                if (flags.find("population_capped") != std::string::npos)
                    out.population_capped = true;
            }
            continue;
        }
        std::istringstream ls(line);
        std::string label_s, pred_s, loc_s, colour_s;
        if (!(ls >> label_s >> pred_s >> loc_s >> colour_s))
            throw ParseError("bad forest record: " + line);
        const Label label = std::stoull(label_s);
        const StateIndex loc = model.index_of(loc_s);
        if (colour_s.size() != 1) throw ParseError("bad colour field: " + colour_s);
        const Colour colour = colour_from_char(colour_s[0]);
        if (pred_s == "-")
            out.add_root(label, loc, colour);
        else
            out.add_child(std::stoull(pred_s), label, loc, colour);
    }
    const auto issues = validate_forest(out, model);
    if (!issues.empty())
        throw ParseError("invalid forest record: " + issues.front().kind +
                         " at label " + std::to_string(issues.front().label));
    return out;
}

} // namespace spinney
