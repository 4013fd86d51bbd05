#include "spinney/bmc.hpp"

#include <optional>
#include <string>

namespace spinney {

namespace {

// One plain brood for `parent`. Returns false when the population cap trips,
// in which case the brood is dropped whole and the caller must stop sampling.
bool plain_brood(Forest& forest, const Model& model, const SamplerCaps& caps,
                 Rng& rng, Label parent, StateIndex x, std::int64_t gen,
                 Colour child_colour, std::vector<Label>* queue) {
    if (gen >= caps.max_generations) {
        forest.generation_capped = true;
        return true;
    }
    const int n = model.sample_offspring(x, rng);
    if (static_cast<std::int64_t>(forest.size()) + n > caps.max_population) {
        forest.population_capped = true;
        return false;
    }
    for (int k = 0; k < n; ++k) {
        const Label child = forest.fresh_label(rng);
        const StateIndex y = model.sample_motion(x, rng);
        forest.add_child(parent, child, y, child_colour);
        if (queue) queue->push_back(child);
    }
    return true;
}

// Per-state size-biased laws, built on first use.
class SizeBiasedCache {
public:
    explicit SizeBiasedCache(const Model& model)
        : model_(model), laws_(static_cast<std::size_t>(model.size())) {}

    const OffspringLaw& at(StateIndex x) {
        auto& slot = laws_[static_cast<std::size_t>(x)];
        if (!slot) slot = model_.offspring(x).size_biased();
        return *slot;
    }

private:
    const Model& model_;
    std::vector<std::optional<OffspringLaw>> laws_;
};

} // namespace

Forest sample_bmc(const Model& model,
                  const std::vector<std::pair<Label, StateIndex>>& initial,
                  Rng& rng, const SamplerCaps& caps) {
    Forest forest;
    for (const auto& [label, x] : initial) {
        if (x < 0 || x >= model.size())
            throw UnknownState("initial state index out of range");
        forest.add_root(label, x); // throws DuplicateLabel on repeats
    }
    for (std::size_t i = 0; i < forest.size(); ++i) {
        const Individual ind = forest.at(i); // copy; the vector may reallocate
        if (!plain_brood(forest, model, caps, rng, ind.label, ind.location,
                         ind.generation, Colour::Uncoloured, nullptr))
            break;
    }
    return forest;
}

Forest sample_bmc(const Model& model, StateIndex x, Rng& rng,
                  const SamplerCaps& caps) {
    return sample_bmc(model, {{0, x}}, rng, caps);
}

Forest sample_biased_bmc(const Model& model, const StateSet& b_in, StateIndex x,
                         Rng& rng, const SamplerCaps& caps) {
    const StateSet b = normalize_state_set(model, b_in);
    if (x < 0 || x >= model.size())
        throw UnknownState("root state index out of range");
    const Measure h = h_function(model, b); // throws NotNormingRegion
    const Eigen::MatrixXd ph = h_transform_kernel(model, b, h);
    const auto mask = state_mask(model, b);
    const int n_states = model.size();
    std::vector<CdfSampler> ph_rows;
    ph_rows.reserve(static_cast<std::size_t>(n_states));
    for (int s = 0; s < n_states; ++s) {
        std::vector<double> w(static_cast<std::size_t>(n_states));
        for (int y = 0; y < n_states; ++y) w[static_cast<std::size_t>(y)] = ph(s, y);
        ph_rows.emplace_back(w);
    }
    SizeBiasedCache biased(model);

    Forest forest;
    forest.add_root(0, x, Colour::Blue);
    for (std::size_t i = 0; i < forest.size(); ++i) {
        const Individual ind = forest.at(i);
        const bool blue_off_b =
            ind.colour == Colour::Blue && !mask[static_cast<std::size_t>(ind.location)];
        if (!blue_off_b) {
            // whites, and the blue line once it has entered B, follow the
            // plain law with white children
            if (!plain_brood(forest, model, caps, rng, ind.label, ind.location,
                             ind.generation, Colour::White, nullptr))
                break;
            continue;
        }
        if (ind.generation >= caps.max_generations) {
            forest.generation_capped = true;
            continue;
        }
        const int n = biased.at(ind.location).sample(rng);
        if (static_cast<std::int64_t>(forest.size()) + n > caps.max_population) {
            forest.population_capped = true;
            break;
        }
        // n >= 1 because the size-biased law drops the zero class. Random
        // labels put the blue child at an exchangeable position among its
        // siblings, so it can be drawn first.
        {
            const Label child = forest.fresh_label(rng);
            const StateIndex y = static_cast<StateIndex>(
                ph_rows[static_cast<std::size_t>(ind.location)].sample(rng));
            forest.add_child(ind.label, child, y, Colour::Blue);
        }
        for (int k = 1; k < n; ++k) {
            const Label child = forest.fresh_label(rng);
            const StateIndex y = model.sample_motion(ind.location, rng);
            forest.add_child(ind.label, child, y, Colour::White);
        }
    }
    return forest;
}

Forest colour(const Forest& forest, const StateSet& b, Rng& rng) {
    const std::vector<Label> entrance = entrance_set(forest, b);
    if (entrance.empty()) throw NoEntrance("forest has no entrance individual");
    Forest out = forest;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.set_colour(out.at(i).label, Colour::White);
    Label v = entrance[rng.below(entrance.size())];
    for (;;) {
        out.set_colour(v, Colour::Blue);
        const Individual& ind = out.by_label(v);
        if (ind.is_root()) break;
        v = ind.predecessor;
    }
    return out;
}

SpinePath sample_spine(const Model& model, const StateSet& b, StateIndex x,
                       Rng& rng, const SamplerCaps& caps) {
    const StateSet bb = normalize_state_set(model, b);
    const Eigen::MatrixXd ph = h_transform_kernel(model, bb); // NotNormingRegion
    return sample_spine(model, bb, x, ph, rng, caps);
}

SpinePath sample_spine(const Model& model, const StateSet& b, StateIndex x,
                       const Eigen::MatrixXd& kernel, Rng& rng,
                       const SamplerCaps& caps) {
    const StateSet bb = normalize_state_set(model, b);
    if (x < 0 || x >= model.size())
        throw UnknownState("spine start state index out of range");
    const int n = model.size();
    if (kernel.rows() != n || kernel.cols() != n)
        throw DimensionMismatch("spine kernel shape does not match the model");
    const auto mask = state_mask(model, bb);
    std::vector<std::optional<CdfSampler>> rows(static_cast<std::size_t>(n));
    auto row_for = [&](StateIndex s) -> const CdfSampler& {
        auto& slot = rows[static_cast<std::size_t>(s)];
        if (!slot) {
            std::vector<double> w(static_cast<std::size_t>(n));
            for (int y = 0; y < n; ++y) w[static_cast<std::size_t>(y)] = kernel(s, y);
            slot.emplace(w);
        }
        return *slot;
    };

    SpinePath path;
    path.states.push_back(x);
    StateIndex cur = x;
    while (!mask[static_cast<std::size_t>(cur)]) {
        const std::int64_t gen = static_cast<std::int64_t>(path.states.size()) - 1;
        if (gen >= caps.max_generations ||
            static_cast<std::int64_t>(path.states.size()) >= caps.max_population) {
            path.end = SpinePath::End::Truncated;
            return path;
        }
        const CdfSampler& row = row_for(cur);
        std::size_t k;
        if (row.total() >= 1.0 - 1e-12) {
            // stochastic row up to roundoff: no killing
            k = row.sample(rng);
        } else if (row.total() <= 0.0) {
            k = static_cast<std::size_t>(n);
        } else {
            k = row.sample_or_die(rng, 1.0);
        }
        if (k == static_cast<std::size_t>(n)) {
            path.end = SpinePath::End::KilledBeforeB;
            return path;
        }
        cur = static_cast<StateIndex>(k);
        path.states.push_back(cur);
    }
    path.end = SpinePath::End::EnteredB;
    return path;
}

Forest decorate(const SpinePath& spine, const Model& model, const StateSet& b_in,
                Rng& rng, const SamplerCaps& caps) {
    const StateSet b = normalize_state_set(model, b_in);
    const auto mask = state_mask(model, b);
    const auto& st = spine.states;
    if (st.empty()) throw InvalidSpine("empty spine");
    for (std::size_t i = 0; i < st.size(); ++i) {
        if (st[i] < 0 || st[i] >= model.size())
            throw InvalidSpine("spine state index out of range");
        const bool in_b = mask[static_cast<std::size_t>(st[i])] != 0;
        if (i + 1 < st.size()) {
            if (in_b) throw InvalidSpine("interior spine state inside the region");
        } else if (spine.end == SpinePath::End::EnteredB) {
            if (!in_b) throw InvalidSpine("complete spine must end inside the region");
        } else if (in_b) {
            throw InvalidSpine("killed or truncated spine must end outside the region");
        }
    }

    SizeBiasedCache biased(model);
    Forest forest;
    std::vector<Label> queue; // labels awaiting plain growth
    Label spine_label = 0;
    forest.add_root(spine_label, st[0], Colour::Blue);
    bool stopped = false;
    for (std::size_t i = 0; i < st.size() && !stopped; ++i) {
        const StateIndex x = st[i];
        if (mask[static_cast<std::size_t>(x)]) {
            // endpoint in B: regrow the plain tree below the blue vertex
            queue.push_back(spine_label);
            break;
        }
        if (static_cast<std::int64_t>(i) >= caps.max_generations) {
            forest.generation_capped = true;
            break;
        }
        const bool has_blue_child = i + 1 < st.size();
        const int n = biased.at(x).sample(rng);
        const int brood = has_blue_child ? n : n - 1;
        if (static_cast<std::int64_t>(forest.size()) + brood > caps.max_population) {
            forest.population_capped = true;
            stopped = true;
            break;
        }
        if (has_blue_child) {
            const Label next_spine = forest.fresh_label(rng);
            forest.add_child(spine_label, next_spine, st[i + 1], Colour::Blue);
            for (int k = 1; k < n; ++k) {
                const Label child = forest.fresh_label(rng);
                const StateIndex y = model.sample_motion(x, rng);
                forest.add_child(spine_label, child, y, Colour::White);
                queue.push_back(child);
            }
            spine_label = next_spine;
        } else {
            // killed or truncated endpoint: white part of the brood only
            for (int k = 0; k + 1 < n; ++k) {
                const Label child = forest.fresh_label(rng);
                const StateIndex y = model.sample_motion(x, rng);
                forest.add_child(spine_label, child, y, Colour::White);
                queue.push_back(child);
            }
        }
    }
    for (std::size_t qi = 0; qi < queue.size() && !stopped; ++qi) {
        const Individual ind = forest.by_label(queue[qi]); // copy
        if (!plain_brood(forest, model, caps, rng, ind.label, ind.location,
                         ind.generation, Colour::White, &queue))
            break;
    }
    return forest;
}

std::pair<Forest, double> reweighted_biased_sampler(const Model& model,
                                                    const StateSet& b_in,
                                                    StateIndex x, Rng& rng,
                                                    const SamplerCaps& caps) {
    const StateSet b = normalize_state_set(model, b_in);
    const Measure h = h_function(model, b); // throws NotNormingRegion
    Forest forest = sample_bmc(model, x, rng, caps);
    const double weight =
        static_cast<double>(entrance_set(forest, b).size()) / h[x];
    return {std::move(forest), weight};
}

} // namespace spinney
