#pragma once

// Shared test models and small statistical helpers.

#include <cmath>
#include <vector>

#include "spinney/model.hpp"

namespace spinney::testing {

inline OffspringLaw law(std::vector<std::pair<int, double>> entries) {
    return OffspringLaw::from_entries(std::move(entries));
}

// Three-state chain 0-1-2 with reflecting ends: p(0,1)=1, p(1,0)=p(1,2)=1/2,
// p(2,1)=1; offspring {0:0.6, 2:0.4} everywhere (mean 0.8). The workhorse:
// its Green's function and h-function have closed forms used as oracles
// throughout (g(0,0)=17/9, h(1)=10/17 for B={0}, ...).
inline Model chain_model() {
    Eigen::MatrixXd p(3, 3);
    p << 0, 1, 0,
         0.5, 0, 0.5,
         0, 1, 0;
    const OffspringLaw d = law({{0, 0.6}, {2, 0.4}});
    return Model::build({"0", "1", "2"}, p, {d, d, d});
}

// Single looping state with critical branching (mean 1): the Green's
// function diverges.
inline Model critical_loop_model() {
    Eigen::MatrixXd p(1, 1);
    p << 1;
    return Model::build({"0"}, p, {law({{0, 0.5}, {2, 0.5}})});
}

// Single looping state, mean offspring 0.8: g(0,0) = 1/(1-0.8) = 5.
inline Model subcritical_loop_model() {
    Eigen::MatrixXd p(1, 1);
    p << 1;
    return Model::build({"0"}, p, {law({{0, 0.6}, {2, 0.4}})});
}

// Three-sigma band for an empirical mean of n draws with the given standard
// deviation per draw.
inline double band3(double sd, double n) { return 3.0 * sd / std::sqrt(n); }

// Three-sigma band for an empirical frequency of a probability-p event.
inline double freq_band3(double p, double n) {
    return band3(std::sqrt(p * (1.0 - p)), n);
}

} // namespace spinney::testing
