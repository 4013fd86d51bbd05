#include <cstdlib>
#include <iostream>

#include "spinney/acceptance.hpp"

// The acceptance gate with its pinned defaults. Optional positional
// overrides for smoke runs: seed, sample-size scale, stability rounds.
int main(int argc, char** argv) {
    spinney::AcceptanceConfig config;
    if (argc > 1) config.seed = std::strtoull(argv[1], nullptr, 10);
    if (argc > 2) config.scale = std::strtoll(argv[2], nullptr, 10);
    if (argc > 3) config.stability_rounds = std::atoi(argv[3]);
    return spinney::acceptance_matrix(std::cout, config) ? 0 : 1;
}
