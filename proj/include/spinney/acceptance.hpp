#pragma once

#include <cstdint>
#include <iosfwd>

namespace spinney {

// Knobs for the acceptance matrix. The defaults are the gate: pinned seed,
// pinned sample sizes, ten stability rounds. scale shrinks every stochastic
// sample size for smoke runs; corrupt_h_scale != 1 is the deliberate-damage
// debug switch and must make the spine sampling criterion fail.
struct AcceptanceConfig {
    std::uint64_t seed = 20260818;
    int workers = 1;
    double corrupt_h_scale = 1.0;
    int stability_rounds = 10;
    std::int64_t scale = 0; // 0 keeps the pinned per-criterion sample sizes

    std::int64_t n_or(std::int64_t pinned) const { return scale > 0 ? scale : pinned; }
};

// Runs the ten-criterion acceptance matrix: one "criterion NN: pass|FAIL"
// line per criterion on `os` with the underlying check reports indented
// beneath, and a closing tally. Every tolerance is pinned here or in the
// checks it drives. When `csv` is given the reports are also emitted as
// machine-readable rows "criterion,name,statistic,threshold,pass,
// sample_size,seed,notes". Returns true iff all criteria passed.
bool acceptance_matrix(std::ostream& os, const AcceptanceConfig& config = {},
                       std::ostream* csv = nullptr);

} // namespace spinney
