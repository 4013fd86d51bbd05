#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spinney/bmc.hpp"

namespace spinney {

// Exact or empirical law over canonically encoded truncated trees. The
// encoding of a tree is "loc:colour(child1child2...)" with children sorted by
// (location, encoding), so isomorphic trees collide and the map key is a
// faithful canonical form. `excess` carries mass that fell outside the
// encoding window (deep paths, budget lumps); tv_distance compares it as one
// extra bucket. `scheme` guards against comparing laws over different
// canonical forms.
struct TreePmf {
    std::string scheme = "ctree-v1";
    std::map<std::string, double> entries;
    double excess = 0.0;

    double total() const {
        double t = excess;
        for (const auto& [enc, p] : entries) t += p;
        return t;
    }
};

// One statistical or exact check. pass is always statistic <= threshold.
struct TestReport {
    std::string name;
    double statistic = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::int64_t sample_size = 0;
    std::uint64_t seed = 0;
    std::string notes;
};

TestReport make_report(std::string name, double statistic, double threshold,
                       std::int64_t sample_size, std::uint64_t seed,
                       std::string notes = "");
std::string report_text(const TestReport& report);
// "name,statistic,threshold,pass,sample_size,seed,notes"
std::string report_csv(const TestReport& report);

// Canonical encoding of a single-rooted forest; inverse for round trips.
// decode_tree assigns fresh labels in preorder.
std::string encode_forest(const Forest& tree);
Forest decode_tree(const std::string& encoding);

// Exact law of the plain chain from x truncated to `depth` generations,
// canonically encoded with every vertex uncoloured. The budget bounds the
// total number of distinct entries across all intermediate laws.
TreePmf enumerate_truncated_bmc(const Model& model, StateIndex x, int depth,
                                std::int64_t budget = 1000000);

// Exact law of the size-biased process with its distinguished blue line.
TreePmf enumerate_truncated_biased(const Model& model, const StateSet& b,
                                   StateIndex x, int depth,
                                   std::int64_t budget = 1000000);

// Exact law of the plain chain reweighted by (entrance count)/h(x) with the
// uniform entrance colouring, truncated to `depth` generations. Identical to
// enumerate_truncated_biased when the spine identity holds.
TreePmf enumerate_truncated_reweighted(const Model& model, const StateSet& b,
                                       StateIndex x, int depth,
                                       std::int64_t budget = 1000000);

// pmf[j] = P(exactly j entrance individuals within `depth` generations),
// by exact convolution of the per-child count laws.
std::vector<double> enumerate_entrance_count(const Model& model,
                                             const StateSet& b, StateIndex x,
                                             int depth);

// Half the L1 distance over the union of supports, excess mass included as a
// single bucket. Throws EncodingMismatch when the schemes differ.
double tv_distance(const TreePmf& a, const TreePmf& b);

// Conservative plug-in thresholds for empirical TV comparisons.
double tv_threshold_one_sample(std::size_t support, std::int64_t n);
double tv_threshold_two_sample(std::size_t support, std::int64_t n_a,
                               std::int64_t n_b);

// Empirical pmf from encoding counts.
TreePmf empirical_pmf(const std::map<std::string, std::int64_t>& counts,
                      std::int64_t n, std::string scheme = "ctree-v1");

// Upper-tail p-value of a chi-square statistic via the regularized
// incomplete gamma function Q(dof/2, stat/2).
double chi_square_pvalue(double statistic, double dof);
double regularized_gamma_q(double a, double x);

// Critical value c with P(chi2_dof > c) = significance, by bisection on the
// p-value; a statistic passes at the given significance iff it is <= c.
double chi_square_quantile(double significance, double dof);

// State names joined by '>'; the key scheme of "path-v1" pmfs over motion
// paths.
std::string encode_path(const std::vector<StateIndex>& states,
                        const Model& model);

// Spine identity check at one (x, depth): report [0] compares the two exact
// enumerations (reweighted-coloured vs biased, threshold 1e-9), report [1]
// compares the biased enumeration against the empirical decorate(sample_spine)
// law at n_samples (threshold 2*sqrt(|support|/n)+0.005). corrupt_h_scale
// multiplies h off the region before building the spine kernel; any value
// other than 1 breaks the identity and must make the sampled leg fail.
std::vector<TestReport> spine_identity_test(const Model& model,
                                            const StateSet& b, StateIndex x,
                                            int depth, std::int64_t n_samples,
                                            std::uint64_t seed,
                                            double corrupt_h_scale = 1.0,
                                            int workers = 1);

// Occupation identity for the hitting quasi-process (defined alongside the
// interlacement sampler): per-state z-scores of the empirical progeny
// occupation against the exact entrance-measure times Green target; the
// statistic is the worst |z| and the threshold 4.
TestReport interlacement_qp_test(const Model& model, const StateSet& b,
                                 const StateSet& b_prime, const Measure& nu,
                                 double u, std::int64_t n_runs,
                                 std::uint64_t seed, int workers = 1);

} // namespace spinney
