#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "spinney/decorability.hpp"
#include "spinney/interlacement.hpp"

using namespace spinney;
using namespace spinney::testing;

namespace {

// Mean-1.1 self-loop feeding a region state: the Green's function diverges
// (spectral radius 1.1) while h and the taboo machinery stay intact.
Model divergent_feeder_model() {
    Eigen::MatrixXd p(2, 2);
    p << 1, 0,
         0.1, 0.9;
    const OffspringLaw d = law({{0, 0.45}, {2, 0.55}});
    return Model::build({"0", "1"}, p, {d, d});
}

// Deterministic single-child branching on the chain motion: critical, so the
// Green's function diverges, but the size-biased surplus vanishes.
Model single_child_chain_model() {
    Eigen::MatrixXd p(3, 3);
    p << 0, 1, 0,
         0.5, 0, 0.5,
         0, 1, 0;
    const OffspringLaw d = law({{1, 1.0}});
    return Model::build({"0", "1", "2"}, p, {d, d, d});
}

// Probability that the tree from state 1 never reaches state 0, as the
// fixed point of the extinction-before-hitting recursion on the chain.
double chain_avoid_fixpoint() {
    double a = 0.5;
    for (int i = 0; i < 200; ++i)
        a = 0.636 + 0.048 * a * a + 0.016 * a * a * a * a;
    return a;
}

const CriterionRow& row_named(const DecorabilityReport& report,
                              const std::string& name) {
    for (const CriterionRow& row : report.criteria)
        if (row.name == name) return row;
    REQUIRE(false);
    return report.criteria.front();
}

} // namespace

TEST_SUITE("decorability") {

TEST_CASE("surplus mean of the size-biased brood") {
    CHECK(bar_mean(law({{0, 0.6}, {2, 0.4}})) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(bar_mean(law({{1, 1.0}})) == 0.0);
    CHECK(bar_mean(law({{1, 0.5}, {2, 0.5}})) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(bar_mean(law({{0, 1.0}})), ZeroMeanOffspring);
}

TEST_CASE("weighted green constant") {
    const Model model = chain_model();
    const StateSet b = {0};
    const double c = decorability_constant(model, b);

    // recompute the per-state values from first principles
    const Measure h = h_function(model, b);
    const Eigen::MatrixXd& g = model.green();
    double sup = 0.0;
    std::vector<double> per_state;
    for (StateIndex x = 0; x < 3; ++x) {
        double sum = 0.0;
        for (StateIndex y : {1, 2})
            sum += 1.25 * g(x, y) * h.values[y] * h.values[y];
        per_state.push_back(sum / h.values[x]);
        sup = std::max(sup, per_state.back());
    }
    CHECK(c == doctest::Approx(sup).epsilon(1e-15));
    CHECK(per_state[0] == doctest::Approx(3140.0 / 2601.0).epsilon(1e-12));
    CHECK(per_state[1] == doctest::Approx(66725.0 / 26010.0).epsilon(1e-12));
    CHECK(per_state[2] == doctest::Approx(16405.0 / 5202.0).epsilon(1e-12));
    CHECK(c == doctest::Approx(16405.0 / 5202.0).epsilon(1e-12)); // sup at x=2

    // enlarging the region changes h and the sum; re-derived exactly
    CHECK(decorability_constant(model, {0, 1}) ==
          doctest::Approx(17.0 / 9.0).epsilon(1e-12));
    // whole-space region: empty off-region sum
    CHECK(decorability_constant(model, {0, 1, 2}) == 0.0);

    // single-child broods have zero surplus, so the constant is zero even
    // though the critical Green's function itself diverges
    const Model degenerate = single_child_chain_model();
    CHECK_THROWS_AS(green_function(degenerate), DivergentGreen);
    CHECK(decorability_constant(degenerate, {0}) == 0.0);

    // positive surplus with a divergent Green's function is reported as such
    CHECK_THROWS_AS(decorability_constant(divergent_feeder_model(), {0}),
                    DivergentGreen);
    CHECK_THROWS_AS(decorability_constant(model, StateSet{}),
                    NotNormingRegion);
}

TEST_CASE("hit probability bounds") {
    const Model model = chain_model();
    const StateSet b = {0};
    const double c = decorability_constant(model, b);

    const auto [lo1, up1] = hit_probability_bounds(model, b, 1);
    CHECK(lo1 == doctest::Approx((10.0 / 17.0) / (4.0 * c + 2.0)).epsilon(1e-15));
    CHECK(lo1 == doctest::Approx(765.0 / 19006.0).epsilon(1e-12));
    CHECK(up1 == doctest::Approx(10.0 / 17.0).epsilon(1e-15));

    const auto [lo0, up0] = hit_probability_bounds(model, b, 0);
    CHECK(up0 == 1.0); // h(0) = 1 capped at one
    CHECK(lo0 == doctest::Approx(1.0 / (4.0 * c + 2.0)).epsilon(1e-15));

    const auto [lo2, up2] = hit_probability_bounds(model, b, 2);
    CHECK(up2 == doctest::Approx(8.0 / 17.0).epsilon(1e-15));
    CHECK(lo2 < lo1);

    CHECK_THROWS_AS(hit_probability_bounds(model, b, 3), UnknownState);
    CHECK_THROWS_AS(hit_probability_bounds(model, b, -1), UnknownState);

    // exact hit probabilities from the extinction fixed point sit inside
    const double avoid1 = chain_avoid_fixpoint();
    const double hit1 = 1.0 - avoid1;
    const double hit2 = 1.0 - (0.6 + 0.4 * avoid1 * avoid1);
    CHECK(hit1 == doctest::Approx(0.340059).epsilon(1e-4));
    CHECK(lo1 < hit1);
    CHECK(hit1 < up1);
    CHECK(lo2 < hit2);
    CHECK(hit2 < up2);

    // Monte Carlo estimate agrees with the fixed point and the bounds
    Rng rng(515);
    const double n = 100000;
    double hits = 0.0;
    for (int i = 0; i < n; ++i) {
        const Forest tree = sample_bmc(model, 1, rng);
        if (occupation_of(tree, model).values[0] > 0.0) hits += 1.0;
    }
    const double freq = hits / n;
    CHECK(std::abs(freq - hit1) <= freq_band3(hit1, n));
    CHECK(freq - freq_band3(hit1, n) > lo1);
    CHECK(freq + freq_band3(hit1, n) < up1);

    // a root inside the region hits it trivially
    for (int i = 0; i < 100; ++i) {
        const Forest tree = sample_bmc(model, 0, rng);
        CHECK(occupation_of(tree, model).values[0] > 0.0);
    }
}

TEST_CASE("criteria report shape and gates") {
    const Model model = chain_model();
    const DecorabilityReport report = criteria_report(model, {0});
    CHECK(report.truncation == 500);
    REQUIRE(report.criteria.size() == 5);
    CHECK(report.criteria[0].name == "translation-invariant");
    CHECK(report.criteria[1].name == "symmetry");
    CHECK(report.criteria[2].name == "supremum-series");
    CHECK(report.criteria[3].name == "return-series");
    CHECK(report.criteria[4].name == "constant");

    // multi-state models are not auto-declared translation invariant
    CHECK_FALSE(row_named(report, "translation-invariant").applicable);
    CHECK(row_named(report, "translation-invariant").verdict.empty());

    // the chain kernel is asymmetric, gating both series off
    CHECK(row_named(report, "symmetry").applicable);
    CHECK(row_named(report, "symmetry").verdict == "asymmetric");
    CHECK(row_named(report, "symmetry").value ==
          doctest::Approx(0.4).epsilon(1e-15));
    CHECK_FALSE(row_named(report, "supremum-series").applicable);
    CHECK(row_named(report, "supremum-series").verdict.empty());
    CHECK_FALSE(row_named(report, "return-series").applicable);

    CHECK(row_named(report, "constant").verdict == "finite");
    CHECK(report.constant == decorability_constant(model, {0}));
    CHECK(row_named(report, "constant").value == report.constant);

    REQUIRE(report.bounds.size() == 3);
    for (StateIndex x = 0; x < 3; ++x) {
        const auto direct = hit_probability_bounds(model, {0}, x);
        CHECK(report.bounds[x].first == direct.first);
        CHECK(report.bounds[x].second == direct.second);
        CHECK(report.bounds[x].first <= report.bounds[x].second);
    }

    // declaring invariance turns the subcritical test on
    const DecorabilityReport declared =
        criteria_report(model, {0}, 500, true);
    CHECK(row_named(declared, "translation-invariant").applicable);
    CHECK(row_named(declared, "translation-invariant").verdict == "decorable");
    CHECK(row_named(declared, "translation-invariant").value ==
          doctest::Approx(0.8).epsilon(1e-15));

    // non-uniform means make the declared test inconclusive
    Eigen::MatrixXd swap(2, 2);
    swap << 0, 1, 1, 0;
    const Model uneven = Model::build(
        {"a", "b"}, swap,
        {law({{0, 0.2}, {1, 0.8}}), law({{0, 0.5}, {1, 0.5}})});
    CHECK(row_named(criteria_report(uneven, {0}, 500, true),
                    "translation-invariant")
              .verdict == "inconclusive");

    CHECK_THROWS_AS(criteria_report(model, {0}, 0), DimensionMismatch);
    CHECK_THROWS_AS(criteria_report(model, StateSet{}), NotNormingRegion);
    CHECK_THROWS_AS(criteria_report(model, {0}, 500, std::nullopt, 9),
                    UnknownState);
}

TEST_CASE("series diagnostics on loop models") {
    // subcritical loop: both series sum to m/(1-m)^2 = 20
    const DecorabilityReport sub = criteria_report(subcritical_loop_model(), {0});
    CHECK(row_named(sub, "translation-invariant").applicable); // single state
    CHECK(row_named(sub, "translation-invariant").verdict == "decorable");
    CHECK(row_named(sub, "symmetry").verdict == "symmetric");
    CHECK(row_named(sub, "supremum-series").verdict == "convergent");
    CHECK(row_named(sub, "supremum-series").value ==
          doctest::Approx(20.0).epsilon(1e-10));
    CHECK(row_named(sub, "return-series").verdict == "convergent");
    CHECK(row_named(sub, "return-series").value ==
          doctest::Approx(20.0).epsilon(1e-10));
    CHECK(row_named(sub, "constant").value == 0.0); // whole-space region
    CHECK(sub.bounds[0].first == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sub.bounds[0].second == 1.0);

    // critical loop: terms k * 1 grow, so the partial sums diverge
    const DecorabilityReport crit = criteria_report(critical_loop_model(), {0});
    CHECK(row_named(crit, "translation-invariant").verdict == "inconclusive");
    CHECK(row_named(crit, "supremum-series").verdict == "divergent");
    CHECK(row_named(crit, "supremum-series").value == 125250.0); // sum k<=500
    CHECK(row_named(crit, "return-series").verdict == "divergent");
    CHECK(row_named(crit, "return-series").value == 125250.0);
    CHECK(row_named(crit, "constant").verdict == "finite");
    CHECK(crit.constant == 0.0);

    // a single term gives no ratio to extrapolate from
    const DecorabilityReport tiny = criteria_report(subcritical_loop_model(), {0}, 1);
    CHECK(tiny.truncation == 1);
    CHECK(row_named(tiny, "supremum-series").verdict == "inconclusive");
    CHECK(row_named(tiny, "supremum-series").value ==
          doctest::Approx(0.8).epsilon(1e-15));

    const DecorabilityReport three = criteria_report(critical_loop_model(), {0}, 3);
    CHECK(row_named(three, "supremum-series").value == 6.0);
    CHECK(row_named(three, "supremum-series").verdict == "divergent");

    // divergent Green's function with positive surplus: reported, not thrown
    const DecorabilityReport heavy = criteria_report(divergent_feeder_model(), {0});
    CHECK(std::isinf(heavy.constant));
    CHECK(row_named(heavy, "constant").verdict == "divergent");
    CHECK(heavy.bounds[1].first == 0.0);
    CHECK(heavy.bounds[1].second == 1.0); // h(1) = 11 capped at one
}

TEST_CASE("subcritical scaling family stays convergent") {
    Eigen::MatrixXd p(1, 1);
    p << 1;
    for (int i = 1; i <= 9; ++i) {
        const double beta = i / 10.0;
        const Model scaled =
            Model::build({"0"}, p, {law({{0, 1.0 - beta / 2.0}, {2, beta / 2.0}})});
        const DecorabilityReport report = criteria_report(scaled, {0});
        const double closed = beta / ((1.0 - beta) * (1.0 - beta));
        CHECK(row_named(report, "return-series").verdict == "convergent");
        CHECK(row_named(report, "return-series").value ==
              doctest::Approx(closed).epsilon(1e-9));
        CHECK(row_named(report, "supremum-series").verdict == "convergent");
        CHECK(row_named(report, "supremum-series").value ==
              doctest::Approx(closed).epsilon(1e-9));
    }
}

TEST_CASE("symmetric reference state choice") {
    Eigen::MatrixXd swap(2, 2);
    swap << 0, 1, 1, 0;
    const OffspringLaw d = law({{0, 0.6}, {2, 0.4}});
    const Model pair = Model::build({"a", "b"}, swap, {d, d});
    const DecorabilityReport at_a = criteria_report(pair, {0});
    const DecorabilityReport at_b = criteria_report(pair, {0}, 500, std::nullopt, 1);
    CHECK(row_named(at_a, "symmetry").verdict == "symmetric");
    CHECK(row_named(at_a, "supremum-series").value ==
          doctest::Approx(20.0).epsilon(1e-10));
    CHECK(row_named(at_a, "supremum-series").value ==
          row_named(at_b, "supremum-series").value);
    CHECK(row_named(at_a, "return-series").value ==
          row_named(at_b, "return-series").value);
}

TEST_CASE("report writers") {
    const Model model = chain_model();
    const DecorabilityReport report = criteria_report(model, {0});

    std::ostringstream text;
    write_decorability_report(text, report, model);
    const std::string body = text.str();
    CHECK(body.rfind("decorability report (truncation 500)\n", 0) == 0);
    CHECK(body.find("constant: 3.1535") != std::string::npos);
    CHECK(body.find("state 1: hit probability in [") != std::string::npos);
    CHECK(body.find("criterion symmetry: asymmetric") != std::string::npos);
    CHECK(body.find("criterion supremum-series: inapplicable") !=
          std::string::npos);

    std::ostringstream csv;
    write_criteria_csv(csv, report);
    const std::string rows = csv.str();
    CHECK(rows.rfind("criterion,applicable,verdict,value\n", 0) == 0);
    CHECK(std::count(rows.begin(), rows.end(), '\n') == 6);
    CHECK(rows.find("translation-invariant,no,,") != std::string::npos);
    CHECK(rows.find("symmetry,yes,asymmetric,0.4") != std::string::npos);
    CHECK(rows.find("constant,yes,finite,3.1535") != std::string::npos);

    std::ostringstream inf_csv;
    write_criteria_csv(inf_csv, criteria_report(divergent_feeder_model(), {0}));
    CHECK(inf_csv.str().find("constant,yes,divergent,inf") !=
          std::string::npos);
}

TEST_CASE("advisory wiring") {
    const Model model = chain_model();
    const std::string note = decorability_advisory(model, {0});
    CHECK(note.find("constant 3.15359") != std::string::npos);
    CHECK(note.find("certified decorable") != std::string::npos);

    CHECK(decorability_advisory(divergent_feeder_model(), {0}) ==
          "decorability: constant divergent (not certified)");
    CHECK(decorability_advisory(single_child_chain_model(), {0}).find(
              "certified decorable") != std::string::npos);

    Eigen::MatrixXd swap(2, 2);
    swap << 0, 1, 1, 0;
    const Model barren = Model::build(
        {"0", "1"}, swap, {law({{0, 0.6}, {2, 0.4}}), law({{0, 1.0}})});
    CHECK(decorability_advisory(barren, {0}) ==
          "decorability: inapplicable (zero-mean offspring)");

    Eigen::MatrixXd split(2, 2);
    split << 1, 0, 0, 1;
    const OffspringLaw d = law({{0, 0.6}, {2, 0.4}});
    const Model isolated = Model::build({"0", "1"}, split, {d, d});
    CHECK(decorability_advisory(isolated, {0}) ==
          "decorability: inapplicable (region not norming)");

    // samplers attach the note, and reading a sample file re-derives it
    const Measure g0{model.green().row(0).transpose()};
    const InterlacementSample sample =
        sample_branching_interlacement(g0, model, {0}, 0.0, 1);
    CHECK(sample.advisory == note);
    std::ostringstream out;
    write_interlacement_sample(out, sample, model);
    std::istringstream in(out.str());
    CHECK(read_interlacement_sample(in, model).advisory == note);
}

} // TEST_SUITE
