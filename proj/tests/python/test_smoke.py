"""Smoke tests for the python bindings: one pass over every exported surface,
checking a handful of exact values against the C++ unit tests' oracles."""

import numpy as np
import pytest

import spinney


def test_load_and_exact_operators(chain):
    assert chain.states == ["0", "1", "2"]
    assert len(chain) == 3
    assert chain.default_region == ["0"]
    assert chain.spectral_radius() == pytest.approx(0.8, abs=1e-12)

    g = chain.green()
    assert g[0, 0] == pytest.approx(17 / 9, abs=1e-12)
    assert g[1, 1] == pytest.approx(25 / 9, abs=1e-12)

    # (I - Q) G = I
    q = chain.intensity
    assert np.max(np.abs((np.eye(3) - q) @ g - np.eye(3))) < 1e-12

    law = chain.offspring_law("1")
    assert law == {0: pytest.approx(0.6), 2: pytest.approx(0.4)}


def test_model_build_and_round_trip(chain, tmp_path):
    built = spinney.Model.build(
        states=["0", "1", "2"],
        motion=np.array([[0, 1, 0], [0.5, 0, 0.5], [0, 1, 0]]),
        offspring=[{0: 0.6, 2: 0.4}] * 3,
    )
    assert np.allclose(built.green(), chain.green())

    text = spinney.model_text(chain)
    assert "states 0 1 2" in text
    path = tmp_path / "round.model"
    path.write_text(text)
    again = spinney.load_model(str(path))
    assert again.states == chain.states
    assert np.allclose(again.motion, chain.motion)
    assert again.default_region == chain.default_region


def test_h_and_potential_identities(chain):
    h = spinney.h_function(chain)  # default region {0}
    assert h[0] == pytest.approx(1.0, abs=1e-12)
    assert h[1] == pytest.approx(10 / 17, abs=1e-12)
    assert h[2] == pytest.approx(8 / 17, abs=1e-12)

    nu = chain.green()[0]
    ok, slack = spinney.is_excessive(nu, chain)
    assert ok and slack <= 1e-12

    charge, invariant = spinney.riesz_decomposition(nu, chain)
    assert charge == pytest.approx([1.0, 0.0, 0.0], abs=1e-10)
    assert np.max(np.abs(invariant)) < 1e-10

    # excessive -> occupation -> excessive round trip off the region
    mu = spinney.excessive_to_occupation(nu, chain, ["0"])
    back = spinney.occupation_to_excessive(mu, chain, ["0"])
    assert np.max(np.abs(back - nu)) < 1e-9

    bar = spinney.entrance_measure(nu, chain, ["0"])
    assert bar[0] == pytest.approx(1.0, abs=1e-10)  # nu = g(0,.) enters at 0
    assert bar[1] == bar[2] == 0.0

    t = spinney.taboo_return_kernel(chain, ["0"])
    assert t[0, 0] == pytest.approx(8 / 17, abs=1e-12)


def test_sampling_is_deterministic(chain):
    a = spinney.sample_forest(chain, "1", seed=42)
    b = spinney.sample_forest(chain, "1", seed=42)
    assert a.to_text(chain) == b.to_text(chain)
    assert len(a) == len(b)
    occ = a.occupation(chain)
    assert occ.sum() == len(a)

    c = spinney.sample_forest(chain, "1", seed=43)
    assert c.to_text(chain) != a.to_text(chain)

    round_trip = spinney.Forest.from_text(a.to_text(chain), chain)
    assert round_trip.to_text(chain) == a.to_text(chain)

    biased = spinney.sample_biased_forest(chain, ["0"], "1", seed=7)
    assert "b" in biased.to_text(chain)  # the blue line is marked

    states, end = spinney.sample_spine(chain, ["0"], "2", seed=7)
    assert end == "entered-region"
    assert states[0] == "2" and states[1] == "1" and states[-1] == "0"


def test_spine_identity_smoke(chain):
    exact, sampled = spinney.spine_identity_test(
        chain, ["0"], "1", depth=2, n=20000, seed=1
    )
    assert exact.passed and exact.statistic < 1e-9
    assert sampled.passed
    assert sampled.sample_size == 20000

    # corrupting h must break the sampled leg but not the exact one
    exact_c, sampled_c = spinney.spine_identity_test(
        chain, ["0"], "1", depth=2, n=20000, seed=1, corrupt_h_scale=1.5
    )
    assert exact_c.passed and not sampled_c.passed


def test_anchored_paths(chain):
    nu = chain.green()[1]
    sampler = spinney.AnchoredPathSampler(nu, chain, ["0"])
    assert sampler.entrance.sum() == pytest.approx(10 / 17, abs=1e-12)

    path = sampler.sample(seed=3)
    assert path.born
    assert chain.name_of(path.states[path.anchor]) == "0"

    chi2, two_sample = spinney.anchored_markov_test(
        nu, chain, ["0"], probe="1", n=20000, seed=3
    )
    assert chi2.passed and two_sample.passed


def test_interlacement_smoke(chain):
    nu = chain.green()[0]
    sample = spinney.sample_interlacement(nu, chain, ["0"], u=200.0, seed=9)
    assert sample.u == 200.0
    assert sample.intensity_mass == pytest.approx(1.0, abs=1e-10)
    assert sample.seed == 9
    assert "decorability" in sample.advisory
    assert len(sample.trees) > 100

    rows = sample.occupation_rows(chain)
    assert [r[0] for r in rows] == ["0", "1", "2"]
    state, empirical, target, z = rows[0]
    assert target == pytest.approx(17 / 9, abs=1e-12)
    assert abs(z) < 5  # loose: one smoke draw

    text = sample.to_text(chain)
    assert text.startswith("# interlacement")

    report = spinney.interlacement_occupation_test(
        chain, ["0"], nu, u=1.0, n_runs=5000, seed=11
    )
    assert report.passed and report.threshold == 4.0


def test_decorability(chain):
    c = spinney.decorability_constant(chain, ["0"])
    assert c == pytest.approx(3.1535947712418317, abs=1e-12)

    bounds = spinney.hit_probability_bounds(chain, ["0"])
    assert bounds[0][1] == pytest.approx(1.0)
    assert bounds[1][0] == pytest.approx(0.040250447227191406, abs=1e-12)

    assert "certified decorable" in spinney.decorability_advisory(chain, ["0"])

    report = spinney.criteria_report(chain, ["0"])
    by_name = {row.name: row for row in report.criteria}
    assert by_name["return-series"].verdict == "convergent"
    assert report.constant == pytest.approx(c)


def test_errors_map_to_python_exceptions(chain, data_dir):
    critical = spinney.load_model(str(data_dir / "zoo.model") + "#critical_loop")
    with pytest.raises(ArithmeticError):
        critical.green()

    with pytest.raises(ValueError):
        chain.index_of("9")
    with pytest.raises(ValueError):
        spinney.h_function(chain, ["nope"])
    with pytest.raises(ValueError):
        spinney.is_excessive(np.ones(2), chain)  # wrong length


def test_acceptance_smoke():
    ok, text = spinney.run_acceptance(scale=5000, stability_rounds=2)
    assert ok
    assert "acceptance: all 10 criteria passed" in text
    assert text.count("criterion") >= 10

    bad_ok, bad_text = spinney.run_acceptance(
        scale=5000, stability_rounds=2, corrupt_h_scale=1.5
    )
    assert not bad_ok
    assert "FAIL" in bad_text
