import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_icc.errors import BadDistribution, ContinuousEntropyUnsupported, NotFinite
from causal_icc.model import Categorical, build_fcm, point_mass
from causal_icc.random_models import random_enumerable_fcm
from causal_icc.uncertainty import (
    EstimatorConfig,
    Measure,
    SupportMismatch,
    conditional_psi,
    conditional_psi_estimate,
    mutual_information,
    psi_from_joint,
    relative_entropy,
)
from oracles import brute_psi, conditional_mutual_info, mutual_info, observational_joint

MC = EstimatorConfig("monte_carlo", outer_samples=4000, inner_samples=4000, seed=11)


def _subsets(nodes):
    return itertools.chain.from_iterable(itertools.combinations(nodes, r) for r in range(len(nodes) + 1))


def test_xor_entropies(xor):
    assert conditional_psi(xor, "entropy", set()) == pytest.approx(1.0, abs=1e-12)
    assert conditional_psi(xor, "entropy", {"X"}) == pytest.approx(1.0, abs=1e-12)
    assert conditional_psi(xor, "entropy", {"X", "Y"}) == 0.0


def test_calibration_is_exact_zero():
    fcm = build_fcm(
        [("A", [], "n", Categorical([0, 1, 2], [0.2, 0.3, 0.5])), ("B", ["A"], "pa.A * 0.1 + n", Categorical([0, 1], [0.3, 0.7]))],
        "B",
    )
    for m in Measure:
        assert conditional_psi(fcm, m, fcm.nodes) == 0.0


def test_gauss_variance_closed_form(gauss_chain):
    # Var(N_X + N_Z) with unit variances.
    est = conditional_psi_estimate(gauss_chain, "variance", {"Y"}, MC)
    assert abs(est.value - 2.0) <= 0.02 * 2.0
    assert est.stderr > 0
    assert conditional_psi_estimate(gauss_chain, "variance", gauss_chain.nodes, MC).value == 0.0


def test_gauss_rejections(gauss_chain):
    with pytest.raises(NotFinite):
        conditional_psi(gauss_chain, "variance", set())
    with pytest.raises(ContinuousEntropyUnsupported):
        conditional_psi(gauss_chain, "entropy", set(), MC)


def test_unknown_node(xor):
    with pytest.raises(KeyError):
        conditional_psi(xor, "entropy", {"Q"})


def test_estimator_config_checks():
    with pytest.raises(ValueError):
        EstimatorConfig("bootstrap")
    with pytest.raises(ValueError):
        EstimatorConfig("monte_carlo", outer_samples=0)


def test_degenerate_target_is_zero():
    fcm = build_fcm([("A", [], "n", point_mass(4))], "A")
    assert conditional_psi(fcm, "entropy", set()) == 0.0
    assert conditional_psi(fcm, "variance", set(), MC) == 0.0


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["entropy", "variance"]))
def test_exact_psi_matches_oracle_and_is_monotone(seed, measure):
    fcm = random_enumerable_fcm(np.random.default_rng(seed))
    values = {}
    for T in _subsets(fcm.nodes):
        values[frozenset(T)] = conditional_psi(fcm, measure, T)
        assert values[frozenset(T)] == pytest.approx(brute_psi(fcm, measure, T), abs=1e-9)
        assert values[frozenset(T)] >= 0
    for T, v in values.items():
        for j in fcm.nodes:
            assert v - values[T | {j}] >= -1e-9


@pytest.mark.parametrize("name", ["xor", "noisy-chain", "train-delay", "document-chain"])
def test_mc_entropy_within_tolerance(name):
    from causal_icc import load_example

    fcm = load_example(name)
    for T in (set(), {fcm.nodes[0]}):
        exact = conditional_psi(fcm, "entropy", T)
        assert abs(conditional_psi(fcm, "entropy", T, MC) - exact) <= 0.02


def test_mc_is_seeded(xor):
    assert conditional_psi(xor, "entropy", {"X"}, MC) == conditional_psi(xor, "entropy", {"X"}, MC)


# -- dictionary helpers ---------------------------------------------------------


def test_mutual_information_examples():
    assert mutual_information({(a, b): 0.25 for a in (0, 1) for b in (0, 1)}) == 0.0
    assert mutual_information({(0, 0): 0.5, (1, 1): 0.5}) == pytest.approx(1.0)
    triples = {(a, a ^ b, b): 0.25 for a in (0, 1) for b in (0, 1)}
    assert mutual_information({(a, c): p for (a, c, _), p in triples.items()}) == pytest.approx(0.0, abs=1e-12)
    assert mutual_information(triples) == pytest.approx(1.0)


def test_mutual_information_rejects_bad_input():
    with pytest.raises(BadDistribution):
        mutual_information({(0, 0): 0.5})
    with pytest.raises(BadDistribution):
        mutual_information({(0, 0): 1.5, (1, 1): -0.5})


@settings(max_examples=40)
@given(st.lists(st.floats(0.01, 1.0), min_size=8, max_size=8))
def test_mutual_information_identity(weights):
    total = sum(weights)
    keys = list(itertools.product((0, 1), (0, 1, 2, 3)))
    joint = {k: w / total for k, w in zip(keys, weights)}
    h = lambda d: -sum(p * math.log2(p) for p in d.values() if p > 0)  # noqa: E731
    pa = {a: sum(joint[(a, b)] for b in range(4)) for a in (0, 1)}
    pb = {b: sum(joint[(a, b)] for a in (0, 1)) for b in range(4)}
    mi = mutual_information(joint)
    assert mi >= 0
    assert mi == pytest.approx(h(pa) + h(pb) - h(joint), abs=1e-9)
    assert mi == pytest.approx(mutual_info(joint), abs=1e-9)


@settings(max_examples=40)
@given(st.lists(st.floats(0.01, 1.0), min_size=12, max_size=12))
def test_conditional_mutual_information_matches_oracle(weights):
    total = sum(weights)
    keys = list(itertools.product((0, 1), (0, 1, 2), (0, 1)))
    joint = {k: w / total for k, w in zip(keys, weights)}
    assert mutual_information(joint) == pytest.approx(conditional_mutual_info(joint), abs=1e-9)


def test_relative_entropy_examples():
    p = {0: 0.3, 1: 0.7}
    assert relative_entropy(p, p) == 0.0
    assert relative_entropy({0: 1.0}, {0: 0.5, 1: 0.5}) == pytest.approx(1.0)
    assert relative_entropy({0: 0.5, 1: 0.5}, {0: 1.0}) == math.inf
    with pytest.raises(SupportMismatch):
        relative_entropy({0: 0.5, 1: 0.5}, {0: 1.0}, strict=True)


def test_copy_model_divergence_equals_mutual_information():
    fcm = build_fcm(
        [("X", [], "n", Categorical([0, 1, 2], [0.2, 0.3, 0.5])), ("Y", ["X"], "pa.X", point_mass())], "Y"
    )
    joint = observational_joint(fcm)
    px = {x: sum(p for (a, _), p in joint.items() if a == x) for x in (0, 1, 2)}
    py = {y: sum(p for (_, b), p in joint.items() if b == y) for y in (0, 1, 2)}
    cut = {(x, y): px[x] * py[y] for x in px for y in py}
    assert relative_entropy(joint, cut) == pytest.approx(mutual_information(joint), abs=1e-12)
    assert relative_entropy(joint, cut) == pytest.approx(mutual_info(joint), abs=1e-12)


def test_psi_from_joint():
    joint = {(a, b): 0.25 for a in (0, 1) for b in (0, 1)}
    assert psi_from_joint(joint, "entropy", 0) == pytest.approx(1.0)
    assert psi_from_joint(joint, "variance", 0, [1]) == pytest.approx(0.25)
    assert psi_from_joint({(0, 0): 0.5, (1, 1): 0.5}, "entropy", 0, [1]) == 0.0


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_psi_never_negative_under_conditioning(seed):
    fcm = random_enumerable_fcm(np.random.default_rng(seed), n_max=4)
    for T in _subsets(fcm.nodes):
        assert conditional_psi(fcm, "variance", T) >= 0.0
