import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_icc import load_example
from causal_icc.icc import (
    IccRequest,
    InvalidAbstraction,
    TargetHasDescendants,
    all_plain_terms,
    compare_marginalization,
    icc_ordering,
    icc_plain,
    icc_shapley,
    icc_via_interventions,
    insert_copy_node,
    marginalize,
    run_icc,
)
from causal_icc.model import Bernoulli, Categorical, build_fcm, point_mass
from causal_icc.random_models import random_enumerable_fcm
from causal_icc.shapley import ShapleyConfig, TooManyPlayers
from causal_icc.uncertainty import EstimatorConfig
from oracles import brute_psi, brute_shapley_icc, observational_joint

MC = EstimatorConfig("monte_carlo", outer_samples=4000, inner_samples=4000, seed=3)


def h2(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def _model(seed, n_max=5):
    return random_enumerable_fcm(np.random.default_rng(seed), n_max=n_max)


# -- plain ICC ------------------------------------------------------------------


def test_plain_xor(xor):
    assert icc_plain(xor, "entropy", "X", set()) == pytest.approx(0.0, abs=1e-12)
    assert icc_plain(xor, "entropy", "X", {"Y"}) == pytest.approx(1.0, abs=1e-12)


def test_plain_gauss_mc(gauss_chain):
    assert icc_plain(gauss_chain, "variance", "Y", set(), MC) == pytest.approx(1.0, abs=0.06)


def test_plain_rejects_bad_sets(xor):
    with pytest.raises(ValueError):
        icc_plain(xor, "entropy", "X", {"X"})
    with pytest.raises(KeyError):
        icc_plain(xor, "entropy", "Q")


def test_target_with_descendants_rejected(copy_chain):
    with pytest.raises(TargetHasDescendants):
        icc_shapley(copy_chain.with_target("Y"))


def test_ordering_telescopes(xor):
    # N_Y alone says nothing about Y; X's noise then settles it.
    rep = icc_ordering(xor, "entropy", ["Y", "X"])
    assert rep.scores == {"X": pytest.approx(1.0), "Y": pytest.approx(0.0, abs=1e-12)}
    assert rep.efficiency_residual == pytest.approx(0.0, abs=1e-12)


def test_plain_mode_needs_ordering(xor):
    with pytest.raises(ValueError):
        IccRequest(xor, "entropy", "plain")
    with pytest.raises(ValueError):
        IccRequest(xor, "entropy", "plain", ("X",))
    rep = run_icc(IccRequest(xor, "entropy", "plain", ("X", "Y")))
    assert rep.scores["X"] == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["entropy", "variance"]))
def test_plain_terms_nonnegative_and_match_oracle(seed, measure):
    fcm = _model(seed)
    for (j, T), v in all_plain_terms(fcm, measure).items():
        assert v >= -1e-9
        assert v == pytest.approx(brute_psi(fcm, measure, T) - brute_psi(fcm, measure, set(T) | {j}), abs=1e-9)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.data())
def test_every_ordering_telescopes(seed, data):
    fcm = _model(seed)
    order = data.draw(st.permutations(fcm.nodes))
    rep = icc_ordering(fcm, "entropy", order)
    assert rep.efficiency_residual == pytest.approx(0.0, abs=1e-9)


# -- Shapley ICC ---------------------------------------------------------------


def test_xor_versus_independent(xor, independent_xor):
    assert observational_joint(xor) == observational_joint(independent_xor)
    a = icc_shapley(xor, "entropy")
    b = icc_shapley(independent_xor, "entropy")
    assert a.scores == {"X": pytest.approx(0.5, abs=1e-9), "Y": pytest.approx(0.5, abs=1e-9)}
    assert b.scores == {"X": pytest.approx(0.0, abs=1e-9), "Y": pytest.approx(1.0, abs=1e-9)}
    assert a.scores != b.scores


@pytest.mark.parametrize("measure", ["entropy", "variance"])
def test_copy_node_gets_zero(copy_chain, measure):
    assert icc_shapley(copy_chain, measure).scores["Y"] == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["entropy", "variance"]))
def test_shapley_matches_oracle_and_is_efficient(seed, measure):
    fcm = _model(seed)
    rep = icc_shapley(fcm, measure)
    oracle = brute_shapley_icc(fcm, measure)
    for n in fcm.nodes:
        assert rep.scores[n] == pytest.approx(oracle[n], abs=1e-9)
        assert rep.scores[n] >= 0
    assert rep.total == pytest.approx(brute_psi(fcm, measure, set()), abs=1e-9)
    assert abs(rep.efficiency_residual) <= 1e-9


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.data())
def test_copy_insertion_invariance(seed, data):
    fcm = _model(seed, n_max=4)
    edges = fcm.dag.edges()
    if not edges:
        return
    edge = data.draw(st.sampled_from(edges))
    bigger = insert_copy_node(fcm, edge)
    before = icc_shapley(fcm).scores
    after = icc_shapley(bigger).scores
    for n in fcm.nodes:
        assert after[n] == pytest.approx(before[n], abs=1e-9)
    assert after[f"{edge[0]}_to_{edge[1]}"] == pytest.approx(0.0, abs=1e-9)


def test_report_shape(xor):
    d = icc_shapley(xor).to_dict()
    assert d["units"] == "bits"
    assert d["method"]["shapley"]["method"] == "exact"
    assert d["seed"] is None
    assert set(d) == {"scores", "measure", "units", "total", "efficiency_residual", "method", "seed", "diagnostics"}


def test_permutation_shapley_close_to_exact():
    fcm = load_example("train-delay")
    exact = icc_shapley(fcm)
    approx = icc_shapley(fcm, shapley_cfg=ShapleyConfig("permutation", permutations=2000, seed=1))
    for n in fcm.nodes:
        assert abs(approx.scores[n] - exact.scores[n]) <= 0.02 * exact.total
    assert abs(approx.efficiency_residual) <= 1e-9


def test_mc_shapley_reports_tolerance(xor):
    rep = icc_shapley(xor, "entropy", MC)
    tol = rep.diagnostics["score_tolerance"]
    assert rep.seed == 3
    for n, v in rep.scores.items():
        assert abs(v - 0.5) <= max(tol[n], 0.02)
    assert abs(rep.efficiency_residual) <= rep.diagnostics["tolerance"] + 1e-9


def test_gauss_chain_variance_mc(gauss_chain):
    rep = icc_shapley(gauss_chain, "variance", MC)
    # Additive Gaussian noise: each unit-variance noise contributes 1.
    for n in gauss_chain.nodes:
        assert rep.scores[n] == pytest.approx(1.0, rel=0.05)


def test_too_many_players():
    rows = [(f"V{i}", [], "n", point_mass()) for i in range(13)]
    rows.append(("T", [f"V{i}" for i in range(13)], "n", Bernoulli(0.5)))
    with pytest.raises(TooManyPlayers):
        icc_shapley(build_fcm(rows, "T"))


def test_irrelevant_nodes_get_zero():
    fcm = build_fcm(
        [("A", [], "n", Bernoulli(0.3)), ("B", [], "n", Bernoulli(0.5)), ("C", ["A"], "pa.A xor n", Bernoulli(0.1))], "C"
    )
    assert icc_shapley(fcm).scores["B"] == 0.0


# -- interventional cross-check ------------------------------------------------


def test_interventions_on_xor(xor):
    assert icc_via_interventions(xor, "entropy", "X") == pytest.approx(0.0, abs=1e-12)
    assert icc_via_interventions(xor, "entropy", "X", {"Y"}) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["entropy", "variance"]))
def test_interventions_match_plain(seed, measure):
    fcm = _model(seed, n_max=4)
    terms = all_plain_terms(fcm, measure)
    for (j, T), v in terms.items():
        assert icc_via_interventions(fcm, measure, j, T) == pytest.approx(v, abs=1e-9)


# -- marginalization -----------------------------------------------------------


def test_hiding_copy_source(copy_chain):
    cmp = compare_marginalization(copy_chain, {"X"})
    assert cmp.original.scores["Y"] == pytest.approx(0.0, abs=1e-9)
    assert cmp.marginalized.scores["Y"] == pytest.approx(cmp.original.total, abs=1e-9)
    assert cmp.joint_tv == 0.0


def test_hiding_nothing(copy_chain):
    cmp = compare_marginalization(copy_chain, set())
    assert cmp.original.scores == cmp.marginalized.scores
    assert all(d == 0 for d in cmp.deltas.values())


def test_hiding_middle_of_noisy_chain():
    fcm = load_example("noisy-chain")
    cmp = compare_marginalization(fcm, {"Y"})
    # Hand-built two-node model with the folded noise N_Y xor N_Z ~ Bernoulli(0.26).
    flip = 0.2 * 0.9 + 0.8 * 0.1
    folded = build_fcm([("X", [], "n", Bernoulli(0.5)), ("Z", ["X"], "pa.X xor n", Bernoulli(flip))], "Z")
    assert cmp.marginalized.scores["X"] == pytest.approx(brute_shapley_icc(folded, "entropy")["X"], abs=1e-9)
    assert cmp.marginalized.scores["X"] == pytest.approx(0.5 * (2 - h2(flip)), abs=1e-9)
    assert cmp.original.scores["X"] == pytest.approx(brute_shapley_icc(fcm, "entropy")["X"], abs=1e-9)
    assert cmp.deltas["X"] > 0.01


def test_invalid_abstractions(copy_chain):
    with pytest.raises(InvalidAbstraction):
        marginalize(copy_chain, {"Z"})
    fork = build_fcm(
        [("H", [], "n", Bernoulli(0.5)), ("A", ["H"], "pa.H", point_mass()), ("B", ["H", "A"], "pa.H + pa.A", point_mass())],
        "B",
    )
    with pytest.raises(InvalidAbstraction):
        marginalize(fork, {"H"})


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_marginalized_joint_matches(seed):
    fcm = _model(seed)
    candidates = [n for n in fcm.nodes if n != fcm.target and len(fcm.dag.children(n)) == 1]
    if not candidates:
        return
    hidden = candidates[0]
    small = marginalize(fcm, {hidden})
    keep = [i for i, n in enumerate(fcm.nodes) if n != hidden]
    big = {}
    for k, p in observational_joint(fcm).items():
        key = tuple(k[i] for i in keep)
        big[key] = big.get(key, 0.0) + p
    small_joint = observational_joint(small)
    assert set(big) == set(small_joint)
    assert all(abs(big[k] - small_joint[k]) <= 1e-12 for k in big)


def test_two_hidden_ancestors_fold():
    fcm = build_fcm(
        [
            ("A", [], "n", Categorical([0, 1, 2], [0.2, 0.3, 0.5])),
            ("B", ["A"], "(pa.A + n) mod 3", Bernoulli(0.4)),
            ("C", ["B"], "pa.B * 2 + n", Bernoulli(0.5)),
        ],
        "C",
    )
    small = marginalize(fcm, {"A", "B"})
    assert small.nodes == ("C",)
    rep = icc_shapley(small)
    assert rep.scores["C"] == pytest.approx(brute_psi(fcm, "entropy", set()), abs=1e-9)


def test_plain_terms_cover_all_pairs(xor):
    terms = all_plain_terms(xor, "entropy")
    expected = {(j, T) for j in xor.nodes for r in range(2) for T in itertools.combinations(sorted(set(xor.nodes) - {j}), r)}
    assert set(terms) == expected
