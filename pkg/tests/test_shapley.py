import math
import statistics
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_icc.shapley import (
    CoalitionFn,
    PrefixMismatch,
    ShapleyConfig,
    TooManyPlayers,
    shapley,
    shapley_exact,
    shapley_permutation,
    shapley_weight,
    zero_player_check,
)
from oracles import brute_force_shapley


def additive(w):
    return CoalitionFn(len(w), lambda S: sum(w[i] for i in S))


def glove():
    return CoalitionFn(2, lambda S: 1.0 if len(S) == 2 else 0.0)


@st.composite
def random_games(draw, max_n=6):
    n = draw(st.integers(1, max_n))
    table = draw(st.lists(st.floats(-10, 10), min_size=1 << n, max_size=1 << n))
    return n, lambda S: table[sum(1 << i for i in S)]


def test_additive_exact():
    assert shapley_exact(additive([1, 2, 3])).values == pytest.approx((1, 2, 3), abs=1e-12)


def test_symmetric_exact():
    assert shapley_exact(CoalitionFn(4, len)).values == pytest.approx((1, 1, 1, 1), abs=1e-12)


def test_glove_exact():
    assert shapley_exact(glove()).values == pytest.approx((0.5, 0.5), abs=1e-12)


def test_exact_cap():
    with pytest.raises(TooManyPlayers):
        shapley_exact(CoalitionFn(13, len))
    assert len(shapley_exact(CoalitionFn(13, len), cap=13).values) == 13


def test_empty_game():
    assert shapley_exact(CoalitionFn(0, len)).values == ()


def test_weights_sum_over_coalitions():
    for n in (1, 5, 21, 30):
        total = sum(math.comb(n - 1, s) * shapley_weight(n, s) for s in range(n))
        assert total == pytest.approx(1.0, rel=1e-12)


def test_additive_permutation_is_exact():
    res = shapley_permutation(additive([1, 2, 3]), 7, seed=5)
    assert res.values == pytest.approx((1, 2, 3), abs=1e-12)
    assert res.method == "permutation" and res.permutations == 7 and res.seed == 5


def test_glove_permutation():
    res = shapley_permutation(glove(), 2000, seed=0)
    assert res.values == pytest.approx((0.5, 0.5), abs=0.05)


def test_single_permutation_is_efficient():
    fn = CoalitionFn(5, lambda S: len(S) ** 2 + (3 in S))
    res = shapley_permutation(fn, 1, seed=3)
    assert math.fsum(res.values) == pytest.approx(fn(range(5)) - fn([]), abs=1e-12)


def test_permutation_determinism():
    a = shapley_permutation(CoalitionFn(5, lambda S: max(S, default=0) ** 1.5), 50, seed=9)
    b = shapley_permutation(CoalitionFn(5, lambda S: max(S, default=0) ** 1.5), 50, seed=9)
    assert a.values == b.values


def test_config_dispatch():
    assert shapley(glove(), ShapleyConfig()).method == "exact"
    assert shapley(glove(), ShapleyConfig("permutation", permutations=10)).method == "permutation"
    with pytest.raises(ValueError):
        ShapleyConfig("banzhaf")


def test_cache_counts_each_coalition_once():
    calls = []
    fn = CoalitionFn(4, lambda S: calls.append(S) or len(S))
    shapley_exact(fn)
    shapley_permutation(fn, 100, seed=1)
    assert len(calls) == 16 == fn.evaluations == fn.cache_size


def test_threaded_prefetch_matches_serial():
    lock = threading.Lock()
    seen = []

    def nu(S):
        with lock:
            seen.append(S)
        return sum((i + 1) ** 2 for i in S) * (1 + len(S) % 3)

    serial = shapley_exact(CoalitionFn(7, nu))
    threaded = shapley_exact(CoalitionFn(7, nu, threads=4))
    assert serial.values == threaded.values


@given(random_games())
def test_exact_matches_permutation_average(game):
    n, nu = game
    res = shapley_exact(CoalitionFn(n, nu))
    assert res.values == pytest.approx(brute_force_shapley(n, nu), abs=1e-9)
    assert math.fsum(res.values) == pytest.approx(nu(frozenset(range(n))) - nu(frozenset()), abs=1e-9)


@given(st.integers(2, 8), st.lists(st.floats(-5, 5), min_size=9, max_size=9))
def test_efficiency_and_symmetry(n, by_size):
    # nu depends only on |S|, so all players are interchangeable.
    res = shapley_exact(CoalitionFn(n, lambda S: by_size[len(S)]))
    assert math.fsum(res.values) == pytest.approx(by_size[n] - by_size[0], abs=1e-9)
    assert max(res.values) - min(res.values) <= 1e-9


@given(random_games(max_n=5), st.integers(1, 3))
def test_null_players_get_zero(game, extra):
    n, nu = game
    base = CoalitionFn(n, nu)
    ext = CoalitionFn(n + extra, lambda S: nu(frozenset(i for i in S if i < n)))
    assert zero_player_check(base, ext)
    assert all(abs(v) <= 1e-9 for v in shapley_exact(ext).values[n:])


def test_glove_plus_dummy():
    ext = CoalitionFn(3, lambda S: 1.0 if {0, 1} <= S else 0.0)
    assert zero_player_check(glove(), ext)
    assert shapley_exact(ext).values[2] == 0


def test_additive_plus_two_dummies():
    w = [1.0, 2.0, 3.0]
    ext = CoalitionFn(5, lambda S: sum(w[i] for i in S if i < 3))
    assert zero_player_check(additive(w), ext)


def test_dummy_with_worth_is_rejected():
    ext = CoalitionFn(3, lambda S: (1.0 if {0, 1} <= S else 0.0) + (2 in S))
    with pytest.raises(PrefixMismatch):
        zero_player_check(glove(), ext)


def test_permutation_estimator_is_unbiased():
    # Mean over independent seeds lands within 3 standard errors of the exact value.
    w = [0.3, 1.1, 0.2, 2.0, 0.7]
    nu = lambda S: max((w[i] for i in S), default=0.0) + 0.5 * len(S) ** 0.5  # noqa: E731
    exact = shapley_exact(CoalitionFn(5, nu)).values
    runs = [shapley_permutation(CoalitionFn(5, nu), 20, seed=s).values for s in range(200)]
    for i in range(5):
        col = [r[i] for r in runs]
        se = statistics.stdev(col) / math.sqrt(len(col))
        assert abs(statistics.fmean(col) - exact[i]) <= 3 * se + 1e-12


@settings(max_examples=20)
@given(random_games(max_n=5), st.integers(0, 1000))
def test_permutation_stderr_reported(game, seed):
    n, nu = game
    res = shapley_permutation(CoalitionFn(n, nu), 30, seed=seed)
    assert len(res.stderr) == n and all(s >= 0 for s in res.stderr)
    assert math.fsum(res.values) == pytest.approx(nu(frozenset(range(n))) - nu(frozenset()), abs=1e-9)
