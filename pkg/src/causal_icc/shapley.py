"""Shapley values of arbitrary coalition functions.

Players are ``0..n-1``; coalitions are passed to evaluators as frozensets
and cached by bitmask.
"""

from __future__ import annotations

import math
import threading
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._rng import derive_rng
from .errors import CausalIccError

EXACT_CAP = 12


class TooManyPlayers(CausalIccError):
    pass


class PrefixMismatch(CausalIccError):
    """An extended game does not reduce to the original on its first players."""


class CoalitionFn:
    """Set function ``nu`` over ``n`` players with a deterministic memo.

    Args:
        n: Number of players.
        evaluator: Maps a frozenset of player indices to a real worth.
        threads: Upper bound on concurrent evaluations in ``prefetch``.
    """

    def __init__(self, n: int, evaluator: Callable[[frozenset[int]], float], threads: int = 1):
        if n < 0:
            raise ValueError("player count must be nonnegative")
        self.n = n
        self.evaluator = evaluator
        self.threads = max(1, int(threads))
        self._cache: dict[int, float] = {}
        self._lock = threading.Lock()
        self.evaluations = 0

    def _members(self, mask: int) -> frozenset[int]:
        return frozenset(i for i in range(self.n) if mask >> i & 1)

    def value_mask(self, mask: int) -> float:
        hit = self._cache.get(mask)
        if hit is not None:
            return hit
        v = float(self.evaluator(self._members(mask)))
        with self._lock:
            if mask not in self._cache:
                self._cache[mask] = v
                self.evaluations += 1
        return self._cache[mask]

    def __call__(self, coalition: Iterable[int]) -> float:
        mask = 0
        for i in coalition:
            if not 0 <= i < self.n:
                raise IndexError(f"player {i} out of range")
            mask |= 1 << i
        return self.value_mask(mask)

    def prefetch(self, masks: Iterable[int]) -> None:
        todo = [m for m in masks if m not in self._cache]
        if self.threads == 1 or len(todo) < 2:
            for m in todo:
                self.value_mask(m)
            return
        with ThreadPoolExecutor(self.threads) as pool:
            list(pool.map(self.value_mask, todo))

    @property
    def cache_size(self) -> int:
        return len(self._cache)


@dataclass(frozen=True)
class ShapleyResult:
    values: tuple[float, ...]
    method: str
    evaluations_used: int
    permutations: int | None = None
    seed: int | None = None
    stderr: tuple[float, ...] | None = None

    def __getitem__(self, i: int) -> float:
        return self.values[i]


@dataclass(frozen=True)
class ShapleyConfig:
    method: str = "exact"
    permutations: int = 2000
    seed: int = 0
    exact_cap: int = EXACT_CAP
    threads: int = 1

    def __post_init__(self):
        if self.method not in ("exact", "permutation"):
            raise ValueError(f"unknown Shapley method {self.method!r}")
        if self.method == "permutation" and self.permutations < 1:
            raise ValueError("permutations must be >= 1")


def shapley_weight(n: int, s: int) -> float:
    """``s! (n - s - 1)! / n!``."""
    if n > 20:
        return math.exp(math.lgamma(s + 1) + math.lgamma(n - s) - math.lgamma(n + 1))
    return math.factorial(s) * math.factorial(n - s - 1) / math.factorial(n)


def shapley_exact(fn: CoalitionFn, cap: int = EXACT_CAP) -> ShapleyResult:
    """Shapley values by enumerating all ``2^n`` coalitions."""
    n = fn.n
    if n > cap:
        raise TooManyPlayers(f"{n} players exceed the exact cap {cap}")
    fn.prefetch(range(1 << n))
    worth = [fn.value_mask(m) for m in range(1 << n)]
    weights = [shapley_weight(n, s) for s in range(n)]
    values = []
    for i in range(n):
        bit = 1 << i
        terms = [weights[m.bit_count()] * (worth[m | bit] - worth[m]) for m in range(1 << n) if not m & bit]
        values.append(math.fsum(terms))
    return ShapleyResult(tuple(values), "exact", fn.evaluations)


def shapley_permutation(fn: CoalitionFn, permutations: int, seed: int) -> ShapleyResult:
    """Average marginal contributions over uniformly sampled orderings."""
    if permutations < 1:
        raise ValueError("permutations must be >= 1")
    n = fn.n
    rng = derive_rng(seed, "shapley-permutation")
    orders = [rng.permutation(n).tolist() for _ in range(permutations)]
    masks = set()
    for order in orders:
        m = 0
        masks.add(m)
        for i in order:
            m |= 1 << i
            masks.add(m)
    fn.prefetch(sorted(masks))
    contrib = np.zeros((permutations, n))
    for k, order in enumerate(orders):
        m = 0
        prev = fn.value_mask(0)
        for i in order:
            m |= 1 << i
            cur = fn.value_mask(m)
            contrib[k, i] = cur - prev
            prev = cur
    values = tuple(math.fsum(contrib[:, i].tolist()) / permutations for i in range(n))
    if permutations > 1:
        stderr = tuple((contrib.std(axis=0, ddof=1) / math.sqrt(permutations)).tolist())
    else:
        stderr = (math.inf,) * n
    return ShapleyResult(values, "permutation", fn.evaluations, permutations, seed, stderr)


def zero_player_check(fn: CoalitionFn, extended_fn: CoalitionFn, tol: float = 1e-9, spot: int = 256, seed: int = 0) -> bool:
    """Check that appending null players leaves the original values unchanged.

    ``extended_fn`` must satisfy ``nu_ext(S) = nu(S & first n players)``;
    this is spot-checked (exhaustively for small games) and a violation
    raises ``PrefixMismatch``.
    """
    n, m = fn.n, extended_fn.n
    if m < n:
        raise PrefixMismatch("extended game has fewer players")
    low = (1 << n) - 1
    if m <= 10:
        masks: Iterable[int] = range(1 << m)
    else:
        rng = derive_rng(seed, "zero-player-spot")
        masks = [int(x) for x in rng.integers(0, 1 << m, size=spot, dtype=np.uint64)]
    for mask in masks:
        if abs(extended_fn.value_mask(mask) - fn.value_mask(mask & low)) > tol:
            raise PrefixMismatch(f"coalition mask {mask:#x} disagrees with the original game")
    base = shapley_exact(fn, cap=max(n, EXACT_CAP))
    ext = shapley_exact(extended_fn, cap=max(m, EXACT_CAP))
    same = all(abs(a - b) <= tol for a, b in zip(base.values, ext.values[:n]))
    return same and all(abs(v) <= tol for v in ext.values[n:])


def shapley(fn: CoalitionFn, cfg: ShapleyConfig | None = None) -> ShapleyResult:
    cfg = cfg or ShapleyConfig()
    if cfg.method == "exact":
        return shapley_exact(fn, cfg.exact_cap)
    return shapley_permutation(fn, cfg.permutations, cfg.seed)

