"""Conditional uncertainty of a target given a set of noise terms.

Two measures are built in: Shannon entropy (bits) and variance.  Each has
an exact backend on the enumerated noise grid and a seeded Monte Carlo
backend (nested sampling: outer draws of the conditioning noises, inner
draws of the rest, plug-in estimate per outer draw, no bias correction).
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._rng import derive_rng
from .errors import BadDistribution, CausalIccError, ContinuousEntropyUnsupported, NonNumericTarget, NotFinite
from .expr import _is_num
from .law import ExactLaw, cached_law
from .model import DEFAULT_CAP, Fcm, draw_noise, simulate

CHUNK_ROWS = 1 << 20


class Measure(str, Enum):
    ENTROPY = "entropy"
    VARIANCE = "variance"

    @property
    def units(self) -> str:
        return "bits" if self is Measure.ENTROPY else "squared target units"


class SupportMismatch(CausalIccError, ValueError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    method: str = "exact"
    outer_samples: int = 4000
    inner_samples: int = 4000
    seed: int = 0
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.method not in ("exact", "monte_carlo"):
            raise ValueError(f"unknown estimator method {self.method!r}")
        if self.method == "monte_carlo" and (self.outer_samples < 1 or self.inner_samples < 1):
            raise ValueError("sample counts must be >= 1")


@dataclass(frozen=True)
class PsiEstimate:
    value: float
    stderr: float


def as_measure(m: Measure | str) -> Measure:
    return m if isinstance(m, Measure) else Measure(str(m).lower())


# -- Distributions given as dictionaries -----------------------------------


def _check_dist(p: Mapping, tol: float) -> None:
    vals = list(p.values())
    if any(v < 0 for v in vals):
        raise BadDistribution("negative probability")
    if abs(math.fsum(vals) - 1.0) > tol:
        raise BadDistribution(f"probabilities sum to {math.fsum(vals)!r}")


def entropy(probs: Iterable[float]) -> float:
    """Shannon entropy in bits of a probability vector."""
    return -math.fsum(p * math.log2(p) for p in probs if p > 0)


def _marg(joint: Mapping[tuple, float], pos: Sequence[int]) -> dict[tuple, float]:
    out: dict[tuple, float] = {}
    for k, w in joint.items():
        key = tuple(k[i] for i in pos)
        out[key] = out.get(key, 0.0) + w
    return out


def mutual_information(joint: Mapping[tuple, float], tol: float = 1e-12) -> float:
    """``I(A:B)`` for keys ``(a, b)``, or ``I(A:B|C)`` for keys ``(a, b, c)``, in bits."""
    _check_dist(joint, tol)
    if not joint:
        return 0.0
    arity = len(next(iter(joint)))
    if arity == 2:
        pa, pb = _marg(joint, [0]), _marg(joint, [1])
        terms = (w * math.log2(w / (pa[(k[0],)] * pb[(k[1],)])) for k, w in joint.items() if w > 0)
    elif arity == 3:
        pac, pbc, pc = _marg(joint, [0, 2]), _marg(joint, [1, 2]), _marg(joint, [2])
        terms = (
            w * math.log2(w * pc[(k[2],)] / (pac[(k[0], k[2])] * pbc[(k[1], k[2])]))
            for k, w in joint.items()
            if w > 0
        )
    else:
        raise ValueError("joint keys must be (a, b) or (a, b, c) tuples")
    value = math.fsum(terms)
    return 0.0 if value < 0 and value > -1e-12 else value


def relative_entropy(p: Mapping, q: Mapping, *, strict: bool = False, tol: float = 1e-12) -> float:
    """``D(p || q)`` in bits.

    Where ``p`` puts mass outside the support of ``q`` the divergence is
    ``inf``; with ``strict=True`` that raises ``SupportMismatch`` instead.
    """
    _check_dist(p, tol)
    _check_dist(q, tol)
    total = []
    for k, w in p.items():
        if w <= 0:
            continue
        qk = q.get(k, 0.0)
        if qk <= 0:
            if strict:
                raise SupportMismatch(f"q({k!r}) = 0 < p({k!r})")
            return math.inf
        total.append(w * math.log2(w / qk))
    value = math.fsum(total)
    return 0.0 if value < 0 and value > -1e-12 else value


def psi_from_joint(
    joint: Mapping[tuple, float], measure: Measure | str, target: int = 0, given: Sequence[int] = ()
) -> float:
    """``psi(key[target] | key[given])`` for a finite joint table."""
    measure = as_measure(measure)
    groups: dict[tuple, list[tuple[object, float]]] = {}
    for k, w in joint.items():
        if w > 0:
            groups.setdefault(tuple(k[i] for i in given), []).append((k[target], w))
    parts = []
    for rows in groups.values():
        if measure is Measure.ENTROPY:
            dist: dict[object, float] = {}
            for y, w in rows:
                dist[y] = dist.get(y, 0.0) + w
            pt = math.fsum(dist.values())
            parts.append(math.fsum(w * math.log2(pt / w) for w in dist.values()))
        else:
            ys = [y for y, _ in rows]
            if not all(_is_num(y) for y in ys):
                raise NonNumericTarget("variance needs a numeric target")
            if min(ys) == max(ys):
                continue
            pt = math.fsum(w for _, w in rows)
            mean = math.fsum(w * y for y, w in rows) / pt
            parts.append(math.fsum(w * (y - mean) ** 2 for y, w in rows))
    return math.fsum(parts)


# -- Exact grid backend ----------------------------------------------------


def _numeric_values(values: list) -> np.ndarray:
    if not all(_is_num(v) for v in values):
        raise NonNumericTarget("variance needs a numeric target")
    return np.asarray(values, dtype=np.float64)


def law_psi(law: ExactLaw, target: str, measure: Measure, given_axes: Sequence[str] = ()) -> float:
    """``psi(target | noise axes)`` on an exact law."""
    given_axes = [a for a in law.axes if a in set(given_axes)]
    if len(given_axes) == len(law.axes) or len(law.values[target]) == 1:
        return 0.0
    tidx, nt = law.axis_index(given_axes)
    tflat = tidx.ravel()
    p = law.probs.ravel()
    y = law.grid_codes(target).ravel()
    if measure is Measure.ENTROPY:
        m = len(law.values[target])
        joint = np.bincount(tflat * m + y, weights=p, minlength=nt * m).reshape(nt, m)
        pt = joint.sum(axis=1, keepdims=True)
        pos = joint > 0
        ratio = np.divide(np.broadcast_to(pt, joint.shape), joint, out=np.ones_like(joint), where=pos)
        return float(math.fsum((joint[pos] * np.log2(ratio[pos])).tolist()))
    yv = _numeric_values(law.values[target])[y]
    w = np.bincount(tflat, weights=p, minlength=nt)
    s1 = np.bincount(tflat, weights=p * yv, minlength=nt)
    gmax = np.full(nt, -np.inf)
    gmin = np.full(nt, np.inf)
    np.maximum.at(gmax, tflat, yv)
    np.minimum.at(gmin, tflat, yv)
    mean = np.where(gmax == gmin, gmax, s1 / np.where(w > 0, w, 1.0))
    dev = yv - mean[tflat]
    return float(math.fsum((p * dev * dev).tolist()))


# -- Monte Carlo backend ---------------------------------------------------

_DENSE_CODES = 4096  # integer targets spanning fewer values skip the sort


def _factorize(y: np.ndarray) -> tuple[np.ndarray, int]:
    if y.dtype.kind == "i" and len(y):
        lo, hi = int(y.min()), int(y.max())
        if hi - lo < _DENSE_CODES:
            return y - lo, hi - lo + 1
    if y.dtype.kind in "if":
        uniq, inv = np.unique(y, return_inverse=True)
        return inv.ravel(), len(uniq)
    table: dict = {}
    codes = np.fromiter((table.setdefault(v, len(table)) for v in y.tolist()), dtype=np.int64, count=len(y))
    return codes, len(table)


def _group_psi(y: np.ndarray, groups: int, inner: int, measure: Measure) -> np.ndarray:
    if measure is Measure.ENTROPY:
        codes, m = _factorize(y)
        counts = np.bincount(np.repeat(np.arange(groups), inner) * m + codes, minlength=groups * m)
        freq = counts.reshape(groups, m) / inner
        logs = np.log2(np.where(freq > 0, freq, 1.0))
        return -(freq * logs).sum(axis=1)
    if y.dtype.kind not in "if":
        if not all(_is_num(v) for v in y.tolist()):
            raise NonNumericTarget("variance needs a numeric target")
        y = y.astype(np.float64)
    rows = y.astype(np.float64).reshape(groups, inner)
    const = rows.max(axis=1) == rows.min(axis=1)
    var = rows.var(axis=1, ddof=1) if inner > 1 else np.zeros(groups)
    return np.where(const, 0.0, var)


def _mc_psi(fcm: Fcm, measure: Measure, given: Sequence[str], cfg: EstimatorConfig) -> PsiEstimate:
    nodes = fcm.relevant()
    given = [n for n in nodes if n in set(given)]
    if len(given) == len(nodes):
        return PsiEstimate(0.0, 0.0)
    outer, inner, seed = cfg.outer_samples, cfg.inner_samples, cfg.seed
    outer_noise = {n: draw_noise(fcm, n, outer, seed, purpose="psi-outer") for n in given}
    per_chunk = max(1, CHUNK_ROWS // inner)
    psis = []
    for c, start in enumerate(range(0, outer, per_chunk)):
        g = min(per_chunk, outer - start)
        noise = {}
        for n in nodes:
            if n in outer_noise:
                noise[n] = np.repeat(outer_noise[n][start : start + g], inner)
            else:
                noise[n] = fcm.noises[n].sample(derive_rng(seed, "psi-inner", n, c, per_chunk), g * inner)
        y = simulate(fcm, noise, nodes=nodes)[fcm.target]
        psis.append(_group_psi(y, g, inner, measure))
    vals = np.concatenate(psis)
    stderr = float(vals.std(ddof=1) / math.sqrt(outer)) if outer > 1 else math.inf
    return PsiEstimate(float(vals.mean()), stderr)


# -- Public entry points ---------------------------------------------------


def check_measure(fcm: Fcm, measure: Measure) -> None:
    if measure is Measure.ENTROPY and not fcm.finite_nodes()[fcm.target]:
        raise ContinuousEntropyUnsupported(
            f"target {fcm.target!r} may take infinitely many values; use variance"
        )


def conditional_psi_estimate(
    fcm: Fcm, measure: Measure | str, given: Iterable[str], cfg: EstimatorConfig | None = None
) -> PsiEstimate:
    """``psi(X_target | N_given)`` with a standard error (0 for the exact backend)."""
    cfg = cfg or EstimatorConfig()
    measure = as_measure(measure)
    fcm.check()
    given = set(given)
    unknown = given - set(fcm.nodes)
    if unknown:
        raise KeyError(f"unknown nodes {sorted(unknown)}")
    check_measure(fcm, measure)
    if cfg.method == "exact":
        relevant = fcm.relevant()
        if not all(fcm.noises[n].finite for n in relevant):
            raise NotFinite("exact backend needs finite noise supports; use monte_carlo")
        law = cached_law(fcm, cap=cfg.cap)
        return PsiEstimate(law_psi(law, fcm.target, measure, [n for n in relevant if n in given]), 0.0)
    return _mc_psi(fcm, measure, sorted(given), cfg)


def conditional_psi(
    fcm: Fcm, measure: Measure | str, given: Iterable[str], cfg: EstimatorConfig | None = None
) -> float:
    """``psi(X_target | N_given)``: entropy in bits or variance."""
    return conditional_psi_estimate(fcm, measure, given, cfg).value
