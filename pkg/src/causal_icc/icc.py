"""Intrinsic causal contributions of each node's noise to a target.

A node's plain contribution given a set ``T`` is the drop in target
uncertainty when its own noise is revealed in addition to the noises of
``T``.  The Shapley version symmetrises over all orderings of the
coalition game ``nu(S) = -psi(target | N_S)``, so the scores add up to the
target's total uncertainty.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import expr as E
from .errors import CausalIccError
from .graph import Dag
from .model import (
    Categorical,
    ExprMechanism,
    Fcm,
    Mechanism,
    MechanismError,
    point_mass,
    symbolic_joint,
    total_variation,
)
from .law import exact_law
from .shapley import CoalitionFn, ShapleyConfig, ShapleyResult, shapley, shapley_weight
from .uncertainty import (
    EstimatorConfig,
    Measure,
    as_measure,
    check_measure,
    conditional_psi_estimate,
    psi_from_joint,
)

EXACT_TOL = 1e-9


class TargetHasDescendants(CausalIccError):
    pass


class InvalidAbstraction(CausalIccError):
    pass


@dataclass
class AttributionReport:
    """Per-node (or per-edge) scores plus what is needed to reproduce them."""

    scores: dict[str, float]
    measure: str
    total: float
    method: dict[str, Any]
    seed: int | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def efficiency_residual(self) -> float:
        return math.fsum(self.scores.values()) - self.total

    def to_dict(self) -> dict[str, Any]:
        return {
            "scores": dict(self.scores),
            "measure": self.measure,
            "units": as_measure(self.measure).units if self.measure in ("entropy", "variance") else None,
            "total": self.total,
            "efficiency_residual": self.efficiency_residual,
            "method": dict(self.method),
            "seed": self.seed,
            "diagnostics": dict(self.diagnostics),
        }


@dataclass(frozen=True)
class IccRequest:
    fcm: Fcm
    measure: Measure | str = Measure.ENTROPY
    mode: str = "shapley"
    ordering: tuple[str, ...] | None = None
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    shapley: ShapleyConfig = field(default_factory=ShapleyConfig)

    def __post_init__(self):
        object.__setattr__(self, "measure", as_measure(self.measure))
        if self.mode not in ("plain", "shapley"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "plain":
            if self.ordering is None:
                raise ValueError("plain mode needs an explicit ordering of all nodes")
            object.__setattr__(self, "ordering", tuple(self.ordering))
            if sorted(self.ordering) != sorted(self.fcm.nodes):
                raise ValueError("ordering must be a permutation of all nodes")


def require_sink_target(fcm: Fcm) -> None:
    fcm.check()
    if fcm.dag.children(fcm.target):
        raise TargetHasDescendants(
            f"target {fcm.target!r} has descendants {sorted(fcm.dag.descendants(fcm.target))}; "
            "marginalize them out first"
        )


def _tolerance(cfg: EstimatorConfig, stderr: float) -> float:
    return EXACT_TOL if cfg.method == "exact" else max(3.0 * stderr, EXACT_TOL)


# -- Plain ICC -------------------------------------------------------------


def icc_plain(
    fcm: Fcm, measure: Measure | str, j: str, T: Iterable[str] = (), cfg: EstimatorConfig | None = None
) -> float:
    """``psi(target | N_T) - psi(target | N_j, N_T)``."""
    T = set(T)
    if j in T:
        raise ValueError(f"{j!r} is already in the conditioning set")
    if j not in fcm.dag:
        raise KeyError(j)
    require_sink_target(fcm)
    a = conditional_psi_estimate(fcm, measure, T, cfg).value
    b = conditional_psi_estimate(fcm, measure, T | {j}, cfg).value
    return a - b


def icc_ordering(
    fcm: Fcm, measure: Measure | str, ordering: Sequence[str], cfg: EstimatorConfig | None = None
) -> AttributionReport:
    """Plain ICC of each node given its predecessors in ``ordering``."""
    cfg = cfg or EstimatorConfig()
    req = IccRequest(fcm, measure, "plain", tuple(ordering), cfg)
    require_sink_target(fcm)
    psis = []
    errs = []
    for k in range(len(req.ordering) + 1):
        est = conditional_psi_estimate(fcm, req.measure, req.ordering[:k], cfg)
        psis.append(est.value)
        errs.append(est.stderr)
    raw = {n: psis[k] - psis[k + 1] for k, n in enumerate(req.ordering)}
    tol = _tolerance(cfg, max(errs))
    scores, clipped = clip_scores({n: raw[n] for n in fcm.nodes}, tol)
    return AttributionReport(
        scores=scores,
        measure=req.measure.value,
        total=psis[0],
        method={"mode": "plain", "ordering": list(req.ordering), "estimator": _estimator_meta(cfg)},
        seed=cfg.seed if cfg.method == "monte_carlo" else None,
        diagnostics={"tolerance": tol, "psi_stderr_max": max(errs), "clipped_raw": clipped},
    )


# -- Shapley ICC -----------------------------------------------------------


def icc_coalition_fn(fcm: Fcm, measure: Measure, cfg: EstimatorConfig, threads: int = 1) -> CoalitionFn:
    """``nu(S) = -psi(target | N_S)`` over players ``fcm.nodes``."""
    nodes = fcm.nodes
    relevant = set(fcm.relevant())
    stderrs: dict[frozenset, float] = {}

    def nu(S: frozenset[int]) -> float:
        given = frozenset(nodes[i] for i in S) & relevant
        est = conditional_psi_estimate(fcm, measure, given, cfg)
        stderrs[given] = est.stderr
        return -est.value

    fn = CoalitionFn(len(nodes), nu, threads=threads)
    fn.stderrs = stderrs  # type: ignore[attr-defined]
    return fn


def _estimator_meta(cfg: EstimatorConfig) -> dict[str, Any]:
    if cfg.method == "exact":
        return {"method": "exact", "cap": cfg.cap}
    return {
        "method": "monte_carlo",
        "outer_samples": cfg.outer_samples,
        "inner_samples": cfg.inner_samples,
        "seed": cfg.seed,
    }


def _shapley_meta(res: ShapleyResult) -> dict[str, Any]:
    out: dict[str, Any] = {"method": res.method, "evaluations": res.evaluations_used}
    if res.method == "permutation":
        out.update(permutations=res.permutations, seed=res.seed)
    return out


def clip_scores(raw: Mapping[str, float], tol: float) -> tuple[dict[str, float], dict[str, float]]:
    """Clip values in ``[-tol, 0)`` to 0; returns (scores, raw values that were clipped)."""
    scores, clipped = {}, {}
    for k, v in raw.items():
        if -tol <= v < 0:
            scores[k] = 0.0
            clipped[k] = v
        else:
            scores[k] = v
    return scores, clipped


def _score_tolerance(fcm: Fcm, stderrs: Mapping[frozenset, float]) -> dict[str, float]:
    # 3 x a bound on each score's standard error: sd(sum a_k Y_k) <= sum |a_k| sd(Y_k).
    nodes = fcm.nodes
    relevant = set(fcm.relevant())
    n = len(nodes)
    se = [stderrs[frozenset(nodes[i] for i in range(n) if m >> i & 1) & relevant] for m in range(1 << n)]
    out = {}
    for i, node in enumerate(nodes):
        bit = 1 << i
        terms = [shapley_weight(n, m.bit_count()) * (se[m] + se[m | bit]) for m in range(1 << n) if not m & bit]
        out[node] = max(3.0 * math.fsum(terms), EXACT_TOL)
    return out


def icc_shapley(
    fcm: Fcm,
    measure: Measure | str = Measure.ENTROPY,
    estimator: EstimatorConfig | None = None,
    shapley_cfg: ShapleyConfig | None = None,
) -> AttributionReport:
    """Shapley ICC of every node with respect to ``fcm.target``."""
    measure = as_measure(measure)
    estimator = estimator or EstimatorConfig()
    shapley_cfg = shapley_cfg or ShapleyConfig()
    require_sink_target(fcm)
    check_measure(fcm, measure)
    fn = icc_coalition_fn(fcm, measure, estimator, shapley_cfg.threads)
    res = shapley(fn, shapley_cfg)
    total = -fn.value_mask(0)
    total_se = fn.stderrs.get(frozenset(), 0.0)
    tol = _tolerance(estimator, total_se)
    scores, clipped = clip_scores(dict(zip(fcm.nodes, res.values)), tol)
    diag: dict[str, Any] = {
        "tolerance": tol,
        "cache_entries": fn.cache_size,
        "clipped_raw": clipped,
    }
    if estimator.method == "monte_carlo":
        diag["psi_stderr_total"] = total_se
        diag["psi_stderr_max"] = max(fn.stderrs.values(), default=0.0)
        if res.method == "exact":
            diag["score_tolerance"] = _score_tolerance(fcm, fn.stderrs)
    if res.stderr is not None:
        diag["shapley_stderr"] = dict(zip(fcm.nodes, res.stderr))
    seed = estimator.seed if estimator.method == "monte_carlo" else None
    if shapley_cfg.method == "permutation":
        seed = shapley_cfg.seed if seed is None else seed
    return AttributionReport(
        scores=scores,
        measure=measure.value,
        total=total,
        method={"mode": "shapley", "shapley": _shapley_meta(res), "estimator": _estimator_meta(estimator)},
        seed=seed,
        diagnostics=diag,
    )


def run_icc(request: IccRequest) -> AttributionReport:
    if request.mode == "plain":
        return icc_ordering(request.fcm, request.measure, request.ordering, request.estimator)
    return icc_shapley(request.fcm, request.measure, request.estimator, request.shapley)


# -- Interventional cross-check --------------------------------------------


def sub_model(fcm: Fcm, nodes: Iterable[str]) -> Fcm:
    """Restrict to an ancestrally closed node set."""
    keep = set(nodes)
    names = [n for n in fcm.nodes if n in keep]
    for n in names:
        if not set(fcm.parents(n)) <= keep:
            raise ValueError(f"node set is not ancestrally closed at {n!r}")
    dag = Dag(names, {n: fcm.parents(n) for n in names})
    return Fcm(dag, {n: fcm.mechanisms[n] for n in names}, {n: fcm.noises[n] for n in names}, fcm.target)


def icc_via_interventions(fcm: Fcm, measure: Measure | str, j: str, T: Iterable[str] = ()) -> float:
    """Plain ICC computed from the law of ``(target, N'_T, N'_j)``.

    Every node in ``T`` and ``j`` gets a structure-preserving intervention;
    the observed copies then play the role of the noise terms.
    """
    T = set(T)
    if j in T:
        raise ValueError(f"{j!r} is already in the conditioning set")
    require_sink_target(fcm)
    sub = sub_model(fcm, fcm.relevant())
    copies = [n for n in sub.nodes if n in T | {j}]
    joint = symbolic_joint(sub, copies=copies, exact=False)
    k = len(sub.nodes)
    tpos = sub.nodes.index(sub.target)
    cpos = {n: k + i for i, n in enumerate(copies)}
    given_t = [cpos[n] for n in copies if n in T]
    given_tj = [cpos[n] for n in copies]
    return psi_from_joint(joint, measure, tpos, given_t) - psi_from_joint(joint, measure, tpos, given_tj)


# -- Model surgery ---------------------------------------------------------


def insert_copy_node(fcm: Fcm, edge: tuple[str, str], name: str | None = None) -> Fcm:
    """Put a deterministic copy ``C := pa.u`` on the edge ``u -> v``."""
    u, v = edge
    if u not in fcm.parents(v):
        raise KeyError(f"no edge {u}->{v}")
    name = name or f"{u}_to_{v}"
    if name in fcm.dag:
        raise ValueError(f"node {name!r} already exists")
    mech_v = fcm.mechanisms[v]
    if not isinstance(mech_v, ExprMechanism):
        raise TypeError("can only rewrite DSL mechanisms")
    nodes = []
    for n in fcm.nodes:
        nodes.append(n)
        if n == u:
            nodes.append(name)
    parents = {n: tuple(name if (n == v and p == u) else p for p in fcm.parents(n)) for n in fcm.nodes}
    parents[name] = (u,)
    mechs = dict(fcm.mechanisms)
    mechs[v] = ExprMechanism(E.rename_parent(mech_v.expr, u, name))
    mechs[name] = ExprMechanism.parse(f"pa.{u}")
    noises = dict(fcm.noises)
    noises[name] = point_mass(0)
    return Fcm(Dag(nodes, parents), mechs, noises, fcm.target).check()


@dataclass(frozen=True)
class _Folded:
    node: str
    parents: tuple[str, ...]
    mechanism: Mechanism


class CompositeMechanism(Mechanism):
    """A retained node with some hidden ancestors folded into it.

    The noise is an index into the product of the folded noise supports;
    hidden nodes are evaluated in topological order before the node itself.
    """

    def __init__(self, steps: Sequence[_Folded], radices: Sequence[int], supports: Sequence[list]):
        self.steps = tuple(steps)
        self.radices = tuple(radices)
        self.supports = tuple(supports)
        self.source = None

    def _decode(self, index: int) -> list:
        out = []
        for r, sup in zip(reversed(self.radices), reversed(self.supports)):
            out.append(sup[index % r])
            index //= r
        return out[::-1]

    def __call__(self, parents: Mapping[str, E.Value], noise: E.Value) -> E.Value:
        vals = dict(parents)
        for step, nv in zip(self.steps, self._decode(int(noise))):
            try:
                vals[step.node] = step.mechanism({p: vals[p] for p in step.parents}, nv)
            except E.EvalError as exc:
                raise MechanismError(step.node, exc) from exc
        return vals[self.steps[-1].node]

    def columns(self, parents: Mapping[str, np.ndarray], noise: np.ndarray) -> np.ndarray:
        idx = np.asarray(noise, dtype=np.int64)
        digits = []
        for r in reversed(self.radices):
            digits.append(idx % r)
            idx = idx // r
        digits.reverse()
        cols = dict(parents)
        for step, d, sup in zip(self.steps, digits, self.supports):
            nv = E.as_value_array(sup)[d]
            cols[step.node] = step.mechanism.columns({p: cols[p] for p in step.parents}, nv)
        return cols[self.steps[-1].node]

    def referenced_parents(self) -> frozenset[str]:
        inner = {s.node for s in self.steps}
        return frozenset(p for s in self.steps for p in s.parents if p not in inner)

    def is_finite(self, finite_parents: Mapping[str, bool], finite_noise: bool) -> bool:
        return all(finite_parents.values()) and finite_noise


def marginalize(fcm: Fcm, hide: Iterable[str]) -> Fcm:
    """Model over the retained nodes with hidden nodes folded into compound noises.

    Each hidden node must feed at most one retained node through hidden-only
    paths; otherwise the compound noises would be dependent.  Hidden nodes
    that feed no retained node are dropped.
    """
    hide = set(hide)
    for h in hide:
        if h not in fcm.dag:
            raise InvalidAbstraction(f"unknown node {h!r}")
    if fcm.target in hide:
        raise InvalidAbstraction("the target cannot be hidden")
    if not hide:
        return fcm
    retained = [n for n in fcm.nodes if n not in hide]

    # Retained nodes reachable from each hidden node along hidden-only paths.
    feeds: dict[str, set[str]] = {}
    for h in reversed(fcm.order()):
        if h in hide:
            feeds[h] = set()
            for c in fcm.dag.children(h):
                feeds[h] |= feeds[c] if c in hide else {c}
    for h in sorted(hide, key=fcm.dag.index):
        if len(feeds[h]) > 1:
            raise InvalidAbstraction(
                f"hidden node {h!r} feeds {sorted(feeds[h])} directly; its noise would be shared"
            )

    parents: dict[str, tuple[str, ...]] = {}
    mechs: dict[str, Mechanism] = {}
    noises = {}
    for r in retained:
        folded = [n for n in fcm.order() if n in hide and feeds[n] == {r}]
        if not folded:
            parents[r] = fcm.parents(r)
            mechs[r] = fcm.mechanisms[r]
            noises[r] = fcm.noises[r]
            continue
        chain = folded + [r]
        outside = []
        for n in chain:
            for p in fcm.parents(n):
                if p not in hide and p not in outside:
                    outside.append(p)
        supports = [fcm.noises[n].support() for n in chain]
        radices = [len(v) for v, _ in supports]
        probs = np.ones(1)
        for _, p in supports:
            probs = np.outer(probs, p).ravel()
        steps = [_Folded(n, fcm.parents(n), fcm.mechanisms[n]) for n in chain]
        parents[r] = tuple(sorted(outside, key=fcm.dag.index))
        mechs[r] = CompositeMechanism(steps, radices, [v for v, _ in supports])
        noises[r] = Categorical(range(len(probs)), (probs / probs.sum()).tolist())
    dag = Dag(retained, parents)
    return Fcm(dag, mechs, noises, fcm.target).check()


@dataclass
class MarginalizationComparison:
    original: AttributionReport
    marginalized: AttributionReport
    deltas: dict[str, float]
    joint_tv: float


def compare_marginalization(
    fcm: Fcm,
    hide: Iterable[str],
    measure: Measure | str = Measure.ENTROPY,
    estimator: EstimatorConfig | None = None,
) -> MarginalizationComparison:
    """Shapley ICC before and after hiding ``hide``.

    Raises ``AssertionError`` if the two models disagree on the joint law
    of the retained nodes (they never should).
    """
    hide = set(hide)
    small = marginalize(fcm, hide)
    before = icc_shapley(fcm, measure, estimator)
    after = icc_shapley(small, measure, estimator) if hide else before
    retained = list(small.nodes)
    p = exact_law(fcm).distribution(retained)
    q = exact_law(small).distribution(retained)
    tv = float(total_variation(p, q))
    if tv > 1e-12:
        raise AssertionError(f"marginalized model changes the retained joint (TV {tv})")
    deltas = {n: after.scores[n] - before.scores[n] for n in retained}
    return MarginalizationComparison(before, after, deltas, tv)


def all_plain_terms(fcm: Fcm, measure: Measure | str, cfg: EstimatorConfig | None = None) -> dict[tuple, float]:
    """Plain ICC for every node and every conditioning set (exhaustive)."""
    require_sink_target(fcm)
    nodes = fcm.nodes
    psi = {}
    for r in range(len(nodes) + 1):
        for T in itertools.combinations(nodes, r):
            psi[frozenset(T)] = conditional_psi_estimate(fcm, measure, T, cfg).value
    out = {}
    for T, v in psi.items():
        for j in nodes:
            if j not in T:
                out[(j, tuple(sorted(T)))] = v - psi[T | {j}]
    return out


__all__ = [
    "AttributionReport",
    "IccRequest",
    "InvalidAbstraction",
    "MarginalizationComparison",
    "TargetHasDescendants",
    "all_plain_terms",
    "compare_marginalization",
    "icc_ordering",
    "icc_plain",
    "icc_shapley",
    "icc_via_interventions",
    "insert_copy_node",
    "marginalize",
    "run_icc",
    "sub_model",
]
