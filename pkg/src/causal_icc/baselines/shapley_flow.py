"""Edge attributions by Shapley Flow, with the uncertainty variant on the noise-augmented graph.

Nodes are split into a data side ``D`` (all roots) and a model side ``F``
(the target).  Updates travel along edges as messages: each child keeps a
memory slot per parent, initialised to background values.  Sending along
a root edge stores the root's foreground value; any other edge stores the
sender's current value.  Inside ``F`` values propagate instantly.

Root-to-target paths are ordered the way a depth-first search can find
them (children in any order, each subtree contiguous).  A path's score is
its average marginal effect on the target over those orderings and an
edge's score is the sum over the paths through it.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

from .._rng import derive_rng
from ..errors import CausalIccError
from ..graph import NOISE_PREFIX, Dag, augment
from ..model import Fcm
from ..uncertainty import EstimatorConfig, Measure, as_measure, check_measure, conditional_psi

PATH_CAP = 10
ORDERING_CAP = 100_000
TOL = 1e-9

Edge = tuple[str, str]
Path = tuple[str, ...]


class InvalidBoundary(CausalIccError, ValueError):
    pass


class PathCapExceeded(CausalIccError):
    pass


@dataclass(frozen=True)
class Boundary:
    """Partition of the nodes into the data side ``D`` and the model side ``F``."""

    D: frozenset[str]
    F: frozenset[str]

    def __init__(self, D: Iterable[str], F: Iterable[str]):
        object.__setattr__(self, "D", frozenset(D))
        object.__setattr__(self, "F", frozenset(F))

    def validate(self, dag: Dag, target: str) -> None:
        if self.D & self.F:
            raise InvalidBoundary(f"nodes on both sides: {sorted(self.D & self.F)}")
        if self.D | self.F != set(dag.nodes):
            raise InvalidBoundary("D and F must partition the nodes")
        if not set(dag.roots()) <= self.D:
            raise InvalidBoundary("every root must be on the data side")
        if target not in self.F:
            raise InvalidBoundary("the target must be on the model side")
        for u, v in dag.edges():
            if u in self.F and v in self.D:
                raise InvalidBoundary(f"edge {u}->{v} runs from F to D")

    def cut(self, dag: Dag) -> set[Edge]:
        return {(u, v) for u, v in dag.edges() if u in self.D and v in self.F}

    def to_dict(self) -> dict[str, list[str]]:
        return {"D": sorted(self.D), "F": sorted(self.F)}


@dataclass(frozen=True)
class FlowConfig:
    path_cap: int = PATH_CAP
    ordering_cap: int = ORDERING_CAP
    samples: int = 20_000
    seed: int = 0


@dataclass
class FlowAttribution:
    edge_scores: dict[Edge, float]
    path_scores: dict[Path, float]
    foreground: dict[str, Any]
    background: dict[str, Any]
    boundary: Boundary
    metric: str
    orderings: int
    exhaustive: bool
    nu_empty: float
    nu_full: float
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def efficiency_residual(self) -> float:
        return math.fsum(self.path_scores.values()) - (self.nu_full - self.nu_empty)

    def node_scores(self) -> dict[str, float]:
        """Sum of outgoing edge scores per source node."""
        out: dict[str, float] = {}
        for (u, _), s in self.edge_scores.items():
            out[u] = out.get(u, 0.0) + s
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "edge_scores": {f"{u}->{v}": s for (u, v), s in self.edge_scores.items()},
            "path_scores": {"->".join(p): s for p, s in self.path_scores.items()},
            "foreground": dict(self.foreground),
            "background": dict(self.background),
            "boundary": self.boundary.to_dict(),
            "metric": self.metric,
            "orderings": self.orderings,
            "exhaustive": self.exhaustive,
            "nu_empty": self.nu_empty,
            "nu_full": self.nu_full,
            "efficiency_residual": self.efficiency_residual,
            "diagnostics": dict(self.diagnostics),
        }


# -- DFS orderings ---------------------------------------------------------


@dataclass
class _Tree:
    """Unfolding of all root-to-target paths; ``node`` is None for the virtual root."""

    node: str | None
    children: list[_Tree]
    path: Path | None = None


def _unfold(dag: Dag, target: str, cap: int) -> tuple[_Tree, list[Path]]:
    reach = dag.ancestors(target) | {target}
    paths: list[Path] = []

    def build(node: str, prefix: Path) -> _Tree:
        here = prefix + (node,)
        if node == target:
            paths.append(here)
            if len(paths) > cap:
                raise PathCapExceeded(f"more than {cap} root-to-target paths")
            return _Tree(node, [], here)
        kids = [c for c in dag.children(node) if c in reach]
        return _Tree(node, [build(c, here) for c in kids])

    roots = [r for r in dag.roots() if r in reach]
    return _Tree(None, [build(r, ()) for r in roots]), paths


def count_orderings(tree: _Tree) -> int:
    out = math.factorial(len(tree.children))
    for c in tree.children:
        out *= count_orderings(c)
    return out


def _permutations(items: list) -> Iterator[list]:
    # Heap-free recursive generator; deterministic order.
    if len(items) <= 1:
        yield list(items)
        return
    for i in range(len(items)):
        for rest in _permutations(items[:i] + items[i + 1 :]):
            yield [items[i]] + rest


def dfs_orderings(tree: _Tree) -> Iterator[list[Path]]:
    """Every path ordering a depth-first search can produce."""
    if tree.path is not None:
        yield [tree.path]
        return

    def chain(kids: list[_Tree]) -> Iterator[list[Path]]:
        if not kids:
            yield []
            return
        for head in dfs_orderings(kids[0]):
            for tail in chain(kids[1:]):
                yield head + tail

    for perm in _permutations(tree.children):
        yield from chain(perm)


def sample_dfs_ordering(tree: _Tree, rng) -> list[Path]:
    if tree.path is not None:
        return [tree.path]
    out: list[Path] = []
    for i in rng.permutation(len(tree.children)).tolist():
        out += sample_dfs_ordering(tree.children[i], rng)
    return out


# -- History evaluation ----------------------------------------------------


class _ValueGame:
    """Target value after a history, via the memory-slot recursion."""

    def __init__(self, dag: Dag, boundary: Boundary, target: str, fx, fore: Mapping, back: Mapping):
        self.dag = dag
        self.boundary = boundary
        self.target = target
        self.fx = fx
        self.fore = fore
        self.back = back
        self.f_order = [n for n in dag.topo_order() if n in boundary.F]
        self._cache: dict = {}

    def initial(self) -> dict[Edge, Any]:
        return {(p, c): self.back[p] for c in self.dag.nodes for p in self.dag.parents[c]}

    def _value(self, node: str, memory: Mapping[Edge, Any]) -> Any:
        key = (node, tuple(memory[(p, node)] for p in self.dag.parents[node]))
        if key not in self._cache:
            self._cache[key] = self.fx(node, {p: memory[(p, node)] for p in self.dag.parents[node]})
        return self._cache[key]

    def send(self, memory: dict[Edge, Any], edge: Edge) -> None:
        u, v = edge
        if u in self.boundary.F:
            return  # instant propagation inside F
        memory[edge] = self.fore[u] if not self.dag.parents[u] else self._value(u, memory)

    def evaluate(self, memory: Mapping[Edge, Any]) -> float:
        live: dict[str, Any] = {}
        for n in self.f_order:
            pa = {p: live[p] if p in self.boundary.F else memory[(p, n)] for p in self.dag.parents[n]}
            key = (n, tuple(pa[p] for p in self.dag.parents[n]))
            if key not in self._cache:
                self._cache[key] = self.fx(n, pa)
            live[n] = self._cache[key]
        return live[self.target]


def _run(game, orderings: Iterable[list[Path]], paths: list[Path]) -> tuple[dict[Path, float], int, float, float]:
    totals = {p: [] for p in paths}
    count = 0
    empty = game.evaluate(game.initial())
    full = empty
    for order in orderings:
        memory = game.initial()
        prev = empty
        for path in order:
            for e in zip(path, path[1:]):
                game.send(memory, e)
            cur = game.evaluate(memory)
            totals[path].append(cur - prev)
            prev = cur
        full = prev
        count += 1
    return {p: math.fsum(v) / count for p, v in totals.items()}, count, empty, full


class _UncertaintyGame:
    """``-psi(target | N_S)`` where ``S`` are noise edges already crossed."""

    def __init__(self, fcm: Fcm, measure: Measure, cfg: EstimatorConfig):
        self.fcm = fcm
        self.measure = measure
        self.cfg = cfg
        self._cache: dict[frozenset, float] = {}

    def initial(self) -> set[str]:
        return set()

    def send(self, memory: set[str], edge: Edge) -> None:
        u, v = edge
        if u.startswith(NOISE_PREFIX):
            memory.add(v)

    def evaluate(self, memory: set[str]) -> float:
        key = frozenset(memory)
        if key not in self._cache:
            self._cache[key] = -conditional_psi(self.fcm, self.measure, key, self.cfg)
        return self._cache[key]


def _orderings(tree: _Tree, cfg: FlowConfig) -> tuple[Iterable[list[Path]], bool, int]:
    total = count_orderings(tree)
    if total <= cfg.ordering_cap:
        return dfs_orderings(tree), True, total
    rng = derive_rng(cfg.seed, "shapley-flow-orderings")
    return (sample_dfs_ordering(tree, rng) for _ in range(cfg.samples)), False, total


def _edge_scores(dag: Dag, path_scores: Mapping[Path, float]) -> dict[Edge, float]:
    acc: dict[Edge, list[float]] = {}
    for p, s in path_scores.items():
        for e in zip(p, p[1:]):
            acc.setdefault(e, []).append(s)
    return {e: math.fsum(acc[e]) for e in dag.edges() if e in acc}


def _complete(fcm: Fcm, dag: Dag, roots: Mapping[str, Any], augmented: bool) -> dict[str, Any]:
    """Extend root values to all nodes by forward evaluation."""
    vals = dict(roots)
    for n in dag.topo_order():
        if n in vals and not dag.parents[n]:
            continue
        if not dag.parents[n]:
            raise ValueError(f"missing value for root {n!r}")
        if augmented:
            noise = vals[NOISE_PREFIX + n]
            vals[n] = fcm.eval_node(n, {p: vals[p] for p in fcm.parents(n)}, noise)
        else:
            vals[n] = fcm.eval_node(n, {p: vals[p] for p in fcm.parents(n)}, _point_noise(fcm, n))
    return vals


def _point_noise(fcm: Fcm, node: str):
    spec = fcm.noises[node]
    if spec.finite:
        values, _ = spec.support()
        if len(values) == 1:
            return values[0]
    raise InvalidBoundary(
        f"node {node!r} has random noise; use the augmented graph for stochastic mechanisms"
    )


def _root_values(dag: Dag, given: Mapping[str, Any], augmented: bool) -> dict[str, Any]:
    out = {}
    for r in dag.roots():
        if r in given:
            out[r] = given[r]
        elif augmented and r[len(NOISE_PREFIX):] in given:
            out[r] = given[r[len(NOISE_PREFIX):]]
        else:
            raise ValueError(f"no value given for root {r!r}")
    return out


def shapley_flow(
    fcm: Fcm,
    boundary: Boundary | None = None,
    foreground: Mapping[str, Any] | None = None,
    background: Mapping[str, Any] | None = None,
    *,
    metric: str | Measure = "value",
    augmented: bool = False,
    cfg: FlowConfig | None = None,
    estimator: EstimatorConfig | None = None,
) -> FlowAttribution:
    """Shapley Flow edge attribution.

    Args:
        fcm: The model; its target is the sink of every path.
        boundary: Data/model split.  Defaults to all non-target nodes on the
            data side, or ``(noise nodes, variables)`` on the augmented graph.
        foreground: Root values of the explained setting.  On the augmented
            graph these are noise values, keyed by node or ``noise::node``.
        background: Root values of the reference setting.
        metric: ``"value"`` for the target's value, or an uncertainty measure
            (``"entropy"``/``"variance"``), which needs ``augmented=True`` and
            the noise boundary.
        augmented: Work on the graph with explicit noise nodes.
        cfg: Path/ordering caps and sampling settings.
        estimator: Settings for the uncertainty metric.
    """
    fcm.check()
    cfg = cfg or FlowConfig()
    aug = augment(fcm.dag) if augmented else None
    dag = aug.dag if aug else fcm.dag
    target = fcm.target
    if boundary is None:
        if aug:
            boundary = Boundary(aug.noise_nodes.values(), fcm.nodes)
        else:
            boundary = Boundary([n for n in dag.nodes if n != target], [target])
    boundary.validate(dag, target)
    tree, paths = _unfold(dag, target, cfg.path_cap)
    orderings, exhaustive, total = _orderings(tree, cfg)

    if metric == "value":
        if foreground is None or background is None:
            raise ValueError("the value metric needs foreground and background root values")
        fore = _complete(fcm, dag, _root_values(dag, foreground, augmented), augmented)
        back = _complete(fcm, dag, _root_values(dag, background, augmented), augmented)

        def fx(node: str, pa: Mapping[str, Any]) -> Any:
            if augmented:
                noise = pa[NOISE_PREFIX + node]
                return fcm.eval_node(node, {p: pa[p] for p in fcm.parents(node)}, noise)
            return fcm.eval_node(node, pa, _point_noise(fcm, node))

        game = _ValueGame(dag, boundary, target, fx, fore, back)
        metric_name = "value"
    else:
        measure = as_measure(metric)
        if not augmented or boundary != Boundary(aug.noise_nodes.values(), fcm.nodes):
            raise InvalidBoundary("the uncertainty metric is defined only on the augmented graph with boundary (N, X)")
        check_measure(fcm, measure)
        game = _UncertaintyGame(fcm, measure, estimator or EstimatorConfig())
        fore, back = {}, {}
        metric_name = measure.value

    path_scores, used, empty, full = _run(game, orderings, paths)
    return FlowAttribution(
        edge_scores=_edge_scores(dag, path_scores),
        path_scores=path_scores,
        foreground={k: fore[k] for k in dag.nodes if k in fore},
        background={k: back[k] for k in dag.nodes if k in back},
        boundary=boundary,
        metric=metric_name,
        orderings=used,
        exhaustive=exhaustive,
        nu_empty=empty,
        nu_full=full,
        diagnostics={"dfs_orderings_total": total, "paths": len(paths), "seed": None if exhaustive else cfg.seed},
    )


def conservation_residuals(attr: FlowAttribution, dag: Dag, target: str) -> dict[str, float]:
    """Inflow minus outflow at every node strictly between the roots and the target."""
    out = {}
    on_path = {n for p in attr.path_scores for n in p[1:-1]}
    for n in dag.topo_order():
        if n not in on_path:
            continue
        inflow = math.fsum(attr.edge_scores.get((p, n), 0.0) for p in dag.parents[n])
        outflow = math.fsum(attr.edge_scores.get((n, c), 0.0) for c in dag.children(n))
        out[n] = inflow - outflow
    return out


def boundary_consistency_check(
    fcm: Fcm,
    boundaries: Sequence[Boundary],
    foreground: Mapping[str, Any] | None = None,
    background: Mapping[str, Any] | None = None,
    *,
    metric: str | Measure = "value",
    augmented: bool = False,
    cfg: FlowConfig | None = None,
    tol: float = TOL,
) -> bool:
    """Whether two boundaries give the same scores on the edges both of them cut."""
    b1, b2 = boundaries
    dag = augment(fcm.dag).dag if augmented else fcm.dag
    a1 = shapley_flow(fcm, b1, foreground, background, metric=metric, augmented=augmented, cfg=cfg)
    a2 = shapley_flow(fcm, b2, foreground, background, metric=metric, augmented=augmented, cfg=cfg)
    shared = b1.cut(dag) & b2.cut(dag)
    return all(abs(a1.edge_scores.get(e, 0.0) - a2.edge_scores.get(e, 0.0)) <= tol for e in shared)
