"""Functional causal models: noise distributions, mechanisms, file format, sampling."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, ClassVar

import numpy as np

from . import expr as E
from ._rng import derive_rng
from .errors import CapExceeded, CausalIccError, NotFinite
from .expr import Value
from .graph import CycleError, Dag, GraphError, UnknownNode, is_valid_name

DEFAULT_CAP = 10**6
PROB_TOL = 1e-12
MODEL_VERSION = 1
COPY_PREFIX = "noise_copy::"


class ModelFormatError(CausalIccError):
    """The model document cannot be parsed (bad JSON, schema, or DSL syntax)."""


class ModelValidationError(CausalIccError):
    """The model parses but violates FCM invariants."""

    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class MechanismError(CausalIccError):
    """Evaluating a node's mechanism failed."""

    def __init__(self, node: str, cause: Exception):
        self.node = node
        self.cause = cause
        super().__init__(f"mechanism of {node!r} failed: {cause}")


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    node: str | None = None

    def __str__(self) -> str:
        where = f" [{self.node}]" if self.node else ""
        return f"{self.code}{where}: {self.message}"

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "node": self.node}


def _is_value(v: object) -> bool:
    if isinstance(v, bool):
        return False
    if isinstance(v, float):
        return math.isfinite(v)
    return isinstance(v, (int, str))


# -- Noise distributions ---------------------------------------------------


class NoiseSpec:
    """Distribution of one exogenous noise term."""

    kind: ClassVar[str]
    finite: ClassVar[bool]

    def problems(self) -> list[str]:
        return []

    def support(self) -> tuple[list[Value], np.ndarray]:
        """Atoms with positive probability, in declaration order."""
        raise NotFinite(f"{self.kind} noise has no finite support")

    def exact_support(self) -> tuple[list[Value], list[Fraction]]:
        """Like ``support`` but with rational weights normalised to sum exactly to 1."""
        values, probs = self.support()
        fr = [Fraction(float(p)) for p in probs]
        total = sum(fr)
        return values, [p / total for p in fr]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        values, probs = self.support()
        atoms = E.as_value_array(values)
        if len(values) == 1:
            return np.repeat(atoms, size)
        cdf = np.cumsum(probs / probs.sum())[:-1]
        u = rng.random(size)
        # Inverse-CDF lookup; much faster than Generator.choice with weights.
        if len(cdf) <= 16:
            idx = np.zeros(size, dtype=np.intp)
            for c in cdf:
                idx += u >= c
        else:
            idx = np.searchsorted(cdf, u, side="right")
        return atoms[idx]

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Categorical(NoiseSpec):
    values: tuple[Value, ...]
    probs: tuple[float, ...]
    kind: ClassVar[str] = "categorical"
    finite: ClassVar[bool] = True

    def __init__(self, support: Iterable[Value], probs: Iterable[float]):
        object.__setattr__(self, "values", tuple(support))
        object.__setattr__(self, "probs", tuple(probs))

    def problems(self) -> list[str]:
        out = []
        if not self.values:
            out.append("empty support")
        if len(self.values) != len(self.probs):
            out.append("support and probs differ in length")
        if any(not _is_value(v) for v in self.values):
            out.append("support values must be integers, finite reals, or strings")
        elif len(set(self.values)) != len(self.values):
            out.append("support has duplicate values")
        if any(isinstance(p, bool) or not isinstance(p, (int, float)) or not p >= 0 for p in self.probs):
            out.append("probabilities must be nonnegative numbers")
        elif abs(math.fsum(self.probs) - 1.0) > PROB_TOL:
            out.append(f"probabilities sum to {math.fsum(self.probs)!r}, not 1")
        return out

    def support(self) -> tuple[list[Value], np.ndarray]:
        pairs = [(v, float(p)) for v, p in zip(self.values, self.probs) if p > 0]
        return [v for v, _ in pairs], np.array([p for _, p in pairs])

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "support": list(self.values), "probs": list(self.probs)}


def point_mass(value: Value = 0) -> Categorical:
    return Categorical([value], [1.0])


@dataclass(frozen=True)
class DiscreteUniform(NoiseSpec):
    lo: int
    hi: int
    kind: ClassVar[str] = "discrete_uniform"
    finite: ClassVar[bool] = True

    def problems(self) -> list[str]:
        if not (E._is_int(self.lo) and E._is_int(self.hi)):
            return ["bounds must be integers"]
        if not self.lo < self.hi:
            return ["need lo < hi"]
        return []

    def support(self) -> tuple[list[Value], np.ndarray]:
        k = self.hi - self.lo + 1
        return list(range(self.lo, self.hi + 1)), np.full(k, 1.0 / k)

    def exact_support(self) -> tuple[list[Value], list[Fraction]]:
        k = self.hi - self.lo + 1
        return list(range(self.lo, self.hi + 1)), [Fraction(1, k)] * k

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.integers(self.lo, self.hi + 1, size=size, dtype=np.int64)

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Bernoulli(NoiseSpec):
    p: float
    kind: ClassVar[str] = "bernoulli"
    finite: ClassVar[bool] = True

    def problems(self) -> list[str]:
        if isinstance(self.p, bool) or not isinstance(self.p, (int, float)) or not 0 <= self.p <= 1:
            return ["p must lie in [0, 1]"]
        return []

    def support(self) -> tuple[list[Value], np.ndarray]:
        pairs = [(v, q) for v, q in ((0, 1.0 - self.p), (1, float(self.p))) if q > 0]
        return [v for v, _ in pairs], np.array([q for _, q in pairs])

    def exact_support(self) -> tuple[list[Value], list[Fraction]]:
        p = Fraction(float(self.p))
        pairs = [(v, q) for v, q in ((0, 1 - p), (1, p)) if q > 0]
        return [v for v, _ in pairs], [q for _, q in pairs]

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "p": self.p}


@dataclass(frozen=True)
class Normal(NoiseSpec):
    mean: float
    stddev: float
    kind: ClassVar[str] = "normal"
    finite: ClassVar[bool] = False

    def problems(self) -> list[str]:
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in (self.mean, self.stddev)):
            return ["mean and stddev must be numbers"]
        return [] if self.stddev > 0 else ["need stddev > 0"]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(self.mean, self.stddev, size=size)

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "mean": self.mean, "stddev": self.stddev}


@dataclass(frozen=True)
class ContinuousUniform(NoiseSpec):
    lo: float
    hi: float
    kind: ClassVar[str] = "continuous_uniform"
    finite: ClassVar[bool] = False

    def problems(self) -> list[str]:
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in (self.lo, self.hi)):
            return ["bounds must be numbers"]
        return [] if self.lo < self.hi else ["need lo < hi"]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=size)

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "lo": self.lo, "hi": self.hi}


_NOISE_FIELDS: dict[str, tuple[type, tuple[str, ...]]] = {
    "categorical": (Categorical, ("support", "probs")),
    "discrete_uniform": (DiscreteUniform, ("lo", "hi")),
    "bernoulli": (Bernoulli, ("p",)),
    "normal": (Normal, ("mean", "stddev")),
    "continuous_uniform": (ContinuousUniform, ("lo", "hi")),
}


def noise_from_dict(doc: Any) -> NoiseSpec:
    if not isinstance(doc, dict) or "type" not in doc:
        raise ModelFormatError("noise must be an object with a 'type' field")
    kind = doc["type"]
    if kind not in _NOISE_FIELDS:
        raise ModelFormatError(f"unknown noise type {kind!r}")
    cls, names = _NOISE_FIELDS[kind]
    extra = set(doc) - set(names) - {"type"}
    missing = set(names) - set(doc)
    if extra or missing:
        raise ModelFormatError(f"{kind} noise: unknown fields {sorted(extra)}, missing fields {sorted(missing)}")
    if kind == "categorical" and not (isinstance(doc["support"], list) and isinstance(doc["probs"], list)):
        raise ModelFormatError("categorical support and probs must be arrays")
    return cls(*(doc[n] for n in names))


# -- Mechanisms ------------------------------------------------------------


class Mechanism:
    """Structural assignment ``X_j = f_j(PA_j, N_j)``."""

    source: str | None = None

    def __call__(self, parents: Mapping[str, Value], noise: Value) -> Value:
        raise NotImplementedError

    def columns(self, parents: Mapping[str, np.ndarray], noise: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def referenced_parents(self) -> frozenset[str]:
        raise NotImplementedError

    def is_finite(self, finite_parents: Mapping[str, bool], finite_noise: bool) -> bool:
        return all(finite_parents.values()) and finite_noise


@dataclass(frozen=True)
class ExprMechanism(Mechanism):
    expr: E.Expr
    source: str | None = None

    @classmethod
    def parse(cls, source: str) -> ExprMechanism:
        return cls(E.parse(source), source)

    def __call__(self, parents: Mapping[str, Value], noise: Value) -> Value:
        return E.eval_expr(self.expr, parents, noise)

    def columns(self, parents: Mapping[str, np.ndarray], noise: np.ndarray) -> np.ndarray:
        return E.eval_array(self.expr, parents, noise)

    def referenced_parents(self) -> frozenset[str]:
        return E.referenced_parents(self.expr)

    def is_finite(self, finite_parents: Mapping[str, bool], finite_noise: bool) -> bool:
        table = {E.PARENT_PREFIX + k: v for k, v in finite_parents.items()}
        table[E.NOISE_SYMBOL] = finite_noise
        return E.is_finite_valued(self.expr, table)

    def to_source(self) -> str:
        return self.source if self.source is not None else E.to_source(self.expr)


def mechanism(source: str | E.Expr | Mechanism) -> Mechanism:
    if isinstance(source, Mechanism):
        return source
    if isinstance(source, str):
        return ExprMechanism.parse(source)
    return ExprMechanism(source)


# -- The model -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Fcm:
    """DAG, one mechanism and one noise distribution per node, and a target."""

    dag: Dag
    mechanisms: Mapping[str, Mechanism]
    noises: Mapping[str, NoiseSpec]
    target: str
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.dag.nodes

    def order(self) -> tuple[str, ...]:
        return self.dag.topo_order()

    def parents(self, node: str) -> tuple[str, ...]:
        return self.dag.parents[node]

    def relevant(self, node: str | None = None) -> tuple[str, ...]:
        """``node`` and its ancestors, in topological order."""
        node = self.target if node is None else node
        keep = self.dag.ancestors(node) | {node}
        return tuple(n for n in self.order() if n in keep)

    def is_enumerable(self) -> bool:
        return all(self.noises[n].finite for n in self.nodes)

    def finite_nodes(self) -> dict[str, bool]:
        """Whether each node provably takes finitely many values."""
        if "finite" not in self._cache:
            out: dict[str, bool] = {}
            for n in self.order():
                pa = {p: out[p] for p in self.parents(n)}
                out[n] = self.mechanisms[n].is_finite(pa, self.noises[n].finite)
            self._cache["finite"] = out
        return self._cache["finite"]

    def check(self) -> Fcm:
        if "diagnostics" not in self._cache:
            self._cache["diagnostics"] = validate(self)
        if self._cache["diagnostics"]:
            raise ModelValidationError(self._cache["diagnostics"])
        return self

    def with_target(self, target: str) -> Fcm:
        return Fcm(self.dag, self.mechanisms, self.noises, target)

    def replace(self, **changes: Any) -> Fcm:
        fields = {"dag": self.dag, "mechanisms": self.mechanisms, "noises": self.noises, "target": self.target}
        fields.update(changes)
        return Fcm(**fields)

    def eval_node(self, node: str, parents: Mapping[str, Value], noise: Value) -> Value:
        try:
            return self.mechanisms[node](parents, noise)
        except E.EvalError as exc:
            raise MechanismError(node, exc) from exc


def build_fcm(nodes: Iterable[tuple], target: str) -> Fcm:
    """Convenience constructor from ``(name, parents, mechanism, noise)`` tuples."""
    rows = list(nodes)
    dag = Dag([r[0] for r in rows], {r[0]: tuple(r[1]) for r in rows})
    mechs = {r[0]: mechanism(r[2]) for r in rows}
    noises = {r[0]: r[3] for r in rows}
    return Fcm(dag, mechs, noises, target).check()


def validate(fcm: Fcm) -> list[Diagnostic]:
    """All violated FCM invariants; empty when the model is valid."""
    out: list[Diagnostic] = []
    if fcm.target not in fcm.dag:
        out.append(Diagnostic("UnknownTarget", f"target {fcm.target!r} is not a node"))
    for n in fcm.nodes:
        mech = fcm.mechanisms.get(n)
        noise = fcm.noises.get(n)
        if mech is None:
            out.append(Diagnostic("MissingMechanism", "no mechanism given", n))
        else:
            allowed = set(fcm.parents(n))
            for ref in sorted(mech.referenced_parents() - allowed):
                out.append(Diagnostic("UnknownParentRef", f"mechanism references pa.{ref}, not a parent", n))
        if noise is None:
            out.append(Diagnostic("MissingNoise", "no noise distribution given", n))
        else:
            out.extend(Diagnostic("BadDistribution", p, n) for p in noise.problems())
    for n in set(fcm.mechanisms) - set(fcm.nodes):
        out.append(Diagnostic("UnknownNode", "mechanism for a node not in the graph", n))
    return out


# -- Model documents -------------------------------------------------------

_TOP_FIELDS = {"version", "nodes", "target"}
_NODE_FIELDS = {"name", "parents", "mechanism", "noise"}


def model_from_dict(doc: Any) -> Fcm:
    """Build a validated model from a parsed JSON document.

    Raises ``ModelFormatError`` for malformed documents and
    ``ModelValidationError`` for well-formed documents describing an invalid
    model.
    """
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    extra = set(doc) - _TOP_FIELDS
    if extra:
        raise ModelFormatError(f"unknown top-level fields {sorted(extra)}")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported or missing version {doc.get('version')!r}")
    if not isinstance(doc.get("nodes"), list) or not isinstance(doc.get("target"), str):
        raise ModelFormatError("'nodes' must be an array and 'target' a string")
    rows = []
    for i, nd in enumerate(doc["nodes"]):
        if not isinstance(nd, dict):
            raise ModelFormatError(f"nodes[{i}] must be an object")
        extra = set(nd) - _NODE_FIELDS
        missing = {"name", "mechanism", "noise"} - set(nd)
        if extra or missing:
            raise ModelFormatError(f"nodes[{i}]: unknown fields {sorted(extra)}, missing fields {sorted(missing)}")
        parents = nd.get("parents", [])
        if not isinstance(nd["name"], str) or not isinstance(parents, list) or not all(isinstance(p, str) for p in parents):
            raise ModelFormatError(f"nodes[{i}]: name must be a string and parents an array of strings")
        if not isinstance(nd["mechanism"], str):
            raise ModelFormatError(f"nodes[{i}]: mechanism must be a DSL string")
        try:
            mech = ExprMechanism.parse(nd["mechanism"])
        except E.ParseError as exc:
            raise ModelFormatError(f"nodes[{i}] ({nd['name']}): {exc}") from exc
        rows.append((nd["name"], parents, mech, noise_from_dict(nd["noise"])))

    diags: list[Diagnostic] = []
    names = [r[0] for r in rows]
    for name in names:
        if not is_valid_name(name):
            diags.append(Diagnostic("BadName", f"invalid node name {name!r}", name))
    for name in sorted({n for n in names if names.count(n) > 1}):
        diags.append(Diagnostic("DuplicateNode", "node declared more than once", name))
    if diags:
        raise ModelValidationError(diags)
    try:
        dag = Dag(names, {r[0]: r[1] for r in rows})
    except CycleError as exc:
        raise ModelValidationError([Diagnostic("CycleError", str(exc), exc.node)]) from exc
    except UnknownNode as exc:
        raise ModelValidationError([Diagnostic("UnknownParent", str(exc), exc.node)]) from exc
    except GraphError as exc:
        raise ModelValidationError([Diagnostic("BadGraph", str(exc))]) from exc
    fcm = Fcm(dag, {r[0]: r[2] for r in rows}, {r[0]: r[3] for r in rows}, doc["target"])
    return fcm.check()


def loads_model(text: str | bytes) -> Fcm:
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"invalid JSON: {exc}") from exc
    return model_from_dict(doc)


def load_model(path) -> Fcm:
    with open(path, "rb") as fh:
        return loads_model(fh.read())


def model_to_dict(fcm: Fcm) -> dict[str, Any]:
    nodes = []
    for n in fcm.nodes:
        mech = fcm.mechanisms[n]
        if not isinstance(mech, ExprMechanism):
            raise TypeError(f"mechanism of {n!r} has no DSL form")
        nodes.append(
            {"name": n, "parents": list(fcm.parents(n)), "mechanism": mech.to_source(), "noise": fcm.noises[n].to_dict()}
        )
    return {"version": MODEL_VERSION, "nodes": nodes, "target": fcm.target}


# -- Noise resolution and enumeration --------------------------------------


def resolve_target(fcm: Fcm, node: str | None = None):
    """Return ``F(noise assignment) -> value`` of the target (or ``node``)."""
    fcm.check()
    steps = fcm.relevant(node)

    def evaluate(noise: Mapping[str, Value]) -> Value:
        vals: dict[str, Value] = {}
        for n in steps:
            vals[n] = fcm.eval_node(n, {p: vals[p] for p in fcm.parents(n)}, noise[n])
        return vals[steps[-1]]

    return evaluate


def forward(fcm: Fcm, noise: Mapping[str, Value], do: Mapping[str, Value] | None = None) -> dict[str, Value]:
    """Evaluate every node for one noise assignment, with optional hard interventions."""
    do = do or {}
    vals: dict[str, Value] = {}
    for n in fcm.order():
        if n in do:
            vals[n] = do[n]
        else:
            vals[n] = fcm.eval_node(n, {p: vals[p] for p in fcm.parents(n)}, noise[n])
    return vals


def _require_finite(fcm: Fcm, nodes: Iterable[str]) -> None:
    bad = [n for n in nodes if not fcm.noises[n].finite]
    if bad:
        raise NotFinite(f"noise of {bad} has no finite support")


def enumerate_noise_support(
    fcm: Fcm, cap: int = DEFAULT_CAP, nodes: Sequence[str] | None = None
) -> list[tuple[dict[str, Value], float]]:
    """Every joint noise assignment with its product probability."""
    nodes = tuple(fcm.nodes if nodes is None else nodes)
    _require_finite(fcm, nodes)
    supports = [fcm.noises[n].support() for n in nodes]
    size = math.prod(len(v) for v, _ in supports)
    if size > cap:
        raise CapExceeded(f"{size} joint noise assignments exceed cap {cap}")
    out = []
    for combo in itertools.product(*(list(zip(v, p.tolist())) for v, p in supports)):
        out.append(({n: c[0] for n, c in zip(nodes, combo)}, math.prod(c[1] for c in combo)))
    return out


def symbolic_joint(
    fcm: Fcm,
    *,
    copies: Iterable[str] = (),
    do: Mapping[str, Value] | None = None,
    exact: bool = True,
    cap: int = DEFAULT_CAP,
) -> dict[tuple, Fraction | float]:
    """Exact joint law over ``(X_1..X_n, N'_j for j in copies)`` by enumeration.

    Nodes in ``copies`` are driven by an independent copy of their noise
    (a structure-preserving intervention).  With ``exact=True`` the weights
    are ``Fraction`` objects, so equalities between laws hold exactly.
    Keys are value tuples in ``fcm.nodes`` order followed by the copies.
    """
    fcm.check()
    copies = tuple(c for c in fcm.nodes if c in set(copies))
    _require_finite(fcm, fcm.nodes)
    axes = list(fcm.nodes) + [COPY_PREFIX + c for c in copies]
    tables = []
    for a in axes:
        spec = fcm.noises[a[len(COPY_PREFIX):] if a.startswith(COPY_PREFIX) else a]
        vals, probs = spec.exact_support() if exact else spec.support()
        tables.append(list(zip(vals, list(probs) if exact else [float(x) for x in probs])))
    if math.prod(len(t) for t in tables) > cap:
        raise CapExceeded(f"joint enumeration exceeds cap {cap}")
    out: dict[tuple, Any] = {}
    one = Fraction(1) if exact else 1.0
    for combo in itertools.product(*tables):
        assign = dict(zip(axes, (c[0] for c in combo)))
        noise = {n: assign[COPY_PREFIX + n] if n in copies else assign[n] for n in fcm.nodes}
        vals = forward(fcm, noise, do)
        key = tuple(vals[n] for n in fcm.nodes) + tuple(assign[COPY_PREFIX + c] for c in copies)
        w = one
        for c in combo:
            w = w * c[1]
        out[key] = out.get(key, 0) + w
    return out


def total_variation(p: Mapping[Any, Any], q: Mapping[Any, Any]):
    keys = set(p) | set(q)
    return sum(abs(p.get(k, 0) - q.get(k, 0)) for k in keys) / 2


def marginal(joint: Mapping[tuple, Any], positions: Sequence[int]) -> dict[tuple, Any]:
    out: dict[tuple, Any] = {}
    for k, w in joint.items():
        key = tuple(k[i] for i in positions)
        out[key] = out.get(key, 0) + w
    return out


# -- Sampling --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampleBatch:
    columns: dict[str, np.ndarray]
    seed: int
    kind: str
    metadata: dict[str, Any]

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def rows(self) -> list[tuple]:
        cols = [c.tolist() for c in self.columns.values()]
        return list(zip(*cols))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(list(self.columns))
        for row in self.rows():
            w.writerow([format_value(v) for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "metadata": self.metadata,
            "columns": {k: v.tolist() for k, v in self.columns.items()},
        }


def format_value(v: Value) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def draw_noise(fcm: Fcm, node: str, count: int, seed: int, purpose: str = "noise") -> np.ndarray:
    return fcm.noises[node].sample(derive_rng(seed, purpose, node), count)


def simulate(
    fcm: Fcm,
    noise: Mapping[str, np.ndarray],
    *,
    do: Mapping[str, Value] | None = None,
    nodes: Sequence[str] | None = None,
) -> dict[str, np.ndarray]:
    """Vectorised forward simulation of ``nodes`` (ancestrally closed, default all)."""
    do = do or {}
    steps = fcm.order() if nodes is None else tuple(n for n in fcm.order() if n in set(nodes))
    size = len(next(iter(noise.values()))) if noise else 0
    cols: dict[str, np.ndarray] = {}
    for n in steps:
        if n in do:
            cols[n] = E.as_value_array([do[n]] * size)
            continue
        try:
            cols[n] = fcm.mechanisms[n].columns({p: cols[p] for p in fcm.parents(n)}, noise[n])
        except E.EvalError as exc:
            raise MechanismError(n, exc) from exc
    return cols


def _check_nodes(fcm: Fcm, nodes: Iterable[str]) -> None:
    for n in nodes:
        if n not in fcm.dag:
            raise UnknownNode(n)


def _check_count(count: int) -> int:
    if isinstance(count, bool) or not isinstance(count, (int, np.integer)) or count < 0:
        raise ValueError("count must be a nonnegative integer")
    return int(count)


def sample_observational(fcm: Fcm, count: int, seed: int) -> SampleBatch:
    fcm.check()
    count = _check_count(count)
    noise = {n: draw_noise(fcm, n, count, seed) for n in fcm.nodes}
    cols = simulate(fcm, noise)
    return SampleBatch({n: cols[n] for n in fcm.nodes}, seed, "observational", {})


def sample_do(fcm: Fcm, assignments: Mapping[str, Value], count: int, seed: int) -> SampleBatch:
    """Hard intervention: assigned nodes fixed, the rest follow their mechanisms."""
    fcm.check()
    _check_nodes(fcm, assignments)
    count = _check_count(count)
    noise = {n: draw_noise(fcm, n, count, seed) for n in fcm.nodes}
    cols = simulate(fcm, noise, do=assignments)
    meta = {"intervened": {n: assignments[n] for n in fcm.nodes if n in assignments}, "policy": "do"}
    return SampleBatch({n: cols[n] for n in fcm.nodes}, seed, "do", meta)


def sample_structure_preserving(fcm: Fcm, nodes: Iterable[str], count: int, seed: int) -> SampleBatch:
    """Drive each node in ``nodes`` by a fresh copy ``N'_j`` of its noise.

    The copies are recorded as ``noise_copy::<node>`` columns.  Original
    noise draws are identical to ``sample_observational`` for the same seed.
    """
    fcm.check()
    nodes = set(nodes)
    _check_nodes(fcm, nodes)
    count = _check_count(count)
    chosen = [n for n in fcm.nodes if n in nodes]
    noise = {n: draw_noise(fcm, n, count, seed) for n in fcm.nodes}
    copy_cols = {n: draw_noise(fcm, n, count, seed, purpose="noise-copy") for n in chosen}
    cols = simulate(fcm, {**noise, **copy_cols})
    out = {n: cols[n] for n in fcm.nodes}
    out.update({COPY_PREFIX + n: copy_cols[n] for n in chosen})
    return SampleBatch(out, seed, "structure_preserving", {"intervened": chosen, "policy": "structure_preserving"})
