"""Exact laws of finite models, computed by pushing the noise grid through mechanisms.

The grid has one axis per noise term.  Every variable is stored as an
integer code array that broadcasts against the grid, plus a decode table,
so the law of any set of variables is a weighted ``bincount``.
Each mechanism is evaluated once per distinct (parent values, noise value)
combination using the scalar reference evaluator.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import CapExceeded, NotFinite
from .expr import Value
from .model import COPY_PREFIX, DEFAULT_CAP, Fcm


@dataclass(frozen=True, eq=False)
class ExactLaw:
    """Joint law of noises and variables of a finite model.

    ``axes`` names the grid axes: node names for original noises and
    ``noise_copy::<node>`` for structure-preserving copies.
    """

    axes: tuple[str, ...]
    probs: np.ndarray
    values: dict[str, list[Value]]
    codes: dict[str, np.ndarray]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.probs.shape

    def axis(self, name: str) -> int:
        return self.axes.index(name)

    def grid_codes(self, var: str) -> np.ndarray:
        return np.broadcast_to(self.codes[var], self.shape)

    def index_over(self, variables: Sequence[str]) -> tuple[np.ndarray, int]:
        """Joint code of ``variables`` on the grid and the number of cells it can take."""
        idx = np.zeros((1,) * len(self.shape), dtype=np.int64)
        size = 1
        for v in variables:
            k = len(self.values[v])
            idx = idx * k + self.codes[v]
            size *= k
        return np.broadcast_to(idx, self.shape), size

    def axis_index(self, axes: Iterable[str]) -> tuple[np.ndarray, int]:
        """Joint index of the given noise axes, broadcast to the grid."""
        idx = np.zeros((1,) * len(self.shape), dtype=np.int64)
        size = 1
        for a in axes:
            i = self.axis(a)
            k = self.shape[i]
            shape = [1] * len(self.shape)
            shape[i] = k
            idx = idx * k + np.arange(k).reshape(shape)
            size *= k
        return np.broadcast_to(idx, self.shape), size

    def distribution(self, variables: Sequence[str]) -> dict[tuple, float]:
        """Law of ``variables`` as ``{value tuple: probability}`` (positive cells only)."""
        idx, size = self.index_over(variables)
        w = np.bincount(idx.ravel(), weights=self.probs.ravel(), minlength=size)
        out = {}
        radices = [len(self.values[v]) for v in variables]
        for flat in np.flatnonzero(w):
            codes = np.unravel_index(int(flat), radices) if radices else ()
            out[tuple(self.values[v][int(c)] for v, c in zip(variables, codes))] = float(w[flat])
        return out


def exact_law(
    fcm: Fcm,
    *,
    nodes: Sequence[str] | None = None,
    do: Mapping[str, Value] | None = None,
    copies: Iterable[str] = (),
    cap: int = DEFAULT_CAP,
) -> ExactLaw:
    """Push the joint noise support of ``nodes`` (ancestrally closed) through the model.

    ``do`` fixes nodes to constants (hard interventions).  Nodes in
    ``copies`` read an independent copy of their noise instead of the
    original, i.e. a structure-preserving intervention.
    """
    fcm.check()
    do = dict(do or {})
    copies = set(copies)
    steps = fcm.order() if nodes is None else tuple(n for n in fcm.order() if n in set(nodes))
    axes: list[str] = []
    for n in steps:
        if n in do:
            continue
        if n not in copies:
            axes.append(n)
    axes += [COPY_PREFIX + n for n in steps if n in copies and n not in do]

    supports = {}
    for a in axes:
        node = a[len(COPY_PREFIX):] if a.startswith(COPY_PREFIX) else a
        if not fcm.noises[node].finite:
            raise NotFinite(f"noise of {node!r} has no finite support")
        supports[a] = fcm.noises[node].support()
    size = math.prod(len(supports[a][0]) for a in axes)
    if size > cap:
        raise CapExceeded(f"{size} joint noise assignments exceed cap {cap}")

    ndim = len(axes)
    probs = np.ones((1,) * ndim)
    values: dict[str, list[Value]] = {}
    codes: dict[str, np.ndarray] = {}
    for i, a in enumerate(axes):
        vals, p = supports[a]
        shape = [1] * ndim
        shape[i] = len(vals)
        probs = probs * p.reshape(shape)
        if a.startswith(COPY_PREFIX):
            values[a] = list(vals)
            codes[a] = np.arange(len(vals)).reshape(shape)

    for n in steps:
        if n in do:
            values[n] = [do[n]]
            codes[n] = np.zeros((1,) * ndim, dtype=np.int64)
            continue
        a = COPY_PREFIX + n if n in copies else n
        i = axes.index(a)
        nvals = supports[a][0]
        shape = [1] * ndim
        shape[i] = len(nvals)
        key = np.arange(len(nvals)).reshape(shape)
        radix = len(nvals)
        pa = fcm.parents(n)
        for p in pa:
            key = key + codes[p] * radix
            radix *= len(values[p])
        uniq, inv = np.unique(key, return_inverse=True)
        table: dict[Value, int] = {}
        decoded: list[Value] = []
        out_codes = np.empty(len(uniq), dtype=np.int64)
        for j, k in enumerate(uniq.tolist()):
            noise_val = nvals[k % len(nvals)]
            k //= len(nvals)
            pvals = {}
            for p in pa:
                kp = len(values[p])
                pvals[p] = values[p][k % kp]
                k //= kp
            v = fcm.eval_node(n, pvals, noise_val)
            if v not in table:
                table[v] = len(decoded)
                decoded.append(v)
            out_codes[j] = table[v]
        values[n] = decoded
        codes[n] = out_codes[inv.reshape(key.shape)]
    return ExactLaw(tuple(axes), probs, values, codes)


def cached_law(fcm: Fcm, node: str | None = None, cap: int = DEFAULT_CAP) -> ExactLaw:
    """Observational law over ``node`` (default target) and its ancestors, memoised on the model."""
    node = fcm.target if node is None else node
    key = ("law", node, cap)
    if key not in fcm._cache:
        fcm._cache[key] = exact_law(fcm, nodes=fcm.relevant(node), cap=cap)
    return fcm._cache[key]


def observational_joint(fcm: Fcm, cap: int = DEFAULT_CAP) -> dict[tuple, float]:
    """Law over all variables in ``fcm.nodes`` order."""
    return exact_law(fcm, cap=cap).distribution(list(fcm.nodes))
