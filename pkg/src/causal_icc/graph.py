"""Directed acyclic graphs with deterministic ordering and noise augmentation."""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from .errors import CausalIccError

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
NOISE_PREFIX = "noise::"


class GraphError(CausalIccError):
    """Structural problem with a graph."""


class CycleError(GraphError):
    def __init__(self, node: str):
        super().__init__(f"graph has a cycle through {node!r}")
        self.node = node


class UnknownNode(GraphError, KeyError):
    def __init__(self, node: str):
        super().__init__(node)
        self.node = node

    def __str__(self) -> str:
        return f"unknown node {self.node!r}"


def noise_node(name: str) -> str:
    return NOISE_PREFIX + name


def is_valid_name(name: object) -> bool:
    return isinstance(name, str) and NAME_RE.match(name) is not None


class Dag:
    """Node set with ordered parent lists.

    Nodes keep their declaration order, which is used to break every tie
    (topological order, children order, edge order).  Construction checks
    the structure and raises ``GraphError``/``CycleError`` on violations.
    """

    __slots__ = ("nodes", "parents", "_children", "_order", "_index")

    def __init__(
        self,
        nodes: Iterable[str],
        parents: Mapping[str, Sequence[str]] | None = None,
        *,
        allow_noise_names: bool = False,
    ):
        nodes = tuple(nodes)
        parents = dict(parents or {})
        seen: set[str] = set()
        for name in nodes:
            ok = is_valid_name(name) or (
                allow_noise_names
                and isinstance(name, str)
                and name.startswith(NOISE_PREFIX)
                and is_valid_name(name[len(NOISE_PREFIX):])
            )
            if not ok:
                raise GraphError(f"invalid node name {name!r}")
            if name in seen:
                raise GraphError(f"duplicate node {name!r}")
            seen.add(name)
        for name in parents:
            if name not in seen:
                raise UnknownNode(name)
        full: dict[str, tuple[str, ...]] = {}
        for name in nodes:
            pa = tuple(parents.get(name, ()))
            if len(set(pa)) != len(pa):
                raise GraphError(f"duplicate parent in parents of {name!r}")
            for p in pa:
                if p == name:
                    raise GraphError(f"{name!r} lists itself as parent")
                if p not in seen:
                    raise UnknownNode(p)
            full[name] = pa
        self.nodes = nodes
        self.parents = full
        self._index = {n: i for i, n in enumerate(nodes)}
        children: dict[str, list[str]] = {n: [] for n in nodes}
        for name in nodes:
            for p in full[name]:
                children[p].append(name)
        self._children = {n: tuple(sorted(c, key=self._index.__getitem__)) for n, c in children.items()}
        self._order = _kahn(nodes, full)

    @classmethod
    def from_edges(cls, nodes: Iterable[str], edges: Iterable[tuple[str, str]], **kw) -> Dag:
        nodes = tuple(nodes)
        parents: dict[str, list[str]] = {n: [] for n in nodes}
        for u, v in edges:
            if v not in parents:
                raise UnknownNode(v)
            parents[v].append(u)
        return cls(nodes, parents, **kw)

    def __repr__(self) -> str:
        return f"Dag(nodes={list(self.nodes)!r}, edges={self.edges()!r})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Dag) and self.nodes == other.nodes and self.parents == other.parents

    def __hash__(self) -> int:
        return hash((self.nodes, tuple(self.parents[n] for n in self.nodes)))

    def __contains__(self, node: object) -> bool:
        return node in self._index

    def __len__(self) -> int:
        return len(self.nodes)

    def _check(self, node: str) -> None:
        if node not in self._index:
            raise UnknownNode(node)

    def index(self, node: str) -> int:
        self._check(node)
        return self._index[node]

    def children(self, node: str) -> tuple[str, ...]:
        self._check(node)
        return self._children[node]

    def edges(self) -> list[tuple[str, str]]:
        return [(p, n) for n in self.nodes for p in self.parents[n]]

    def roots(self) -> tuple[str, ...]:
        return tuple(n for n in self.nodes if not self.parents[n])

    def topo_order(self) -> tuple[str, ...]:
        return self._order

    def ancestors(self, node: str) -> set[str]:
        self._check(node)
        out: set[str] = set()
        stack = list(self.parents[node])
        while stack:
            p = stack.pop()
            if p not in out:
                out.add(p)
                stack.extend(self.parents[p])
        return out

    def descendants(self, node: str) -> set[str]:
        self._check(node)
        out: set[str] = set()
        stack = list(self._children[node])
        while stack:
            c = stack.pop()
            if c not in out:
                out.add(c)
                stack.extend(self._children[c])
        return out


def _kahn(nodes: tuple[str, ...], parents: Mapping[str, Sequence[str]]) -> tuple[str, ...]:
    # O(n^2) but deterministic: always take the earliest-declared ready node.
    placed: set[str] = set()
    order: list[str] = []
    remaining = list(nodes)
    while remaining:
        for i, n in enumerate(remaining):
            if all(p in placed for p in parents[n]):
                order.append(n)
                placed.add(n)
                del remaining[i]
                break
        else:
            raise CycleError(_node_on_cycle(remaining, parents))
    return tuple(order)


def _node_on_cycle(remaining: list[str], parents: Mapping[str, Sequence[str]]) -> str:
    left = set(remaining)
    node = remaining[0]
    visited: list[str] = []
    while node not in visited:
        visited.append(node)
        node = next(p for p in parents[node] if p in left)
    return node


def topo_sort(dag: Dag) -> list[str]:
    """Topological order; ties are broken by declaration order."""
    return list(dag.topo_order())


def ancestors(dag: Dag, node: str) -> set[str]:
    return dag.ancestors(node)


@dataclass(frozen=True)
class AugmentedDag:
    """A base DAG plus one explicit root noise node ``noise::X`` per node ``X``."""

    base: Dag
    noise_nodes: Mapping[str, str]
    dag: Dag

    def noise_edge(self, node: str) -> tuple[str, str]:
        return (self.noise_nodes[node], node)


def augment(dag: Dag) -> AugmentedDag:
    noise = {n: noise_node(n) for n in dag.nodes}
    nodes = tuple(noise[n] for n in dag.nodes) + dag.nodes
    parents = {n: (noise[n],) + dag.parents[n] for n in dag.nodes}
    return AugmentedDag(dag, noise, Dag(nodes, parents, allow_noise_names=True))
