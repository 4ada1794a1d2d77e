"""Random small finite models for property tests and experiments."""

from __future__ import annotations

import numpy as np

from .model import Categorical, Fcm, build_fcm

_TEMPLATES = (
    "({a} + {b}) mod {k}",
    "{a} xor {b}",
    "max({a}, {b})",
    "min({a}, {b})",
    "if({a} == {b}, {a}, {k} - 1)",
    "({a} * {b} + 1) mod {k}",
    "abs({a} - {b})",
)


def _probs(rng: np.random.Generator, k: int) -> list[float]:
    w = rng.integers(1, 6, size=k).astype(float)
    if rng.random() < 0.2:
        w[rng.integers(k)] = 0.0
        if w.sum() == 0:
            w[0] = 1.0
    return (w / w.sum()).tolist()


def random_mechanism(rng: np.random.Generator, parents: list[str], k: int) -> str:
    terms = [f"pa.{p}" for p in parents] + ["n"]
    rng.shuffle(terms)
    expr = terms[0]
    for t in terms[1:]:
        expr = _TEMPLATES[int(rng.integers(len(_TEMPLATES)))].format(a=f"({expr})", b=t, k=k)
    return expr


def random_enumerable_fcm(
    rng: np.random.Generator, n_max: int = 5, support_max: int = 4, n_min: int = 1, edge_prob: float = 0.5
) -> Fcm:
    """Random DAG over ``X0..X{n-1}`` with integer mechanisms; the last node is the sink target.

    Noises are categorical on ``0..s-1`` with ``s <= support_max``.
    """
    n = int(rng.integers(n_min, n_max + 1))
    names = [f"X{i}" for i in range(n)]
    rows = []
    for i, name in enumerate(names):
        parents = [names[j] for j in range(i) if rng.random() < edge_prob]
        if i == n - 1 and n > 1 and not parents:
            parents = [names[int(rng.integers(i))]]
        k = int(rng.integers(2, support_max + 1))
        noise = Categorical(list(range(k)), _probs(rng, k))
        rows.append((name, parents, random_mechanism(rng, parents, k), noise))
    return build_fcm(rows, names[-1])


def random_collider(rng: np.random.Generator, causes_max: int = 3, support_max: int = 3) -> Fcm:
    """Independent root causes feeding one effect ``Y``."""
    k = int(rng.integers(2, causes_max + 1))
    rows = []
    causes = [f"X{i}" for i in range(k)]
    for c in causes:
        s = int(rng.integers(2, support_max + 1))
        rows.append((c, [], "n", Categorical(list(range(s)), _probs(rng, s))))
    s = int(rng.integers(1, support_max + 1))
    rows.append(("Y", causes, random_mechanism(rng, causes, max(s, 2)), Categorical(list(range(s)), _probs(rng, s))))
    return build_fcm(rows, "Y")
