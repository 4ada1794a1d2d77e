"""Information flow under randomized interventions.

``I(A -> B | do(x_S))`` is the mutual information between ``X_A`` and
``X_B`` when ``X_S`` is set to ``x_S`` and ``X_A`` is randomized with
``p(x_A | do(x_S))``.  The averaged variant weights each ``x_S`` by its
observational probability.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence

from ..errors import CausalIccError
from ..law import exact_law
from ..model import DEFAULT_CAP, Fcm
from ..uncertainty import mutual_information


class OverlapError(CausalIccError, ValueError):
    pass


def _closure(fcm: Fcm, nodes: Iterable[str]) -> set[str]:
    out: set[str] = set()
    for n in nodes:
        out |= fcm.dag.ancestors(n) | {n}
    return out


def interventional_distribution(
    fcm: Fcm, variables: Sequence[str], do: Mapping[str, object], cap: int = DEFAULT_CAP
) -> dict[tuple, float]:
    """``p(x_variables | do(...))`` by truncated factorization over the noise grid."""
    nodes = _closure(fcm, variables)
    return exact_law(fcm, nodes=[n for n in fcm.order() if n in nodes], do=do, cap=cap).distribution(list(variables))


def _flow_given(fcm: Fcm, A: Sequence[str], B: Sequence[str], do_s: Mapping[str, object], cap: int) -> float:
    pa = interventional_distribution(fcm, A, do_s, cap)
    joint: dict[tuple, float] = {}
    for a, wa in pa.items():
        pb = interventional_distribution(fcm, B, {**do_s, **dict(zip(A, a))}, cap)
        for b, wb in pb.items():
            joint[(a, b)] = wa * wb
    # The product weights can drift from 1 by a few ulps.
    total = math.fsum(joint.values())
    return mutual_information({k: v / total for k, v in joint.items()})


def information_flow(
    fcm: Fcm,
    A: Iterable[str],
    B: Iterable[str],
    S: Iterable[str] = (),
    s_values: Mapping[str, object] | None = None,
    *,
    average: bool = False,
    cap: int = DEFAULT_CAP,
) -> float:
    """Information flow from ``A`` to ``B`` in bits.

    Args:
        fcm: Finite model.
        A: Randomized source nodes.
        B: Receiving nodes.
        S: Adjusted background nodes.
        s_values: Values ``x_S`` for the conditional flow.
        average: Average the conditional flow over observational ``p(x_S)``
            instead of using ``s_values``.
        cap: Enumeration cap per interventional law.
    """
    fcm.check()
    A, B, S = list(A), list(B), list(S)
    for n in A + B + S:
        if n not in fcm.dag:
            raise KeyError(f"unknown node {n!r}")
    if not A or not B:
        raise ValueError("A and B must be nonempty")
    if len(set(A) | set(B) | set(S)) != len(A) + len(B) + len(S):
        raise OverlapError("A, B and S must be disjoint")
    if not S:
        return _flow_given(fcm, A, B, {}, cap)
    if average:
        dist = interventional_distribution(fcm, S, {}, cap)
        return math.fsum(w * _flow_given(fcm, A, B, dict(zip(S, s)), cap) for s, w in dist.items())
    if s_values is None or set(s_values) != set(S):
        raise ValueError("give values for every node in S, or set average=True")
    return _flow_given(fcm, A, B, {n: s_values[n] for n in S}, cap)
