"""Edge strength as the relative entropy between the joint and its post-cutting version.

Cutting ``X_i -> X_j`` replaces ``p(x_j | pa_j)`` by
``sum_{x_i'} p(x_j | pa_j without x_i, x_i') p(x_i')``.  Every other factor
is unchanged, so the divergence only needs the law of ``(PA_j, X_j)``.
"""

from __future__ import annotations

import math

from ..errors import CausalIccError
from ..law import cached_law
from ..model import DEFAULT_CAP, Fcm


class UnknownEdge(CausalIccError, KeyError):
    pass


def node_kernel(fcm: Fcm, node: str, parent_values: dict) -> dict:
    """``p(x_node | pa_node)`` from the mechanism and the noise support."""
    values, probs = fcm.noises[node].support()
    out: dict = {}
    for v, p in zip(values, probs.tolist()):
        x = fcm.eval_node(node, parent_values, v)
        out[x] = out.get(x, 0.0) + p
    return out


def causal_strength_edge(fcm: Fcm, edge: tuple[str, str], cap: int = DEFAULT_CAP) -> float:
    """``D(P || P_cut)`` in bits for the edge ``(tail, head)``."""
    fcm.check()
    i, j = edge
    if j not in fcm.dag or i not in fcm.parents(j):
        raise UnknownEdge(f"no edge {i}->{j}")
    pa = list(fcm.parents(j))
    law = cached_law(fcm, j, cap)
    joint = law.distribution(pa + [j])
    p_i = law.distribution([i])
    k = pa.index(i)
    kernels: dict[tuple, dict] = {}
    cut: dict[tuple, dict] = {}
    terms = []
    for key, w in joint.items():
        pvals, xj = key[:-1], key[-1]
        if pvals not in kernels:
            kernels[pvals] = node_kernel(fcm, j, dict(zip(pa, pvals)))
        rest = pvals[:k] + pvals[k + 1 :]
        if rest not in cut:
            mix: dict = {}
            for (xi,), wi in p_i.items():
                alt = pvals[:k] + (xi,) + pvals[k + 1 :]
                if alt not in kernels:
                    kernels[alt] = node_kernel(fcm, j, dict(zip(pa, alt)))
                for x, q in kernels[alt].items():
                    mix[x] = mix.get(x, 0.0) + wi * q
            cut[rest] = mix
        terms.append(w * math.log2(kernels[pvals][xj] / cut[rest][xj]))
    value = math.fsum(terms)
    return 0.0 if -1e-12 < value < 0 else value
