"""Causal Shapley attributions based on hard interventions.

Players are the non-target nodes.  Two coalition functions are offered:

* uncertainty: ``nu(T) = sum_{x_T} p(x_T) psi(X_j | do(x_T))``, the average
  uncertainty left after adjusting ``T``;
* expectation: ``nu(T) = E[X_j | do(x_T)]`` for one observation ``x``.

The target itself is listed with the part no adjustment of other nodes can
account for, so the scores add up to ``psi(X_j)`` (uncertainty) or
``x_j - E[X_j]`` (expectation).
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from typing import Any

from ..errors import CausalIccError, NonNumericTarget
from ..expr import _is_num
from ..icc import AttributionReport, clip_scores, require_sink_target
from ..law import cached_law, exact_law
from ..model import DEFAULT_CAP, Fcm
from ..shapley import CoalitionFn, ShapleyConfig, shapley
from ..uncertainty import Measure, as_measure, check_measure, psi_from_joint

TOL = 1e-9


class BadObservation(CausalIccError, ValueError):
    pass


def _do_law(fcm: Fcm, do: Mapping[str, Any], cap: int):
    return exact_law(fcm, nodes=fcm.relevant(), do=do, cap=cap)


def _players(fcm: Fcm) -> list[str]:
    return [n for n in fcm.nodes if n != fcm.target]


def do_psi(fcm: Fcm, measure: Measure, T: list[str], cap: int = DEFAULT_CAP) -> float:
    """``sum_{x_T} p(x_T) psi(X_target | do(X_T = x_T))``."""
    anc = set(fcm.relevant())
    T = [n for n in fcm.order() if n in set(T) and n in anc]
    if not T:
        dist = cached_law(fcm, cap=cap).distribution([fcm.target])
        return psi_from_joint(dist, measure, 0, ())
    weights = cached_law(fcm, cap=cap).distribution(T)
    parts = []
    for xt, w in weights.items():
        dist = _do_law(fcm, dict(zip(T, xt)), cap).distribution([fcm.target])
        parts.append(w * psi_from_joint(dist, measure, 0, ()))
    return math.fsum(parts)


def causal_shapley_uncertainty(
    fcm: Fcm,
    measure: Measure | str = Measure.ENTROPY,
    shapley_cfg: ShapleyConfig | None = None,
    cap: int = DEFAULT_CAP,
) -> AttributionReport:
    """Shapley split of ``psi(X_target)`` using the do-averaged coalition function."""
    measure = as_measure(measure)
    shapley_cfg = shapley_cfg or ShapleyConfig()
    require_sink_target(fcm)
    check_measure(fcm, measure)
    players = _players(fcm)
    fn = CoalitionFn(len(players), lambda S: -do_psi(fcm, measure, [players[i] for i in S], cap), shapley_cfg.threads)
    res = shapley(fn, shapley_cfg)
    total = -fn.value_mask(0)
    residual = -fn.value_mask((1 << len(players)) - 1)
    raw = dict(zip(players, res.values))
    raw[fcm.target] = residual
    scores, clipped = clip_scores({n: raw[n] for n in fcm.nodes}, TOL)
    return AttributionReport(
        scores=scores,
        measure=measure.value,
        total=total,
        method={"baseline": "causal-shapley", "variant": "uncertainty", "shapley": res.method},
        seed=shapley_cfg.seed if shapley_cfg.method == "permutation" else None,
        diagnostics={"tolerance": TOL, "clipped_raw": clipped, "evaluations": res.evaluations_used},
    )


def _expectation(dist: Mapping[tuple, float]) -> float:
    if not all(_is_num(k[0]) for k in dist):
        raise NonNumericTarget("expectation needs a numeric target")
    return math.fsum(w * k[0] for k, w in dist.items())


def do_expectation(fcm: Fcm, do: Mapping[str, Any], cap: int = DEFAULT_CAP) -> float:
    anc = set(fcm.relevant())
    do = {k: v for k, v in do.items() if k in anc}
    law = _do_law(fcm, do, cap) if do else cached_law(fcm, cap=cap)
    return _expectation(law.distribution([fcm.target]))


def causal_shapley_expectation(
    fcm: Fcm,
    observation: Mapping[str, Any],
    shapley_cfg: ShapleyConfig | None = None,
    cap: int = DEFAULT_CAP,
) -> AttributionReport:
    """Per-observation attribution of ``x_target - E[X_target]``."""
    shapley_cfg = shapley_cfg or ShapleyConfig()
    require_sink_target(fcm)
    missing = set(fcm.nodes) - set(observation)
    if missing:
        raise BadObservation(f"observation lacks {sorted(missing)}")
    rel = list(fcm.relevant())
    joint = cached_law(fcm, cap=cap).distribution(rel)
    if joint.get(tuple(observation[n] for n in rel), 0.0) <= 0:
        raise BadObservation("observation has probability zero under the model")
    players = _players(fcm)
    fn = CoalitionFn(
        len(players),
        lambda S: do_expectation(fcm, {players[i]: observation[players[i]] for i in S}, cap),
        shapley_cfg.threads,
    )
    res = shapley(fn, shapley_cfg)
    mean = fn.value_mask(0)
    x_t = observation[fcm.target]
    if not _is_num(x_t):
        raise NonNumericTarget("expectation needs a numeric target")
    scores = dict(zip(players, res.values))
    scores[fcm.target] = x_t - fn.value_mask((1 << len(players)) - 1)
    return AttributionReport(
        scores={n: scores[n] for n in fcm.nodes},
        measure="expectation",
        total=x_t - mean,
        method={"baseline": "causal-shapley", "variant": "expectation", "shapley": res.method},
        seed=shapley_cfg.seed if shapley_cfg.method == "permutation" else None,
        diagnostics={"mean": mean, "observation": dict(observation), "evaluations": res.evaluations_used},
    )
