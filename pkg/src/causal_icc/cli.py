"""Command-line front end.

Exit codes: 0 success, 1 semantic or runtime failure, 2 unparseable input.
Reports are JSON with sorted keys, so identical inputs give identical bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import __version__
from . import example_models
from .baselines import (
    Boundary,
    FlowConfig,
    causal_shapley_expectation,
    causal_shapley_uncertainty,
    causal_strength_edge,
    conservation_residuals,
    information_flow,
    shapley_flow,
)
from .errors import CausalIccError
from .graph import augment
from .icc import icc_ordering, icc_shapley
from .model import (
    Fcm,
    ModelFormatError,
    ModelValidationError,
    loads_model,
    sample_do,
    sample_observational,
    sample_structure_preserving,
)
from .shapley import ShapleyConfig
from .uncertainty import EstimatorConfig

REPORT_VERSION = 1
TOOL = "causal-icc"


class UsageError(Exception):
    """Bad flag values detected before any computation."""


@dataclass
class RunConfig:
    command: str
    model_path: str
    flags: dict[str, Any] = field(default_factory=dict)
    output: str | None = None


# -- Helpers ---------------------------------------------------------------


def _read_model(path: str) -> tuple[Fcm, bytes]:
    p = Path(path)
    if not p.exists():
        try:
            p = example_models.path(path)
        except KeyError:
            raise UsageError(f"model file {path!r} not found") from None
    data = p.read_bytes()
    return loads_model(data), data


def _parse_scalar(text: str) -> Any:
    try:
        v = json.loads(text)
    except json.JSONDecodeError:
        return text
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise UsageError(f"value {text!r} must be a number or a string")
    return v


def _assignments(items: Sequence[str] | None) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for item in items or ():
        for part in item.split(","):
            if "=" not in part:
                raise UsageError(f"expected NODE=VALUE, got {part!r}")
            k, v = part.split("=", 1)
            out[k.strip()] = _parse_scalar(v.strip())
    return out


def _names(items: Sequence[str] | None) -> list[str]:
    out: list[str] = []
    for item in items or ():
        out.extend(x.strip() for x in item.split(",") if x.strip())
    return out


def _clean(obj: Any) -> Any:
    """Make a report JSON-safe: tuple keys become strings, non-finite floats become strings."""
    if isinstance(obj, dict):
        return {(k if isinstance(k, str) else "->".join(map(str, k)) if isinstance(k, tuple) else str(k)): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _dump(doc: dict[str, Any]) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _envelope(cfg: RunConfig, model_bytes: bytes, report: dict[str, Any], *, seed, method, tolerance) -> dict[str, Any]:
    return {
        "report_version": REPORT_VERSION,
        "tool": {"name": TOOL, "version": __version__},
        "command": cfg.command,
        "model": {"path": cfg.model_path, "sha256": hashlib.sha256(model_bytes).hexdigest()},
        "flags": cfg.flags,
        "seed": seed,
        "method": method,
        "tolerance": tolerance,
        "report": report,
    }


def _threads() -> int:
    raw = os.environ.get("ICC_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"ICC_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("ICC_THREADS must be >= 1")
    return n


def _estimator(args) -> EstimatorConfig:
    if args.method == "exact":
        return EstimatorConfig("exact")
    outer = args.outer if args.outer is not None else args.samples
    inner = args.inner if args.inner is not None else args.samples
    if outer < 1 or inner < 1:
        raise UsageError("sample counts must be >= 1")
    return EstimatorConfig("monte_carlo", outer, inner, args.seed)


def _shapley_cfg(args) -> ShapleyConfig:
    if args.permutations is None:
        return ShapleyConfig("exact", threads=_threads())
    if args.permutations < 1:
        raise UsageError("--permutations must be >= 1")
    return ShapleyConfig("permutation", args.permutations, args.seed, threads=_threads())


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- Commands --------------------------------------------------------------


def cmd_validate(args) -> int:
    _read_model(args.model)
    sys.stderr.write(_dump({"valid": True, "diagnostics": []}))
    return 0


def cmd_sample(args) -> int:
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    do = _assignments(args.do)
    sp = _names(args.structure_preserving)
    if do and sp:
        raise UsageError("--do and --structure-preserving are mutually exclusive")
    fcm, _ = _read_model(args.model)
    if do:
        batch = sample_do(fcm, do, args.count, args.seed)
    elif sp:
        batch = sample_structure_preserving(fcm, sp, args.count, args.seed)
    else:
        batch = sample_observational(fcm, args.count, args.seed)
    text = batch.to_csv() if args.format == "csv" else _dump(batch.to_dict())
    _emit(text, args.output)
    return 0


def cmd_icc(args) -> int:
    est = _estimator(args)
    sh = _shapley_cfg(args)
    ordering = _names(args.ordering)
    if args.mode == "plain" and not ordering:
        raise UsageError("--mode plain needs --ordering")
    fcm, data = _read_model(args.model)
    if args.mode == "plain":
        report = icc_ordering(fcm, args.measure, ordering, est)
    else:
        report = icc_shapley(fcm, args.measure, est, sh)
    cfg = RunConfig("icc", args.model, _flags(args))
    doc = _envelope(
        cfg,
        data,
        report.to_dict(),
        seed=report.seed,
        method={"estimator": est.method, "mode": args.mode, "shapley": sh.method},
        tolerance=report.diagnostics.get("tolerance"),
    )
    _emit(_dump(doc), args.output)
    return 0


def _edge(text: str) -> tuple[str, str]:
    for sep in ("->", ":"):
        if sep in text:
            u, v = text.split(sep, 1)
            return u.strip(), v.strip()
    raise UsageError(f"edge must look like TAIL:HEAD, got {text!r}")


def cmd_baseline(args) -> int:
    which = args.which
    fcm, data = _read_model(args.model)
    tol = 1e-9
    seed = None
    if which == "info-flow":
        A, B, S = _names(args.A), _names(args.B), _names(args.S)
        if not A or not B:
            raise UsageError("info-flow needs --A and --B")
        s_values = _assignments(args.s_values) or None
        value = information_flow(fcm, A, B, S, s_values, average=args.do_average)
        report = {"value": value, "units": "bits", "A": A, "B": B, "S": S, "average": args.do_average}
        if s_values:
            report["s_values"] = s_values
    elif which == "strength":
        if not args.edge:
            raise UsageError("strength needs --edge TAIL:HEAD")
        edge = _edge(args.edge)
        report = {"value": causal_strength_edge(fcm, edge), "units": "bits", "edge": list(edge)}
    elif which == "causal-shapley":
        sh = _shapley_cfg(args)
        seed = sh.seed if sh.method == "permutation" else None
        if args.variant == "expectation":
            obs = _assignments(args.observation)
            if not obs:
                raise UsageError("the expectation variant needs --observation NODE=VALUE,...")
            rep = causal_shapley_expectation(fcm, obs, sh)
        else:
            rep = causal_shapley_uncertainty(fcm, args.measure, sh)
        report = rep.to_dict()
    elif which == "shapley-flow":
        fc = FlowConfig(seed=args.seed, path_cap=args.path_cap)
        boundary = None
        if args.data_side:
            D = set(_names(args.data_side))
            nodes = augment_nodes(fcm) if args.aug else list(fcm.nodes)
            boundary = Boundary(D, [n for n in nodes if n not in D])
        if args.uncertainty:
            if not args.aug:
                raise UsageError("--uncertainty needs --aug")
            attr = shapley_flow(fcm, boundary, metric=args.uncertainty, augmented=True, cfg=fc, estimator=EstimatorConfig("exact"))
        else:
            fore, back = _assignments(args.foreground), _assignments(args.background)
            if not fore or not back:
                raise UsageError("the value metric needs --foreground and --background")
            attr = shapley_flow(fcm, boundary, fore, back, metric="value", augmented=args.aug, cfg=fc)
        dag = attr_dag(fcm, args.aug)
        report = attr.to_dict()
        report["conservation_residuals"] = conservation_residuals(attr, dag, fcm.target)
        if args.aug and args.uncertainty:
            report["node_scores"] = {e[1]: s for e, s in attr.edge_scores.items() if e[0].startswith("noise::")}
        seed = None if attr.exhaustive else fc.seed
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown baseline {which!r}")
    cfg = RunConfig("baseline", args.model, _flags(args))
    doc = _envelope(cfg, data, report, seed=seed, method={"baseline": which}, tolerance=tol)
    _emit(_dump(doc), args.output)
    return 0


def augment_nodes(fcm: Fcm) -> list[str]:
    return list(augment(fcm.dag).dag.nodes)


def attr_dag(fcm: Fcm, aug: bool):
    return augment(fcm.dag).dag if aug else fcm.dag


def _flags(args) -> dict[str, Any]:
    skip = {"func", "model", "output", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# -- Parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=TOOL, description="Intrinsic causal contribution and baselines for FCM files.")
    p.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a model file")
    v.add_argument("model")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("sample", help="draw observational or interventional samples")
    s.add_argument("model")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--do", action="append", metavar="NODE=VALUE")
    s.add_argument("--structure-preserving", nargs="+", metavar="NODE")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--output")
    s.set_defaults(func=cmd_sample)

    def estimator_flags(q):
        q.add_argument("--measure", choices=("entropy", "variance"), default="entropy")
        q.add_argument("--method", choices=("exact", "mc"), default="exact")
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--samples", type=int, default=4000, help="outer and inner sample count for --method mc")
        q.add_argument("--outer", type=int)
        q.add_argument("--inner", type=int)
        q.add_argument("--permutations", type=int, help="use permutation sampling for the Shapley values")
        q.add_argument("--output")

    i = sub.add_parser("icc", help="intrinsic causal contributions to the target")
    i.add_argument("model")
    estimator_flags(i)
    i.add_argument("--mode", choices=("shapley", "plain"), default="shapley")
    i.add_argument("--ordering", action="append", metavar="NODES")
    i.set_defaults(func=cmd_icc)

    b = sub.add_parser("baseline", help="comparison measures")
    b.add_argument("model")
    b.add_argument("--which", choices=("info-flow", "strength", "causal-shapley", "shapley-flow"), required=True)
    estimator_flags(b)
    b.add_argument("--A", action="append")
    b.add_argument("--B", action="append")
    b.add_argument("--S", action="append")
    b.add_argument("--s-values", action="append", metavar="NODE=VALUE")
    b.add_argument("--do-average", action="store_true")
    b.add_argument("--edge")
    b.add_argument("--variant", choices=("uncertainty", "expectation"), default="uncertainty")
    b.add_argument("--observation", action="append", metavar="NODE=VALUE")
    b.add_argument("--aug", action="store_true", help="use the noise-augmented graph")
    b.add_argument("--uncertainty", choices=("entropy", "variance"))
    b.add_argument("--foreground", action="append", metavar="ROOT=VALUE")
    b.add_argument("--background", action="append", metavar="ROOT=VALUE")
    b.add_argument("--data-side", action="append", metavar="NODES")
    b.add_argument("--path-cap", type=int, default=10)
    b.set_defaults(func=cmd_baseline)
    return p


def _error(kind: str, message: str, diagnostics: list | None = None) -> None:
    doc: dict[str, Any] = {"error": {"type": kind, "message": message}}
    if diagnostics is not None:
        doc["diagnostics"] = diagnostics
    sys.stderr.write(_dump(doc))


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ModelFormatError as exc:
        _error("ModelFormatError", str(exc))
        return 2
    except ModelValidationError as exc:
        _error("ModelValidationError", str(exc), [d.to_dict() for d in exc.diagnostics])
        return 1
    except UsageError as exc:
        _error("UsageError", str(exc))
        return 1
    except (CausalIccError, KeyError, ValueError, TypeError) as exc:
        _error(type(exc).__name__, str(exc))
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
