"""Command line entry point.

Subcommands: contact, sweep, exponent, coeffs, ruled, verify, corpus.
Exit codes: 0 for success and for negative mathematical verdicts, 1 for
usage/scene errors, 2 for numerical failures (no convergence, ambiguous
projection, jet domain errors, ...). Diagnostics go to stderr; data goes
to stdout or to files, written atomically.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile

import numpy as np

from . import corpus as corpus_mod
from . import expr as ex
from .config import Tolerances, geometric_grid
from .contact import ContactError, contact_order_jet_recharted, contact_order_metric
from .jets import JetError
from .manifold import ManifoldError
from .osculate import ruledness_check, verify_theorem
from .scene import Scene, SceneError, load_scene, make_params
from .sweep import (
    SweepError,
    coefficients_csv,
    extract_t_polynomials,
    growth_exponent,
    volume_csv,
    volume_series,
)

_TOL_FIELDS = [f.name for f in dataclasses.fields(Tolerances)]


class UsageError(Exception):
    pass


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".osclab-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, path: str | None):
    if path:
        _atomic_write(path, text)
    else:
        sys.stdout.write(text)


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _add_common(p: argparse.ArgumentParser, scene_required: bool = True):
    p.add_argument("--scene", required=scene_required, help="scene JSON file")
    p.add_argument("--seed", type=int, default=0,
                   help="RNG seed (OSCLAB_SEED overrides)")
    p.add_argument("--quad-order", type=int, default=None)
    p.add_argument("--quad-cells", type=int, default=None)
    p.add_argument("--t-grid", default=None,
                   help="geometric:<t0>,<n>")
    p.add_argument("--span", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--max-order", type=int, default=None)
    p.add_argument("--point", default=None, help="chart coordinates, comma separated")
    p.add_argument("--report", default=None, help="write the JSON report here")
    p.add_argument("--out", default=None, help="write CSV data here")
    for name in _TOL_FIELDS:
        p.add_argument(f"--tol-{name.replace('_', '-')}", type=float,
                       default=None, dest=f"tol_{name}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="osclab",
        description="osculation, swept volume, and ruled-submanifold verdicts",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("contact", "jet and metric contact order of the family curve at a point"),
        ("sweep", "swept-volume series as CSV"),
        ("exponent", "growth exponent of the swept volume"),
        ("coeffs", "t-polynomial coefficients of the volume element as CSV"),
        ("ruled", "finite-window containment check of the curve family"),
        ("verify", "full theorem pipeline"),
        ("corpus", "run the built-in example suite"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p, scene_required=(name != "corpus"))
    return parser


def _seed(args) -> int:
    env = os.environ.get("OSCLAB_SEED")
    if env is not None:
        return int(env)
    return args.seed


def _tolerances(args) -> Tolerances:
    overrides = {}
    for name in _TOL_FIELDS:
        v = getattr(args, f"tol_{name}")
        if v is not None:
            overrides[name] = v
    return Tolerances().override(**overrides)


def _t_grid(args, params):
    if args.t_grid is None:
        return params.t_grid()
    spec_text = args.t_grid
    if not spec_text.startswith("geometric:"):
        raise UsageError("--t-grid must look like geometric:<t0>,<n>")
    try:
        t0, count = spec_text[len("geometric:"):].split(",")
        return geometric_grid(float(t0), int(count))
    except ValueError as err:
        raise UsageError(f"bad --t-grid value: {err}") from None


def _load(args) -> Scene:
    tol = _tolerances(args)
    scene = load_scene(args.scene, tol=tol)
    raw = dict(scene.raw.get("params") or {})
    if args.quad_order is not None:
        raw["quad_order"] = args.quad_order
    if args.quad_cells is not None:
        raw["quad_cells"] = args.quad_cells
    if args.span is not None:
        raw["span"] = args.span
    if args.samples is not None:
        raw["samples"] = args.samples
    scene.params = make_params(raw, tol)
    return scene


def _parse_point(args, m: int) -> np.ndarray:
    if args.point is None:
        raise UsageError("--point is required for this command")
    try:
        vals = [float(v) for v in args.point.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse --point {args.point!r}") from None
    if len(vals) != m:
        raise UsageError(f"--point needs {m} chart coordinates")
    return np.array(vals)


def _need_family(scene: Scene):
    if scene.family is None:
        raise UsageError(f"scene {scene.name!r} has no curve family")
    return scene.family


def _cmd_contact(args) -> int:
    scene = _load(args)
    family = _need_family(scene)
    M = scene.manifold
    x = _parse_point(args, M.m)
    max_order = args.max_order or (scene.k * (M.m + 1) + 2)
    curve = family.curve_at(x)
    jet = contact_order_jet_recharted(curve, M, max_order, scene.params.tol)
    metric = contact_order_metric(curve, M, _t_grid(args, scene.params),
                                  scene.params.tol)
    record = {
        "point": x.tolist(),
        "jet_order": str(jet),
        "metric_slope": metric.slope,
        "metric_order": "numerically contained" if metric.contained else metric.order,
        "config": scene.config_dict(),
    }
    _emit(_json_text(record), args.report)
    return 0


def _cmd_sweep(args) -> int:
    scene = _load(args)
    family = _need_family(scene)
    series = volume_series(family, _t_grid(args, scene.params), scene.params.quad)
    _emit(volume_csv(series), args.out)
    return 0


def _cmd_exponent(args) -> int:
    scene = _load(args)
    family = _need_family(scene)
    series = volume_series(family, _t_grid(args, scene.params), scene.params.quad)
    fit = growth_exponent(series, scene.params.tol)
    record = {
        "t": [s.t for s in series],
        "vol": [s.value for s in series],
        "err": [s.error for s in series],
        "identically_zero": fit.identically_zero,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "residual": fit.residual,
        "config": scene.config_dict(),
    }
    _emit(_json_text(record), args.report)
    return 0


def _cmd_coeffs(args) -> int:
    scene = _load(args)
    family = _need_family(scene)
    X = scene.manifold.grid(scene.params.samples, margin=scene.params.margin)
    tables = [extract_t_polynomials(family, x, tol=scene.params.tol) for x in X]
    _emit(coefficients_csv(tables, scene.manifold.m), args.out)
    return 0


def _cmd_ruled(args) -> int:
    scene = _load(args)
    family = _need_family(scene)
    rho = scene.params.tube_rho_max
    tube = scene.manifold.tube_radius(rho_max=rho) if rho is not None else None
    rv = ruledness_check(scene.manifold, family.curve_at, scene.params.span,
                         samples_per_axis=scene.params.samples,
                         margin=scene.params.margin, tube=tube,
                         tol=scene.params.tol)
    record = {
        "verdict": rv.verdict,
        "max_distance": rv.max_distance,
        "tolerance": rv.tolerance,
        "counted": rv.counted,
        "skipped": rv.skipped,
        "witness": None if rv.witness is None else {
            "x": rv.witness.chart.tolist(),
            "s": rv.witness.s,
            "distance": rv.witness.distance,
        },
        "per_sample": rv.per_sample,
        "config": scene.config_dict(),
    }
    _emit(_json_text(record), args.report)
    return 0


def _cmd_verify(args) -> int:
    scene = _load(args)
    report = verify_theorem(scene, seed=_seed(args))
    _emit(_json_text(report.as_dict()), args.report)
    print(f"{scene.name}: {report.verdict}", file=sys.stderr)
    return 0


def _cmd_corpus(args) -> int:
    tol = _tolerances(args)
    rows = []
    for name in corpus_mod.names():
        scene = corpus_mod.load(name, tol=tol)
        report = verify_theorem(scene, seed=_seed(args))
        step = "-" if report.first_failure is None else report.first_failure["step"]
        rows.append({"scene": name, "verdict": report.verdict, "first_failure": step})
        print(f"{name:24s} {report.verdict:18s} {step}", file=sys.stderr)
    text = _json_text(rows)
    if args.report:
        _emit(text, args.report)
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "contact": _cmd_contact,
    "sweep": _cmd_sweep,
    "exponent": _cmd_exponent,
    "coeffs": _cmd_coeffs,
    "ruled": _cmd_ruled,
    "verify": _cmd_verify,
    "corpus": _cmd_corpus,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return 0 if err.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, SceneError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ManifoldError, ContactError, SweepError, JetError,
            ex.DomainError, ex.UnboundVariable) as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return 2


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
