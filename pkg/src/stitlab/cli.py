"""Command-line front end.

Exit codes: 0 all gates pass, 1 a gate failed, 2 usage error,
3 numeric or geometry failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import stats, theory
from .engine import run_mnw
from .functionals import BoxIndicator, FunctionalSpec, cells_functional, sigma
from .geometry import DegenerateGeometryError, make_ball_approx, make_box, make_simplex

EXIT_OK, EXIT_GATE, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
SUITES = ("mean", "var", "crofton", "chord", "pht", "scaling", "section", "iterate")


class UsageError(ValueError):
    pass


@dataclass
class Config:
    command: str = "simulate"
    d: int = 3
    window: str = "box:1"
    t: list[float] = field(default_factory=lambda: [1.5])
    seed: int = 42
    reps: int | None = None
    R: list[float] = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0])
    threads: int = 1
    out: str = "out"
    format: str = "json"
    mc_pairs: int = 1_000_000
    quad_points: int = 16
    tolerance_sigma: float = 3.0
    suites: list[str] = field(default_factory=lambda: list(SUITES))
    g: str | None = None
    h: str | None = None
    inputs: list[str] = field(default_factory=list)

    def canonical(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.d not in (2, 3):
            raise UsageError("--d must be 2 or 3")
        if self.format not in ("json", "csv"):
            raise UsageError("--format must be json or csv")
        if self.reps is not None and self.reps < 2:
            raise UsageError("--reps must be at least 2")
        if any(x < 0 for x in self.t):
            raise UsageError("--t must be nonnegative")
        if self.mc_pairs < theory.MIN_BUDGET:
            raise UsageError(f"--mc-pairs must be at least {theory.MIN_BUDGET}")
        bad = set(self.suites) - set(SUITES)
        if bad:
            raise UsageError(f"unknown suites {sorted(bad)}")
        parse_window(self.window, self.d)


def parse_window(spec: str, d: int = 3):
    """``box:a``, ``box:a,b,c``, ``simplex`` or ``ball_approx:n``."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "box":
            sides = [float(x) for x in arg.split(",")] if arg else [1.0]
            if len(sides) == 1:
                sides = sides * d
            if len(sides) != d or min(sides) <= 0:
                raise ValueError
            return make_box(sides, d=d)
        if kind == "simplex" and not arg:
            return make_simplex(d)
        if kind == "ball_approx":
            return make_ball_approx(d, int(arg))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad window spec {spec!r}: {exc}") from None
    raise UsageError(f"bad window spec {spec!r}")


def parse_box(spec: str, d: int) -> BoxIndicator:
    """``box:x0,..,xd-1,y0,..,yd-1`` (lower then upper corner)."""
    kind, _, arg = spec.partition(":")
    vals = [float(x) for x in arg.split(",")] if arg else []
    if kind != "box" or len(vals) != 2 * d:
        raise UsageError(f"bad test-function spec {spec!r}")
    try:
        return BoxIndicator(vals[:d], vals[d:])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _floats(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stitlab", description="STIT tessellation simulation and verification")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with defaults; flags win")
    common.add_argument("--d", type=int)
    common.add_argument("--window")
    common.add_argument("--t", type=_floats)
    common.add_argument("--seed", type=int)
    common.add_argument("--reps", type=int)
    common.add_argument("--R", type=_floats)
    common.add_argument("--threads", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--mc-pairs", dest="mc_pairs", type=int)
    common.add_argument("--quad-points", dest="quad_points", type=int)
    common.add_argument("--tolerance-sigma", dest="tolerance_sigma", type=float)
    common.add_argument("--dump-config", action="store_true", help="print the canonical config and exit")
    sub.add_parser("simulate", parents=[common], help="one realization with exports")
    v = sub.add_parser("verify", parents=[common], help="gated verification suites")
    v.add_argument("--suites", type=lambda s: [x for x in s.split(",") if x], help=",".join(SUITES))
    sub.add_parser("clt", parents=[common], help="CLT sweep over R")
    f = sub.add_parser("facecov", parents=[common], help="face-measure covariance experiment")
    f.add_argument("--g", help="box:lo..,hi.. (default: central half-size box)")
    f.add_argument("--h", help="box:lo..,hi.. (default: same as g)")
    r = sub.add_parser("report", parents=[common], help="merge JSON reports into a table")
    r.add_argument("inputs", nargs="*")
    return p


def resolve_config(args: argparse.Namespace) -> Config:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    data["command"] = args.command
    for f in fields(Config):
        v = getattr(args, f.name, None)
        if f.name != "command" and v is not None:
            data[f.name] = v
    if "threads" not in data:
        data["threads"] = os.cpu_count() or 1
    return Config.from_dict(data)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: Config) -> int:
    W = parse_window(cfg.window, cfg.d)
    t = cfg.t[0]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    tess = run_mnw(W, t, stats.replication_rng(cfg.seed, 0))
    tess.write_facet_csv(out / "facets.csv")
    tess.write_off(out / "cells.off", out / "facets.off")
    res = stats.identity_residuals(tess)
    summary = {
        "schema_version": stats.SCHEMA_VERSION,
        "config": {k: v for k, v in asdict(cfg).items() if k not in ("out", "threads")},
        "n_cells": len(tess.cells),
        "n_facets": len(tess.facets),
        "resamples": tess.resamples,
        "sigma": {f"V{j}": sigma(tess, FunctionalSpec.volume(j)) for j in range(cfg.d)},
        "F": {f"F{j}": cells_functional(tess, j) for j in range(cfg.d + 1)},
        "identity_residuals": res,
        "hash": tess.summary_hash(),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(f"cells={summary['n_cells']} facets={summary['n_facets']} -> {out}")
    return EXIT_OK if _residuals_ok(res) else EXIT_GATE


def _residuals_ok(res: dict) -> bool:
    return all(v <= 1e-9 for v in res.values())


def cmd_verify(cfg: Config) -> int:
    W = parse_window(cfg.window, cfg.d)
    if cfg.d != 3:
        raise UsageError("verify suites need --d 3")
    n = cfg.reps
    kw = dict(threads=cfg.threads)
    t = cfg.t[0]
    runners = {
        "mean": lambda: stats.suite_mean(W, t=t, n_reps=n or 2000, seed=cfg.seed, **kw),
        "var": lambda: stats.suite_var(W, t_list=tuple(cfg.t) if len(cfg.t) > 1 else (0.75, 1.5),
                                     n_reps=n or 5000, mc_pairs=cfg.mc_pairs, seed=cfg.seed, **kw),
        "crofton": lambda: stats.suite_crofton({cfg.window: W}, n_planes=max(10 * (n or 10_000), 1000),
                                               seed=cfg.seed),
        "chord": lambda: stats.suite_chord(mc_pairs=cfg.mc_pairs, seed=cfg.seed),
        "pht": lambda: stats.suite_pht(W, t=t, n_reps=n or 2000, seed=cfg.seed, **kw)
        + stats.suite_facet_mixture(W, t=t, n_reps=n or 2000, grid_points=cfg.quad_points,
                                    reps_per_point=max((n or 2000) // 4, 2), seed=cfg.seed, **kw),
        "scaling": lambda: stats.suite_scaling(W, t=2.0, n_reps=n or 2000, seed=cfg.seed, **kw),
        "section": lambda: stats.suite_section(W, t=t, n_reps=n or 2000, seed=cfg.seed, **kw),
        "iterate": lambda: stats.suite_iterate(W, t / 2, t / 2, n_reps=n or 2000, seed=cfg.seed, **kw),
    }
    rep = stats.ExperimentReport("verify", meta={"config": asdict(cfg), "k_sigma": stats.K_SIGMA})
    for name in cfg.suites:
        rows = runners[name]()
        for r in rows:
            r.note = f"[{name}] {r.note}".strip()
        rep.extend(rows)
    return _emit(rep, cfg)


def cmd_clt(cfg: Config) -> int:
    W = parse_window(cfg.window, cfg.d)
    if cfg.d != 3:
        raise UsageError("clt needs --d 3")
    t_grid = [x for x in cfg.t if 0 <= x <= 1] or [1.0]
    rep = stats.clt_sweep(W, tuple(t_grid), tuple(cfg.R), n_reps=cfg.reps or 1000, seed=cfg.seed,
                          threads=cfg.threads, mc_pairs=cfg.mc_pairs)
    rep.meta["config"] = asdict(cfg)
    return _emit(rep, cfg)


def cmd_facecov(cfg: Config) -> int:
    W = parse_window(cfg.window, cfg.d)
    g = parse_box(cfg.g, cfg.d) if cfg.g else stats.default_box(W)
    h = parse_box(cfg.h, cfg.d) if cfg.h else g
    try:
        rep = stats.face_measure_cov_experiment(W, cfg.t[0], g, h, n_reps=cfg.reps or 2000,
                                                pht_grid=cfg.quad_points,
                                                pht_reps=max((cfg.reps or 2000) // 4, 2),
                                                seed=cfg.seed, threads=cfg.threads)
    except stats.SupportError as exc:
        raise UsageError(str(exc)) from None
    rep.meta["config"] = asdict(cfg)
    return _emit(rep, cfg)


def cmd_report(cfg: Config) -> int:
    paths: list[Path] = []
    for s in cfg.inputs:
        p = Path(s)
        paths.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    rows = []
    for p in paths:
        try:
            data = json.loads(p.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read {p}: {exc}") from None
        for r in data.get("rows", []):
            rows.append((data.get("name", p.stem), r))
    print(format_table(rows))
    return EXIT_OK


def format_table(rows) -> str:
    head = f"{'suite':<10} {'name':<52} {'estimate':>12} {'se':>10} {'theory':>12} {'verdict':>8}"
    lines = [head, "-" * len(head)]
    for suite, r in rows:
        verdict = ("pass" if r["passed"] else "FAIL") if r["gated"] else "info"
        lines.append(f"{suite:<10} {r['name'][:52]:<52} {_num(r['estimate'])} {_num(r['se'], 10)} "
                     f"{_num(r['theory'])} {verdict:>8}")
    return "\n".join(lines)


def _num(x, w=12) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return " " * (w - 1) + "-"
    return f"{x:>{w}.6g}"


def _emit(rep: stats.ExperimentReport, cfg: Config) -> int:
    path = rep.save(cfg.out, cfg.format)
    print(format_table([(rep.name, r.row()) for r in rep.rows]))
    print(f"report -> {path}")
    return EXIT_OK if rep.passed else EXIT_GATE


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "clt": cmd_clt, "facecov": cmd_facecov, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.dump_config:
            print(cfg.canonical())
            return EXIT_OK
        stats.set_k_sigma(cfg.tolerance_sigma)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateGeometryError, FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
