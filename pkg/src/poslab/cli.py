"""poslab command line: verify identities, evaluate transition maps, dump samples.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 configuration or parse
error, 3 numerical or I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import pathsim, stats
from .rootsys import ChamberError, build_root_system, drift_from_chamber_coords
from .sampler import RngStream, default_workers, seed_from_env
from .transmaps import BUILTIN_TYPES, ExprSyntaxError, NoConvergence, TropicalOverflow, builtin_map, custom_map, evaluate

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

IDENTITIES = ("rank2", "tropical", "geometric", "exit-law", "conditional", "all")
DEFAULT_BOX = {"A2": 25, "B2": 15, "C2": 15, "G2": 5}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    type_tag: str | None = None
    a: tuple[float, ...] = (1.0, 1.0)
    n_samples: int = 200_000
    n_paths: int = 2000
    T: float | None = None
    dt: float = 1e-3
    seed: int = 0
    workers: int = 1
    output: str | None = None
    flags: dict = field(default_factory=dict)


def _floats(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    return vals


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="poslab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="64-bit seed (default: $POSLAB_SEED, else a fixed constant)")
        sp.add_argument("--workers", type=_positive_int, default=None, help="worker threads (default: available cores)")
        sp.add_argument("-o", "--output", default=None, help="output path (default: standard output)")

    v = sub.add_parser("verify", help="run identity verifications", formatter_class=fmt)
    v.add_argument("--identity", choices=IDENTITIES, default="all")
    v.add_argument("--type", dest="type_tag", choices=BUILTIN_TYPES, default=None, help="root system (default: all four)")
    v.add_argument("--group", choices=("sl2", "sl3"), default=None, help="exit-law group (default: both)")
    v.add_argument("--a", type=_floats, default=(1.0, 1.0), help="chamber coordinates a1,a2 (sl2 uses a1 as mu)")
    v.add_argument("--n", type=_positive_int, default=200_000, help="samples for sample-based identities")
    v.add_argument("--paths", type=_positive_int, default=2000, help="Brownian paths for path-based checks")
    v.add_argument("--T", type=float, default=None, help="horizon (default: max(20, 12/min a) for exit laws, 25 otherwise)")
    v.add_argument("--dt", type=float, default=1e-3, help="grid step")
    v.add_argument("--box", type=int, default=None, help="geometric box limit (default: A2 25, B2/C2 15, G2 5)")
    v.add_argument("--energy", action="store_true", help="add an energy-distance statistic (informational)")
    common(v)

    e = sub.add_parser("eval", help="evaluate a transition map", formatter_class=fmt)
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", choices=BUILTIN_TYPES)
    src.add_argument("--expr", help="program text: 'name = expr; ... (expr, ..., expr)' in t1..tk")
    e.add_argument("--values", required=True, help="comma-separated inputs")
    e.add_argument("--semiring", choices=("rational", "float", "tropical"), default="rational")
    e.add_argument("-o", "--output", default=None, help="output path (default: standard output)")

    s = sub.add_parser("sample", help="dump exit-law samples as CSV", formatter_class=fmt)
    what = s.add_mutually_exclusive_group(required=True)
    what.add_argument("--exit-law", action="store_true", help="simulated N_T entries from Brownian paths")
    what.add_argument("--dmu", action="store_true", help="algebraic Theta(Gamma_mu) entries (A2)")
    s.add_argument("--group", choices=("sl2", "sl3"), default="sl3")
    s.add_argument("--a", type=_floats, default=(1.0, 1.0), help="chamber coordinates")
    s.add_argument("--paths", type=_positive_int, default=1000, help="paths for --exit-law")
    s.add_argument("--n", type=_positive_int, default=1000, help="draws for --dmu")
    s.add_argument("--T", type=float, default=None, help="horizon (default: max(20, 12/min a))")
    s.add_argument("--dt", type=float, default=1e-3, help="grid step")
    common(s)
    return p


def _config(args) -> RunConfig:
    seed = args.seed if getattr(args, "seed", None) is not None else seed_from_env()
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    workers = getattr(args, "workers", None) or default_workers()
    cfg = RunConfig(args.command, seed=seed, workers=workers, output=args.output)
    if args.command in ("verify", "sample"):
        a = tuple(args.a)
        if not all(x > 0 and math.isfinite(x) for x in a):
            raise ConfigError(f"chamber coordinates must be positive, got {a}")
        if args.dt <= 0 or (args.T is not None and args.T <= 0):
            raise ConfigError("T and dt must be positive")
        if args.T is not None:
            pathsim.grid_steps(args.T, args.dt)
        cfg.a, cfg.T, cfg.dt, cfg.n_paths, cfg.n_samples = a, args.T, args.dt, args.paths, args.n
    return cfg


def _pair(a):
    if len(a) == 1:
        return a[0], a[0]
    if len(a) != 2:
        raise ConfigError("expected two chamber coordinates a1,a2")
    return a


def _suite(args, cfg: RunConfig):
    """(name, thunk) pairs; thunk receives an RngStream."""
    ident = args.identity
    types = [args.type_tag] if args.type_tag else list(BUILTIN_TYPES)
    groups = [args.group] if args.group else ["sl2", "sl3"]
    w = cfg.workers
    jobs = []
    a1, a2 = _pair(cfg.a) if ident != "exit-law" or "sl3" in groups else (cfg.a[0], cfg.a[0])
    if ident in ("rank2", "all"):
        for t in types:
            jobs.append(lambda r, t=t: stats.verify_rank2_identity(t, a1, a2, cfg.n_samples, r, w, energy=args.energy))
    if ident in ("tropical", "all"):
        for t in types:
            jobs.append(lambda r, t=t: stats.verify_tropical_identity(t, a1, a2, cfg.n_samples, r, w))
    if ident in ("geometric", "all"):
        z1, z2 = math.exp(-a1), math.exp(-a2)
        n_geo = min(cfg.n_samples, 100_000)
        for t in types:
            box = args.box if args.box is not None else DEFAULT_BOX[t]
            jobs.append(lambda r, t=t, box=box: stats.verify_geometric_identity(t, z1, z2, box, n_geo, r, w))
    if ident in ("exit-law", "all"):
        for g in groups:
            if g == "sl2":
                jobs.append(lambda r: stats.verify_exit_law(2, cfg.a[0], None, cfg.n_paths, cfg.T, cfg.dt, r, w))
            else:
                jobs.append(lambda r: stats.verify_exit_law(3, a1, a2, cfg.n_paths, cfg.T, cfg.dt, r, w))
    if ident in ("conditional", "all"):
        T = cfg.T if cfg.T is not None else 25.0
        jobs.append(lambda r: stats.verify_conditional_representation(a1, a2, cfg.n_paths, T, cfg.dt, r, w))
    return jobs


def _open_out(path):
    return open(path, "w", encoding="utf-8") if path else None


def cmd_verify(args, cfg: RunConfig) -> int:
    reports = []
    for k, job in enumerate(_suite(args, cfg)):
        rep = job(RngStream(cfg.seed, stream_id=k))
        reports.append(rep)
        print(rep.summary_line(), flush=True)
    text = json.dumps([r.to_dict() for r in reports], sort_keys=True, indent=1) + "\n"
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def _parse_values(text: str, semiring: str):
    parts = [p.strip() for p in text.split(",")]
    try:
        if semiring == "rational":
            vals = [Fraction(p) for p in parts]
            if any(v <= 0 for v in vals):
                raise ConfigError("rational inputs must be positive")
            return vals
        if semiring == "float":
            vals = [float(p) for p in parts]
            if any(not v > 0 for v in vals):
                raise ConfigError("float inputs must be positive")
            return vals
        fr = [Fraction(p) for p in parts]
        if all(v.denominator == 1 for v in fr):
            return [np.int64(v.numerator) for v in fr]
        return [float(v) for v in fr]
    except (ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse values {text!r}: {exc}") from exc


def _fmt_value(v, semiring):
    if semiring == "rational":
        return str(v)
    if semiring == "tropical" and float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def cmd_eval(args, cfg: RunConfig) -> int:
    vals = _parse_values(args.values, args.semiring)
    tmap = builtin_map(args.builtin) if args.builtin else custom_map(args.expr, len(vals))
    if len(vals) != tmap.arity:
        raise ConfigError(f"{tmap.type_tag} takes {tmap.arity} values, got {len(vals)}")
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        out = evaluate(tmap, vals, args.semiring)
    line = ", ".join(_fmt_value(v, args.semiring) for v in out) + "\n"
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(line)
    else:
        sys.stdout.write(line)
    return EXIT_OK


def cmd_sample(args, cfg: RunConfig) -> int:
    rng = RngStream(cfg.seed)
    if args.dmu:
        a1, a2 = _pair(cfg.a)
        rows = stats.algebraic_exit_entries(3, (a1, a2), cfg.n_samples, rng, cfg.workers)
        labels = pathsim.ENTRY_LABELS[3]
    else:
        n_group = 2 if args.group == "sl2" else 3
        a = (cfg.a[0],) if n_group == 2 else _pair(cfg.a)
        rs = build_root_system("A1" if n_group == 2 else "A2")
        T = cfg.T if cfg.T is not None else pathsim.default_horizon(rs, drift_from_chamber_coords(rs, a))
        rows, _ = stats.simulate_exit_entries(n_group, a, cfg.n_paths, T, cfg.dt, rng, cfg.workers)
        labels = pathsim.ENTRY_LABELS[n_group]
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            pathsim.write_csv(rows, labels, fh, extra={"seed": cfg.seed})
    else:
        pathsim.write_csv(rows, labels, sys.stdout, extra={"seed": cfg.seed})
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    try:
        cfg = _config(args)
        handler = {"verify": cmd_verify, "eval": cmd_eval, "sample": cmd_sample}[args.command]
        return handler(args, cfg)
    except (ConfigError, ChamberError, ExprSyntaxError, KeyError) as exc:
        print(f"poslab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"poslab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoConvergence, TropicalOverflow, FloatingPointError, OverflowError, ZeroDivisionError, ArithmeticError) as exc:
        print(f"poslab: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"poslab: I/O error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
