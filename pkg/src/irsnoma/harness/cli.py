"""Command line: ``irsnoma run | trace | check``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from ..optimizer import TRACE_COLUMNS, InitializationError, SystemModel
from .campaign import NO_SWEEP, draw_trial_channels, run_campaign, run_scheme, trial_seed
from .config import SCHEMES, SWEEP_AXES, ConfigError, ScenarioConfig, default_config, load_config
from .output import emit_results


def _parse_sweep(items: list[str]) -> dict[str, list]:
    sweep = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--sweep {item!r}: expected AXIS=v1,v2,...")
        axis, vals = item.split("=", 1)
        axis = axis.strip()
        if axis not in SWEEP_AXES:
            raise ConfigError(f"--sweep: unknown axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
        try:
            values = [float(v) if "." in v or "e" in v.lower() else int(v)
                      for v in vals.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"--sweep {item!r}: values must be numbers") from None
        if not values:
            raise ConfigError(f"--sweep {item!r}: no values")
        sweep[axis] = values
    return sweep


def _parse_schemes(items: list[str] | None) -> list[str] | None:
    if not items:
        return None
    out = []
    for item in items:
        for s in item.split(","):
            s = s.strip()
            if s not in SCHEMES:
                raise ConfigError(f"--scheme: unknown scheme {s!r}; choose from {', '.join(SCHEMES)}")
            if s not in out:
                out.append(s)
    return out


def resolve_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else default_config(args.profile or "full")
    if args.config and args.profile and args.profile != cfg.profile:
        raise ConfigError("--profile conflicts with the profile named in --config")
    if args.seed is not None:
        cfg.campaign.seed = args.seed
    if getattr(args, "parallel", None) is not None:
        if args.parallel < 1:
            raise ConfigError("--parallel: must be >= 1")
        cfg.campaign.parallel = args.parallel
    if getattr(args, "trials", None) is not None:
        if args.trials < 1:
            raise ConfigError("--trials: must be >= 1")
        cfg.campaign.n_trials = args.trials
    schemes = _parse_schemes(args.scheme)
    if schemes:
        cfg.algorithm.schemes = schemes
    sweep = _parse_sweep(getattr(args, "sweep", None))
    if sweep:
        cfg.campaign.sweep = sweep
    return cfg


def cmd_run(args) -> int:
    cfg = resolve_config(args)

    def progress(done, total):
        if not args.quiet:
            print(f"\r{done}/{total} jobs", end="", file=sys.stderr, flush=True)

    result = run_campaign(cfg, progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
    emit_results(result, args.out)
    for a in result.aggregates():
        point = "" if a.sweep_axis == NO_SWEEP else f"{a.sweep_axis}={a.sweep_value} "
        print(f"{point}{a.scheme}: mean {a.mean_sum_rate:.4f} bit/s/Hz  std {a.std:.4f}  "
              f"ok {a.n_ok}  fail {a.n_fail}")
    if result.all_failed:
        print("all trials failed", file=sys.stderr)
        return 1
    return 0


def cmd_trace(args) -> int:
    cfg = resolve_config(args)
    ch_seed, init_seed = trial_seed(cfg.campaign.seed, NO_SWEEP, args.trial).spawn(2)
    ch = draw_trial_channels(cfg, np.random.default_rng(ch_seed))
    model = SystemModel.from_channels(ch, cfg.radio.sigma2, cfg.radio.p_max, cfg.radio.r_min,
                                      bits=cfg.radio.bits)
    status = 0
    for scheme in cfg.algorithm.schemes:
        try:
            sum_rate, objective, _, tr = run_scheme(scheme, cfg, model, init_seed)
        except InitializationError as exc:
            print(f"{scheme}: initialization-failure {exc}", file=sys.stderr)
            status = 1
            continue
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            tr.write_csv(out / f"trace_t{args.trial:04d}_{scheme}.csv")
        else:
            wr = csv.writer(sys.stdout, lineterminator="\n")
            wr.writerow(TRACE_COLUMNS)
            wr.writerows(tr.rows())
        print(f"{scheme}: sum rate {sum_rate:.4f} bit/s/Hz, objective {objective:.4f}, "
              f"{tr.n_iterations} iterations", file=sys.stderr)
    return status


def cmd_check(args) -> int:
    from .checks import run_checks

    results = run_checks(seed=args.seed if args.seed is not None else 0)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="irsnoma", description=(
        "IRS-assisted mmWave NOMA: joint beamforming / power optimization campaigns"))
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML scenario file (see README)")
        sp.add_argument("--profile", choices=["full", "desk"],
                        help="built-in default profile when no --config is given")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--scheme", action="append",
                        help="proposed|zf|oma|upper-bound (repeat or comma-separate)")

    r = sub.add_parser("run", help="Monte-Carlo campaign")
    common(r)
    r.add_argument("--out", default="results", help="output directory (default: results)")
    r.add_argument("--sweep", action="append", help="AXIS=v1,v2,... (repeatable)")
    r.add_argument("--parallel", type=int, help="worker processes")
    r.add_argument("--trials", type=int, help="override campaign.n_trials")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("trace", help="single trial with full iteration trace")
    common(t)
    t.add_argument("--trial", type=int, default=0)
    t.add_argument("--out", help="directory for trace CSVs (default: stdout)")
    t.set_defaults(func=cmd_trace)

    c = sub.add_parser("check", help="run the invariant suite")
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_check)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
