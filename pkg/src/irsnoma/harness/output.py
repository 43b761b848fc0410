"""CSV / JSON emitters for campaign results.

Files written into the output directory
---------------------------------------
``results.csv``  sweep_axis, sweep_value, scheme, mean_sum_rate, std, n_ok, n_fail
``trials.csv``   sweep_axis, sweep_value, trial, seed, scheme, status, sum_rate,
                 objective, iterations, converged, min_qos, error
``gaps.csv``     sweep_axis, sweep_value, mean_gap, std_gap, mean_rel_gap, n
                 (only when both the proposed scheme and the upper bound ran)
``traces/*.csv`` one iteration trace per trial and scheme (trace columns)
``config.json``  the resolved configuration, including derived noise power

Rates are bits/s/Hz.  Floats are written with ``repr`` so they parse back
exactly; no file contains timestamps or wall-clock times.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .. import __version__
from ..optimizer import TRACE_COLUMNS
from .campaign import CampaignResult

RESULT_COLUMNS = ["sweep_axis", "sweep_value", "scheme", "mean_sum_rate", "std", "n_ok", "n_fail"]
TRIAL_COLUMNS = ["sweep_axis", "sweep_value", "trial", "seed", "scheme", "status", "sum_rate",
                 "objective", "iterations", "converged", "min_qos", "error"]
GAP_COLUMNS = ["sweep_axis", "sweep_value", "mean_gap", "std_gap", "mean_rel_gap", "n"]


def fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def _write(path: Path, header: list[str], rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header)
            for r in rows:
                wr.writerow([fmt(v) for v in r])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def emit_results(result: CampaignResult, out_dir) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    written = []
    p = out / "results.csv"
    _write(p, RESULT_COLUMNS, ([a.sweep_axis, a.sweep_value, a.scheme, a.mean_sum_rate, a.std,
                                a.n_ok, a.n_fail] for a in result.aggregates()))
    written.append(p)
    p = out / "trials.csv"
    _write(p, TRIAL_COLUMNS, ([t.sweep_axis, t.sweep_value, t.trial, t.seed, t.scheme, t.status,
                               t.sum_rate, t.objective, t.iterations, t.converged, t.min_qos,
                               t.error] for t in result.trials))
    written.append(p)
    gaps = result.gaps()
    if gaps:
        p = out / "gaps.csv"
        _write(p, GAP_COLUMNS, ([g[c] for c in GAP_COLUMNS] for g in gaps))
        written.append(p)
    if result.traces:
        tdir = out / "traces"
        tdir.mkdir(exist_ok=True)
        for name in sorted(result.traces):
            p = tdir / name
            _write(p, TRACE_COLUMNS, result.traces[name])
            written.append(p)
    p = out / "config.json"
    echo = {"package_version": __version__, "config": result.config}
    try:
        p.write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {p}: {exc.strerror}") from exc
    written.append(p)
    return written


def read_results(path) -> list[dict]:
    """Parse results.csv back (numbers as float / int)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["mean_sum_rate"] = float(r["mean_sum_rate"])
        r["std"] = float(r["std"])
        r["n_ok"] = int(r["n_ok"])
        r["n_fail"] = int(r["n_fail"])
    return rows
