"""Monte-Carlo campaigns: user drops, channel draws, scheme runs, aggregation."""

from __future__ import annotations

import math
import traceback
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..baselines import run_oma_baseline, run_zf_baseline
from ..channel import ArrayGeometry, ChannelRealization, PathLossModel, draw_channels
from ..optimizer import InitializationError, SystemModel, run_algorithm1
from .config import ScenarioConfig

NO_SWEEP = "none"
STATUS_OK = "ok"


# -- user placement -------------------------------------------------------------

def place_users(cfg: ScenarioConfig, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Area-uniform drop in the user disk (radius R*sqrt(U)), z at the disk center height."""
    g = cfg.geometry
    if not g.user_radius > 0:
        raise ValueError("user radius must be positive")
    n = cfg.counts.n_users if n is None else n
    r = g.user_radius * np.sqrt(rng.random(n))
    a = rng.uniform(0.0, 2 * math.pi, n)
    cx, cy, cz = g.user_center
    return np.column_stack([cx + r * np.cos(a), cy + r * np.sin(a), np.full(n, cz)])


def assign_clusters(cfg: ScenarioConfig, positions: np.ndarray) -> list[np.ndarray]:
    """Users grouped by angular sector around the disk center, or explicit lists."""
    c = cfg.counts
    if c.clusters is not None:
        return [positions[list(cl)] for cl in c.clusters]
    cx, cy, _ = cfg.geometry.user_center
    ang = np.mod(np.arctan2(positions[:, 1] - cy, positions[:, 0] - cx), 2 * math.pi)
    idx = np.argsort(ang, kind="stable")
    K = c.users_per_cluster
    return [positions[idx[m * K:(m + 1) * K]] for m in range(c.n_clusters)]


# -- seeds ----------------------------------------------------------------------

def trial_seed(master: int, axis: str, trial: int) -> np.random.SeedSequence:
    """Per-trial substream, independent of the sweep value (common random numbers)."""
    return np.random.SeedSequence([int(master) & 0xFFFFFFFF, zlib.crc32(axis.encode()), int(trial)])


def draw_trial_channels(cfg: ScenarioConfig, rng: np.random.Generator) -> ChannelRealization:
    geom = ArrayGeometry(cfg.counts.n_tx, cfg.counts.l_x, cfg.counts.l_z,
                         carrier_wavelength=cfg.radio.wavelength)
    users = assign_clusters(cfg, place_users(cfg, rng))
    return draw_channels(geom, cfg.geometry.bs_position, cfg.geometry.irs_position, users, rng,
                         cfg.counts.n_bi, cfg.counts.n_iu, PathLossModel())


# -- results --------------------------------------------------------------------

@dataclass
class TrialRecord:
    sweep_axis: str
    sweep_value: str
    trial: int
    seed: str
    scheme: str
    status: str
    sum_rate: float = math.nan
    objective: float = math.nan
    iterations: int = 0
    converged: bool = False
    min_qos: float = math.nan
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


@dataclass
class Aggregate:
    sweep_axis: str
    sweep_value: str
    scheme: str
    mean_sum_rate: float
    std: float
    n_ok: int
    n_fail: int

    @property
    def ci95(self) -> float:
        return 1.96 * self.std / math.sqrt(self.n_ok) if self.n_ok > 1 else math.nan


@dataclass
class CampaignResult:
    config: dict
    trials: list[TrialRecord] = field(default_factory=list)
    traces: dict[str, list[list]] = field(default_factory=dict)

    def points(self) -> list[tuple[str, str]]:
        seen = []
        for t in self.trials:
            if (t.sweep_axis, t.sweep_value) not in seen:
                seen.append((t.sweep_axis, t.sweep_value))
        return seen

    def schemes(self) -> list[str]:
        out = []
        for t in self.trials:
            if t.scheme not in out:
                out.append(t.scheme)
        return out

    def select(self, scheme: str, axis: str | None = None, value: str | None = None):
        return [t for t in self.trials if t.scheme == scheme
                and (axis is None or t.sweep_axis == axis)
                and (value is None or t.sweep_value == value)]

    def aggregates(self) -> list[Aggregate]:
        out = []
        for axis, value in self.points():
            for scheme in self.schemes():
                rows = self.select(scheme, axis, value)
                if not rows:
                    continue
                vals = np.array([t.sum_rate for t in rows if t.ok])
                n_ok = int(vals.size)
                mean = float(vals.mean()) if n_ok else math.nan
                std = float(vals.std(ddof=1)) if n_ok > 1 else 0.0 if n_ok else math.nan
                out.append(Aggregate(axis, value, scheme, mean, std, n_ok, len(rows) - n_ok))
        return out

    def paired(self, a: str, b: str, axis: str, value: str) -> tuple[np.ndarray, np.ndarray]:
        """Sum rates of trials where both schemes succeeded, aligned by trial."""
        ra = {t.trial: t.sum_rate for t in self.select(a, axis, value) if t.ok}
        rb = {t.trial: t.sum_rate for t in self.select(b, axis, value) if t.ok}
        common = sorted(set(ra) & set(rb))
        return np.array([ra[k] for k in common]), np.array([rb[k] for k in common])

    def gaps(self) -> list[dict]:
        """Upper bound minus proposed, per sweep point (absolute and relative)."""
        out = []
        if "upper-bound" not in self.schemes() or "proposed" not in self.schemes():
            return out
        for axis, value in self.points():
            ub, pr = self.paired("upper-bound", "proposed", axis, value)
            if not ub.size:
                out.append({"sweep_axis": axis, "sweep_value": value, "mean_gap": math.nan,
                            "std_gap": math.nan, "mean_rel_gap": math.nan, "n": 0})
                continue
            gap = ub - pr
            rel = gap / np.where(ub > 0, ub, 1.0)
            out.append({"sweep_axis": axis, "sweep_value": value, "mean_gap": float(gap.mean()),
                        "std_gap": float(gap.std(ddof=1)) if gap.size > 1 else 0.0,
                        "mean_rel_gap": float(gap.mean() / ub.mean()) if ub.mean() > 0 else math.nan,
                        "n": int(gap.size), "mean_trial_rel_gap": float(rel.mean())})
        return out

    @property
    def all_failed(self) -> bool:
        return bool(self.trials) and not any(t.ok for t in self.trials)


# -- running --------------------------------------------------------------------

def run_scheme(scheme: str, cfg: ScenarioConfig, model: SystemModel, init_seed):
    sca = cfg.algorithm.sca()
    rng = np.random.default_rng(init_seed)
    if scheme in ("proposed", "upper-bound"):
        m = model.with_bits(None) if scheme == "upper-bound" else model
        st, tr, om = run_algorithm1(m, sca, rng, scheme=scheme)
        ev = om.evaluate(st.w, st.v, st.p)
        return ev.sum_rate, st.objective, st.min_qos, tr
    if scheme == "zf":
        st, tr, om = run_zf_baseline(model, sca, rng)
        ev = om.evaluate(st.w, st.v, st.p)
        return ev.sum_rate, st.objective, st.min_qos, tr
    if scheme == "oma":
        st, tr, _ = run_oma_baseline(model, sca, rng, per_slot=cfg.algorithm.oma_per_slot)
        return st.sum_rate, st.objective, st.min_qos, tr
    raise ValueError(f"unknown scheme {scheme!r}")


def run_trial(cfg: ScenarioConfig, axis: str, value: str, trial: int,
              schemes: list[str] | None = None, keep_traces: bool = True):
    """All schemes on one channel draw; never raises, failures become records."""
    schemes = list(cfg.algorithm.schemes if schemes is None else schemes)
    master = cfg.campaign.seed
    seed_label = f"{master}:{axis}:{trial}"
    records, traces = [], {}
    try:
        # channel stream, and an init stream every scheme restarts from
        ch_seed, init_seed = trial_seed(master, axis, trial).spawn(2)
        ch = draw_trial_channels(cfg, np.random.default_rng(ch_seed))
        model = SystemModel.from_channels(ch, cfg.radio.sigma2, cfg.radio.p_max,
                                          cfg.radio.r_min, bits=cfg.radio.bits)
    except Exception as exc:  # noqa: BLE001 - recorded per trial
        return [TrialRecord(axis, value, trial, seed_label, s, "error", error=repr(exc))
                for s in schemes], traces
    for scheme in schemes:
        try:
            sr, obj, qos, tr = run_scheme(scheme, cfg, model, init_seed)
            records.append(TrialRecord(axis, value, trial, seed_label, scheme, STATUS_OK, sr, obj,
                                       tr.n_iterations, tr.converged, qos))
            if keep_traces:
                traces[trace_name(axis, value, trial, scheme)] = tr.rows(include_timing=False)
        except InitializationError as exc:
            records.append(TrialRecord(axis, value, trial, seed_label, scheme,
                                       "initialization-failure", error=str(exc)))
        except Exception as exc:  # noqa: BLE001 - campaign continues
            records.append(TrialRecord(axis, value, trial, seed_label, scheme, "error",
                                       error=f"{type(exc).__name__}: {exc}"))
            traceback.print_exc()
    return records, traces


def trace_name(axis: str, value: str, trial: int, scheme: str) -> str:
    point = "base" if axis == NO_SWEEP else f"{axis}-{value}"
    return f"{point}_t{trial:04d}_{scheme}.csv"


def _format_value(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


def campaign_jobs(cfg: ScenarioConfig):
    """(point config, axis, value string, trial, schemes) for every job, in output order."""
    sweep = cfg.campaign.sweep
    jobs = []
    if not sweep:
        for t in range(cfg.campaign.n_trials):
            jobs.append((cfg, NO_SWEEP, "", t, list(cfg.algorithm.schemes)))
        return jobs
    for axis, values in sweep.items():
        for v in values:
            point = cfg.with_value(axis, v)
            schemes = list(cfg.algorithm.schemes)
            # the continuous upper bound does not depend on B: run it once per trial
            if axis == "bits" and "upper-bound" in schemes and v != values[0]:
                schemes.remove("upper-bound")
            for t in range(cfg.campaign.n_trials):
                jobs.append((point, axis, _format_value(v), t, schemes))
    return jobs


def _job(args):
    point, axis, value, trial, schemes, keep = args
    return run_trial(point, axis, value, trial, schemes, keep)


def run_campaign(cfg: ScenarioConfig, parallel: int | None = None,
                 progress=None) -> CampaignResult:
    """Run every (sweep point, trial) job; results come back in job order."""
    parallel = cfg.campaign.parallel if parallel is None else parallel
    keep = cfg.campaign.write_traces
    jobs = [(*j, keep) for j in campaign_jobs(cfg)]
    result = CampaignResult(config=cfg.to_dict())
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            outputs = pool.map(_job, jobs, chunksize=1)
            for i, (recs, trs) in enumerate(outputs):
                result.trials += recs
                result.traces.update(trs)
                if progress:
                    progress(i + 1, len(jobs))
    else:
        for i, job in enumerate(jobs):
            recs, trs = _job(job)
            result.trials += recs
            result.traces.update(trs)
            if progress:
                progress(i + 1, len(jobs))
    _replicate_upper_bound(cfg, result)
    return result


def _replicate_upper_bound(cfg: ScenarioConfig, result: CampaignResult) -> None:
    """Copy the once-per-trial upper-bound records onto every B point."""
    values = cfg.campaign.sweep.get("bits")
    if not values or "upper-bound" not in cfg.algorithm.schemes:
        return
    first = _format_value(values[0])
    base = {t.trial: t for t in result.select("upper-bound", "bits", first)}
    extra = []
    for v in values[1:]:
        for trial, rec in sorted(base.items()):
            extra.append(TrialRecord(**{**rec.__dict__, "sweep_value": _format_value(v)}))
    # keep job order: insert after the records of each point
    ordered = []
    for axis, value in result.points():
        ordered += [t for t in result.trials if t.sweep_axis == axis and t.sweep_value == value]
        ordered += [t for t in extra if t.sweep_axis == axis and t.sweep_value == value]
    result.trials = ordered
