"""Reference schemes: ZF-based NOMA and IRS-assisted OMA.

Both share the proposed scheme's power budget, noise and phase grid and
return a ``(state, trace, model)`` triple like ``run_algorithm1``.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import noma
from .conic import ConicProgram, SolverOptions, solve
from .conic.realify import derealify
from .optimizer import (IterationRecord, IterationTrace, SCAConfig, SolutionState, SystemModel,
                        alternate, evaluate_into, initial_power, passive_step, power_step,
                        quantize, random_phases)
from .optimizer.bounds import taylor_quadratic_lb
from .optimizer.steps import StepInfo
from .optimizer.subproblems import _install_sca, _Term, last_user_interference

ZF_REGULARIZATION = 1e-10


class BaselineKind(enum.Enum):
    ZF_NOMA = "zf"
    OMA_ZF = "oma"


# -- zero forcing ---------------------------------------------------------------

@dataclass
class ZFResult:
    w: np.ndarray
    representatives: list[int]
    regularized: bool


def representatives(h: list[np.ndarray]) -> list[int]:
    """Index (within the cluster) of the user with the largest effective gain."""
    return [int(np.argmax(np.linalg.norm(hm, axis=1))) for hm in h]


def zf_beamformers(h: list[np.ndarray], p_max: float, reps: list[int] | None = None) -> ZFResult:
    """W = H^H (H H^H)^-1 over one representative per cluster.

    Columns are normalized and each cluster gets P_max / M.  An
    ill-conditioned H H^H is regularized by ``ZF_REGULARIZATION`` (flagged).
    """
    reps = representatives(h) if reps is None else list(reps)
    H = np.array([hm[r] for hm, r in zip(h, reps)])  # (M, N)
    M = H.shape[0]
    gram = H @ H.conj().T
    regularized = bool(np.linalg.cond(gram) > 1e12)
    if regularized:
        gram = gram + ZF_REGULARIZATION * np.trace(gram).real / M * np.eye(M)
    W = H.conj().T @ np.linalg.inv(gram)  # (N, M), column m serves cluster m
    norms = np.linalg.norm(W, axis=0)
    norms[norms == 0] = 1.0
    w = (W / norms).T * math.sqrt(p_max / M)
    return ZFResult(w, reps, regularized)


def zf_step(model: SystemModel, state: SolutionState, cfg: SCAConfig = SCAConfig()):
    """Refresh the ZF beamformers for the current phases; gated like any step."""
    res = zf_beamformers(model.h(state.v), model.p_max)
    cand = state.copy(w=res.w)
    evaluate_into(model, cand)
    status = "regularized" if res.regularized else "optimal"
    if cand.objective >= state.objective - cfg.ascent_tol and cand.min_qos >= -cfg.feasibility_tol:
        return cand, StepInfo("zf", status, True, cand.objective)
    return state, StepInfo("zf", "rejected", False, state.objective)


def _zf_start(norm: SystemModel, theta: np.ndarray):
    v = np.exp(1j * theta)
    w = zf_beamformers(norm.h(v), norm.p_max).w
    p = initial_power(norm, w, v)
    if p is None:
        return None
    return evaluate_into(norm, SolutionState(w=w, theta=theta.copy(), p=p))


def run_zf_baseline(model: SystemModel, cfg: SCAConfig = SCAConfig(),
                    rng: np.random.Generator | None = None, theta0: np.ndarray | None = None):
    """Exhaustive decoding-order search; per order alternate ZF, passive and power steps.

    The first phase draw from ``rng`` matches the one ``run_algorithm1`` makes,
    so both schemes start from the same IRS configuration under equal seeds.
    """
    rng = np.random.default_rng() if rng is None else rng
    norm = model.normalized()
    orders = noma.enumerate_decoding_orders(model.users_per_cluster, cfg.order_cap)
    best = None
    for attempt in range(cfg.init_attempts):
        theta = random_phases(norm, rng) if theta0 is None else np.asarray(theta0, float)
        for od in orders:
            om = norm.with_order(od)
            start = _zf_start(om, theta)
            if start is None:
                continue
            state, trace = alternate(om, start, cfg, [zf_step, passive_step, power_step], "zf")
            if best is None or state.objective > best[0].objective:
                best = (state, trace, om)
        if best is not None or theta0 is not None:
            break
    if best is None:
        from .optimizer import InitializationError

        raise InitializationError("ZF baseline: no decoding order admits a QoS-feasible start")
    state, trace, om = best
    state = state.copy(w=state.w * om.w_scale / model.w_scale)
    return state, trace, model.with_order(om.order)


# -- OMA ------------------------------------------------------------------------

class _Stack:
    """Duck-typed stand-in for SystemModel inside the SCA installer (K = 1 clusters)."""

    def __init__(self, n: int, sigma2: float):
        self.n_clusters = n
        self.sigma2 = sigma2
        self.r_thr = [np.zeros(1)] * n


@dataclass
class OmaModel:
    """Orthogonal time slots inside each cluster, ZF across clusters.

    Slot t (of T = max K_m, each lasting 1/T) serves user t of every cluster
    that has one; the served users are separated by ZF beams with P_max/M
    each, so only inter-cluster leakage remains.
    """

    system: SystemModel
    slot_models: list[SystemModel] = field(init=False)
    slot_clusters: list[list[int]] = field(init=False)

    def __post_init__(self):
        s = self.system
        T = max(s.users_per_cluster)
        self.slot_clusters = [[m for m, K in enumerate(s.users_per_cluster) if K > t]
                              for t in range(T)]
        self.slot_models = [
            SystemModel(s.f, [s.base_g[m][t:t + 1] for m in ms], s.sigma2, s.p_max,
                        [np.asarray(s.r_min[m], float)[t:t + 1] for m in ms], s.bits, None,
                        s.w_scale)
            for t, ms in enumerate(self.slot_clusters)]

    @property
    def n_slots(self) -> int:
        return len(self.slot_models)

    def zf(self, theta: np.ndarray) -> list[np.ndarray]:
        v = np.exp(1j * theta)
        return [zf_beamformers(sm.h(v), sm.p_max).w for sm in self.slot_models]

    def user_rates(self, ws, theta: np.ndarray) -> list[np.ndarray]:
        """Per slot, time-weighted rate of each served user."""
        v = np.exp(1j * theta)
        out = []
        for sm, w in zip(self.slot_models, ws):
            ev = sm.evaluate(w, v, [np.ones(1)] * sm.n_clusters)
            out.append(np.array([r[0] for r in ev.rates]) / self.n_slots)
        return out

    def objective(self, ws, theta) -> float:
        return float(sum(r.sum() for r in self.user_rates(ws, theta)))

    def normalized(self) -> "OmaModel":
        return OmaModel(self.system.normalized())


def build_oma_passive_subproblem(oma: OmaModel, ws, v_bar: np.ndarray) -> ConicProgram:
    """Shared-phase SCA program: every (slot, cluster) link contributes one log term."""
    terms = []
    for sm, w in zip(oma.slot_models, ws):
        z = sm.cascade(w)
        n = sm.n_clusters
        terms += [[_Term(("v", z[i][i, 0]), [("v", z[i][j, 0]) for j in range(n) if j != i])]
                  for i in range(n)]
    sigma2 = oma.system.sigma2
    stack = _Stack(len(terms), sigma2)
    prog = ConicProgram()
    L = oma.system.l_irs
    prog.add_variables("v", 2 * L)
    prog.add_variables("chi", len(terms))
    prog.add_variables("mu", len(terms))
    x_bar = {"v": v_bar}
    _install_sca(prog, stack, [np.ones(1)] * len(terms), terms, x_bar, "mu",
                 last_user_interference(terms, x_bar, sigma2))
    for ell in range(L):
        A = np.zeros((2, prog.n_vars))
        A[0, ell] = 1.0
        A[1, L + ell] = 1.0
        prog.add_soc(A, np.zeros(2), np.zeros(1), 1.0, tag=f"unit[{ell}]")
    return prog


@dataclass
class OmaState:
    theta: np.ndarray
    ws: list[np.ndarray]
    objective: float
    v_bar: np.ndarray
    min_qos: float = math.inf
    thetas: list[np.ndarray] | None = None  # per-slot phases when optimized separately

    @property
    def v(self) -> np.ndarray:
        return np.exp(1j * self.theta)

    @property
    def sum_rate(self) -> float:
        return self.objective


def _oma_shared(oma: OmaModel, theta: np.ndarray, cfg: SCAConfig):
    ws = oma.zf(theta)
    st = OmaState(theta, ws, oma.objective(ws, theta), np.exp(1j * theta))
    trace = IterationTrace(scheme="oma")
    trace.iterations.append(IterationRecord(0, st.objective, st.objective, st.objective,
                                            st.objective, math.inf, "", 0.0))
    for it in range(1, cfg.max_outer_iters + 1):
        t0 = time.perf_counter()
        prev = st.objective
        codes = []
        # ZF refresh for the committed phases
        ws = oma.zf(st.theta)
        f = oma.objective(ws, st.theta)
        if f >= st.objective - cfg.ascent_tol:
            st.ws, st.objective = ws, f
            codes.append("Z:optimal")
        else:
            codes.append("Z:rejected")
        after_zf = st.objective
        sol = solve(build_oma_passive_subproblem(oma, st.ws, st.v_bar), cfg.solver)
        if sol.ok:
            v = extract_passive_vector(sol.x, oma.system.l_irs)
            theta = quantize(v, oma.system.bits)
            f = oma.objective(st.ws, theta)
            st.v_bar = v
            if f >= st.objective - cfg.ascent_tol:
                st.theta, st.objective = theta, f
                codes.append("P:" + sol.status)
            else:
                codes.append("P:rejected")
        else:
            codes.append("P:" + sol.status)
            trace.degraded += 1
        trace.iterations.append(IterationRecord(it, st.objective, after_zf, st.objective,
                                                st.objective, math.inf, "|".join(codes),
                                                1e3 * (time.perf_counter() - t0)))
        if abs(st.objective - prev) / max(abs(prev), 1e-12) < cfg.outer_tol:
            trace.converged = True
            break
    return st, trace


def extract_passive_vector(x: np.ndarray, l_irs: int) -> np.ndarray:
    return derealify(np.asarray(x)[: 2 * l_irs])


def _oma_per_slot(oma: OmaModel, theta: np.ndarray, cfg: SCAConfig):
    """Each slot gets its own IRS configuration via the ZF/passive alternation."""
    finals, traces, thetas, ws = [], [], [], []
    for sm in oma.slot_models:
        v = np.exp(1j * theta)
        start = evaluate_into(sm, SolutionState(w=zf_beamformers(sm.h(v), sm.p_max).w,
                                                theta=theta.copy(), p=[np.ones(1)] * sm.n_clusters))
        st, tr = alternate(sm, start, cfg, [zf_step, passive_step], "oma")
        finals.append(st)
        traces.append(tr.objectives)
        thetas.append(st.theta)
        ws.append(st.w)
    # combined trace: per-iteration total, slots that stopped early hold their last value
    n = max(len(t) for t in traces)
    trace = IterationTrace(scheme="oma", converged=True)
    for i in range(n):
        tot = sum(t[min(i, len(t) - 1)] for t in traces) / oma.n_slots
        trace.iterations.append(IterationRecord(i, tot, tot, tot, tot, math.inf, "", 0.0))
    obj = sum(s.objective for s in finals) / oma.n_slots
    st = OmaState(thetas[0], ws, obj, np.exp(1j * thetas[0]), thetas=thetas)
    return st, trace


def run_oma_baseline(model: SystemModel, cfg: SCAConfig = SCAConfig(),
                     rng: np.random.Generator | None = None, per_slot: bool = False,
                     theta0: np.ndarray | None = None):
    """OMA reference; returns ``(OmaState, trace, OmaModel)``.

    ``state.objective`` is the time-weighted sum rate of all users,
    ``state.min_qos`` the smallest per-user margin over R_min (reported, not
    enforced).  Beamformers in ``state.ws`` are in physical units.
    """
    rng = np.random.default_rng() if rng is None else rng
    oma = OmaModel(model.normalized())
    theta = random_phases(oma.system, rng) if theta0 is None else np.asarray(theta0, float)
    if per_slot:
        st, trace = _oma_per_slot(oma, theta, cfg)
        # slot i is evaluated under its own phases
        rates = np.concatenate([oma.user_rates(st.ws, th)[i] for i, th in enumerate(st.thetas)])
    else:
        st, trace = _oma_shared(oma, theta, cfg)
        rates = np.concatenate(oma.user_rates(st.ws, st.theta))
    r_min = np.concatenate([np.asarray(sm.r_min_sorted, float).ravel() for sm in oma.slot_models])
    st.min_qos = float(np.min(rates - r_min))
    scale = oma.system.w_scale / model.w_scale
    st.ws = [w * scale for w in st.ws]
    return st, trace, OmaModel(model)


__all__ = ["BaselineKind", "ZFResult", "ZF_REGULARIZATION", "representatives", "zf_beamformers",
           "zf_step", "run_zf_baseline", "OmaModel", "OmaState", "build_oma_passive_subproblem",
           "run_oma_baseline"]
