"""Initialization and the three block updates of the alternating scheme.

Every update is gated: a candidate replaces the current iterate only if the
true sum objective does not drop by more than ``ascent_tol`` and every QoS
slack stays above ``-feasibility_tol``.  A rejected or failed update leaves
the iterate untouched and reports why.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import noma
from ..conic import ConicSolution, solve
from .model import (TWO_PI, InitializationError, QoSIncompatible, SCAConfig, SolutionState,
                    SystemModel, project_phase)
from .subproblems import (aux_value, build_active_subproblem, build_passive_subproblem,
                          build_power_subproblem, extract_active, extract_passive,
                          extract_power, minimal_qos_power)


@dataclass
class StepInfo:
    step: str
    status: str
    accepted: bool
    objective: float


def evaluate_into(model: SystemModel, state: SolutionState) -> SolutionState:
    ev = model.evaluate(state.w, state.v, state.p)
    state.objective = ev.objective
    state.min_qos = ev.min_qos
    return state


def _gate(model, current, candidate, cfg: SCAConfig) -> bool:
    evaluate_into(model, candidate)
    return (candidate.objective >= current.objective - cfg.ascent_tol
            and candidate.min_qos >= -cfg.feasibility_tol)


def _enforce_budget(w: np.ndarray, p_max: float) -> np.ndarray:
    total = float(np.sum(np.abs(w) ** 2))
    if total > p_max:
        w = w * math.sqrt(p_max / total)
    return w


def _status(sol: ConicSolution) -> str:
    return sol.status


# -- initialization -------------------------------------------------------------

def random_phases(model: SystemModel, rng: np.random.Generator) -> np.ndarray:
    if model.bits is None:
        return rng.uniform(0.0, TWO_PI, model.l_irs)
    n = 1 << model.bits
    return TWO_PI * rng.integers(0, n, model.l_irs) / n


def matched_filters(model: SystemModel, v: np.ndarray) -> np.ndarray:
    """MRT toward each cluster's strongest user, equal power, sum = P_max."""
    h = model.h(v)
    M = model.n_clusters
    w = np.zeros((M, model.n_tx), dtype=complex)
    for m, hm in enumerate(h):
        norms = np.linalg.norm(hm, axis=1)
        best = int(np.argmax(norms))
        if norms[best] > 0:
            w[m] = hm[best].conj() / norms[best]
        else:
            w[m, 0] = 1.0
    return w * math.sqrt(model.p_max / M)


def geometric_split(sizes) -> list[np.ndarray]:
    out = []
    for K in sizes:
        p = 2.0 ** -np.arange(1, K + 1)  # earlier-decoded users get more
        out.append(p / p.sum())
    return out


def _feasible(model, w, v, p, tol) -> bool:
    return model.evaluate(w, v, p).min_qos >= -tol


def initial_power(model: SystemModel, w, v, tol: float = 0.0):
    p = minimal_qos_power(model, w, v)
    if p is not None and _feasible(model, w, v, p, tol):
        return p
    geo = geometric_split(model.users_per_cluster)
    uni = [np.full(K, 1.0 / K) for K in model.users_per_cluster]
    for a in np.linspace(0.0, 1.0, 11):
        cand = [(1 - a) * g + a * u for g, u in zip(geo, uni)]
        if _feasible(model, w, v, cand, tol):
            return cand
    return None


def initialize(model: SystemModel, rng: np.random.Generator, cfg: SCAConfig = SCAConfig(),
               order: noma.DecodingOrder | None = None, theta: np.ndarray | None = None,
               w: np.ndarray | None = None):
    """Feasible start; returns ``(ordered_model, state)``.

    Without an explicit ``order`` the decoding order is ascending effective
    gain under the initial beamformers, then held fixed.
    """
    for _ in range(cfg.init_attempts):
        th = random_phases(model, rng) if theta is None else np.asarray(theta, dtype=float)
        v = np.exp(1j * th)
        w0 = matched_filters(model, v) if w is None else np.asarray(w, dtype=complex)
        if order is None:
            base = model.with_order(noma.DecodingOrder.identity(
                [gm.shape[0] for gm in model.base_g]))
            h = [(gm.conj() * v) @ base.f for gm in base.base_g]
            ordered = model.with_order(noma.order_by_effective_gain(h, w0))
        else:
            ordered = model.with_order(order)
        p = initial_power(ordered, w0, v)
        if p is not None:
            state = SolutionState(w=w0, theta=th, p=p)
            return ordered, evaluate_into(ordered, state)
        if theta is not None:
            break
    raise InitializationError(f"no QoS-feasible start in {cfg.init_attempts} attempts")


# -- block updates --------------------------------------------------------------

def _aux(prog, x, name):
    return aux_value(prog, x, name).copy()


def active_step(model: SystemModel, state: SolutionState, cfg: SCAConfig = SCAConfig()):
    try:
        prog = build_active_subproblem(model, state)
    except QoSIncompatible:
        return state, StepInfo("active", "qos-incompatible", False, state.objective)
    sol = solve(prog, cfg.solver)
    if not sol.ok:
        return state, StepInfo("active", _status(sol), False, state.objective)
    w = _enforce_budget(extract_active(model, prog, sol.x), model.p_max)
    cand = state.copy(w=w, chi=_aux(prog, sol.x, "chi"), eta=_aux(prog, sol.x, "eta"))
    if _gate(model, state, cand, cfg):
        return cand, StepInfo("active", sol.status, True, cand.objective)
    return state, StepInfo("active", "rejected", False, state.objective)


def quantize(v: np.ndarray, bits: int | None) -> np.ndarray:
    """Commit phases: nearest grid point, or the raw angle for continuous phases."""
    ang = np.mod(np.angle(v), TWO_PI)
    return ang if bits is None else project_phase(ang, bits)


def passive_taylor_point(model: SystemModel, state: SolutionState) -> np.ndarray:
    """Relaxed v from the last solve while it is QoS-feasible, else the committed phases."""
    vb = state.v_bar
    if vb is not None and not np.allclose(vb, state.v):
        if model.evaluate(state.w, vb, state.p).min_qos >= 0:
            return vb
    return state.v


def passive_step(model: SystemModel, state: SolutionState, cfg: SCAConfig = SCAConfig()):
    v_bar = passive_taylor_point(model, state)
    try:
        prog = build_passive_subproblem(model, state, v_bar)
    except QoSIncompatible:
        return state, StepInfo("passive", "qos-incompatible", False, state.objective)
    sol = solve(prog, cfg.solver)
    if not sol.ok:
        return state, StepInfo("passive", _status(sol), False, state.objective)
    v = extract_passive(prog, sol.x)
    theta = quantize(v, model.bits)
    cand = state.copy(theta=theta, v_bar=v, chi=_aux(prog, sol.x, "chi"),
                      mu=_aux(prog, sol.x, "mu"))
    if _gate(model, state, cand, cfg):
        return cand, StepInfo("passive", sol.status, True, cand.objective)
    # phases stay; the relaxed point still moves the next linearization
    kept = state.copy(v_bar=v)
    return kept, StepInfo("passive", "rejected", False, state.objective)


def power_step(model: SystemModel, state: SolutionState, cfg: SCAConfig = SCAConfig()):
    prog = build_power_subproblem(model, state)
    sol = solve(prog, cfg.solver)
    if not sol.ok:
        return state, StepInfo("power", _status(sol), False, state.objective)
    p = [np.maximum(pm, 0.0) for pm in extract_power(model, prog, sol.x)]
    p = [pm / pm.sum() for pm in p]
    cand = state.copy(p=p)
    if _gate(model, state, cand, cfg):
        return cand, StepInfo("power", sol.status, True, cand.objective)
    return state, StepInfo("power", "rejected", False, state.objective)
