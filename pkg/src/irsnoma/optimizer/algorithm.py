"""The alternating loop: active -> passive -> power until the objective settles."""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from .. import noma
from .model import (InitializationError, IterationRecord, IterationTrace, QoSIncompatible,
                    SCAConfig, SolutionState, StepRecord, SystemModel)
from .steps import StepInfo, active_step, evaluate_into, initialize, passive_step, power_step
from .subproblems import check_margins

StepFn = Callable[[SystemModel, SolutionState, SCAConfig], "tuple[SolutionState, StepInfo]"]

_CODES = {"active": "A", "passive": "P", "power": "W", "zf": "Z"}


def relative_change(new: float, old: float) -> float:
    return abs(new - old) / max(abs(old), 1e-12)


def _record(trace: IterationTrace, it: int, info: StepInfo, state: SolutionState,
            model: SystemModel) -> None:
    trace.steps.append(StepRecord(it, info.step, info.status, info.accepted, state.objective,
                                  state.min_qos, state.power_ratio(model.p_max),
                                  state.simplex_error()))
    if info.status not in ("optimal", "rejected") and not info.accepted:
        trace.degraded += 1


def alternate(model: SystemModel, state: SolutionState, cfg: SCAConfig,
              steps: list[StepFn], scheme: str = "proposed") -> tuple[SolutionState, IterationTrace]:
    """Run ``steps`` in turn until relative change < outer_tol.

    ``model`` and ``state`` must already be in a consistent unit system;
    nothing is normalized here.
    """
    trace = IterationTrace(scheme=scheme)
    f0 = state.objective
    trace.iterations.append(IterationRecord(0, f0, f0, f0, f0, state.min_qos, "", 0.0))
    for it in range(1, cfg.max_outer_iters + 1):
        t0 = time.perf_counter()
        prev = state.objective
        after = {}
        codes = []
        try:
            check_margins(model, state.p)
        except QoSIncompatible:
            state, info = power_step(model, state, cfg)
            _record(trace, it, info, state, model)
            codes.append("W:" + info.status)
        for fn in steps:
            state, info = fn(model, state, cfg)
            _record(trace, it, info, state, model)
            after[info.step] = state.objective
            codes.append(f"{_CODES.get(info.step, info.step[:1].upper())}:{info.status}")
        trace.iterations.append(IterationRecord(
            it, state.objective,
            after.get("active", after.get("zf", prev)),
            after.get("passive", after.get("active", prev)),
            after.get("power", state.objective),
            state.min_qos, "|".join(codes), 1e3 * (time.perf_counter() - t0)))
        if relative_change(state.objective, prev) < cfg.outer_tol:
            trace.converged = True
            break
    return state, trace


def _physical(model: SystemModel, norm: SystemModel, state: SolutionState) -> SolutionState:
    # rates are scale invariant, so objective and QoS carry over unchanged
    return state.copy(w=state.w * norm.w_scale / model.w_scale)


def run_algorithm1(model: SystemModel, cfg: SCAConfig = SCAConfig(),
                   rng: np.random.Generator | None = None,
                   order: noma.DecodingOrder | None = None,
                   start: SolutionState | None = None,
                   scheme: str = "proposed"):
    """Joint active/passive/power optimization for a fixed decoding order.

    Works internally in normalized units (sigma2 = P_max = 1).  Returns
    ``(state, trace, ordered_model)`` with ``state.w`` in physical units.
    With ``cfg.order_policy == "exhaustive"`` every decoding order is run
    from the initial phases found for the effective-gain order (orders with
    no QoS-feasible start there are skipped) and the best result is kept.
    """
    rng = np.random.default_rng() if rng is None else rng
    norm = model.normalized()
    if start is not None:
        start = start.copy(w=start.w * model.w_scale / norm.w_scale)
    steps = [active_step, passive_step, power_step]
    if cfg.order_policy == "exhaustive" and order is None and start is None:
        ordered0, state0 = initialize(norm, rng, cfg)
        best = None
        for od in noma.enumerate_decoding_orders(model.users_per_cluster, cfg.order_cap):
            if od == ordered0.order:
                ordered, state = ordered0, state0.copy()
            else:
                try:
                    ordered, state = initialize(norm, rng, cfg, od, theta=state0.theta)
                except InitializationError:
                    continue
            state, trace = alternate(ordered, state, cfg, steps, scheme)
            if best is None or state.objective > best[0].objective:
                best = state, trace, ordered
        state, trace, ordered = best
    else:
        if start is None:
            ordered, state = initialize(norm, rng, cfg, order)
        else:
            ordered = norm.with_order(order if order is not None else norm.order)
            state = evaluate_into(ordered, start.copy())
        state, trace = alternate(ordered, state, cfg, steps, scheme)
    return _physical(model, ordered, state), trace, model.with_order(ordered.order)


def trace_is_monotone(trace: IterationTrace, tol: float = 1e-6) -> bool:
    obj = [s.objective for s in trace.steps]
    obj = [trace.iterations[0].objective] + obj if trace.iterations else obj
    return all(b >= a - tol for a, b in zip(obj, obj[1:]))


def converged_within(trace: IterationTrace, tol: float, max_iters: int) -> bool:
    obj = trace.objectives
    for t in range(1, min(len(obj), max_iters + 1)):
        if relative_change(obj[t], obj[t - 1]) < tol:
            return True
    return False


__all__ = ["alternate", "run_algorithm1", "relative_change", "trace_is_monotone",
           "converged_within"]
