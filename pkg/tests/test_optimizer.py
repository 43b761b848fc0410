import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irsnoma.conic import solve
from irsnoma.optimizer import (TWO_PI, InitializationError, SCAConfig, SolutionState,
                               SystemModel, active_point, active_step, build_active_subproblem,
                               build_passive_subproblem, build_power_subproblem,
                               converged_within, evaluate_into, extract_power, grid_index,
                               initialize, matched_filters, passive_point, passive_step,
                               phase_grid, power_step, project_phase, relative_change,
                               run_algorithm1, taylor_quadratic_lb,
                               taylor_quadratic_over_affine_lb, trace_is_monotone)

from conftest import crandn, desk_model, power_grid_oracle, power_toy, toy_model

CONT = SCAConfig()


# -- minorants -------------------------------------------------------------------------

def test_quadratic_bound_tight_and_below():
    rng = np.random.default_rng(0)
    z, wb = crandn(rng, 4), crandn(rng, 4)
    b = taylor_quadratic_lb(z, wb)
    assert b(wb) == pytest.approx(abs(z @ wb) ** 2, abs=1e-12)
    assert b(np.zeros(4)) == pytest.approx(-abs(z @ wb) ** 2)


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_quadratic_bound_property(seed, n):
    rng = np.random.default_rng(seed)
    z, wb, w = crandn(rng, n), crandn(rng, n), 3 * crandn(rng, n)
    assert taylor_quadratic_lb(z, wb)(w) <= abs(z @ w) ** 2 + 1e-9


def test_ratio_bound_hand_case():
    b = taylor_quadratic_over_affine_lb(np.array([1.0 + 0j]), np.array([1.0 + 0j]), 1.0)
    assert b(np.array([2.0]), 4.0) == pytest.approx(0.0)
    assert b(np.array([1.0]), 1.0) == pytest.approx(1.0)


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.floats(0.1, 10), st.floats(0.1, 10))
def test_ratio_bound_property(seed, n, eta_bar, eta):
    rng = np.random.default_rng(seed)
    z, wb, w = crandn(rng, n), crandn(rng, n), crandn(rng, n)
    b = taylor_quadratic_over_affine_lb(z, wb, eta_bar)
    assert b(w, eta) <= abs(z @ w) ** 2 / eta + 1e-9
    assert b(wb, eta_bar) == pytest.approx(abs(z @ wb) ** 2 / eta_bar, rel=1e-12, abs=1e-12)


def test_ratio_bound_rejects_nonpositive_eta():
    with pytest.raises(ValueError):
        taylor_quadratic_over_affine_lb(np.ones(2), np.ones(2), 0.0)


# -- phase projection -----------------------------------------------------------------

@pytest.mark.parametrize("bits", range(1, 6))
def test_projection_fixed_points(bits):
    grid = phase_grid(bits)
    assert np.array_equal(project_phase(grid, bits), grid)
    assert project_phase(0.0, bits) == 0.0


def test_projection_examples():
    assert project_phase(3 * math.pi / 2, 2) == pytest.approx(3 * math.pi / 2, abs=0)
    assert project_phase(math.pi / 2 - 1e-6, 1) == 0.0
    assert project_phase(TWO_PI - 1e-9, 1) == 0.0          # wrap-around, not pi
    assert project_phase(-1e-9, 3) == 0.0
    assert project_phase(math.pi / 2, 1) == 0.0             # exact tie goes to the smaller value
    assert project_phase(math.pi / 4, 2) == 0.0


@given(st.floats(-20, 20), st.integers(1, 5))
def test_projection_is_nearest_on_circle(angle, bits):
    got = project_phase(angle, bits)
    grid = phase_grid(bits)
    dist = np.abs(np.angle(np.exp(1j * (angle - grid))))
    assert abs(np.angle(np.exp(1j * (angle - got)))) <= dist.min() + 1e-12
    assert got == grid[grid_index(got, bits)]


def test_projection_rejects_zero_bits():
    with pytest.raises(ValueError):
        project_phase(0.3, 0)


# -- initialization --------------------------------------------------------------------

def test_init_single_user_is_matched_filter():
    rng = np.random.default_rng(1)
    model = toy_model(rng, users=(1,), p_max=2.0, bits=3)
    om, st0 = initialize(model, np.random.default_rng(5))
    h = om.h(st0.v)[0][0]
    want = math.sqrt(2.0) * h.conj() / np.linalg.norm(h)
    np.testing.assert_allclose(st0.w[0], want, atol=1e-12)
    assert st0.p[0] == pytest.approx([1.0])
    assert np.all(st0.theta == phase_grid(3)[grid_index(st0.theta, 3)])


def test_init_budget_and_determinism():
    model, _ = desk_model(3)
    m1, s1 = initialize(model.normalized(), np.random.default_rng(9))
    m2, s2 = initialize(model.normalized(), np.random.default_rng(9))
    assert s1.power_ratio(m1.p_max) == pytest.approx(1.0, abs=1e-9)
    assert np.array_equal(s1.w, s2.w) and np.array_equal(s1.theta, s2.theta)
    assert s1.min_qos >= 0


def test_init_failure_when_qos_impossible():
    rng = np.random.default_rng(2)
    model = toy_model(rng, users=(2, 2), r_min=12.0, gain=0.01)
    with pytest.raises(InitializationError):
        initialize(model, np.random.default_rng(0), SCAConfig(init_attempts=3))


# -- active subproblem ---------------------------------------------------------------------

def _started(seed, users=(2, 2), **kw):
    rng = np.random.default_rng(seed)
    model = toy_model(rng, users=users, **kw)
    return initialize(model, rng)


def test_active_program_size_and_carryover():
    model, state = _started(0)
    prog = build_active_subproblem(model, state)
    M, N = model.n_clusters, model.n_tx
    assert prog.n_vars == 2 * M * N + 2 * M
    assert prog.max_violation(active_point(model, state, prog), relative=True) <= 1e-9


def test_active_single_user_reduces():
    model, state = _started(1, users=(1,))
    prog = build_active_subproblem(model, state)
    kinds = prog.counts()
    assert "soc" in kinds and not any(c.tag.startswith("qos") for c in prog.constraints)


def test_active_single_user_converges_to_mrt():
    rng = np.random.default_rng(3)
    model = toy_model(rng, users=(1,))
    theta = np.zeros(model.l_irs)
    w0 = crandn(rng, 1, model.n_tx)
    w0 /= np.linalg.norm(w0)
    state = evaluate_into(model, SolutionState(w=w0, theta=theta, p=[np.ones(1)]))
    objs = [state.objective]
    for _ in range(40):
        state, info = active_step(model, state)
        objs.append(state.objective)
    assert np.all(np.diff(objs) >= -1e-9)
    h = model.h(state.v)[0][0]
    cos = abs(h @ state.w[0]) / (np.linalg.norm(h) * np.linalg.norm(state.w[0]))
    assert math.acos(min(1.0, cos)) < 1e-3
    assert np.linalg.norm(state.w[0]) ** 2 == pytest.approx(model.p_max, abs=1e-6)


# -- passive subproblem -----------------------------------------------------------------------

def test_passive_program_and_carryover():
    model, state = _started(4, bits=2)
    prog = build_passive_subproblem(model, state)
    assert sum(c.tag.startswith("unit[") for c in prog.constraints) == model.l_irs
    assert prog.max_violation(passive_point(model, state, prog), relative=True) <= 1e-9


def test_passive_single_element():
    rng = np.random.default_rng(5)
    model = toy_model(rng, users=(1,), l_irs=1, n_tx=2)
    theta = np.array([0.7])
    w = matched_filters(model, np.exp(1j * theta))
    state = evaluate_into(model, SolutionState(w=w, theta=theta, p=[np.ones(1)]))
    prog = build_passive_subproblem(model, state)
    sol = solve(prog)
    v = sol.x[prog.var("v")]
    v = v[0] + 1j * v[1]
    assert abs(v) == pytest.approx(1.0, abs=1e-6)
    assert abs(np.angle(v * np.exp(-0.7j))) < 1e-5


def test_passive_commit_is_best_of_enumerated_candidates():
    rng = np.random.default_rng(6)
    model = toy_model(rng, users=(2,), l_irs=2, n_tx=2, bits=1, r_min=0.05)
    om, state = initialize(model, rng)
    new, info = passive_step(om, state)
    assert np.all(new.theta == phase_grid(1)[grid_index(new.theta, 1)])
    cands = {}
    for a in (0.0, math.pi):
        for b in (0.0, math.pi):
            th = np.array([a, b])
            ev = om.evaluate(state.w, np.exp(1j * th), state.p)
            cands[(a, b)] = ev.objective if ev.min_qos >= -CONT.feasibility_tol else -np.inf
    proj = tuple(project_phase(np.angle(new.v_bar), 1))
    prev = tuple(state.theta)
    reachable = {prev: cands[prev], proj: cands[proj]}
    best = max(reachable, key=reachable.get)
    assert cands[tuple(new.theta)] == pytest.approx(reachable[best])
    assert new.objective >= state.objective - 1e-9


# -- power subproblem --------------------------------------------------------------------------

def test_power_single_user_forced():
    model, state = _started(7, users=(1,))
    prog = build_power_subproblem(model, state)
    sol = solve(prog)
    assert extract_power(model, prog, sol.x)[0] == pytest.approx([1.0], abs=1e-7)


@pytest.mark.parametrize("seed", range(3))
def test_power_vs_grid(seed):
    model, state = power_toy(seed)
    prog = build_power_subproblem(model, state)
    sol = solve(prog)
    p = extract_power(model, prog, sol.x)
    got = model.evaluate(state.w, state.v, p).objective
    assert got == pytest.approx(power_grid_oracle(model, state.w, state.v), abs=1e-3)


def test_power_qos_binding_for_large_requirement():
    model, state = power_toy(1)
    prog = build_power_subproblem(model, state)
    p = extract_power(model, prog, solve(prog).x)
    ev = model.evaluate(state.w, state.v, p)
    assert abs(ev.min_qos) < 1e-5


def test_power_step_idempotent_and_monotone():
    model, state = power_toy(2)
    s1, _ = power_step(model, state)
    s2, _ = power_step(model, s1)
    assert s1.objective >= state.objective - 1e-9
    assert np.allclose(s1.p[0], s2.p[0], atol=1e-6)
    assert s2.objective == pytest.approx(s1.objective, abs=1e-6)


# -- full algorithm ------------------------------------------------------------------------

def test_relative_change():
    assert relative_change(1.1, 1.0) == pytest.approx(0.1, rel=1e-9)
    assert relative_change(0.0, 0.0) == 0.0


@pytest.mark.parametrize("seed", [0, 1])
def test_algorithm_monotone_feasible_converged(seed):
    model, rng = desk_model(seed)
    st, tr, om = run_algorithm1(model, SCAConfig(), rng)
    assert trace_is_monotone(tr, 1e-6)
    obj = tr.objectives
    if tr.converged:
        assert relative_change(obj[-1], obj[-2]) < SCAConfig().outer_tol
    assert st.power_ratio(model.p_max) <= 1 + 1e-9
    assert st.simplex_error() <= 1e-9
    assert st.min_qos >= -1e-6
    assert np.all(st.theta == phase_grid(model.bits)[grid_index(st.theta, model.bits)])
    assert st.objective <= om.objective_cap()
    # the state is expressed in physical units
    ev = om.evaluate(st.w, st.v, st.p)
    assert ev.objective == pytest.approx(st.objective, rel=1e-9)


def test_algorithm_is_deterministic():
    model, _ = desk_model(2)
    a = run_algorithm1(model, SCAConfig(), np.random.default_rng(1))
    b = run_algorithm1(model, SCAConfig(), np.random.default_rng(1))
    assert a[1].objectives == b[1].objectives
    assert np.array_equal(a[0].w, b[0].w)


def test_exhaustive_order_not_worse():
    model, _ = desk_model(4)
    base = run_algorithm1(model, SCAConfig(), np.random.default_rng(2))[0].objective
    full = run_algorithm1(model, SCAConfig(order_policy="exhaustive"), np.random.default_rng(2))
    assert full[0].objective >= base - 1e-9


def test_continuous_phases_mode():
    model, rng = desk_model(5)
    st, tr, _ = run_algorithm1(model.with_bits(None), SCAConfig(), rng)
    assert trace_is_monotone(tr, 1e-6) and st.min_qos >= -1e-6


def test_trace_csv(tmp_path):
    model, rng = desk_model(6)
    _, tr, _ = run_algorithm1(model, SCAConfig(max_outer_iters=3), rng)
    tr.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].startswith("iteration,objective_total,objective_after_active")
    assert len(lines) == tr.n_iterations + 2


def test_sca_config_validation():
    with pytest.raises(ValueError):
        SCAConfig(outer_tol=0.0)
    with pytest.raises(ValueError):
        SCAConfig(max_outer_iters=0)
