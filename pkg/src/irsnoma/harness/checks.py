"""Quick invariant suite behind ``irsnoma check``.

Each check returns ``(name, passed, detail)``; nothing here raises on a
failed invariant.
"""

from __future__ import annotations

import math

import numpy as np

from ..channel import cascade_vector, effective_channel
from ..optimizer import (SCAConfig, SystemModel, project_phase, run_algorithm1,
                         taylor_quadratic_lb, taylor_quadratic_over_affine_lb, trace_is_monotone)
from .campaign import draw_trial_channels
from .config import default_config


def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def check_minorants(rng, n=2000):
    worst = 0.0
    for _ in range(n):
        d = int(rng.integers(1, 9))
        z, wb, w = _crandn(rng, d), _crandn(rng, d), _crandn(rng, d)
        eta_bar, eta = rng.uniform(0.1, 10, 2)
        worst = max(worst, taylor_quadratic_lb(z, wb)(w) - abs(z @ w) ** 2,
                    taylor_quadratic_over_affine_lb(z, wb, eta_bar)(w, eta)
                    - abs(z @ w) ** 2 / eta)
    return "minorants", worst <= 1e-9, f"max excess {worst:.2e}"


def check_projection(rng, n=2000):
    bad = 0
    for bits in range(1, 6):
        grid = 2 * math.pi * np.arange(1 << bits) / (1 << bits)
        ang = rng.uniform(0, 2 * math.pi, n)
        got = project_phase(ang, bits)
        dist = np.abs(np.angle(np.exp(1j * (ang[:, None] - grid[None, :]))))
        want = grid[np.argmin(dist, axis=1)]
        bad += int(np.sum(got != want))
    return "phase projection", bad == 0, f"{bad} mismatches"


def check_cascade(rng, n=200):
    worst = 0.0
    for _ in range(n):
        L, N = rng.integers(1, 17), rng.integers(1, 9)
        f, g, w = _crandn(rng, L, N), _crandn(rng, L), _crandn(rng, N)
        v = np.exp(1j * rng.uniform(0, 2 * math.pi, L))
        lhs = cascade_vector(g, f, w) @ v
        rhs = effective_channel(g, np.angle(v), f) @ w
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    return "cascade identity", worst < 1e-10, f"max rel err {worst:.2e}"


def check_run(seed):
    cfg = default_config("desk")
    rng = np.random.default_rng(seed)
    ch = draw_trial_channels(cfg, rng)
    model = SystemModel.from_channels(ch, cfg.radio.sigma2, cfg.radio.p_max, cfg.radio.r_min,
                                      bits=cfg.radio.bits)
    st, tr, _ = run_algorithm1(model, SCAConfig(), rng)
    ok = (trace_is_monotone(tr, 1e-6) and st.min_qos >= -1e-6
          and st.power_ratio(model.p_max) <= 1 + 1e-9 and st.simplex_error() <= 1e-9)
    return "desk run", ok, (f"objective {st.objective:.4f}, {tr.n_iterations} iterations, "
                            f"min QoS slack {st.min_qos:.2e}")


def run_checks(seed: int = 0):
    rng = np.random.default_rng(seed)
    return [check_minorants(rng), check_projection(rng), check_cascade(rng), check_run(seed)]
