"""Convex subproblems of the alternating scheme, built as ConicPrograms.

Active and passive subproblems share one structure.  For every cluster m and
decoding position j there is a *desired* linear term (the signal of user
(m, j) as a function of the optimized variable) and a list of *interference*
linear terms.  The builders install

* QoS rows      (Delta/r) * taylor(|desired|^2) - sigma2 >= ||interference||^2,
* auxiliary     aux_m - sigma2 >= ||interference of the last user||^2,
* rate rows     p_last * taylor(|desired|^2 / aux_m) >= chi_m,

and maximize sum_m log2(1 + chi_m).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import noma
from ..conic import ConicProgram, add_quadratic_upper_bound, linear_map, realify
from .bounds import taylor_quadratic_lb, taylor_quadratic_over_affine_lb
from .model import QoSIncompatible, SolutionState, SystemModel


@dataclass
class _Term:
    desired: tuple[str, np.ndarray]
    interference: list[tuple[str, np.ndarray]]


def tail_sums(p: np.ndarray) -> np.ndarray:
    """P_k = sum_{i>k} p_i."""
    p = np.asarray(p, dtype=float)
    return np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])


def power_margins(model: SystemModel, p) -> list[np.ndarray]:
    """Delta_{m,k} = p_k - r_k P_k for every non-last user."""
    return [(np.asarray(pm) - r * tail_sums(pm))[:-1] for pm, r in zip(p, model.r_thr)]


def check_margins(model: SystemModel, p) -> None:
    for m, d in enumerate(power_margins(model, p)):
        r = model.r_thr[m][:-1]
        if np.any((d <= 0) & (r > 0)):
            raise QoSIncompatible(f"cluster {m}: Delta_p = {d} has non-positive entries")


def _interference_rows(prog: ConicProgram, interference) -> np.ndarray:
    rows = []
    for block, z in interference:
        R = np.zeros((2, prog.n_vars))
        R[:, prog.var(block)] = linear_map(z)
        rows.append(R)
    return np.vstack(rows) if rows else np.zeros((0, prog.n_vars))


def _true_interference(interference, x_bar: dict[str, np.ndarray], sigma2: float) -> float:
    return sigma2 + sum(abs(complex(z @ x_bar[b])) ** 2 for b, z in interference)


def _install_sca(prog: ConicProgram, model: SystemModel, p, terms, x_bar, aux_name, aux_bar):
    """SCA rows for every cluster.

    Rows carrying interference are divided by their interference level at
    ``x_bar`` and the ``aux_name`` block is stored in units of ``aux_bar``, so
    the solver sees O(1) data even when interference dwarfs the noise.
    """
    chi0 = prog.var("chi").start
    aux0 = prog.var(aux_name).start
    aux_bar = np.asarray(aux_bar, dtype=float)
    prog.aux_scale = {aux_name: aux_bar.copy()}
    for m in range(model.n_clusters):
        pm = np.asarray(p[m], dtype=float)
        K = len(pm)
        r = model.r_thr[m]
        tail = tail_sums(pm)
        for k in range(K - 1):
            if r[k] <= 0:
                continue
            scale = (pm[k] - r[k] * tail[k]) / r[k]
            for j in range(k, K):
                block, z = terms[m][j].desired
                bound = taylor_quadratic_lb(z, x_bar[block])
                level = _true_interference(terms[m][j].interference, x_bar, model.sigma2)
                lin = prog.row({block: scale * bound.real_row()})
                add_quadratic_upper_bound(
                    prog, _interference_rows(prog, terms[m][j].interference) / np.sqrt(level),
                    lin / level, (scale * bound.const - model.sigma2) / level,
                    tag=f"qos[{m},{k},{j}]")
        last = terms[m][K - 1]
        lin = prog.row()
        lin[aux0 + m] = 1.0
        add_quadratic_upper_bound(
            prog, _interference_rows(prog, last.interference) / np.sqrt(aux_bar[m]), lin,
            -model.sigma2 / aux_bar[m], tag=f"{aux_name}[{m}]")
        block, z = last.desired
        bound = taylor_quadratic_over_affine_lb(z, x_bar[block], aux_bar[m])
        row = prog.row({block: pm[-1] * bound.real_row()})
        row[aux0 + m] = pm[-1] * bound.eta_coef * aux_bar[m]
        row[chi0 + m] = -1.0
        prog.add_ge(row, [0.0], tag=f"rate[{m}]")
        a = prog.row()
        a[chi0 + m] = 1.0
        prog.add_log_objective(a, 1.0)


def aux_value(prog: ConicProgram, x: np.ndarray, name: str) -> np.ndarray:
    """Read an auxiliary block back in physical units."""
    return prog.value(x, name) * getattr(prog, "aux_scale", {}).get(name, 1.0)


# -- active beamforming ---------------------------------------------------------

def active_terms(model: SystemModel, v: np.ndarray):
    h = model.h(v)
    M = model.n_clusters
    return [[_Term((f"w{m}", h[m][j]), [(f"w{n}", h[m][j]) for n in range(M) if n != m])
             for j in range(h[m].shape[0])] for m in range(M)]


def last_user_interference(terms, x_bar, sigma2) -> np.ndarray:
    return np.array([_true_interference(tm[-1].interference, x_bar, sigma2) for tm in terms])


def build_active_subproblem(model: SystemModel, state: SolutionState) -> ConicProgram:
    """Convex restriction in (w, chi, eta) around the current beamformers."""
    check_margins(model, state.p)
    M, N = model.n_clusters, model.n_tx
    prog = ConicProgram()
    for m in range(M):
        prog.add_variables(f"w{m}", 2 * N)
    prog.add_variables("chi", M)
    prog.add_variables("eta", M)
    terms = active_terms(model, state.v)
    x_bar = {f"w{m}": state.w[m] for m in range(M)}
    eta_bar = last_user_interference(terms, x_bar, model.sigma2)
    _install_sca(prog, model, state.p, terms, x_bar, "eta", eta_bar)
    sel = np.zeros((2 * M * N, prog.n_vars))
    sel[:, : 2 * M * N] = np.eye(2 * M * N)
    prog.add_soc(sel, np.zeros(2 * M * N), np.zeros(1), np.sqrt(model.p_max), tag="budget")
    return prog


def active_point(model: SystemModel, state: SolutionState, prog: ConicProgram) -> np.ndarray:
    """The current iterate written in the active program's variables."""
    x = np.zeros(prog.n_vars)
    for m in range(model.n_clusters):
        x[prog.var(f"w{m}")] = realify(state.w[m])
    return _fill_aux(model, state, prog, x, "eta", model.h(state.v), state.w)


def _fill_aux(model, state, prog, x, aux_name, h, w):
    gains = noma.gain_tensor(h, w)
    unit = getattr(prog, "aux_scale", {}).get(aux_name, np.ones(model.n_clusters))
    for m in range(model.n_clusters):
        s = gains[m][-1, m]
        inter = gains[m][-1].sum() - s + model.sigma2
        x[prog.var(aux_name).start + m] = inter / unit[m]
        x[prog.var("chi").start + m] = state.p[m][-1] * s / inter
    return x


def extract_active(model: SystemModel, prog: ConicProgram, x: np.ndarray) -> np.ndarray:
    from ..conic import derealify

    return np.array([derealify(prog.value(x, f"w{m}")) for m in range(model.n_clusters)])


# -- passive beamforming --------------------------------------------------------

def passive_terms(model: SystemModel, w: np.ndarray):
    z = model.cascade(w)  # z[m][n, j] = g_{m,j}^H diag(F w_n)
    M = model.n_clusters
    return [[_Term(("v", z[m][m, j]), [("v", z[m][n, j]) for n in range(M) if n != m])
             for j in range(z[m].shape[1])] for m in range(M)]


def build_passive_subproblem(model: SystemModel, state: SolutionState,
                             v_bar: np.ndarray | None = None) -> ConicProgram:
    """Convex restriction in (v, chi, mu) around ``v_bar`` (default ``state.v_bar``)."""
    check_margins(model, state.p)
    M, L = model.n_clusters, model.l_irs
    v_bar = state.v_bar if v_bar is None else v_bar
    prog = ConicProgram()
    prog.add_variables("v", 2 * L)
    prog.add_variables("chi", M)
    prog.add_variables("mu", M)
    terms = passive_terms(model, state.w)
    x_bar = {"v": v_bar}
    mu_bar = last_user_interference(terms, x_bar, model.sigma2)
    _install_sca(prog, model, state.p, terms, x_bar, "mu", mu_bar)
    for ell in range(L):
        A = np.zeros((2, prog.n_vars))
        A[0, ell] = 1.0
        A[1, L + ell] = 1.0
        prog.add_soc(A, np.zeros(2), np.zeros(1), 1.0, tag=f"unit[{ell}]")
    return prog


def passive_point(model: SystemModel, state: SolutionState, prog: ConicProgram,
                  v_bar: np.ndarray | None = None) -> np.ndarray:
    v_bar = state.v_bar if v_bar is None else v_bar
    x = np.zeros(prog.n_vars)
    x[prog.var("v")] = realify(v_bar)
    return _fill_aux(model, state, prog, x, "mu", model.h(v_bar), state.w)


def extract_passive(prog: ConicProgram, x: np.ndarray) -> np.ndarray:
    from ..conic import derealify

    return derealify(prog.value(x, "v"))


# -- power allocation -----------------------------------------------------------

def cluster_signal_interference(model: SystemModel, w: np.ndarray, v: np.ndarray):
    """Per cluster (S, I): S[j] = |h_j w_m|^2, I[j] = inter-cluster + sigma2."""
    gains = noma.gain_tensor(model.h(v), w)
    out = []
    for m, gm in enumerate(gains):
        s = gm[:, m]
        out.append((s, gm.sum(axis=1) - s + model.sigma2))
    return out


def build_power_subproblem(model: SystemModel, state: SolutionState) -> ConicProgram:
    """Exact convex power problem for fixed (w, theta)."""
    sizes = model.users_per_cluster
    prog = ConicProgram()
    sl = prog.add_variables("p", sum(sizes))
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = prog.n_vars
    prog.add_ge(np.eye(n), np.zeros(n), tag="nonneg")
    for m, (s, inter) in enumerate(cluster_signal_interference(model, state.w, state.v)):
        K = sizes[m]
        idx = sl.start + offsets[m] + np.arange(K)
        row = np.zeros(n)
        row[idx] = 1.0
        prog.add_eq(row, [-1.0], tag=f"simplex[{m}]")
        r = model.r_thr[m]
        for k in range(K - 1):
            if r[k] <= 0:
                continue
            for j in range(k, K):
                # (p_k - r sum_{i>k} p_i) S_j >= r I_j, divided by r I_j
                row = np.zeros(n)
                row[idx[k]] = s[j] / (r[k] * inter[j])
                row[idx[k + 1:]] = -s[j] / inter[j]
                prog.add_ge(row, [-1.0], tag=f"qos[{m},{k},{j}]")
        a = np.zeros(n)
        a[idx[-1]] = s[-1] / inter[-1]
        prog.add_log_objective(a, 1.0)
    return prog


def extract_power(model: SystemModel, prog: ConicProgram, x: np.ndarray) -> list[np.ndarray]:
    vals = prog.value(x, "p")
    offsets = np.concatenate([[0], np.cumsum(model.users_per_cluster)])
    return [vals[offsets[m]: offsets[m + 1]].copy() for m in range(model.n_clusters)]


def minimal_qos_power(model: SystemModel, w: np.ndarray, v: np.ndarray):
    """Closed-form power split giving every non-last user its least QoS power.

    Maximizes the last user's share, so it is also the exact optimum of the
    power subproblem.  Returns None when no split meets the QoS rows.
    """
    out = []
    for m, (s, inter) in enumerate(cluster_signal_interference(model, w, v)):
        K = len(s)
        r = model.r_thr[m]
        with np.errstate(divide="ignore"):
            ratio = np.where(s > 0, inter / np.where(s > 0, s, 1.0), np.inf)
        # S_k = (1 + r_k) S_{k+1} + r_k c_k, S_{K-1} = p_last; S_0 = alpha p_last + beta
        alpha, beta = 1.0, 0.0
        coeffs = [(alpha, beta)]
        for k in range(K - 2, -1, -1):
            c_k = ratio[k:].max() if r[k] > 0 else 0.0
            if not np.isfinite(c_k):
                return None
            alpha, beta = (1 + r[k]) * alpha, (1 + r[k]) * beta + r[k] * c_k
            coeffs.append((alpha, beta))
        if beta >= 1:
            return None
        p_last = (1 - beta) / alpha
        tails = np.array([a * p_last + b for a, b in reversed(coeffs)])  # S_0..S_{K-1}
        pm = np.append(-np.diff(tails), tails[-1])
        pm = np.maximum(pm, 0.0)
        out.append(pm / pm.sum())
    return out
