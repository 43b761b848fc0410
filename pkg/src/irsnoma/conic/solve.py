"""Backend dispatch for ConicProgram.

Backends
--------
``clarabel``  interior point, supports SOC and exponential cones (default).
``cvxopt``    interior point (``conelp``), SOC only.
``scs``       first-order operator splitting (SCS), SOC only; used as the
              independent cross-check of the interior-point answers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .program import ConicProgram
from .standard import StandardForm, lower

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class SolverOptions:
    backend: str = "clarabel"
    log_encoding: str = "geomean"
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    # a solution flagged inexact by the backend is still accepted when the
    # independent re-check finds relative violations below this
    accept_violation: float = 1e-6


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray | None
    objective_value: float
    residuals: dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    solve_time: float = 0.0
    backend: str = ""
    raw_status: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class SolverUnavailable(RuntimeError):
    pass


def _clarabel(sf: StandardForm, opts: SolverOptions):
    import clarabel

    cones = []
    for kind, dim in sf.cone_list():
        if kind == "zero":
            cones.append(clarabel.ZeroConeT(dim))
        elif kind == "nonneg":
            cones.append(clarabel.NonnegativeConeT(dim))
        elif kind == "soc":
            cones.append(clarabel.SecondOrderConeT(dim))
        else:
            cones.append(clarabel.ExponentialConeT())
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_feas = opts.feas_tol
    settings.tol_gap_abs = opts.gap_tol
    settings.tol_gap_rel = opts.gap_tol
    settings.max_iter = opts.max_iter
    n = sf.n
    P = sp.csc_matrix((n, n))
    A = sp.csc_matrix(sf.A)
    solver = clarabel.DefaultSolver(P, sf.q, A, sf.b, cones, settings)
    sol = solver.solve()
    raw = str(sol.status)
    if raw.endswith("Solved") and not raw.startswith("Almost"):
        status = OPTIMAL
    elif raw.startswith("AlmostSolved"):
        status = "inexact"
    elif "PrimalInfeasible" in raw:
        status = INFEASIBLE
    else:
        status = NUMERICAL_FAILURE
    info = {"r_prim": float(sol.r_prim), "r_dual": float(sol.r_dual)}
    return status, np.asarray(sol.x), raw, int(sol.iterations), info


def _cvxopt(sf: StandardForm, opts: SolverOptions):
    import cvxopt
    from cvxopt import solvers

    if sf.n_exp:
        raise SolverUnavailable("cvxopt backend supports SOC cones only")
    nz = sf.n_zero
    # conelp needs full column rank; columns touching no constraint are dropped
    used = np.any(sf.A != 0, axis=0)
    if np.any(sf.q[~used] != 0):
        return NUMERICAL_FAILURE, None, "unbounded", 0, {}
    A = sf.A[:, used]
    G = cvxopt.matrix(A[nz:])
    h = cvxopt.matrix(sf.b[nz:])
    dims = {"l": sf.n_nonneg, "q": list(sf.soc_dims), "s": []}
    kwargs = {}
    if nz:
        kwargs = {"A": cvxopt.matrix(A[:nz]), "b": cvxopt.matrix(sf.b[:nz])}
    # conelp can hit a domain error when the requested accuracy is out of
    # reach; retry looser and let the caller's violation re-check decide
    relax = 1.0
    while True:
        options = {"show_progress": False, "abstol": opts.gap_tol * relax,
                   "reltol": opts.gap_tol * relax, "feastol": opts.feas_tol * relax,
                   "maxiters": opts.max_iter}
        try:
            res = solvers.conelp(cvxopt.matrix(sf.q[used]), G, h, dims, options=options, **kwargs)
            break
        except (ArithmeticError, ValueError):
            relax *= 10
            if opts.feas_tol * relax > 1e-6:
                raise
    raw = res["status"]
    if raw == "optimal" and relax > 1:
        status = "inexact"
        raw = f"optimal at {relax:g}x tolerance"
    elif raw == "optimal":
        status = OPTIMAL
    elif raw == "primal infeasible":
        status = INFEASIBLE
    elif res["x"] is not None:
        status = "inexact"
    else:
        status = NUMERICAL_FAILURE
    x = None
    if res["x"] is not None:
        x = np.zeros(sf.n)
        x[used] = np.array(res["x"]).ravel()
    info = {"r_prim": float(res.get("primal infeasibility") or 0.0),
            "r_dual": float(res.get("dual infeasibility") or 0.0)}
    return status, x, raw, int(res.get("iterations", 0)), info


def _scs(sf: StandardForm, opts: SolverOptions):
    import scs

    data = {"A": sp.csc_matrix(sf.A), "b": sf.b, "c": sf.q}
    cone = {"z": sf.n_zero, "l": sf.n_nonneg, "q": list(sf.soc_dims)}
    tol = min(opts.feas_tol, opts.gap_tol) * 1e-2
    solver = scs.SCS(data, cone, eps_abs=tol, eps_rel=tol, max_iters=1_000_000, verbose=False)
    res = solver.solve()
    info = res["info"]
    raw = str(info["status"])
    if raw == "solved":
        status = OPTIMAL
    elif raw.startswith("solved"):
        status = "inexact"
    elif raw.startswith("infeasible"):
        status = INFEASIBLE
    else:
        status = NUMERICAL_FAILURE
    resid = {"r_prim": float(info["res_pri"]), "r_dual": float(info["res_dual"])}
    return status, np.asarray(res["x"]), raw, int(info["iter"]), resid


_BACKENDS = {"clarabel": _clarabel, "cvxopt": _cvxopt, "scs": _scs}


def solve(program: ConicProgram, opts: SolverOptions | None = None, **overrides) -> ConicSolution:
    """Solve ``program``; never raises on solver trouble, reports a status instead."""
    opts = opts or SolverOptions()
    if overrides:
        opts = SolverOptions(**{**opts.__dict__, **overrides})
    if opts.backend not in _BACKENDS:
        raise ValueError(f"unknown backend {opts.backend!r}")
    encoding = opts.log_encoding
    if opts.backend in ("cvxopt", "scs"):
        encoding = "geomean"
    t0 = time.perf_counter()
    sf = lower(program, encoding)
    try:
        status, x, raw, iters, info = _BACKENDS[opts.backend](sf, opts)
    except SolverUnavailable:
        raise
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return ConicSolution(NUMERICAL_FAILURE, None, float("nan"), backend=opts.backend,
                             raw_status=f"exception: {exc}",
                             solve_time=time.perf_counter() - t0)
    elapsed = time.perf_counter() - t0
    if x is None or not np.all(np.isfinite(x)) or status == INFEASIBLE:
        return ConicSolution(status if status == INFEASIBLE else NUMERICAL_FAILURE, None,
                             float("nan"), info, iters, elapsed, opts.backend, raw)
    xo = sf.recover(x)
    viol = program.max_violation(xo)
    rel = program.max_violation(xo, relative=True)
    info = {**info, "max_violation": viol, "max_rel_violation": rel}
    if status == "inexact":
        status = OPTIMAL if rel <= opts.accept_violation else NUMERICAL_FAILURE
    return ConicSolution(status, xo, program.objective_value(xo), info, iters, elapsed,
                         opts.backend, raw)
