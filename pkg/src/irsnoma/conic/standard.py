"""Lowering of a ConicProgram to the standard form

    minimize q @ x   s.t.   A x + s = b,   s in K

with K a product of zero, nonnegative, second-order and exponential cones
(in that order).  The exponential cone is {(u, v, w): v*exp(u/v) <= w, v > 0}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .program import ConicProgram, ProgramError

LN2 = math.log(2.0)


@dataclass
class StandardForm:
    q: np.ndarray
    A: np.ndarray
    b: np.ndarray
    n_zero: int
    n_nonneg: int
    soc_dims: list[int]
    n_exp: int
    n_orig: int
    encoding: str
    # explicit log-hypograph variables dropped by the geometric-mean encoding
    implicit_logs: list[tuple[int, np.ndarray, float]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def cone_list(self) -> list[tuple[str, int]]:
        out = []
        if self.n_zero:
            out.append(("zero", self.n_zero))
        if self.n_nonneg:
            out.append(("nonneg", self.n_nonneg))
        out.extend(("soc", d) for d in self.soc_dims)
        out.extend(("exp", 3) for _ in range(self.n_exp))
        return out

    def recover(self, x: np.ndarray) -> np.ndarray:
        """Original-variable values from a standard-form solution."""
        xo = np.array(x[: self.n_orig], dtype=float)
        for t, a, b in self.implicit_logs:
            arg = a @ xo + b
            xo[t] = math.log2(arg) if arg > 0 else -math.inf
        return xo


class _Rows:
    def __init__(self):
        self.A: list[np.ndarray] = []
        self.b: list[float] = []

    def add(self, coef, const):
        # s = const + coef @ x  ->  A row = -coef
        self.A.append(-np.asarray(coef, dtype=float))
        self.b.append(float(const))


def _geomean_eligible(prog: ConicProgram):
    """Log terms (a, b, weight) if the whole objective is an equal-weight sum of logs."""
    c = prog.padded(prog.c) if prog.c.size else np.zeros(prog.n_vars)
    logs = [con for con in prog.constraints if con.kind == "log"]
    terms = [(prog.padded(a), b, w) for a, b, w in prog.log_terms]
    implicit = []
    if logs:
        t_idx = [con.data["t"] for con in logs]
        if len(set(t_idx)) != len(t_idx):
            return None
        others = np.delete(c, t_idx)
        if np.any(others != 0):
            return None
        coefs = c[t_idx]
        if np.any(coefs <= 0):
            return None
        # t must not appear anywhere but its own hypograph
        for con in prog.constraints:
            if con.kind == "log":
                if np.any(prog.padded(con.data["a"])[t_idx] != 0):
                    return None
                continue
            for key in ("A", "c", "c1", "c2"):
                if key in con.data and np.any(prog.padded(con.data[key])[..., t_idx] != 0):
                    return None
        for a, _, _ in terms:
            if np.any(a[t_idx] != 0):
                return None
        for con, coef in zip(logs, coefs):
            terms.append((prog.padded(con.data["a"]), con.data["b"], float(coef)))
            implicit.append((con.data["t"], prog.padded(con.data["a"]), con.data["b"]))
    elif np.any(c != 0):
        return None
    if not terms:
        return None
    weights = {w for _, _, w in terms}
    if len(weights) != 1:
        return None
    return terms, implicit


def lower(prog: ConicProgram, encoding: str = "geomean") -> StandardForm:
    """Compile ``prog`` to standard form.

    ``encoding`` selects how log terms become cones: ``"geomean"`` (SOC-only,
    used whenever the objective is an equal-weight sum of logs) or ``"exp"``.
    The geometric-mean encoding falls back to ``"exp"`` when not applicable.
    """
    if encoding not in ("geomean", "exp"):
        raise ProgramError(f"unknown log encoding {encoding!r}")
    n0 = prog.n_vars
    has_logs = bool(prog.log_terms) or any(con.kind == "log" for con in prog.constraints)
    geo = _geomean_eligible(prog) if (has_logs and encoding == "geomean") else None
    used = "geomean" if geo is not None else ("exp" if has_logs else "none")

    zero, nonneg, socs, exps = _Rows(), _Rows(), [], []
    n_aux = 0
    aux_q: list[float] = []

    def new_var(cost=0.0):
        nonlocal n_aux
        n_aux += 1
        aux_q.append(cost)
        return n0 + n_aux - 1

    def widen(r):
        return np.concatenate([r, np.zeros(n0 + n_aux - len(r))]) if len(r) < n0 + n_aux else r

    soc_blocks: list[tuple[np.ndarray, np.ndarray]] = []  # (coef rows, const)

    def add_soc(coef_rows, consts):
        soc_blocks.append((coef_rows, np.asarray(consts, dtype=float)))

    for con in prog.constraints:
        d = con.data
        if con.kind == "eq":
            A = prog.padded(d["A"])
            for row, b in zip(A, d["b"]):
                zero.add(row, b)
        elif con.kind == "ge":
            A = prog.padded(d["A"])
            for row, b in zip(A, d["b"]):
                nonneg.add(row, b)
        elif con.kind == "soc":
            rows = [prog.padded(d["c"])] + list(prog.padded(d["A"]))
            add_soc(rows, [d["d"], *d["b"]])
        elif con.kind == "rsoc":
            c1, c2 = prog.padded(d["c1"]), prog.padded(d["c2"])
            A = prog.padded(d["A"])
            rows = [c1 + c2, c1 - c2] + list(2 * A)
            add_soc(rows, [d["d1"] + d["d2"], d["d1"] - d["d2"], *(2 * d["b"])])
        elif con.kind == "log":
            if geo is not None:
                continue
            e = np.zeros(n0)
            e[d["t"]] = LN2
            exps.append(([e, np.zeros(n0), prog.padded(d["a"])], [0.0, 1.0, d["b"]]))
        else:
            raise ProgramError(f"unknown constraint kind {con.kind!r}")

    q_orig = -(prog.padded(prog.c) if prog.c.size else np.zeros(n0))
    implicit = []
    if geo is not None:
        terms, implicit = geo
        q_orig = np.zeros(n0)
        g = new_var(cost=-1.0)
        e_g = lambda: widen(np.eye(1, n0 + n_aux, g).ravel())  # noqa: E731
        leaves = [(a, b) for a, b, _ in terms]
        if len(leaves) == 1:
            a, b = leaves[0]
            nonneg.add(widen(a) - e_g(), b)
        else:
            size = 1 << (len(leaves) - 1).bit_length()
            level = [(widen(a), b) for a, b in leaves] + [(e_g(), 0.0)] * (size - len(leaves))
            while len(level) > 1:
                nxt = []
                for i in range(0, len(level), 2):
                    (ra, ba), (rb, bb) = level[i], level[i + 1]
                    y = g if len(level) == 2 else new_var()
                    ey = np.eye(1, n0 + n_aux, y).ravel()
                    ra, rb = widen(ra), widen(rb)
                    # y^2 <= a*b  <=>  ||(a - b, 2y)|| <= a + b
                    add_soc([ra + rb, ra - rb, 2 * ey], [ba + bb, ba - bb, 0.0])
                    nxt.append((ey, 0.0))
                level = nxt
    elif used == "exp":
        for a, b, wgt in prog.log_terms:
            t = new_var(cost=-wgt)
            et = np.zeros(n0 + n_aux)
            et[t] = LN2
            exps.append(([et, np.zeros(n0), prog.padded(a)], [0.0, 1.0, b]))

    n = n0 + n_aux
    q = np.concatenate([q_orig, np.asarray(aux_q, dtype=float)])

    A_rows, b_rows = [], []
    for rows in (zero, nonneg):
        A_rows.extend(widen(r) for r in rows.A)
        b_rows.extend(rows.b)
    soc_dims = []
    for coef_rows, consts in soc_blocks:
        for r in coef_rows:
            A_rows.append(-widen(np.asarray(r)))
        b_rows.extend(consts)
        soc_dims.append(len(coef_rows))
    for coef_rows, consts in exps:
        for r in coef_rows:
            A_rows.append(-widen(np.asarray(r)))
        b_rows.extend(consts)

    A = np.array(A_rows).reshape(len(A_rows), n) if A_rows else np.zeros((0, n))
    return StandardForm(q=q, A=A, b=np.asarray(b_rows, dtype=float), n_zero=len(zero.b),
                        n_nonneg=len(nonneg.b), soc_dims=soc_dims, n_exp=len(exps),
                        n_orig=n0, encoding=used, implicit_logs=implicit)
