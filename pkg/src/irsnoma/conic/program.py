"""Solver-agnostic convex program over real variables.

A :class:`ConicProgram` maximizes ``c @ x + c0 + sum_i w_i * log2(a_i @ x + b_i)``
subject to blocks of the following kinds (``x`` is the stacked variable
vector, rows are padded with zeros up to the final variable count):

=========  ====================================================
``eq``     ``A x + b == 0``
``ge``     ``A x + b >= 0``
``soc``    ``||A x + b||_2 <= c x + d``
``rsoc``   ``||A x + b||_2^2 <= (c1 x + d1)(c2 x + d2)``, both factors >= 0
``log``    ``x[t] <= log2(a x + b)``
=========  ====================================================
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PROGRAM_FORMAT = "irsnoma-conic/1"


class ProgramError(ValueError):
    pass


@dataclass
class Constraint:
    kind: str
    data: dict[str, np.ndarray | float | int]
    tag: str = ""


@dataclass
class ConicProgram:
    blocks: dict[str, tuple[int, int]] = field(default_factory=dict)
    n_vars: int = 0
    c: np.ndarray = field(default_factory=lambda: np.zeros(0))
    c0: float = 0.0
    log_terms: list[tuple[np.ndarray, float, float]] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)

    # -- variables --------------------------------------------------------
    def add_variables(self, name: str, size: int) -> slice:
        if name in self.blocks:
            raise ProgramError(f"duplicate variable block {name!r}")
        start = self.n_vars
        self.n_vars += int(size)
        self.blocks[name] = (start, self.n_vars)
        return slice(start, self.n_vars)

    def var(self, name: str) -> slice:
        start, stop = self.blocks[name]
        return slice(start, stop)

    def value(self, x: np.ndarray, name: str) -> np.ndarray:
        return np.asarray(x)[self.var(name)]

    def row(self, entries: dict[str, np.ndarray] | None = None) -> np.ndarray:
        """Dense coefficient row built from ``{block_name: coefficients}``."""
        r = np.zeros(self.n_vars)
        for name, coef in (entries or {}).items():
            r[self.var(name)] += coef
        return r

    def _pad(self, a) -> np.ndarray:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        if a.shape[-1] > self.n_vars:
            raise ProgramError("coefficients reference undeclared variables")
        if a.shape[-1] == self.n_vars:
            return a
        width = [(0, 0)] * (a.ndim - 1) + [(0, self.n_vars - a.shape[-1])]
        return np.pad(a, width)

    # -- objective --------------------------------------------------------
    def maximize(self, c, c0: float = 0.0) -> None:
        self.c = np.asarray(c, dtype=float).copy()
        self.c0 = float(c0)

    def add_log_objective(self, a, b: float, weight: float = 1.0) -> None:
        """Add ``weight * log2(a @ x + b)`` to the maximized objective."""
        if not weight > 0:
            raise ProgramError("log objective weights must be positive")
        self.log_terms.append((np.asarray(a, dtype=float).copy(), float(b), float(weight)))

    # -- constraints ------------------------------------------------------
    def _add(self, kind, tag="", **data) -> int:
        self.constraints.append(Constraint(kind, data, tag))
        return len(self.constraints) - 1

    def add_eq(self, A, b, tag="") -> int:
        return self._add("eq", tag, A=np.atleast_2d(np.asarray(A, float)), b=np.atleast_1d(np.asarray(b, float)))

    def add_ge(self, A, b, tag="") -> int:
        return self._add("ge", tag, A=np.atleast_2d(np.asarray(A, float)), b=np.atleast_1d(np.asarray(b, float)))

    def add_soc(self, A, b, c, d: float, tag="") -> int:
        return self._add("soc", tag, A=np.atleast_2d(np.asarray(A, float)),
                         b=np.atleast_1d(np.asarray(b, float)), c=np.asarray(c, float), d=float(d))

    def add_rsoc(self, A, b, c1, d1: float, c2, d2: float, tag="") -> int:
        return self._add("rsoc", tag, A=np.atleast_2d(np.asarray(A, float)),
                         b=np.atleast_1d(np.asarray(b, float)), c1=np.asarray(c1, float),
                         d1=float(d1), c2=np.asarray(c2, float), d2=float(d2))

    def add_log(self, t: int, a, b: float, tag="") -> int:
        return self._add("log", tag, t=int(t), a=np.asarray(a, float), b=float(b))

    # -- evaluation -------------------------------------------------------
    def padded(self, key_array) -> np.ndarray:
        return self._pad(key_array)

    def objective_value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        val = float(self._pad(self.c) @ x) + self.c0 if self.c.size else self.c0
        for a, b, wgt in self.log_terms:
            arg = float(self._pad(a) @ x) + b
            val += wgt * (np.log2(arg) if arg > 0 else -np.inf)
        return val

    def violations(self, x, relative: bool = False) -> list[float]:
        """Per-constraint violation at ``x`` (0 when satisfied).

        Computed straight from the block definitions, independently of any
        solver's own residual report.  With ``relative`` each violation is
        divided by ``max(1, size of the larger side)``.
        """
        x = np.asarray(x, dtype=float)
        out = []

        def put(viol, scale):
            out.append(float(viol / max(1.0, abs(scale)) if relative else viol))

        for con in self.constraints:
            d = con.data
            if con.kind == "eq":
                r = self._pad(d["A"]) @ x + d["b"]
                put(np.max(np.abs(r)), np.max(np.abs(d["b"])))
            elif con.kind == "ge":
                r = self._pad(d["A"]) @ x + d["b"]
                k = int(np.argmin(r))
                put(max(0.0, -r[k]), np.abs(self._pad(d["A"][k]) * x).sum() + abs(d["b"][k]))
            elif con.kind == "soc":
                lhs = np.linalg.norm(self._pad(d["A"]) @ x + d["b"])
                rhs = self._pad(d["c"]) @ x + d["d"]
                put(max(0.0, lhs - rhs), max(lhs, rhs))
            elif con.kind == "rsoc":
                u = self._pad(d["A"]) @ x + d["b"]
                y = self._pad(d["c1"]) @ x + d["d1"]
                z = self._pad(d["c2"]) @ x + d["d2"]
                # same cone written as ||(2u, y - z)|| <= y + z
                lhs = np.hypot(np.linalg.norm(2 * u), y - z)
                put(max(0.0, lhs - (y + z)), max(lhs, y + z))
            elif con.kind == "log":
                arg = self._pad(d["a"]) @ x + d["b"]
                if arg <= 0:
                    out.append(float("inf"))
                else:
                    put(max(0.0, x[d["t"]] - np.log2(arg)), x[d["t"]])
            else:
                raise ProgramError(f"unknown constraint kind {con.kind!r}")
        return out

    def max_violation(self, x, relative: bool = False) -> float:
        v = self.violations(x, relative)
        return max(v) if v else 0.0

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for con in self.constraints:
            out[con.kind] = out.get(con.kind, 0) + 1
        return out

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        def enc(v):
            return np.asarray(v).tolist() if isinstance(v, np.ndarray) else v

        return {
            "format": PROGRAM_FORMAT,
            "n_vars": self.n_vars,
            "blocks": {k: list(v) for k, v in self.blocks.items()},
            "objective": {"c": self._pad(self.c).tolist() if self.c.size else [0.0] * self.n_vars,
                          "c0": self.c0},
            "log_objective": [{"a": self._pad(a).tolist(), "b": b, "weight": w}
                              for a, b, w in self.log_terms],
            "constraints": [{"kind": con.kind, "tag": con.tag,
                             **{k: enc(v) for k, v in con.data.items()}}
                            for con in self.constraints],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConicProgram":
        if d.get("format") != PROGRAM_FORMAT:
            raise ProgramError(f"unsupported program format {d.get('format')!r}")
        prog = cls()
        for name, (start, stop) in sorted(d["blocks"].items(), key=lambda kv: kv[1][0]):
            if start != prog.n_vars:
                raise ProgramError("variable blocks must be contiguous")
            prog.add_variables(name, stop - start)
        if prog.n_vars != d["n_vars"]:
            raise ProgramError("n_vars does not match the declared blocks")
        prog.maximize(d["objective"]["c"], d["objective"]["c0"])
        for term in d["log_objective"]:
            prog.add_log_objective(term["a"], term["b"], term["weight"])
        for con in d["constraints"]:
            kind, tag = con["kind"], con.get("tag", "")
            data = {k: v for k, v in con.items() if k not in ("kind", "tag")}
            adder = {"eq": prog.add_eq, "ge": prog.add_ge, "soc": prog.add_soc,
                     "rsoc": prog.add_rsoc, "log": prog.add_log}[kind]
            adder(**data, tag=tag)
        return prog


def add_quadratic_upper_bound(program: ConicProgram, C, linear, const: float = 0.0,
                              offset=None, tag: str = "") -> int:
    """Install ``||C x + offset||^2 <= linear @ x + const`` as a rotated cone.

    With ``C`` empty (zero rows) this degenerates to ``linear @ x + const >= 0``.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.size == 0 or not np.any(C):
        off = 0.0 if offset is None else float(np.sum(np.asarray(offset) ** 2))
        return program.add_ge(np.atleast_2d(linear), [const - off], tag=tag)
    b = np.zeros(C.shape[0]) if offset is None else np.asarray(offset, dtype=float)
    # split the product as (linear / s) * s with both factors of similar size
    lin = np.asarray(linear, dtype=float)
    s = math.sqrt(max(1.0, abs(float(const)), float(np.max(np.abs(lin), initial=0.0))))
    return program.add_rsoc(C, b, lin / s, float(const) / s, np.zeros(1), s, tag=tag)


def add_log_hypograph(program: ConicProgram, t: int, a, b: float, tag: str = "") -> int:
    """Install ``x[t] <= log2(a @ x + b)``."""
    return program.add_log(t, a, b, tag=tag)


def save_program(program: ConicProgram, path) -> None:
    Path(path).write_text(json.dumps(program.to_dict()))


def load_program(path) -> ConicProgram:
    return ConicProgram.from_dict(json.loads(Path(path).read_text()))
