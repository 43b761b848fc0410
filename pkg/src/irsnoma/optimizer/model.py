"""Problem data, iterate state, phase quantization and run traces."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .. import noma
from ..channel import ChannelRealization
from ..conic import SolverOptions
from ..noma import DecodingOrder

TWO_PI = 2 * math.pi


class InitializationError(RuntimeError):
    """No QoS-feasible starting point found within the allowed attempts."""


class QoSIncompatible(RuntimeError):
    """Current power split leaves some Delta_p <= 0; the SCA builders cannot start."""


# -- phase grid ---------------------------------------------------------------

def phase_grid(bits: int) -> np.ndarray:
    if bits < 1:
        raise ValueError("bits must be >= 1")
    n = 1 << bits
    return TWO_PI * np.arange(n) / n


def project_phase(angle, bits: int):
    """Nearest point of the 2**bits phase grid under wrap-around distance.

    Exact halfway cases go to the numerically smaller grid value.  Returned
    values are computed as 2*pi*i/2**bits from integer indices.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    n = 1 << bits
    a = np.mod(np.asarray(angle, dtype=float), TWO_PI)
    x = a * (n / TWO_PI)
    lo = np.floor(x)
    frac = x - lo
    idx = np.where(frac > 0.5, lo + 1, lo).astype(np.int64)
    # tie between the last grid point and 2*pi: 0 is the smaller value
    idx = np.where((frac == 0.5) & (lo == n - 1), n, idx) % n
    out = TWO_PI * idx / n
    return float(out) if np.ndim(out) == 0 else out


def grid_index(theta, bits: int) -> np.ndarray:
    n = 1 << bits
    return np.rint(np.mod(theta, TWO_PI) * n / TWO_PI).astype(np.int64) % n


# -- problem data ---------------------------------------------------------------

@dataclass
class Evaluation:
    objective: float
    rates: list[np.ndarray]
    qos: list[np.ndarray]

    @property
    def sum_rate(self) -> float:
        """Achievable rates summed over every user, not only the objective users."""
        return float(sum(r.sum() for r in self.rates))

    @property
    def min_qos(self) -> float:
        vals = [q.min() for q in self.qos if q.size]
        return float(min(vals)) if vals else math.inf


@dataclass
class SystemModel:
    """Channels and link budget with users of each cluster in decoding order.

    ``g[m][d]`` is the IRS->user vector of the user decoded d-th in cluster m
    (the last row is the user whose rate enters the objective).
    """

    f: np.ndarray
    base_g: list[np.ndarray]
    sigma2: float
    p_max: float
    r_min: list[np.ndarray]
    bits: int | None = 5
    order: DecodingOrder | None = None
    w_scale: float = 1.0  # physical w = w_scale * w of this model

    def __post_init__(self):
        if self.order is None:
            self.order = DecodingOrder.identity([gm.shape[0] for gm in self.base_g])
        self.g = [np.asarray(gm)[list(pm)] for gm, pm in zip(self.base_g, self.order.perm)]
        self.r_min_sorted = [np.asarray(r, dtype=float)[list(pm)]
                             for r, pm in zip(self.r_min, self.order.perm)]
        self.r_thr = [noma.qos_threshold(r) for r in self.r_min_sorted]
        self.g_conj = [gm.conj() for gm in self.g]

    @classmethod
    def from_channels(cls, ch: ChannelRealization, sigma2: float, p_max: float,
                      r_min: float | Sequence = 0.01, bits: int | None = 5,
                      order: DecodingOrder | None = None) -> "SystemModel":
        if np.isscalar(r_min):
            r_min = [np.full(gm.shape[0], float(r_min)) for gm in ch.g]
        return cls(ch.f, list(ch.g), float(sigma2), float(p_max), list(r_min), bits, order)

    @property
    def n_clusters(self) -> int:
        return len(self.g)

    @property
    def n_tx(self) -> int:
        return self.f.shape[1]

    @property
    def l_irs(self) -> int:
        return self.f.shape[0]

    @property
    def users_per_cluster(self) -> list[int]:
        return [gm.shape[0] for gm in self.g]

    def with_order(self, order: DecodingOrder) -> "SystemModel":
        return replace(self, order=order)

    def with_bits(self, bits: int | None) -> "SystemModel":
        return replace(self, bits=bits)

    def normalized(self) -> "SystemModel":
        """Same problem in units where sigma2 = 1 and P_max = 1."""
        scale = math.sqrt(self.p_max / self.sigma2)
        return replace(self, f=self.f * scale, sigma2=1.0, p_max=1.0,
                       w_scale=self.w_scale * math.sqrt(self.p_max))

    def h(self, v: np.ndarray) -> list[np.ndarray]:
        """Effective channels g^H diag(v) F per cluster, decoding order."""
        return [(gc * v) @ self.f for gc in self.g_conj]

    def cascade(self, w: np.ndarray) -> list[np.ndarray]:
        """z[m][n] = g_{m,j}^H diag(F w_n) for all j: shape (M, K_m, L) per m."""
        fw = self.f @ np.atleast_2d(w).T  # (L, M)
        return [gc[None, :, :] * fw.T[:, None, :] for gc in self.g_conj]

    def evaluate(self, w: np.ndarray, v: np.ndarray, p: Sequence[np.ndarray]) -> Evaluation:
        h = self.h(v)
        rates = [noma.cluster_rates(m, h, w, p, self.sigma2) for m in range(self.n_clusters)]
        qos = noma.qos_residuals(h, w, p, self.sigma2, self.r_min_sorted)
        return Evaluation(float(sum(r[-1] for r in rates)), rates, qos)

    def objective_cap(self) -> float:
        """Crude upper bound on the sum objective (sanity ceiling)."""
        fro2 = np.linalg.norm(self.f) ** 2
        cap = 0.0
        for gm in self.g:
            gmax = np.max(np.sum(np.abs(gm) ** 2, axis=1))
            cap += math.log2(1 + self.p_max * fro2 * gmax * self.l_irs / self.sigma2)
        return cap


# -- iterate ------------------------------------------------------------------

@dataclass
class SolutionState:
    w: np.ndarray
    theta: np.ndarray
    p: list[np.ndarray]
    v_bar: np.ndarray | None = None
    chi: np.ndarray | None = None
    eta: np.ndarray | None = None
    mu: np.ndarray | None = None
    objective: float = -math.inf
    min_qos: float = math.inf

    def __post_init__(self):
        if self.v_bar is None:
            self.v_bar = np.exp(1j * self.theta)

    @property
    def v(self) -> np.ndarray:
        return np.exp(1j * self.theta)

    def copy(self, **changes) -> "SolutionState":
        base = {
            "w": self.w.copy(), "theta": self.theta.copy(), "p": [x.copy() for x in self.p],
            "v_bar": self.v_bar.copy(),
            "chi": None if self.chi is None else self.chi.copy(),
            "eta": None if self.eta is None else self.eta.copy(),
            "mu": None if self.mu is None else self.mu.copy(),
            "objective": self.objective, "min_qos": self.min_qos,
        }
        base.update(changes)
        return SolutionState(**base)

    def power_ratio(self, p_max: float) -> float:
        return float(np.sum(np.abs(self.w) ** 2) / p_max)

    def simplex_error(self) -> float:
        return float(max(max(abs(pm.sum() - 1), max(0.0, -pm.min())) for pm in self.p))


@dataclass(frozen=True)
class SCAConfig:
    outer_tol: float = 1e-4
    max_outer_iters: int = 100
    feasibility_tol: float = 1e-6
    ascent_tol: float = 1e-9
    init_attempts: int = 20
    init_policy: str = "mrt-min-qos"
    order_policy: str = "effective-gain"  # or "exhaustive"
    order_cap: int = 10_000
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if not self.outer_tol > 0:
            raise ValueError("outer_tol must be positive")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.order_policy not in ("effective-gain", "exhaustive"):
            raise ValueError(f"unknown order policy {self.order_policy!r}")


# -- trace ----------------------------------------------------------------------

@dataclass
class StepRecord:
    iteration: int
    step: str
    status: str
    accepted: bool
    objective: float
    min_qos: float
    power_ratio: float
    simplex_error: float


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    after_active: float
    after_passive: float
    after_power: float
    min_qos: float
    statuses: str
    wall_ms: float


TRACE_COLUMNS = ["iteration", "objective_total", "objective_after_active",
                 "objective_after_passive", "objective_after_power", "min_qos_residual",
                 "solver_status_codes", "wall_ms", "scheme"]


@dataclass
class IterationTrace:
    scheme: str = "proposed"
    iterations: list[IterationRecord] = field(default_factory=list)
    steps: list[StepRecord] = field(default_factory=list)
    converged: bool = False
    degraded: int = 0

    @property
    def objectives(self) -> list[float]:
        return [r.objective for r in self.iterations]

    @property
    def n_iterations(self) -> int:
        return max(0, len(self.iterations) - 1)

    def rows(self, include_timing: bool = True) -> list[list]:
        out = []
        for r in self.iterations:
            out.append([r.iteration, f"{r.objective:.12g}", f"{r.after_active:.12g}",
                        f"{r.after_passive:.12g}", f"{r.after_power:.12g}",
                        f"{r.min_qos:.12g}", r.statuses,
                        f"{r.wall_ms:.3f}" if include_timing else "", self.scheme])
        return out

    def write_csv(self, path, include_timing: bool = True) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(TRACE_COLUMNS)
            wr.writerows(self.rows(include_timing))
