"""NOMA signal model: decode SINRs, achievable rates, QoS slack, decoding orders.

Conventions used throughout the package:

* ``h`` is a sequence of per-cluster arrays, ``h[m]`` of shape ``(K_m, N_T)``;
  row ``k`` is the end-to-end channel of user (m, k).
* ``w`` is an ``(M, N_T)`` array, row ``m`` is the cluster beamformer.
* ``p`` is a sequence of per-cluster power-fraction arrays.
* ``order`` maps decoding positions to user indices, ``order.perm[m][d]``
  is the user decoded d-th in cluster m.  ``None`` means user index equals
  decoding position.

Rates are in bits/s/Hz.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np


class NomaError(ValueError):
    pass


@dataclass(frozen=True)
class UserLayout:
    users_per_cluster: tuple[int, ...]
    positions: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if len(self.users_per_cluster) < 1 or min(self.users_per_cluster) < 1:
            raise NomaError("need M >= 1 clusters with K_m >= 1 users each")

    @property
    def n_clusters(self) -> int:
        return len(self.users_per_cluster)

    @property
    def n_users(self) -> int:
        return sum(self.users_per_cluster)


@dataclass(frozen=True)
class DecodingOrder:
    perm: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for pm in self.perm:
            if sorted(pm) != list(range(len(pm))):
                raise NomaError(f"decoding order {pm} is not a permutation")

    @classmethod
    def identity(cls, users_per_cluster: Sequence[int]) -> "DecodingOrder":
        return cls(tuple(tuple(range(k)) for k in users_per_cluster))

    def position(self, m: int, k: int) -> int:
        return self.perm[m].index(k)

    def last_user(self, m: int) -> int:
        return self.perm[m][-1]


@dataclass(frozen=True)
class LinkBudget:
    noise_power: float
    max_power: float
    qos_rate: float = 0.01

    def __post_init__(self):
        if not self.noise_power > 0 or not self.max_power > 0 or self.qos_rate < 0:
            raise NomaError("need noise_power > 0, max_power > 0, qos_rate >= 0")

    @property
    def qos_threshold(self) -> float:
        return qos_threshold(self.qos_rate)


def qos_threshold(r_min_bits):
    """SINR threshold 2**R_min - 1."""
    return np.exp2(r_min_bits) - 1


def check_power_allocation(p: Sequence[np.ndarray], tol: float = 1e-9) -> None:
    for m, pm in enumerate(p):
        pm = np.asarray(pm, dtype=float)
        if np.any(pm < -tol) or abs(pm.sum() - 1) > tol:
            raise NomaError(f"cluster {m}: power fractions {pm} not on the simplex")


def gain_tensor(h: Sequence[np.ndarray], w: np.ndarray) -> list[np.ndarray]:
    """gains[m][k, n] = |h_{m,k} w_n|^2."""
    w = np.atleast_2d(w)
    return [np.abs(np.atleast_2d(hm) @ w.T) ** 2 for hm in h]


def _positions(order: DecodingOrder | None, m: int, size: int) -> np.ndarray:
    if order is None:
        return np.arange(size)
    return np.asarray(order.perm[m])


def cluster_decode_rates(signal: np.ndarray, interference: np.ndarray, p: np.ndarray) -> np.ndarray:
    """rates[j, k] = log2(1 + gamma_{j->k}) for j >= k (positions), nan elsewhere.

    ``signal[j] = |h_j w_m|^2``, ``interference[j]`` includes the noise,
    ``p`` is in decoding order.
    """
    p = np.asarray(p, dtype=float)
    tail = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])  # P_k = sum_{i>k} p_i
    s = signal[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = s * p[None, :] / (s * tail[None, :] + interference[:, None])
    rates = np.log2(1 + gamma)
    k = len(p)
    rates[np.triu_indices(k, 1)] = np.nan  # j < k is not a valid decoder
    return rates


def _cluster_terms(m, h, w, sigma2, order):
    gains = np.abs(np.atleast_2d(h[m]) @ np.atleast_2d(w).T) ** 2
    pos = _positions(order, m, gains.shape[0])
    gains = gains[pos]
    signal = gains[:, m]
    interference = gains.sum(axis=1) - signal + sigma2
    return signal, interference, pos


def sinr_decode(m: int, j: int, k: int, h, w, p, sigma2: float,
                order: DecodingOrder | None = None) -> float:
    """SINR at user (m, j) when decoding the signal of user (m, k)."""
    pm = np.asarray(p[m], dtype=float)
    km = len(pm)
    dj = order.position(m, j) if order else j
    dk = order.position(m, k) if order else k
    if dj < dk:
        raise NomaError(f"user {j} is decoded before user {k} in cluster {m}")
    hj = np.atleast_2d(h[m])[j]
    w = np.atleast_2d(w)
    s = abs(hj @ w[m]) ** 2
    inter = sum(abs(hj @ w[n]) ** 2 for n in range(w.shape[0]) if n != m)
    pos = _positions(order, m, km)
    p_sorted = pm[pos]
    tail = p_sorted[dk + 1:].sum()
    return s * pm[k] / (s * tail + inter + sigma2)


def achievable_rate(m: int, k: int, h, w, p, sigma2: float,
                    order: DecodingOrder | None = None) -> float:
    """R_{m,k}: min over later decoders of log2(1 + gamma_{j->k})."""
    signal, interference, pos = _cluster_terms(m, h, w, sigma2, order)
    rates = cluster_decode_rates(signal, interference, np.asarray(p[m], dtype=float)[pos])
    dk = order.position(m, k) if order else k
    return float(np.nanmin(rates[dk:, dk]))


def cluster_rates(m, h, w, p, sigma2, order=None) -> np.ndarray:
    """All R_{m,k} of cluster m, in decoding order."""
    signal, interference, pos = _cluster_terms(m, h, w, sigma2, order)
    rates = cluster_decode_rates(signal, interference, np.asarray(p[m], dtype=float)[pos])
    return np.nanmin(rates, axis=0)


def sum_objective(h, w, p, sigma2: float, order: DecodingOrder | None = None) -> float:
    """Sum over clusters of the last-decoded user's rate."""
    return float(sum(cluster_rates(m, h, w, p, sigma2, order)[-1] for m in range(len(h))))


def qos_residuals(h, w, p, sigma2: float, r_min, order: DecodingOrder | None = None
                  ) -> list[np.ndarray]:
    """Per cluster, min-decode-rate minus R_min for every non-last user.

    ``r_min`` is a scalar or per-cluster arrays indexed by user.  Entries are
    in decoding order; single-user clusters give an empty array.
    """
    out = []
    for m in range(len(h)):
        rates = cluster_rates(m, h, w, p, sigma2, order)
        pos = _positions(order, m, len(rates))
        req = r_min if np.isscalar(r_min) else r_min[m]
        req = np.broadcast_to(np.asarray(req, dtype=float), (len(rates),))[pos]
        out.append(rates[:-1] - req[:-1])
    return out


def order_by_effective_gain(h, w) -> DecodingOrder:
    """Ascending |h_{m,k} w_m|^2 within each cluster; ties keep index order."""
    w = np.atleast_2d(w)
    perm = []
    for m, hm in enumerate(h):
        gains = np.abs(np.atleast_2d(hm) @ w[m]) ** 2
        perm.append(tuple(int(i) for i in np.argsort(gains, kind="stable")))
    return DecodingOrder(tuple(perm))


def count_decoding_orders(users_per_cluster: Sequence[int]) -> int:
    return math.prod(math.factorial(k) for k in users_per_cluster)


def enumerate_decoding_orders(users_per_cluster: Sequence[int] | UserLayout,
                              cap: int = 10_000) -> Iterator[DecodingOrder]:
    """Every joint per-cluster permutation, exactly once."""
    if isinstance(users_per_cluster, UserLayout):
        users_per_cluster = users_per_cluster.users_per_cluster
    total = count_decoding_orders(users_per_cluster)
    if total > cap:
        raise NomaError(f"{total} joint decoding orders exceed the cap of {cap}")
    per_cluster = [list(itertools.permutations(range(k))) for k in users_per_cluster]
    for combo in itertools.product(*per_cluster):
        yield DecodingOrder(tuple(tuple(c) for c in combo))
