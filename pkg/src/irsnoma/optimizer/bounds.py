"""First-order minorants used by the SCA subproblems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..conic.realify import real_part_row


@dataclass(frozen=True)
class AffineBound:
    """``Re(coef @ w) + eta_coef * eta + const``: affine in (w, eta)."""

    coef: np.ndarray
    const: float
    eta_coef: float = 0.0

    def __call__(self, w, eta: float = 0.0) -> float:
        return float(np.real(self.coef @ np.asarray(w))) + self.eta_coef * eta + self.const

    def real_row(self) -> np.ndarray:
        return real_part_row(self.coef)


def taylor_quadratic_lb(z, w_bar) -> AffineBound:
    """2 Re(w_bar^H z^H z w) - |z w_bar|^2, a global minorant of |z w|^2."""
    z = np.asarray(z, dtype=complex)
    zw = complex(z @ np.asarray(w_bar, dtype=complex))
    return AffineBound(2 * np.conj(zw) * z, -abs(zw) ** 2)


def taylor_quadratic_over_affine_lb(z, w_bar, eta_bar: float) -> AffineBound:
    """Minorant of |z w|^2 / eta (eta > 0), tight at (w_bar, eta_bar)."""
    if not eta_bar > 0:
        raise ValueError(f"eta_bar must be positive, got {eta_bar}")
    z = np.asarray(z, dtype=complex)
    zw = complex(z @ np.asarray(w_bar, dtype=complex))
    return AffineBound(2 * np.conj(zw) * z / eta_bar, 0.0, -(abs(zw) / eta_bar) ** 2)
