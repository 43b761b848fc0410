"""Complex-to-real expansion: a complex vector x is stored as [Re x, Im x]."""

from __future__ import annotations

import numpy as np


def realify(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    return np.concatenate([x.real, x.imag], axis=-1)


def derealify(xr) -> np.ndarray:
    xr = np.asarray(xr, dtype=float)
    n = xr.shape[-1] // 2
    return xr[..., :n] + 1j * xr[..., n:]


def real_part_row(c) -> np.ndarray:
    """Row r with ``r @ realify(x) == Re(c @ x)``."""
    c = np.asarray(c, dtype=complex)
    return np.concatenate([c.real, -c.imag], axis=-1)


def linear_map(z) -> np.ndarray:
    """Real matrix M with ``M @ realify(x) == [Re(z @ x), Im(z @ x)]``.

    For a matrix ``z`` of shape (r, n) the result has shape (2r, 2n): the
    real parts of all rows first, then the imaginary parts.  In either case
    ``||M @ realify(x)||^2 == ||z @ x||^2``.
    """
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    top = np.hstack([z.real, -z.imag])
    bottom = np.hstack([z.imag, z.real])
    return np.vstack([top, bottom])
