"""3D Saleh-Valenzuela channel synthesis for the BS-IRS-user links.

The BS carries a uniform linear array (ULA) of ``n_tx`` antennas, the IRS a
uniform planar array (UPA) of ``l_x * l_z`` elements.  UPA vectors are
flattened row-major over ``(l_z_idx, l_x_idx)``, i.e. element
``l_z_idx * l_x + l_x_idx``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class ChannelError(ValueError):
    """Invalid argument passed to a channel routine."""


@dataclass(frozen=True)
class ArrayGeometry:
    n_tx: int
    l_x: int
    l_z: int
    carrier_wavelength: float = SPEED_OF_LIGHT / 28e9
    antenna_spacing: float | None = None  # None -> half wavelength

    def __post_init__(self):
        for name in ("n_tx", "l_x", "l_z"):
            if int(getattr(self, name)) < 1:
                raise ChannelError(f"{name} must be >= 1")
        if not self.carrier_wavelength > 0:
            raise ChannelError("carrier_wavelength must be positive")
        if self.antenna_spacing is not None and not self.antenna_spacing > 0:
            raise ChannelError("antenna_spacing must be positive")

    @property
    def l_irs(self) -> int:
        return self.l_x * self.l_z

    @property
    def spacing(self) -> float:
        if self.antenna_spacing is None:
            return self.carrier_wavelength / 2
        return self.antenna_spacing

    @property
    def phase_const(self) -> float:
        """2*pi*d_AS / lambda (pi for half-wavelength spacing)."""
        return 2 * math.pi * self.spacing / self.carrier_wavelength


@dataclass(frozen=True)
class PathLossParams:
    beta1: float
    beta2: float
    shadow_std: float


LOS = PathLossParams(beta1=61.4, beta2=2.0, shadow_std=5.8)
NLOS = PathLossParams(beta1=72.0, beta2=2.92, shadow_std=8.7)


@dataclass(frozen=True)
class PathLossModel:
    los: PathLossParams = LOS
    nlos: PathLossParams = NLOS
    shadowing: bool = True

    def params(self, link_class: str) -> PathLossParams:
        if link_class == "LoS":
            return self.los
        if link_class == "NLoS":
            return self.nlos
        raise ChannelError(f"unknown link class {link_class!r}")


@dataclass
class PathRealization:
    gain: complex
    aoa_azimuth: float
    aoa_elevation: float
    aod_azimuth: float
    aod_elevation: float = 0.0

    def to_dict(self):
        return {
            "gain": [self.gain.real, self.gain.imag],
            "aoa_azimuth": self.aoa_azimuth,
            "aoa_elevation": self.aoa_elevation,
            "aod_azimuth": self.aod_azimuth,
            "aod_elevation": self.aod_elevation,
        }

    @classmethod
    def from_dict(cls, d):
        re, im = d["gain"]
        return cls(complex(re, im), d["aoa_azimuth"], d["aoa_elevation"],
                   d["aod_azimuth"], d.get("aod_elevation", 0.0))


@dataclass
class ChannelRealization:
    """One draw of F (L_IRS x N_T) and the per-cluster IRS->user vectors.

    ``g[m]`` has shape ``(K_m, L_IRS)``; row ``k`` is g_{m,k}.
    """

    f: np.ndarray
    g: list[np.ndarray]
    seed: int | None = None
    paths_f: list[PathRealization] = field(default_factory=list)
    paths_g: list[list[list[PathRealization]]] = field(default_factory=list)

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=complex)
        self.g = [np.atleast_2d(np.asarray(gm, dtype=complex)) for gm in self.g]
        if self.f.ndim != 2:
            raise ChannelError("F must be a matrix")
        for gm in self.g:
            if gm.shape[1] != self.f.shape[0]:
                raise ChannelError("g rows must have length L_IRS")
        if not np.all(np.isfinite(self.f)) or not all(np.all(np.isfinite(gm)) for gm in self.g):
            raise ChannelError("channel entries must be finite")

    @property
    def l_irs(self) -> int:
        return self.f.shape[0]

    @property
    def n_tx(self) -> int:
        return self.f.shape[1]

    @property
    def users_per_cluster(self) -> list[int]:
        return [gm.shape[0] for gm in self.g]


def _check_angle(*angles):
    for a in angles:
        if not np.isfinite(a):
            raise ChannelError(f"angle must be finite, got {a}")


def ula_response(theta: float, n: int, phase_const: float = math.pi) -> np.ndarray:
    """Unit-norm ULA steering vector, entry i = exp(j*c*i*sin(theta))/sqrt(n)."""
    _check_angle(theta)
    if n < 1:
        raise ChannelError("n must be >= 1")
    idx = np.arange(n)
    return np.exp(1j * phase_const * idx * math.sin(theta)) / math.sqrt(n)


def upa_response(theta: float, phi: float, l_x: int, l_z: int,
                 phase_const: float = math.pi) -> np.ndarray:
    """Unit-norm UPA steering vector, row-major over (l_z_idx, l_x_idx)."""
    _check_angle(theta, phi)
    if l_x < 1 or l_z < 1:
        raise ChannelError("l_x and l_z must be >= 1")
    ix = np.arange(l_x) * (math.sin(theta) * math.sin(phi))
    iz = np.arange(l_z) * math.cos(phi)
    phase = np.add.outer(iz, ix).ravel()
    return np.exp(1j * phase_const * phase) / math.sqrt(l_x * l_z)


def path_loss_db(distance: float, params: PathLossParams, shadow_db: float = 0.0) -> float:
    if not distance > 0:
        raise ChannelError(f"distance must be positive, got {distance}")
    return params.beta1 + 10 * params.beta2 * math.log10(distance) + shadow_db


def sample_path_loss_db(distance: float, link_class: str, rng: np.random.Generator | None = None,
                        model: PathLossModel = PathLossModel()) -> float:
    """beta1 + 10*beta2*log10(d) + beta3, beta3 ~ N(0, shadow_std^2) in dB.

    Shadowing is skipped when ``rng`` is None or the model disables it.
    """
    params = model.params(link_class)
    shadow = 0.0
    if rng is not None and model.shadowing:
        shadow = params.shadow_std * rng.standard_normal()
    return path_loss_db(distance, params, shadow)


def _path_gains(n_paths: int, distance: float, rng: np.random.Generator,
                model: PathLossModel) -> np.ndarray:
    # one shadowing draw per link, scaled by the class std of each path
    xi = rng.standard_normal() if model.shadowing else 0.0
    gains = np.empty(n_paths, dtype=complex)
    for n in range(n_paths):
        params = model.los if n == 0 else model.nlos
        var = 10 ** (-0.1 * path_loss_db(distance, params, params.shadow_std * xi))
        re, im = rng.standard_normal(2)
        gains[n] = math.sqrt(var / 2) * complex(re, im)
    return gains


def _angles(rng, size):
    return rng.uniform(-math.pi / 2, math.pi / 2, size=size)


def sample_channel_f(geometry: ArrayGeometry, n_paths: int, bs_irs_distance: float,
                     rng: np.random.Generator, model: PathLossModel = PathLossModel(),
                     return_paths: bool = False):
    """BS->IRS matrix F = sqrt(N_T L / N_BI) sum_n p_n a_n(aoa) b_n(aod)^H."""
    if n_paths < 1:
        raise ChannelError("n_paths must be >= 1")
    if not bs_irs_distance > 0:
        raise ChannelError("distance must be positive")
    gains = _path_gains(n_paths, bs_irs_distance, rng, model)
    ang = _angles(rng, (n_paths, 3))
    c = geometry.phase_const
    f = np.zeros((geometry.l_irs, geometry.n_tx), dtype=complex)
    paths = []
    for n in range(n_paths):
        a = upa_response(ang[n, 0], ang[n, 1], geometry.l_x, geometry.l_z, c)
        b = ula_response(ang[n, 2], geometry.n_tx, c)
        f += gains[n] * np.outer(a, b.conj())
        paths.append(PathRealization(complex(gains[n]), float(ang[n, 0]), float(ang[n, 1]),
                                     float(ang[n, 2])))
    f *= math.sqrt(geometry.n_tx * geometry.l_irs / n_paths)
    return (f, paths) if return_paths else f


def sample_channel_g(geometry: ArrayGeometry, n_paths: int, irs_user_distance: float,
                     rng: np.random.Generator, model: PathLossModel = PathLossModel(),
                     return_paths: bool = False):
    """IRS->user vector g = sqrt(L / N_IU) sum_n p_n a_n(aod)."""
    if n_paths < 1:
        raise ChannelError("n_paths must be >= 1")
    if not irs_user_distance > 0:
        raise ChannelError("distance must be positive")
    gains = _path_gains(n_paths, irs_user_distance, rng, model)
    ang = _angles(rng, (n_paths, 2))
    c = geometry.phase_const
    g = np.zeros(geometry.l_irs, dtype=complex)
    paths = []
    for n in range(n_paths):
        g += gains[n] * upa_response(ang[n, 0], ang[n, 1], geometry.l_x, geometry.l_z, c)
        paths.append(PathRealization(complex(gains[n]), 0.0, 0.0, float(ang[n, 0]),
                                     float(ang[n, 1])))
    g *= math.sqrt(geometry.l_irs / n_paths)
    return (g, paths) if return_paths else g


def effective_channel(g: np.ndarray, phases: np.ndarray, f: np.ndarray) -> np.ndarray:
    """End-to-end row h = g^H diag(exp(j*theta)) F."""
    g = np.asarray(g)
    phases = np.asarray(phases, dtype=float)
    f = np.asarray(f)
    if g.shape[-1] != f.shape[0] or phases.shape[-1] != f.shape[0]:
        raise ChannelError(
            f"dimension mismatch: g {g.shape}, phases {phases.shape}, F {f.shape}")
    return (g.conj() * np.exp(1j * phases)) @ f


def cascade_vector(g: np.ndarray, f: np.ndarray, w: np.ndarray) -> np.ndarray:
    """z = g^H diag(F w); z @ v equals h @ w for v = exp(j*theta)."""
    g = np.asarray(g)
    f = np.asarray(f)
    w = np.asarray(w)
    if g.shape[-1] != f.shape[0] or w.shape[0] != f.shape[1]:
        raise ChannelError(f"dimension mismatch: g {g.shape}, F {f.shape}, w {w.shape}")
    return g.conj() * (f @ w)


def draw_channels(geometry: ArrayGeometry, bs_position: Sequence[float],
                  irs_position: Sequence[float], user_positions: Sequence[np.ndarray],
                  rng: np.random.Generator, n_bi: int = 3, n_iu: int = 3,
                  model: PathLossModel = PathLossModel(), seed: int | None = None
                  ) -> ChannelRealization:
    """Draw F and every g_{m,k}; ``user_positions[m]`` is a (K_m, 3) array."""
    bs = np.asarray(bs_position, dtype=float)
    irs = np.asarray(irs_position, dtype=float)
    f, paths_f = sample_channel_f(geometry, n_bi, float(np.linalg.norm(irs - bs)), rng,
                                  model, return_paths=True)
    g, paths_g = [], []
    for cluster in user_positions:
        rows, cpaths = [], []
        for pos in np.atleast_2d(cluster):
            d = float(np.linalg.norm(np.asarray(pos, dtype=float) - irs))
            vec, p = sample_channel_g(geometry, n_iu, d, rng, model, return_paths=True)
            rows.append(vec)
            cpaths.append(p)
        g.append(np.array(rows))
        paths_g.append(cpaths)
    return ChannelRealization(f, g, seed=seed, paths_f=paths_f, paths_g=paths_g)


# --- serialization --------------------------------------------------------
#
# JSON container, format "irsnoma-channel/1":
#   {"format": ..., "seed": int|null,
#    "f": {"shape": [L, N], "re": [...], "im": [...]},      (row-major)
#    "g": [{"shape": [K_m, L], "re": [...], "im": [...]}, ...],
#    "paths_f": [...], "paths_g": [[[...]]]}

CHANNEL_FORMAT = "irsnoma-channel/1"


def _pack(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=complex)
    return {"shape": list(a.shape), "re": a.real.ravel().tolist(), "im": a.imag.ravel().tolist()}


def _unpack(d: dict) -> np.ndarray:
    re = np.asarray(d["re"], dtype=float)
    im = np.asarray(d["im"], dtype=float)
    return (re + 1j * im).reshape(d["shape"])


def channel_to_dict(ch: ChannelRealization) -> dict:
    return {
        "format": CHANNEL_FORMAT,
        "seed": ch.seed,
        "f": _pack(ch.f),
        "g": [_pack(gm) for gm in ch.g],
        "paths_f": [p.to_dict() for p in ch.paths_f],
        "paths_g": [[[p.to_dict() for p in user] for user in cl] for cl in ch.paths_g],
    }


def channel_from_dict(d: dict) -> ChannelRealization:
    if d.get("format") != CHANNEL_FORMAT:
        raise ChannelError(f"unsupported channel format {d.get('format')!r}")
    return ChannelRealization(
        _unpack(d["f"]),
        [_unpack(gm) for gm in d["g"]],
        seed=d.get("seed"),
        paths_f=[PathRealization.from_dict(p) for p in d.get("paths_f", [])],
        paths_g=[[[PathRealization.from_dict(p) for p in user] for user in cl]
                 for cl in d.get("paths_g", [])],
    )


def save_channel(ch: ChannelRealization, path) -> None:
    Path(path).write_text(json.dumps(channel_to_dict(ch)))


def load_channel(path) -> ChannelRealization:
    return channel_from_dict(json.loads(Path(path).read_text()))
