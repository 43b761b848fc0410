"""Scenario configuration: dataclasses, YAML loading, validation, profiles.

A config file is YAML with up to five sections plus an optional profile::

    profile: desk            # or "full" (default)
    geometry:  {bs_position, irs_position, user_center, user_radius}
    counts:    {n_tx, l_x, l_z, n_clusters, users_per_cluster, n_bi, n_iu, clusters}
    radio:     {carrier_ghz, bandwidth_hz, noise_mode, noise_psd_dbm_hz, noise_dbm,
                p_max_dbm, r_min, bits}
    algorithm: {outer_tol, max_outer_iters, feasibility_tol, init_attempts, order_policy,
                backend, log_encoding, schemes, oma_per_slot}
    campaign:  {n_trials, seed, parallel, sweep, write_traces}

Every key is optional; missing keys take the profile defaults and unknown
keys are rejected.  ``noise_mode: psd`` derives sigma^2 from the PSD and the
bandwidth, ``noise_mode: literal`` uses ``noise_dbm`` as is.
"""

from __future__ import annotations

import copy
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..conic import SolverOptions
from ..optimizer import SCAConfig

SCHEMES = ("proposed", "zf", "oma", "upper-bound")
SWEEP_AXES = ("l_irs", "bits", "p_max_dbm", "n_tx", "r_min", "n_clusters",
              "users_per_cluster")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class Geometry:
    bs_position: tuple[float, float, float] = (0.0, 0.0, 15.0)
    irs_position: tuple[float, float, float] = (20.0, 20.0, 15.0)
    user_center: tuple[float, float, float] = (30.0, 30.0, 0.0)
    user_radius: float = 8.0


@dataclass
class Counts:
    n_tx: int = 64
    l_x: int = 4
    l_z: int = 4
    n_clusters: int = 3
    users_per_cluster: int = 3
    n_bi: int = 3
    n_iu: int = 3
    # explicit membership: list of clusters, each a list of user indices
    clusters: list[list[int]] | None = None

    @property
    def l_irs(self) -> int:
        return self.l_x * self.l_z

    @property
    def n_users(self) -> int:
        return self.n_clusters * self.users_per_cluster


@dataclass
class Radio:
    carrier_ghz: float = 28.0
    bandwidth_hz: float = 100e6
    noise_mode: str = "psd"  # "psd" or "literal"
    noise_psd_dbm_hz: float = -174.0
    noise_dbm: float | None = None
    p_max_dbm: float = 35.0
    r_min: float = 0.01
    bits: int = 5

    @property
    def sigma2_dbm(self) -> float:
        if self.noise_mode == "psd":
            return self.noise_psd_dbm_hz + 10 * math.log10(self.bandwidth_hz)
        return float(self.noise_dbm)

    @property
    def sigma2(self) -> float:
        return dbm_to_watt(self.sigma2_dbm)

    @property
    def p_max(self) -> float:
        return dbm_to_watt(self.p_max_dbm)

    @property
    def wavelength(self) -> float:
        return 299_792_458.0 / (self.carrier_ghz * 1e9)


@dataclass
class Algorithm:
    outer_tol: float = 1e-4
    max_outer_iters: int = 100
    feasibility_tol: float = 1e-6
    init_attempts: int = 20
    order_policy: str = "effective-gain"
    backend: str = "clarabel"
    log_encoding: str = "geomean"
    schemes: list[str] = field(default_factory=lambda: ["proposed", "zf", "oma"])
    oma_per_slot: bool = False

    def sca(self) -> SCAConfig:
        return SCAConfig(outer_tol=self.outer_tol, max_outer_iters=self.max_outer_iters,
                         feasibility_tol=self.feasibility_tol, init_attempts=self.init_attempts,
                         order_policy=self.order_policy,
                         solver=SolverOptions(backend=self.backend,
                                              log_encoding=self.log_encoding))


@dataclass
class Campaign:
    n_trials: int = 20
    seed: int = 0
    parallel: int = 1
    sweep: dict[str, list] = field(default_factory=dict)
    write_traces: bool = True


@dataclass
class ScenarioConfig:
    profile: str = "full"
    geometry: Geometry = field(default_factory=Geometry)
    counts: Counts = field(default_factory=Counts)
    radio: Radio = field(default_factory=Radio)
    algorithm: Algorithm = field(default_factory=Algorithm)
    campaign: Campaign = field(default_factory=Campaign)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["derived"] = {"l_irs": self.counts.l_irs, "sigma2_dbm": self.radio.sigma2_dbm,
                        "sigma2_w": self.radio.sigma2, "p_max_w": self.radio.p_max}
        return d

    def replace(self, **sections) -> "ScenarioConfig":
        return dataclasses.replace(self, **sections)

    def with_value(self, axis: str, value) -> "ScenarioConfig":
        """Copy with one sweep axis set; ``l_irs`` picks a near-square L_x x L_z."""
        c = copy.deepcopy(self)
        if axis == "l_irs":
            c.counts.l_x, c.counts.l_z = factor_irs(int(value))
        elif axis == "bits":
            c.radio.bits = int(value)
        elif axis == "p_max_dbm":
            c.radio.p_max_dbm = float(value)
        elif axis == "r_min":
            c.radio.r_min = float(value)
        elif axis in ("n_tx", "n_clusters", "users_per_cluster"):
            setattr(c.counts, axis, int(value))
        else:
            raise ConfigError(f"campaign.sweep: unknown axis {axis!r}")
        validate(c)
        return c


def dbm_to_watt(dbm: float) -> float:
    return 10 ** ((dbm - 30) / 10)


def factor_irs(l_irs: int) -> tuple[int, int]:
    """(L_x, L_z) with L_z the largest divisor not above sqrt(L)."""
    if l_irs < 1:
        raise ConfigError("counts: L_IRS must be >= 1")
    l_z = int(math.isqrt(l_irs))
    while l_irs % l_z:
        l_z -= 1
    return l_irs // l_z, l_z


# -- profiles -------------------------------------------------------------------

PROFILES: dict[str, dict] = {
    "full": {},
    # small enough for CI; literal -174 dBm noise keeps QoS feasible at this scale
    "desk": {
        "counts": {"n_tx": 8, "l_x": 4, "l_z": 4, "n_clusters": 2, "users_per_cluster": 2},
        "radio": {"noise_mode": "literal", "noise_dbm": -174.0},
        # ZF already searches every order, so the proposed scheme does too
        "algorithm": {"order_policy": "exhaustive"},
        "campaign": {"n_trials": 20},
    },
}


# -- loading --------------------------------------------------------------------

_SECTIONS = {"geometry": Geometry, "counts": Counts, "radio": Radio, "algorithm": Algorithm,
             "campaign": Campaign}


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "sweep":
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for k, v in data.items():
        default = getattr(cls(), k)
        kwargs[k] = _coerce(v, default, f"{where}.{k}")
    return cls(**kwargs)


def _coerce(v: Any, default: Any, where: str):
    if v is None:
        return None
    if isinstance(default, bool):
        if not isinstance(v, bool):
            raise ConfigError(f"{where}: expected true/false, got {v!r}")
        return v
    if isinstance(default, tuple):
        if not isinstance(v, (list, tuple)) or len(v) != len(default):
            raise ConfigError(f"{where}: expected a list of {len(default)} numbers")
        try:
            return tuple(float(x) for x in v)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected numbers, got {v!r}") from None
    if isinstance(default, int) and not isinstance(v, bool):
        if isinstance(v, float) and v.is_integer():
            v = int(v)
        if not isinstance(v, int):
            raise ConfigError(f"{where}: expected an integer, got {v!r}")
        return v
    if isinstance(default, float):
        if isinstance(v, str):
            # YAML 1.1 reads exponents without a sign ("1e8") as strings
            try:
                v = float(v)
            except ValueError:
                pass
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {v!r}")
        return float(v)
    return v


def from_dict(data: dict | None) -> ScenarioConfig:
    data = dict(data or {})
    data.pop("derived", None)
    unknown = sorted(set(data) - set(_SECTIONS) - {"profile"})
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {', '.join(unknown)}")
    profile = data.get("profile", "full")
    if profile not in PROFILES:
        raise ConfigError(f"profile: unknown profile {profile!r} (choose {', '.join(PROFILES)})")
    merged = _merge(PROFILES[profile], {k: v for k, v in data.items() if k != "profile"})
    sections = {}
    for name, cls in _SECTIONS.items():
        sections[name] = _build(cls, merged.get(name) or {}, name)
    cfg = ScenarioConfig(profile=profile, **sections)
    validate(cfg, explicit=data)
    return cfg


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: YAML parse error: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return from_dict(data)


def default_config(profile: str = "full") -> ScenarioConfig:
    return from_dict({"profile": profile})


def validate(cfg: ScenarioConfig, explicit: dict | None = None) -> None:
    g, c, r, a, k = cfg.geometry, cfg.counts, cfg.radio, cfg.algorithm, cfg.campaign
    if not g.user_radius > 0:
        raise ConfigError("geometry.user_radius: must be > 0")
    for name in ("n_tx", "l_x", "l_z", "n_clusters", "users_per_cluster", "n_bi", "n_iu"):
        if getattr(c, name) < 1:
            raise ConfigError(f"counts.{name}: must be >= 1")
    if c.clusters is not None:
        flat = sorted(i for cl in c.clusters for i in cl)
        if len(c.clusters) != c.n_clusters or any(len(cl) != c.users_per_cluster
                                                  for cl in c.clusters):
            raise ConfigError("counts.clusters: must list n_clusters groups of "
                              "users_per_cluster users")
        if flat != list(range(c.n_users)):
            raise ConfigError("counts.clusters: must be a partition of users 0..K-1")
    if r.bits < 1:
        raise ConfigError("radio.bits: B must be >= 1")
    if r.noise_mode not in ("psd", "literal"):
        raise ConfigError("radio.noise_mode: must be 'psd' or 'literal'")
    radio_in = ((explicit or {}).get("radio") or {})
    if r.noise_mode == "psd" and radio_in.get("noise_dbm") is not None:
        raise ConfigError("radio.noise_dbm: literal noise power conflicts with noise_mode 'psd'")
    if r.noise_dbm is not None and (isinstance(r.noise_dbm, bool)
                                    or not isinstance(r.noise_dbm, (int, float))):
        raise ConfigError(f"radio.noise_dbm: expected a number, got {r.noise_dbm!r}")
    if r.noise_mode == "literal":
        if r.noise_dbm is None:
            raise ConfigError("radio.noise_dbm: required when noise_mode is 'literal'")
        if "noise_psd_dbm_hz" in radio_in:
            raise ConfigError("radio.noise_psd_dbm_hz: PSD setting conflicts with "
                              "noise_mode 'literal'")
    if not r.bandwidth_hz > 0 or not r.carrier_ghz > 0:
        raise ConfigError("radio: bandwidth_hz and carrier_ghz must be > 0")
    if r.r_min < 0:
        raise ConfigError("radio.r_min: must be >= 0")
    if not a.outer_tol > 0:
        raise ConfigError("algorithm.outer_tol: must be > 0")
    if a.max_outer_iters < 1:
        raise ConfigError("algorithm.max_outer_iters: must be >= 1")
    if a.order_policy not in ("effective-gain", "exhaustive"):
        raise ConfigError("algorithm.order_policy: must be 'effective-gain' or 'exhaustive'")
    if a.backend not in ("clarabel", "cvxopt", "scs"):
        raise ConfigError("algorithm.backend: must be clarabel, cvxopt or scs")
    if a.log_encoding not in ("geomean", "exp"):
        raise ConfigError("algorithm.log_encoding: must be 'geomean' or 'exp'")
    bad = [s for s in a.schemes if s not in SCHEMES]
    if bad or not a.schemes:
        raise ConfigError(f"algorithm.schemes: unknown scheme(s) {bad}; choose from {SCHEMES}")
    if k.n_trials < 1:
        raise ConfigError("campaign.n_trials: must be >= 1")
    if k.parallel < 1:
        raise ConfigError("campaign.parallel: must be >= 1")
    if not isinstance(k.sweep, dict):
        raise ConfigError("campaign.sweep: expected a mapping axis -> list of values")
    for axis, vals in k.sweep.items():
        if axis not in SWEEP_AXES:
            raise ConfigError(f"campaign.sweep: unknown axis {axis!r}; choose from {SWEEP_AXES}")
        if not isinstance(vals, (list, tuple)) or not vals:
            raise ConfigError(f"campaign.sweep.{axis}: expected a non-empty list")
        if axis == "bits" and any(int(b) < 1 for b in vals):
            raise ConfigError("campaign.sweep.bits: B must be >= 1")
