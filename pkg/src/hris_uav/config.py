"""Scenario configuration: geometry, power budgets, propagation constants.

All stored quantities are linear (W, m, dimensionless gains). Files use
unit-suffixed keys (``ptMaxDbm``, ``zeta0Db``, ...) and are converted on load.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np


# child-stream keys; schemes sharing a seed share every stream
UE_STREAM, DIRECT_STREAM, RIS_STREAM, INIT_STREAM, CSI_STREAM = range(5)


def stream(seed: int, key: int) -> np.random.Generator:
    """Independent generator for one purpose (``key``) under a run seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(key,)))


class ConfigError(ValueError):
    """Raised when a scenario configuration is malformed; message names the field."""


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class SystemConfig:
    """One network scenario.

    The RIS is a UPA of ``Nx * Ny`` elements lying in the x-z plane at
    ``ris_position``, facing the service area (the -y half space). Angles
    toward a point use the vector d = point - RIS: azimuth is the angle between
    d and the panel normal (-y), elevation is the in-panel angle of d's
    projection measured from the x axis toward z. Element n sits in row
    n // Nx (along z) and column n % Nx (along x).
    """

    D: float = 200.0
    K: int = 4
    Nt: int = 2
    Nx: int = 8
    Ny: int = 4
    Na: int = 2
    active_set: tuple[int, ...] | None = None
    z0: float = 100.0
    ris_position: tuple[float, float, float] | None = None
    ue_positions: tuple[tuple[float, float, float], ...] | None = None
    zeta0: float = 1e-3
    eps0: float = 3.2
    eps1: float = 2.0
    eps2: float = 2.2
    kappa: float = 10.0
    pt_max: float = 0.1
    pris_max: float = 1e-3
    a_max: float = 100.0
    sigma_u2: float = 1e-11
    eta_db: float = 1.0
    T: int = 50
    delta_t: float = 0.1
    v_max: float = 50.0
    eps_conv: float = 1e-4
    max_iters: int = 50
    spacing_ratio: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        self.validate()

    # -- derived ---------------------------------------------------------
    @property
    def N(self) -> int:
        return self.Nx * self.Ny

    @property
    def active(self) -> np.ndarray:
        """0-based indices of the active elements."""
        if self.active_set is not None:
            return np.asarray(sorted(self.active_set), dtype=int)
        return np.arange(self.Na, dtype=int)

    @property
    def active_mask(self) -> np.ndarray:
        mask = np.zeros(self.N, dtype=bool)
        mask[self.active] = True
        return mask

    @property
    def sigma_r2(self) -> float:
        return (db_to_linear(self.eta_db) + 1.0) * self.sigma_u2

    @property
    def d_max(self) -> float:
        return self.delta_t * self.v_max

    @property
    def ris(self) -> np.ndarray:
        if self.ris_position is None:
            return np.array([self.D / 2, self.D, 50.0])
        return np.asarray(self.ris_position, dtype=float)

    @property
    def ues(self) -> np.ndarray:
        """(K, 3) UE positions; drawn uniformly over the area from ``seed`` when unset."""
        if self.ue_positions is not None:
            return np.asarray(self.ue_positions, dtype=float)
        rng = stream(self.seed, UE_STREAM)
        xy = rng.uniform(0.0, self.D, size=(self.K, 2))
        return np.column_stack([xy, np.zeros(self.K)])

    def validate(self) -> None:
        def bad(name: str, why: str) -> ConfigError:
            return ConfigError(f"{name}: {why}")

        for name in ("K", "Nt", "T"):
            if int(getattr(self, name)) < 1:
                raise bad(name, "must be >= 1")
        if self.Nx < 0 or self.Ny < 0:
            raise bad("Nx/Ny", "must be >= 0")
        if not 0 <= self.Na <= self.N:
            raise bad("Na", f"must satisfy 0 <= Na <= N={self.N}")
        if self.active_set is not None:
            idx = list(self.active_set)
            if len(idx) != self.Na or len(set(idx)) != len(idx):
                raise bad("activeSet", "must list Na distinct indices")
            if any(i < 0 or i >= self.N for i in idx):
                raise bad("activeSet", "indices must lie in [0, N)")
        for name in ("pt_max", "pris_max", "sigma_u2", "zeta0", "D", "z0"):
            if not getattr(self, name) > 0:
                raise bad(name, "must be > 0")
        if self.a_max < 1:
            raise bad("a_max", "must be >= 1")
        for name in ("eps0", "eps1"):
            v = getattr(self, name)
            if not 0 < v < 4:
                raise bad(name, "path-loss exponent must lie in (0, 4)")
        if not self.eps2 > 0:
            raise bad("eps2", "must be > 0")
        if self.kappa < 0:
            raise bad("kappa", "must be >= 0")
        if self.delta_t < 0 or self.v_max < 0:
            raise bad("deltaT/vMax", "must be >= 0")
        if self.ue_positions is not None and np.shape(self.ue_positions) != (self.K, 3):
            raise bad("uePositions", f"expected {self.K} 3-vectors")

    def with_(self, **changes: Any) -> "SystemConfig":
        return replace(self, **changes)


# file key -> (attribute, converter)
_KEYS: dict[str, tuple[str, Any]] = {
    "D": ("D", float),
    "K": ("K", int),
    "Nt": ("Nt", int),
    "Nx": ("Nx", int),
    "Ny": ("Ny", int),
    "Na": ("Na", int),
    "activeSet": ("active_set", lambda v: tuple(int(i) for i in v)),
    "z0": ("z0", float),
    "risPosition": ("ris_position", lambda v: tuple(float(x) for x in v)),
    "uePositions": ("ue_positions", lambda v: tuple(tuple(float(x) for x in p) for p in v)),
    "zeta0": ("zeta0", float),
    "zeta0Db": ("zeta0", lambda v: db_to_linear(float(v))),
    "eps0": ("eps0", float),
    "eps1": ("eps1", float),
    "eps2": ("eps2", float),
    "kappa": ("kappa", float),
    "ptMax": ("pt_max", float),
    "ptMaxDbm": ("pt_max", lambda v: dbm_to_watt(float(v))),
    "prisMax": ("pris_max", float),
    "prisMaxDbm": ("pris_max", lambda v: dbm_to_watt(float(v))),
    "aMax": ("a_max", float),
    # power gain in dB: amplitude cap is 10^(dB/20)
    "aMaxDb": ("a_max", lambda v: 10.0 ** (float(v) / 20.0)),
    "sigmaU2": ("sigma_u2", float),
    "sigmaU2Dbm": ("sigma_u2", lambda v: dbm_to_watt(float(v))),
    "etaDb": ("eta_db", float),
    "T": ("T", int),
    "deltaT": ("delta_t", float),
    "vMax": ("v_max", float),
    "epsConv": ("eps_conv", float),
    "maxIters": ("max_iters", int),
    "spacingRatio": ("spacing_ratio", float),
    "seed": ("seed", int),
}


def config_from_dict(data: dict[str, Any]) -> SystemConfig:
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key.startswith("_"):  # comments
            continue
        if key not in _KEYS:
            raise ConfigError(f"{key}: unknown field")
        attr, conv = _KEYS[key]
        if attr in kwargs:
            raise ConfigError(f"{key}: duplicates another unit variant of the same field")
        try:
            kwargs[attr] = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: cannot parse {value!r} ({exc})") from None
    return SystemConfig(**kwargs)


def config_to_dict(cfg: SystemConfig) -> dict[str, Any]:
    """Linear-unit dictionary that round-trips through :func:`config_from_dict`."""
    rev = {attr: key for key, (attr, conv) in _KEYS.items() if conv in (float, int) or key in (
        "activeSet", "risPosition", "uePositions")}
    out: dict[str, Any] = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = [list(v) if isinstance(v, tuple) else v for v in value]
        out[rev[f.name]] = value
    return out


def load_config(path: str | Path) -> SystemConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(data)
