"""Geometry, path loss and small-scale fading for the three links.

A :class:`ChannelSet` stores small-scale blocks only. Large-scale factors are
recomputed from positions on demand, so optimizers can move the UAV while the
fading realization stays fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import CSI_STREAM, DIRECT_STREAM, RIS_STREAM, SystemConfig, stream

MIN_DISTANCE = 1.0  # m; path-loss model is referenced to 1 m


def large_scale_gain(pos_a, pos_b, exponent: float, zeta0: float) -> float | np.ndarray:
    """Power gain ``zeta0 * ||a - b||^-exponent``; broadcasts over leading axes."""
    if exponent <= 0:
        raise ValueError("exponent must be positive")
    d = np.linalg.norm(np.asarray(pos_a, float) - np.asarray(pos_b, float), axis=-1)
    if np.any(d == 0):
        raise ValueError("coincident positions: path loss undefined")
    return zeta0 * d ** (-exponent)


def clamped_distance(pos_a, pos_b) -> np.ndarray:
    return np.maximum(np.linalg.norm(np.asarray(pos_a, float) - np.asarray(pos_b, float), axis=-1),
                      MIN_DISTANCE)


def upa_response(n, azimuth, elevation, Nx: int, spacing_ratio: float = 0.5):
    """UPA phase term ``exp(j 2pi d0/lambda f(n, azi, ele))`` for 0-based ``n``."""
    n = np.asarray(n)
    row = n // Nx
    col = n - row * Nx
    f = row * np.sin(azimuth) * np.sin(elevation) + col * np.sin(azimuth) * np.cos(elevation)
    return np.exp(1j * 2 * np.pi * spacing_ratio * f)


def ris_angles(ris: np.ndarray, point: np.ndarray) -> tuple[float, float]:
    """(azimuth, elevation) of ``point`` seen from a RIS panel in the x-z plane facing -y.

    azimuth: angle between the direction and the panel normal;
    elevation: in-panel angle of the direction's projection, from the x axis.
    """
    d = np.asarray(point, float) - np.asarray(ris, float)
    r = np.linalg.norm(d)
    if r == 0:
        return 0.0, 0.0
    azi = float(np.arccos(np.clip(-d[1] / r, -1.0, 1.0)))
    ele = float(np.arctan2(d[2], d[0]))
    return azi, ele


def ris_steering(cfg: SystemConfig, point: np.ndarray) -> np.ndarray:
    azi, ele = ris_angles(cfg.ris, point)
    return upa_response(np.arange(cfg.N), azi, ele, max(cfg.Nx, 1), cfg.spacing_ratio)


def uav_steering(cfg: SystemConfig, uav: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Half-wavelength ULA along x at the UAV."""
    d = np.asarray(target, float) - np.asarray(uav, float)
    cos_x = d[0] / max(np.linalg.norm(d), 1e-12)
    return np.exp(1j * np.pi * np.arange(cfg.Nt) * cos_x)


@dataclass(frozen=True)
class ChannelSet:
    """Small-scale fading of one realization.

    g0: (T, K, Nt) direct UAV-UE vectors (T = 1 in static mode)
    G1: (T, N, Nt) UAV-RIS LoS matrices, built at ``track`` positions
    g2: (K, N) RIS-UE vectors, shared by all slots
    track: (T, 3) UAV positions the LoS blocks were built at
    """

    cfg: SystemConfig
    g0: np.ndarray
    G1: np.ndarray
    g2: np.ndarray
    track: np.ndarray

    @property
    def T(self) -> int:
        return self.g0.shape[0]

    # -- large-scale scaled blocks --------------------------------------
    def direct_rows(self, v: np.ndarray, t: int = 0) -> np.ndarray:
        """(K, Nt) rows h_{0,k}^H at UAV position ``v``."""
        cfg = self.cfg
        beta = cfg.zeta0 * clamped_distance(v, cfg.ues) ** (-cfg.eps0)
        return np.sqrt(beta)[:, None] * self.g0[t].conj()

    def uav_ris(self, v: np.ndarray, t: int = 0) -> np.ndarray:
        """(N, Nt) matrix H_1 at UAV position ``v``."""
        cfg = self.cfg
        beta = cfg.zeta0 * clamped_distance(v, cfg.ris) ** (-cfg.eps1)
        return np.sqrt(beta) * self.G1[t]

    def ris_rows(self) -> np.ndarray:
        """(K, N) rows h_{2,k}^H."""
        cfg = self.cfg
        beta = cfg.zeta0 * clamped_distance(cfg.ris, cfg.ues) ** (-cfg.eps2)
        return np.sqrt(beta)[:, None] * self.g2.conj()

    def path_components(self, alpha: np.ndarray, W: np.ndarray, t: int = 0):
        """Distance-free parts of h_k^H w: direct ``A0`` and reflected ``A1``.

        With d0 = ||v - u_k|| and d1 = ||v - r||,
        h_k^H w = d0^(-eps0/2) A0 + d1^(-eps1/2) A1. ``W`` may be one beam (Nt,)
        giving (K,) arrays or a stack (J, Nt) giving (K, J).
        """
        W = np.asarray(W, complex)
        root = np.sqrt(self.cfg.zeta0)
        A0 = root * self.g0[t].conj() @ W.T
        if self.cfg.N == 0:
            return A0, np.zeros_like(A0)
        A1 = (self.ris_rows() * np.asarray(alpha, complex)[None, :]) @ (root * self.G1[t]) @ W.T
        return A0, A1

    def effective_rows(self, alpha: np.ndarray, v: np.ndarray, t: int = 0) -> np.ndarray:
        """(K, Nt) effective rows h_k^H = h_{0,k}^H + h_{2,k}^H diag(alpha) H_1."""
        h0 = self.direct_rows(v, t)
        if self.cfg.N == 0:
            return h0
        return h0 + (self.ris_rows() * alpha[None, :]) @ self.uav_ris(v, t)


def effective_channel(channels: ChannelSet, alpha: np.ndarray, k: int,
                      v: np.ndarray | None = None, t: int = 0) -> np.ndarray:
    """Row vector h_k^H for UE ``k`` (defaults to the sampling position)."""
    if v is None:
        v = channels.track[t]
    return channels.effective_rows(np.asarray(alpha, complex), v, t)[k]


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def sample_channels(cfg: SystemConfig, track, seed: int | None = None) -> ChannelSet:
    """Draw one realization. ``track`` is a 3-vector (static) or a (T, 3) trajectory."""
    seed = cfg.seed if seed is None else seed
    track = np.atleast_2d(np.asarray(track, float))
    if track.shape[1] != 3:
        raise ValueError("track must hold 3-vectors")
    T = track.shape[0]
    if T not in (1, cfg.T):
        raise ValueError(f"track length {T} must be 1 (static) or T={cfg.T}")

    # drawing (T_max, ...) and slicing keeps static draws equal to slot 0 of mobile ones
    g0 = _cn(stream(seed, DIRECT_STREAM), (cfg.T, cfg.K, cfg.Nt))[:T]

    ues = cfg.ues
    G1 = np.empty((T, cfg.N, cfg.Nt), complex)
    for t in range(T):
        G1[t] = np.outer(ris_steering(cfg, track[t]), uav_steering(cfg, track[t], cfg.ris).conj())

    nlos = _cn(stream(seed, RIS_STREAM), (cfg.K, cfg.N))
    if np.isinf(cfg.kappa):
        w_los, w_nlos = 1.0, 0.0
    else:
        w_los, w_nlos = np.sqrt(cfg.kappa / (cfg.kappa + 1)), np.sqrt(1 / (cfg.kappa + 1))
    los = np.array([ris_steering(cfg, u) for u in ues]).reshape(cfg.K, cfg.N)
    g2 = w_los * los + w_nlos * nlos
    return ChannelSet(cfg=cfg, g0=g0, G1=G1, g2=g2, track=track.copy())


@dataclass(frozen=True)
class CsiErrorSpec:
    """Relative CSI uncertainty per link (0 = perfect)."""

    eps0: float = 0.0
    eps1: float = 0.0
    eps2: float = 0.0

    def __post_init__(self):
        if min(self.eps0, self.eps1, self.eps2) < 0:
            raise ValueError("CSI uncertainty levels must be >= 0")

    @classmethod
    def uniform(cls, eps: float) -> "CsiErrorSpec":
        return cls(eps, eps, eps)


def inject_csi_error(channels: ChannelSet, spec: CsiErrorSpec, seed: int | None = None) -> ChannelSet:
    """Estimated channels ``g_hat = g - eps * z`` with ``z ~ CN(0, 1)`` entry-wise.

    The error lives on the small-scale blocks, so after large-scale scaling the
    error variance of each entry is ``(large-scale gain) * eps^2``. One error
    direction ``z`` per seed is shared across ``eps`` values.
    """
    if spec.eps0 == spec.eps1 == spec.eps2 == 0:
        return channels
    seed = channels.cfg.seed if seed is None else seed
    rng = stream(seed, CSI_STREAM)
    z0 = _cn(rng, channels.g0.shape)
    z1 = _cn(rng, channels.G1.shape)
    z2 = _cn(rng, channels.g2.shape)
    return replace(channels,
                   g0=channels.g0 - spec.eps0 * z0,
                   G1=channels.G1 - spec.eps1 * z1,
                   g2=channels.g2 - spec.eps2 * z2)
