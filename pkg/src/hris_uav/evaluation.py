"""Rates, RIS transmit power and feasibility residuals on a given channel set.

Rates are in nats/s/Hz. All functions are pure; pass true channels to report
and estimated channels to optimize.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet
from .config import SystemConfig


@dataclass(frozen=True)
class RisProfile:
    """Complex RIS coefficients with the active/passive split."""

    alpha: np.ndarray
    active_mask: np.ndarray
    a_max: float

    @classmethod
    def for_config(cls, cfg: SystemConfig, alpha) -> "RisProfile":
        return cls(np.asarray(alpha, complex), cfg.active_mask, cfg.a_max)

    @property
    def passive(self) -> np.ndarray:
        return np.where(self.active_mask, 0, self.alpha)

    @property
    def active(self) -> np.ndarray:
        return np.where(self.active_mask, self.alpha, 0)

    def amplitude_violation(self) -> float:
        """Largest amplitude excess over the per-element caps (0 when feasible)."""
        caps = np.where(self.active_mask, self.a_max, 1.0)
        if self.alpha.size == 0:
            return 0.0
        return float(np.max(np.maximum(np.abs(self.alpha) - caps, 0.0) / caps))


@dataclass(frozen=True)
class Schedule:
    """Relaxed K x T scheduling matrix."""

    b: np.ndarray

    @property
    def served(self) -> np.ndarray:
        """Per-slot served UE: argmax over the column, ties to the lowest index."""
        return np.argmax(self.b, axis=0)

    @property
    def rounded(self) -> np.ndarray:
        out = np.zeros_like(self.b)
        out[self.served, np.arange(self.b.shape[1])] = 1.0
        return out

    def is_binary(self, tol: float = 1e-9) -> bool:
        return bool(np.all(np.minimum(self.b, 1 - self.b) <= tol))


# -- noise ------------------------------------------------------------------

def ris_noise(channels: ChannelSet, alpha: np.ndarray) -> np.ndarray:
    """(K,) amplified RIS noise sigma_r^2 ||h_2k^H Psi||^2 seen by each UE."""
    cfg = channels.cfg
    if cfg.N == 0 or cfg.Na == 0:
        return np.zeros(cfg.K)
    psi = np.where(cfg.active_mask, alpha, 0)
    return cfg.sigma_r2 * np.sum(np.abs(channels.ris_rows() * psi[None, :]) ** 2, axis=1)


def noise_power(channels: ChannelSet, alpha: np.ndarray) -> np.ndarray:
    """(K,) total noise sigma_k^2 = RIS noise + UE noise."""
    return ris_noise(channels, alpha) + channels.cfg.sigma_u2


# -- static -----------------------------------------------------------------

def gains_static(channels: ChannelSet, W: np.ndarray, alpha: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(K, K) matrix of |h_k^H w_j|^2 (row k = receiver, column j = beam)."""
    H = channels.effective_rows(np.asarray(alpha, complex), v)
    return np.abs(H @ np.asarray(W, complex).T) ** 2


def rates_static(channels: ChannelSet, W: np.ndarray, alpha: np.ndarray, v: np.ndarray) -> np.ndarray:
    G = gains_static(channels, W, alpha, v)
    signal = np.diag(G)
    interference = G.sum(axis=1) - signal
    return np.log1p(signal / (interference + noise_power(channels, alpha)))


def rate_static(k: int, channels: ChannelSet, W, alpha, v) -> float:
    return float(rates_static(channels, W, alpha, v)[k])


def xi_static(channels: ChannelSet, W: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(N,) per-element amplification load sigma_r^2 + ||h_1n||^2 sum_k ||w_k||^2."""
    cfg = channels.cfg
    H1 = channels.uav_ris(v)
    return cfg.sigma_r2 + np.sum(np.abs(H1) ** 2, axis=1) * float(np.sum(np.abs(W) ** 2))


def ris_tx_power_static(channels: ChannelSet, alpha: np.ndarray, W: np.ndarray, v: np.ndarray) -> float:
    cfg = channels.cfg
    if cfg.N == 0 or cfg.Na == 0:
        return 0.0
    xi = xi_static(channels, W, v)
    a = np.abs(np.asarray(alpha))[cfg.active] ** 2
    return float(a @ xi[cfg.active])


# -- mobile -----------------------------------------------------------------

def rates_mobile_per_slot(channels: ChannelSet, w: np.ndarray, alpha: np.ndarray,
                          track: np.ndarray) -> np.ndarray:
    """(K, T) per-slot rates log(1 + |h_k[t]^H w[t]|^2 / sigma_k^2[t]) (no interference)."""
    T = channels.T
    K = channels.cfg.K
    out = np.empty((K, T))
    for t in range(T):
        h = channels.effective_rows(np.asarray(alpha[t], complex), track[t], t)
        sig = np.abs(h @ np.asarray(w[t], complex)) ** 2
        out[:, t] = np.log1p(sig / noise_power(channels, alpha[t]))
    return out


def rate_mobile_per_slot(k: int, t: int, channels: ChannelSet, w_t, alpha_t, v_t) -> float:
    h = channels.effective_rows(np.asarray(alpha_t, complex), v_t, t)[k]
    sig = np.abs(h @ np.asarray(w_t, complex)) ** 2
    return float(np.log1p(sig / noise_power(channels, alpha_t)[k]))


def average_rate_mobile(b: np.ndarray, per_slot: np.ndarray) -> np.ndarray:
    """(K,) average rates (1/T) sum_t b_k[t] R_k[t]."""
    b = np.asarray(b, float)
    return np.sum(b * per_slot, axis=1) / per_slot.shape[1]


def ris_tx_power_slot(channels: ChannelSet, alpha_t: np.ndarray, w_t: np.ndarray,
                      v_t: np.ndarray, t: int) -> float:
    """RIS transmit power in slot ``t``: sum over active n of |alpha_n|^2 xi_n[t]."""
    cfg = channels.cfg
    if cfg.N == 0 or cfg.Na == 0:
        return 0.0
    H1 = channels.uav_ris(v_t, t)
    xi = cfg.sigma_r2 + np.sum(np.abs(H1) ** 2, axis=1) * float(np.sum(np.abs(w_t) ** 2))
    return float(np.abs(np.asarray(alpha_t)[cfg.active]) ** 2 @ xi[cfg.active])


def ris_tx_power_mobile(channels: ChannelSet, alpha: np.ndarray, w: np.ndarray,
                        track: np.ndarray) -> np.ndarray:
    """(T,) RIS transmit power per slot."""
    return np.array([ris_tx_power_slot(channels, alpha[t], w[t], track[t], t)
                     for t in range(channels.T)])


def min_rate(rates) -> float:
    rates = np.asarray(rates, float)
    if rates.size == 0:
        raise ValueError("need at least one rate")
    return float(rates.min())


# -- feasibility ------------------------------------------------------------

def static_residuals(channels: ChannelSet, W, alpha, v) -> dict[str, float]:
    """Relative violations of the static problem's constraints (0 = feasible)."""
    cfg = channels.cfg
    prof = RisProfile.for_config(cfg, alpha)
    return {
        "uav_power": max(float(np.sum(np.abs(W) ** 2)) / cfg.pt_max - 1.0, 0.0),
        "amplitude": prof.amplitude_violation(),
        "ris_power": max(ris_tx_power_static(channels, alpha, W, v) / cfg.pris_max - 1.0, 0.0),
        "altitude": abs(float(v[2]) - cfg.z0) / cfg.z0,
    }


def mobile_residuals(channels: ChannelSet, w, alpha, track, b) -> dict[str, float]:
    """Relative violations of the mobile problem's constraints (0 = feasible)."""
    cfg = channels.cfg
    steps = np.linalg.norm(np.diff(track, axis=0), axis=1) if len(track) > 1 else np.zeros(1)
    scale = max(cfg.d_max, 1.0)
    amp = max((RisProfile.for_config(cfg, a).amplitude_violation() for a in alpha), default=0.0)
    b = np.asarray(b, float)
    return {
        "closure": float(np.linalg.norm(track[0] - track[-1])) / scale,
        "speed": max(float(steps.max(initial=0.0)) - cfg.d_max, 0.0) / scale,
        "schedule": max(float(np.max(b.sum(axis=0))) - 1.0, 0.0, float(-b.min()), float(b.max()) - 1.0),
        "uav_power": max(float(np.max(np.sum(np.abs(w) ** 2, axis=1))) / cfg.pt_max - 1.0, 0.0),
        "amplitude": amp,
        "ris_power": max(float(np.max(ris_tx_power_mobile(channels, alpha, w, track))) / cfg.pris_max - 1.0, 0.0),
        "altitude": float(np.max(np.abs(track[:, 2] - cfg.z0))) / cfg.z0,
    }
