"""Static-UAV max-min rate design by block coordinate ascent.

Each outer iteration updates transmit beamformers, then the UAV position, then
the RIS coefficients. Every block solves a convex restriction built around the
current point, so the true min-rate never decreases; a block whose result would
lower it (solver inaccuracy) is discarded.

Programs work in normalized units: powers are divided by the UE noise power,
beamformers by sqrt(ptMax), and slack variables are ratios to their values at
the expansion point.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from . import bounds
from .channels import ChannelSet
from .config import INIT_STREAM, SystemConfig, stream
from .conic import ProgramBuilder, SolverSettings, Status
from .evaluation import (noise_power, rates_static, ris_tx_power_static, static_residuals,
                         xi_static)
from .trace import IterationTrace

MARGIN = 1e-7  # relative back-off on power budgets inside programs


@dataclass(frozen=True)
class OptimizerSettings:
    solver: SolverSettings = field(default_factory=SolverSettings)
    max_iters: int | None = None  # None: take from the config
    eps_conv: float | None = None
    accept_tol: float = 1e-9  # a block may not lower the objective by more than this
    active_mode: str = "joint"  # mobile active block: "joint" or "split"
    timing: bool = False


@dataclass
class StaticState:
    v: np.ndarray
    W: np.ndarray  # (K, Nt)
    alpha: np.ndarray  # (N,)
    tau: float = float("nan")
    slacks: dict = field(default_factory=dict)

    def copy(self) -> "StaticState":
        return StaticState(self.v.copy(), self.W.copy(), self.alpha.copy(), self.tau, dict(self.slacks))


def objective(channels: ChannelSet, state: StaticState) -> float:
    return float(np.min(rates_static(channels, state.W, state.alpha, state.v)))


def _active_amplitude(cfg: SystemConfig, xi: np.ndarray) -> float:
    load = float(np.sum(xi[cfg.active]))
    if cfg.Na == 0 or load <= 0:
        return cfg.a_max
    return min(cfg.a_max, float(np.sqrt(cfg.pris_max / load)))


def initialize_static(cfg: SystemConfig, channels: ChannelSet) -> StaticState:
    """Center placement, equal-power matched filters, random RIS phases."""
    v = np.array([cfg.D / 2, cfg.D / 2, cfg.z0])
    g0 = channels.g0[0]
    W = np.sqrt(cfg.pt_max / cfg.K) * g0 / np.linalg.norm(g0, axis=1, keepdims=True)
    phases = stream(cfg.seed, INIT_STREAM).uniform(0, 2 * np.pi, cfg.N)
    alpha = np.exp(1j * phases)
    if cfg.Na:
        r = _active_amplitude(cfg, xi_static(channels, W, v))
        alpha[cfg.active] *= r * (1 - MARGIN)
    state = StaticState(v, W, alpha)
    state.tau = objective(channels, state)
    return state


# -- feasibility repair -----------------------------------------------------

def repair(channels: ChannelSet, state: StaticState) -> StaticState:
    """Scale away solver-tolerance violations of the power and amplitude limits."""
    cfg = channels.cfg
    s = state.copy()
    p = float(np.sum(np.abs(s.W) ** 2))
    if p > cfg.pt_max:
        s.W *= np.sqrt(cfg.pt_max / p)
    if cfg.N:
        caps = np.where(cfg.active_mask, cfg.a_max, 1.0)
        mag = np.abs(s.alpha)
        over = mag > caps
        s.alpha[over] *= caps[over] / mag[over]
        pr = ris_tx_power_static(channels, s.alpha, s.W, s.v)
        if pr > cfg.pris_max:
            s.alpha[cfg.active] *= np.sqrt(cfg.pris_max / pr)
    return s


# -- beamforming block ------------------------------------------------------

def _uav_power_cap(channels: ChannelSet, alpha: np.ndarray, v: np.ndarray) -> float:
    """Largest total UAV power the RIS budget tolerates at fixed alpha."""
    cfg = channels.cfg
    if cfg.N == 0 or cfg.Na == 0:
        return cfg.pt_max
    a2 = np.abs(alpha[cfg.active]) ** 2
    h1 = np.sum(np.abs(channels.uav_ris(v)) ** 2, axis=1)[cfg.active]
    denom = float(a2 @ h1)
    if denom <= 0:
        return cfg.pt_max
    return min(cfg.pt_max, (cfg.pris_max - cfg.sigma_r2 * float(a2.sum())) / denom)


def solve_beamforming(channels: ChannelSet, state: StaticState,
                      settings: SolverSettings | None = None):
    """Beamformer update with SINR slacks; returns (W, status, surrogate tau)."""
    cfg = channels.cfg
    K, Nt = cfg.K, cfg.Nt
    H = channels.effective_rows(state.alpha, state.v) * np.sqrt(cfg.pt_max / cfg.sigma_u2)
    noise = noise_power(channels, state.alpha) / cfg.sigma_u2
    W0 = state.W / np.sqrt(cfg.pt_max)
    G0 = H @ W0.T  # G0[k, j] = e_k w_j

    prog = ProgramBuilder()
    tau = prog.add_real("tau")
    w = prog.add_complex_vector("w", K * Nt)
    gam = prog.add_real("gamma", K)
    for k in range(K):
        s0 = max(abs(G0[k, k]) ** 2, bounds.CLAMP)
        i0 = float(np.sum(np.abs(G0[k]) ** 2) - abs(G0[k, k]) ** 2)
        d0 = i0 + noise[k]
        gamma0 = s0 / d0
        # interference + noise + F_qol(w_k, gamma_k) <= 0, divided through by d0
        cross = [w[j * Nt:(j + 1) * Nt].linear(H[k]) for j in range(K) if j != k]
        quad = cp.hstack([cp.hstack([c.re, c.im]) for c in cross]) / np.sqrt(d0) if cross else None
        own = w[k * Nt:(k + 1) * Nt].linear(H[k])
        lin = 2 * (G0[k, k].real * own.re + G0[k, k].imag * own.im) / s0 - gam[k] - noise[k] / d0
        if quad is None:
            prog.add_linear(lin >= 0)
        else:
            prog.add_quadratic_le(quad, lin)
        prog.add_exp_log(tau, 1 + gamma0 * gam[k])
    cap = _uav_power_cap(channels, state.alpha, state.v) * (1 - MARGIN) / cfg.pt_max
    prog.add_quadratic_le(w.stacked(), cap)
    prog.maximize(tau)
    sol = prog.solve(settings)
    if not sol.ok:
        return state.W, sol.status, float("nan")
    W = np.sqrt(cfg.pt_max) * sol["w"].reshape(K, Nt)
    return W, sol.status, sol.objective


# -- location block ---------------------------------------------------------

def _distance_coefficients(channels: ChannelSet, state: StaticState):
    """c0, c1, c2 (K, K) so |h_k^H w_j|^2 = c0 p^2 + c1 q^2 + c2 p q, normalized by noise."""
    A0, A1 = channels.path_components(state.alpha, state.W)
    s = channels.cfg.sigma_u2
    return np.abs(A0) ** 2 / s, np.abs(A1) ** 2 / s, 2 * np.real(np.conj(A0) * A1) / s


def solve_location(channels: ChannelSet, state: StaticState,
                   settings: SolverSettings | None = None):
    """Horizontal UAV position update; returns (v, status, surrogate tau, slacks)."""
    cfg = channels.cfg
    K = cfg.K
    ues, ris = cfg.ues, cfg.ris
    v0 = state.v
    has_ris = cfg.N > 0
    L = cfg.D / 2  # displacement unit (m)
    e0, e1 = cfg.eps0, cfg.eps1

    d_u = np.linalg.norm(v0 - ues, axis=1)
    d_r = float(np.linalg.norm(v0 - ris))
    P = d_u ** (-e0 / 2)
    Q = d_r ** (-e1 / 2)
    c0, c1, c2 = _distance_coefficients(channels, state)
    C0 = c0 * P[:, None] ** 2
    C1 = c1 * Q**2
    C2 = c2 * P[:, None] * Q
    noise = noise_power(channels, state.alpha) / cfg.sigma_u2
    S0 = C0 + C1 + C2  # |h_k^H w_j|^2 at v0

    prog = ProgramBuilder()
    tau = prog.add_real("tau")
    delta = prog.add_real("delta", 2)
    v = cp.hstack([v0[0] + L * delta[0], v0[1] + L * delta[1], cp.Constant(v0[2])])
    p_lo = prog.add_real("p_lo", K, nonneg=True)
    p_hi = prog.add_real("p_hi", K, nonneg=True)
    q_lo = prog.add_real("q_lo", nonneg=True) if has_ris else None
    q_hi = prog.add_real("q_hi", nonneg=True) if has_ris else None
    a_sig = prog.add_real("a_sig", K)
    a_int = prog.add_real("a_int", (K, K))

    def lower_slack(center, d0, eps, x):
        # ||v - center|| <= d0 * (-F_pow(x; -2/eps, 1)) in ratio units
        prog.add_soc((v - center) / d0, -bounds.F_pow(x, -2 / eps, 1.0))

    def upper_slack(center, d0, eps, x):
        # F_qua(v; center, v0) <= 1 / F_pow(x; 4/eps, 1), as a rotated cone on the negated pair
        lead = 1 + 2 * ((v0 - center)[:2] @ (L * delta)) / d0**2
        prog.add_rotated_cone(lead, -bounds.F_pow(x, 4 / eps, 1.0), 1.0)

    for k in range(K):
        lower_slack(ues[k], d_u[k], e0, p_lo[k])
        upper_slack(ues[k], d_u[k], e0, p_hi[k])
    if has_ris:
        lower_slack(ris, d_r, e1, q_lo)
        upper_slack(ris, d_r, e1, q_hi)

    def sq_lo(x):
        return bounds.sq_norm_minorant(x, 1.0)

    for k in range(K):
        # signal: concave minorant of c0 p^2 + c1 q^2 + c2 p q
        lin = C0[k, k] * sq_lo(p_lo[k])
        convex = None
        if has_ris:
            lin = lin + C1[k, k] * sq_lo(q_lo)
            if C2[k, k] > 0:
                convex = C2[k, k] * bounds.F_bil(p_lo[k], q_lo, -1, 1.0, 1.0)
            else:
                convex = -C2[k, k] * bounds.F_bil(p_hi[k], q_hi, 1, 1.0, 1.0)
        if convex is None:
            prog.add_linear(a_sig[k] <= lin)
        else:
            prog.add_convex_le(convex, lin - a_sig[k])
        # interference: convex majorants
        for j in range(K):
            if j == k:
                continue
            maj = C0[k, j] * cp.square(p_hi[k])
            if has_ris:
                maj = maj + C1[k, j] * cp.square(q_hi)
                if C2[k, j] > 0:
                    maj = maj + C2[k, j] * bounds.F_bil(p_hi[k], q_hi, 1, 1.0, 1.0)
                else:
                    maj = maj - C2[k, j] * bounds.F_bil(p_lo[k], q_lo, -1, 1.0, 1.0)
            prog.add_convex_le(maj, a_int[k, j])
        others = [j for j in range(K) if j != k]
        i_sum = cp.sum(cp.hstack([a_int[k, j] for j in others])) if others else 0.0
        i0 = float(sum(S0[k, j] for j in others))
        prog.add_exp_log(tau + bounds.log_upper_bound(i_sum, i0, noise[k]),
                         noise[k] + a_sig[k] + i_sum)
    for k in range(K):
        prog.add_linear(a_int[k, k] == 0)

    if has_ris and cfg.Na:
        a2 = np.abs(state.alpha[cfg.active]) ** 2
        h1 = np.sum(np.abs(channels.uav_ris(v0)) ** 2, axis=1)[cfg.active]
        load = float(a2 @ h1) * float(np.sum(np.abs(state.W) ** 2))  # at q = Q
        budget = cfg.pris_max * (1 - MARGIN) - cfg.sigma_r2 * float(a2.sum())
        prog.add_convex_le((load / cfg.pris_max) * cp.square(q_hi), budget / cfg.pris_max)

    prog.maximize(tau)
    sol = prog.solve(settings)
    if not sol.ok:
        return state.v, sol.status, float("nan"), {}
    d = sol["delta"]
    v_new = np.array([v0[0] + L * d[0], v0[1] + L * d[1], v0[2]])
    slacks = {"p_lo": sol["p_lo"] * P, "p_hi": sol["p_hi"] * P}
    if has_ris:
        slacks.update(q_lo=sol["q_lo"] * Q, q_hi=sol["q_hi"] * Q)
    return v_new, sol.status, sol.objective, slacks


# -- RIS block --------------------------------------------------------------

def ris_terms(channels: ChannelSet, W: np.ndarray, v: np.ndarray):
    """Affine pieces of h_k^H w_j in alpha: (a[k, j], t[k, j, :]), noise-normalized."""
    cfg = channels.cfg
    scale = 1 / np.sqrt(cfg.sigma_u2)
    a = channels.direct_rows(v) @ W.T * scale  # (K, K)
    HW = channels.uav_ris(v) @ W.T  # (N, K): column j = H_1 w_j
    t = channels.ris_rows()[:, None, :] * HW.T[None, :, :] * scale  # (K, K, N)
    return a, t


def solve_ris(channels: ChannelSet, state: StaticState, settings: SolverSettings | None = None):
    """RIS coefficient update; returns (alpha, status, surrogate tau)."""
    cfg = channels.cfg
    K, N = cfg.K, cfg.N
    if N == 0:
        return state.alpha, Status.OPTIMAL, float("nan")
    a, t = ris_terms(channels, state.W, state.v)
    mask = cfg.active_mask
    rho = cfg.sigma_r2 * np.abs(channels.ris_rows()) ** 2 / cfg.sigma_u2 * mask[None, :]  # (K, N)
    alpha0 = state.alpha

    prog = ProgramBuilder()
    tau = prog.add_real("tau")
    alpha = prog.add_complex_vector("alpha", N)
    theta = prog.add_real("theta", K)
    for k in range(K):
        ys = [alpha.linear(t[k, j], a[k, j]) for j in range(K)]
        y0 = a[k] + t[k] @ alpha0
        # tangent minorant of sum_j |y_kj|^2 + noise terms
        lin = 1.0
        for j in range(K):
            lin = lin + 2 * (y0[j].real * ys[j].re + y0[j].imag * ys[j].im) - abs(y0[j]) ** 2
        act = np.flatnonzero(rho[k] > 0)
        if act.size:
            lin = lin + alpha.real_inner(2 * rho[k] * alpha0) - float(rho[k] @ np.abs(alpha0) ** 2)
        # theta_k >= interference + amplified noise + 1
        parts = [cp.hstack([ys[j].re, ys[j].im]) for j in range(K) if j != k]
        if act.size:
            parts.append(alpha[act].scaled(np.sqrt(rho[k, act])).stacked())
        theta0 = float(np.sum(np.abs(y0) ** 2) - abs(y0[k]) ** 2 + rho[k] @ np.abs(alpha0) ** 2 + 1)
        if parts:
            prog.add_quadratic_le(cp.hstack(parts), theta[k] - 1)
        else:
            prog.add_linear(theta[k] >= 1)
        prog.add_exp_log(tau + bounds.log_upper_bound(theta[k], theta0), lin)
    caps = np.where(mask, cfg.a_max, 1.0)
    for n in range(N):
        prog.add_soc(cp.hstack([alpha.re[n], alpha.im[n]]), caps[n])
    if cfg.Na:
        xi = xi_static(channels, state.W, state.v)[cfg.active] / cfg.pris_max
        prog.add_quadratic_le(alpha[cfg.active].scaled(np.sqrt(xi)).stacked(), 1 - MARGIN)
    prog.maximize(tau)
    sol = prog.solve(settings)
    if not sol.ok:
        return state.alpha, sol.status, float("nan")
    return sol["alpha"], sol.status, sol.objective


# -- driver -----------------------------------------------------------------

def _max_residual(channels: ChannelSet, s: StaticState) -> float:
    return max(static_residuals(channels, s.W, s.alpha, s.v).values())


def run_static(cfg: SystemConfig, channels: ChannelSet, settings: OptimizerSettings | None = None,
               state: StaticState | None = None):
    """Alternate the three blocks until the objective gain drops below the threshold."""
    settings = settings or OptimizerSettings()
    max_iters = settings.max_iters or cfg.max_iters
    eps = cfg.eps_conv if settings.eps_conv is None else settings.eps_conv
    state = state or initialize_static(cfg, channels)
    trace = IterationTrace()
    trace.add(0, state.tau, "init", Status.OPTIMAL.value, _max_residual(channels, state))

    blocks = (
        ("beamforming", solve_beamforming, "W"),
        ("location", solve_location, "v"),
        ("ris", solve_ris, "alpha"),
    )
    for it in range(1, max_iters + 1):
        prev = state.tau
        n_ok = 0
        for name, fn, attr in blocks:
            start = time.perf_counter()
            out = fn(channels, state, settings.solver)
            value, status = out[0], out[1]
            status_txt = status.value
            if status is Status.OPTIMAL:
                cand = state.copy()
                setattr(cand, attr, np.asarray(value))
                cand = repair(channels, cand)
                cand.tau = objective(channels, cand)
                if cand.tau >= state.tau - settings.accept_tol:
                    if name == "location" and len(out) > 3:
                        cand.slacks = out[3]
                    state = cand
                    n_ok += 1
                else:
                    status_txt = "rejected"
            wall = (time.perf_counter() - start) * 1e3
            trace.add(it, state.tau, name, status_txt, _max_residual(channels, state), wall)
        if n_ok == 0 and all(r.status not in ("Optimal", "rejected") for r in trace.rows[-3:]):
            trace.stop_reason = "all blocks failed"
            break
        if state.tau - prev < eps:
            trace.stop_reason = "converged"
            break
    else:
        trace.stop_reason = "iteration cap"
    return state, trace
