"""Mobile-UAV max-min average rate design (TDMA over T slots).

Outer loop: scheduling LP, closed-form beamforming, trajectory update, passive
phases in closed form, active coefficients by a convex restriction, then
recombination of the two RIS parts. The relaxed schedule drives optimization;
reports also give the argmax-rounded schedule.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import cvxpy as cp
import numpy as np
from scipy.optimize import linprog

from . import bounds
from .channels import ChannelSet
from .config import INIT_STREAM, SystemConfig, stream
from .conic import ProgramBuilder, SolverSettings, Status
from .evaluation import (Schedule, average_rate_mobile, mobile_residuals, noise_power,
                         rates_mobile_per_slot, ris_tx_power_mobile)
from .static import MARGIN, OptimizerSettings
from .trace import IterationTrace

SLOT_ACTIVE = 1e-9  # schedule weights below this are treated as zero


@dataclass
class MobileState:
    track: np.ndarray  # (T, 3)
    b: np.ndarray  # (K, T) relaxed schedule
    w: np.ndarray  # (T, Nt)
    phi: np.ndarray  # (T, N) passive part, zero on the active set
    psi: np.ndarray  # (T, N) active part, zero off the active set
    tau: float = float("nan")

    @property
    def alpha(self) -> np.ndarray:
        return self.phi + self.psi

    def copy(self) -> "MobileState":
        return MobileState(self.track.copy(), self.b.copy(), self.w.copy(), self.phi.copy(),
                           self.psi.copy(), self.tau)


def per_slot_rates(channels: ChannelSet, s: MobileState) -> np.ndarray:
    return rates_mobile_per_slot(channels, s.w, s.alpha, s.track)


def objective(channels: ChannelSet, s: MobileState, b: np.ndarray | None = None) -> float:
    b = s.b if b is None else b
    return float(np.min(average_rate_mobile(b, per_slot_rates(channels, s))))


def rounded_objective(channels: ChannelSet, s: MobileState) -> float:
    return objective(channels, s, Schedule(s.b).rounded)


# -- initialization ---------------------------------------------------------

def circular_track(cfg: SystemConfig) -> np.ndarray:
    """Closed circle around the UE centroid at the flight altitude."""
    T = cfg.T
    centre = cfg.ues.mean(axis=0)
    reach = float(np.max(np.linalg.norm(cfg.ues[:, :2] - centre[:2], axis=1)))
    radius = min(cfg.d_max / (2 * np.pi), 0.5 * reach)
    ang = 2 * np.pi * np.arange(T) / max(T - 1, 1)
    track = np.column_stack([centre[0] + radius * np.cos(ang), centre[1] + radius * np.sin(ang),
                             np.full(T, cfg.z0)])
    track[-1] = track[0]
    return track


def _active_amplitude(cfg: SystemConfig, xi: np.ndarray) -> float:
    load = float(np.sum(xi[cfg.active]))
    if load <= 0:
        return cfg.a_max
    return min(cfg.a_max, float(np.sqrt(cfg.pris_max / load)))


def _xi(channels: ChannelSet, w_t: np.ndarray, v_t: np.ndarray, t: int) -> np.ndarray:
    cfg = channels.cfg
    return cfg.sigma_r2 + np.sum(np.abs(channels.uav_ris(v_t, t)) ** 2, axis=1) * float(np.sum(np.abs(w_t) ** 2))


def initialize_mobile(cfg: SystemConfig, channels: ChannelSet, track: np.ndarray | None = None) -> MobileState:
    T, K, N = cfg.T, cfg.K, cfg.N
    track = circular_track(cfg) if track is None else np.asarray(track, float)
    b = np.zeros((K, T))
    b[0] = 1.0
    g = channels.g0[:, 0, :]  # UE 1's direct channel per slot
    w = np.sqrt(cfg.pt_max) * g / np.linalg.norm(g, axis=1, keepdims=True)
    phases = stream(cfg.seed, INIT_STREAM).uniform(0, 2 * np.pi, (T, N))
    psi = np.zeros((T, N), complex)
    if cfg.Na:
        for t in range(T):
            r = _active_amplitude(cfg, _xi(channels, w[t], track[t], t)) * (1 - MARGIN)
            psi[t, cfg.active] = r * np.exp(1j * phases[t, cfg.active])
    s = MobileState(track, b, w, np.zeros((T, N), complex), psi)
    s.phi = passive_phase_closed_form(channels, s)
    s.tau = objective(channels, s)
    return s


# -- scheduling -------------------------------------------------------------

def solve_scheduling_lp(rates: np.ndarray) -> tuple[np.ndarray, float]:
    """Relaxed schedule maximizing the minimum average rate; vertex solution."""
    K, T = rates.shape
    n = K * T + 1  # b (row-major K x T) then tau
    c = np.zeros(n)
    c[-1] = -1.0
    A, rhs = [], []
    for k in range(K):  # tau - (1/T) sum_t b_kt r_kt <= 0
        row = np.zeros(n)
        row[k * T:(k + 1) * T] = -rates[k] / T
        row[-1] = 1.0
        A.append(row)
        rhs.append(0.0)
    for t in range(T):  # sum_k b_kt <= 1
        row = np.zeros(n)
        row[t:K * T:T] = 1.0
        A.append(row)
        rhs.append(1.0)
    bnds = [(0.0, 1.0)] * (K * T) + [(None, None)]
    res = linprog(c, A_ub=np.array(A), b_ub=np.array(rhs), bounds=bnds, method="highs-ds")
    if res.status != 0:
        raise RuntimeError(f"scheduling LP failed: {res.message}")
    b = np.clip(res.x[:-1].reshape(K, T), 0.0, 1.0)
    b[b < SLOT_ACTIVE] = 0.0
    return b, float(-res.fun)


# -- beamforming ------------------------------------------------------------

def power_closed_form(cfg: SystemConfig, alpha_t: np.ndarray, h1_sq: np.ndarray) -> float:
    """Largest UAV power meeting both budgets; ``h1_sq`` holds ||h_1n[t]||^2."""
    if cfg.N == 0 or cfg.Na == 0:
        return cfg.pt_max
    a2 = np.abs(alpha_t[cfg.active]) ** 2
    denom = float(a2 @ h1_sq[cfg.active])
    if denom <= 0:
        return cfg.pt_max
    return max(0.0, min(cfg.pt_max, (cfg.pris_max - cfg.sigma_r2 * float(a2.sum())) / denom))


def closed_form_beamforming(channels: ChannelSet, s: MobileState) -> np.ndarray:
    """Matched filter toward each slot's served UE at the largest feasible power."""
    cfg = channels.cfg
    served = Schedule(s.b).served
    alpha = s.alpha
    w = np.empty_like(s.w)
    for t in range(cfg.T):
        h = channels.effective_rows(alpha[t], s.track[t], t)[served[t]]
        h1_sq = np.sum(np.abs(channels.uav_ris(s.track[t], t)) ** 2, axis=1)
        p = power_closed_form(cfg, alpha[t], h1_sq) * (1 - MARGIN)
        nrm = np.linalg.norm(h)
        direction = h.conj() / nrm if nrm > 0 else np.eye(cfg.Nt)[0]
        w[t] = np.sqrt(p) * direction
    return w


# -- passive phases ---------------------------------------------------------

def slot_terms(channels: ChannelSet, s: MobileState, k: int, t: int):
    """Direct term h_0k^H w and per-element reflected terms (N,) for UE k in slot t."""
    h0 = channels.direct_rows(s.track[t], t)[k] @ s.w[t]
    if channels.cfg.N == 0:
        return h0, np.zeros(0, complex)
    refl = channels.ris_rows()[k] * (channels.uav_ris(s.track[t], t) @ s.w[t])
    return h0, refl


def passive_phase_closed_form(channels: ChannelSet, s: MobileState) -> np.ndarray:
    """Unit-modulus passive coefficients co-phased with direct-plus-active term."""
    cfg = channels.cfg
    phi = np.zeros((cfg.T, cfg.N), complex)
    if cfg.N == 0:
        return phi
    passive = ~cfg.active_mask
    served = Schedule(s.b).served
    for t in range(cfg.T):
        h0, refl = slot_terms(channels, s, served[t], t)
        ref = h0 + s.psi[t] @ refl
        ref_angle = np.angle(ref) if abs(ref) > 0 else 0.0
        phi[t, passive] = np.exp(1j * (ref_angle - np.angle(refl[passive])))
    return phi


# -- trajectory -------------------------------------------------------------

def solve_trajectory(channels: ChannelSet, s: MobileState, settings: SolverSettings | None = None):
    """Trajectory update with distance slacks; returns (track, status, surrogate tau)."""
    cfg = channels.cfg
    K, T = cfg.K, cfg.T
    ues, ris = cfg.ues, cfg.ris
    has_ris = cfg.N > 0
    L = cfg.D / 2
    e0, e1 = cfg.eps0, cfg.eps1
    V0 = s.track
    alpha = s.alpha

    prog = ProgramBuilder()
    tau = prog.add_real("tau")
    delta = prog.add_real("delta", (T, 2))
    v = [cp.hstack([V0[t, 0] + L * delta[t, 0], V0[t, 1] + L * delta[t, 1], cp.Constant(V0[t, 2])])
         for t in range(T)]
    prog.add_linear(delta[0] == delta[T - 1])
    for t in range(T - 1):
        prog.add_soc(v[t + 1][:2] - v[t][:2], cfg.d_max)

    def lower_slack(t, center, d0, eps, x):
        prog.add_soc((v[t] - center) / d0, -bounds.F_pow(x, -2 / eps, 1.0))

    def upper_slack(t, center, d0, eps, x):
        lead = 1 + 2 * ((V0[t] - center)[:2] @ (L * delta[t])) / d0**2
        prog.add_rotated_cone(lead, -bounds.F_pow(x, 4 / eps, 1.0), 1.0)

    pairs = [(k, t) for t in range(T) for k in range(K) if s.b[k, t] > SLOT_ACTIVE]
    n_pairs = len(pairs)
    p_lo = prog.add_real("p_lo", n_pairs, nonneg=True) if n_pairs else None
    p_hi = prog.add_real("p_hi", n_pairs, nonneg=True) if n_pairs else None
    q_hi = prog.add_real("q_hi", n_pairs, nonneg=True) if n_pairs and has_ris else None
    rate = prog.add_real("rate", n_pairs) if n_pairs else None
    q_lo = prog.add_real("q_lo", T, nonneg=True) if has_ris else None
    need_q = np.zeros(T, bool)
    contrib: dict[int, list] = {k: [] for k in range(K)}

    d_r = np.linalg.norm(V0 - ris, axis=1)
    Q = d_r ** (-e1 / 2)
    for i, (k, t) in enumerate(pairs):
        d_u = float(np.linalg.norm(V0[t] - ues[k]))
        P = d_u ** (-e0 / 2)
        A0, A1 = channels.path_components(alpha[t], s.w[t], t)
        c0 = abs(A0[k]) ** 2 / cfg.sigma_u2
        c1 = abs(A1[k]) ** 2 / cfg.sigma_u2
        c2 = 2 * np.real(np.conj(A0[k]) * A1[k]) / cfg.sigma_u2
        C0, C1, C2 = c0 * P**2, c1 * Q[t] ** 2, c2 * P * Q[t]
        noise = float(noise_power(channels, alpha[t])[k] / cfg.sigma_u2)

        lower_slack(t, ues[k], d_u, e0, p_lo[i])
        lin = C0 * bounds.sq_norm_minorant(p_lo[i], 1.0)
        convex = None
        if has_ris:
            need_q[t] = True
            lin = lin + C1 * bounds.sq_norm_minorant(q_lo[t], 1.0)
            if C2 >= 0:
                convex = C2 * bounds.F_bil(p_lo[i], q_lo[t], -1, 1.0, 1.0)
                prog.add_linear(p_hi[i] == p_lo[i])
                prog.add_linear(q_hi[i] == q_lo[t])
            else:
                upper_slack(t, ues[k], d_u, e0, p_hi[i])
                upper_slack(t, ris, d_r[t], e1, q_hi[i])
                convex = -C2 * bounds.F_bil(p_hi[i], q_hi[i], 1, 1.0, 1.0)
        else:
            prog.add_linear(p_hi[i] == p_lo[i])
        gain = prog.add_real(f"gain_{i}")
        if convex is None:
            prog.add_linear(gain <= lin)
        else:
            prog.add_convex_le(convex, lin - gain)
        prog.add_exp_log(rate[i], 1 + gain / noise)
        contrib[k].append(s.b[k, t] * rate[i])

    for t in np.flatnonzero(need_q):
        lower_slack(t, ris, d_r[t], e1, q_lo[t])

    if has_ris and cfg.Na:
        q_pw = prog.add_real("q_pw", T, nonneg=True)
        for t in range(T):
            upper_slack(t, ris, d_r[t], e1, q_pw[t])
            a2 = np.abs(alpha[t, cfg.active]) ** 2
            h1 = np.sum(np.abs(channels.uav_ris(V0[t], t)) ** 2, axis=1)[cfg.active]
            load = float(a2 @ h1) * float(np.sum(np.abs(s.w[t]) ** 2))
            budget = cfg.pris_max * (1 - MARGIN) - cfg.sigma_r2 * float(a2.sum())
            prog.add_convex_le((load / cfg.pris_max) * cp.square(q_pw[t]), budget / cfg.pris_max)

    for k in range(K):
        avg = cp.sum(cp.hstack(contrib[k])) / T if contrib[k] else 0.0
        prog.add_linear(tau <= avg)
    prog.maximize(tau)
    sol = prog.solve(settings)
    if not sol.ok:
        return s.track, sol.status, float("nan")
    d = sol["delta"]
    track = V0.copy()
    track[:, :2] += L * d
    track[-1] = track[0]
    return track, sol.status, sol.objective


# -- active coefficients ----------------------------------------------------

def _active_slot_program(prog: ProgramBuilder, channels: ChannelSet, s: MobileState, t: int,
                         k: int, psi):
    """Adds the rate minorant of UE k in slot t; returns the affine rate expression."""
    cfg = channels.cfg
    act = cfg.active
    scale = 1 / np.sqrt(cfg.sigma_u2)
    h0, refl = slot_terms(channels, s, k, t)
    base = (h0 + s.phi[t] @ refl) * scale
    r = refl[act] * scale
    rho = cfg.sigma_r2 * np.abs(channels.ris_rows()[k, act]) ** 2 / cfg.sigma_u2
    psi0 = s.psi[t, act]
    y = psi.linear(r, base)
    y0 = base + r @ psi0
    lin = (1 + 2 * (y0.real * y.re + y0.imag * y.im) - abs(y0) ** 2
           + psi.real_inner(2 * rho * psi0) - float(rho @ np.abs(psi0) ** 2))
    theta = prog.add_real(f"theta_{k}_{t}")
    theta0 = float(rho @ np.abs(psi0) ** 2 + 1)
    prog.add_quadratic_le(psi.scaled(np.sqrt(rho)).stacked(), theta - 1)
    s_var = prog.add_real(f"s_{k}_{t}")
    prog.add_exp_log(s_var, lin)
    return s_var - bounds.log_upper_bound(theta, theta0)


def _active_limits(prog: ProgramBuilder, channels: ChannelSet, s: MobileState, t: int, psi) -> None:
    cfg = channels.cfg
    for n in range(cfg.Na):
        prog.add_soc(cp.hstack([psi.re[n], psi.im[n]]), cfg.a_max)
    xi = _xi(channels, s.w[t], s.track[t], t)[cfg.active] / cfg.pris_max
    prog.add_quadratic_le(psi.scaled(np.sqrt(xi)).stacked(), 1 - MARGIN)


def solve_active(channels: ChannelSet, s: MobileState, settings: SolverSettings | None = None,
                 mode: str = "joint"):
    """Active-element update; returns (psi, status, surrogate tau).

    ``joint`` builds one program over all slots. ``split`` solves each slot on
    its own, which is exact when every slot serves a single UE.
    """
    cfg = channels.cfg
    K, T = cfg.K, cfg.T
    if cfg.Na == 0:
        return s.psi, Status.OPTIMAL, float("nan")
    if mode == "split" and not Schedule(s.b).is_binary():
        mode = "joint"
    psi_new = s.psi.copy()
    if mode == "split":
        slot_obj = np.zeros((K, T))
        for t in range(T):
            ks = np.flatnonzero(s.b[:, t] > SLOT_ACTIVE)
            if ks.size == 0:
                continue
            k = int(ks[0])
            prog = ProgramBuilder()
            psi = prog.add_complex_vector("psi", cfg.Na)
            r = _active_slot_program(prog, channels, s, t, k, psi)
            _active_limits(prog, channels, s, t, psi)
            obj = prog.add_real("obj")
            prog.add_linear(obj <= r)
            prog.maximize(obj)
            sol = prog.solve(settings)
            if not sol.ok:
                return s.psi, sol.status, float("nan")
            psi_new[t, cfg.active] = sol["psi"]
            slot_obj[k, t] = sol.objective
        tau = float(np.min(np.sum(s.b * slot_obj, axis=1) / T))
        return psi_new, Status.OPTIMAL, tau

    prog = ProgramBuilder()
    tau = prog.add_real("tau")
    psis = []
    contrib: dict[int, list] = {k: [] for k in range(K)}
    for t in range(T):
        psi = prog.add_complex_vector(f"psi_{t}", cfg.Na)
        psis.append(psi)
        _active_limits(prog, channels, s, t, psi)
        for k in np.flatnonzero(s.b[:, t] > SLOT_ACTIVE):
            contrib[int(k)].append(s.b[k, t] * _active_slot_program(prog, channels, s, t, int(k), psi))
    for k in range(K):
        avg = cp.sum(cp.hstack(contrib[k])) / T if contrib[k] else 0.0
        prog.add_linear(tau <= avg)
    prog.maximize(tau)
    sol = prog.solve(settings)
    if not sol.ok:
        return s.psi, sol.status, float("nan")
    for t in range(T):
        psi_new[t, cfg.active] = sol[f"psi_{t}"]
    return psi_new, sol.status, sol.objective


# -- repair and driver ------------------------------------------------------

def repair(channels: ChannelSet, s: MobileState) -> MobileState:
    """Scale away solver-tolerance violations of power and amplitude limits."""
    cfg = channels.cfg
    s = s.copy()
    p = np.sum(np.abs(s.w) ** 2, axis=1)
    over = p > cfg.pt_max
    s.w[over] *= np.sqrt(cfg.pt_max / p[over])[:, None]
    if cfg.Na:
        mag = np.abs(s.psi)
        big = mag > cfg.a_max
        s.psi[big] *= cfg.a_max / mag[big]
        pr = ris_tx_power_mobile(channels, s.alpha, s.w, s.track)
        for t in np.flatnonzero(pr > cfg.pris_max):
            s.psi[t] *= np.sqrt(cfg.pris_max / pr[t])
    steps = np.linalg.norm(np.diff(s.track[:, :2], axis=0), axis=1)
    if steps.size and steps.max() > cfg.d_max:
        # shrink the path toward its first point until every step fits
        shrink = cfg.d_max / steps.max()
        s.track[:, :2] = s.track[0, :2] + shrink * (s.track[:, :2] - s.track[0, :2])
    return s


def _max_residual(channels: ChannelSet, s: MobileState) -> float:
    return max(mobile_residuals(channels, s.w, s.alpha, s.track, s.b).values())


def run_mobile(cfg: SystemConfig, channels: ChannelSet, settings: OptimizerSettings | None = None,
               state: MobileState | None = None):
    """Run the mobile loop; returns (state, trace).

    ``trace.metrics`` holds the final relaxed and rounded-schedule objectives.
    """
    settings = settings or OptimizerSettings()
    max_iters = settings.max_iters or cfg.max_iters
    eps = cfg.eps_conv if settings.eps_conv is None else settings.eps_conv
    s = state or initialize_mobile(cfg, channels)
    trace = IterationTrace()
    trace.add(0, s.tau, "init", Status.OPTIMAL.value, _max_residual(channels, s))

    def accept(cand: MobileState) -> bool:
        nonlocal s
        cand = repair(channels, cand)
        cand.tau = objective(channels, cand)
        if cand.tau >= s.tau - settings.accept_tol:
            s = cand
            return True
        return False

    def record(it, name, status_txt, start):
        trace.add(it, s.tau, name, status_txt, _max_residual(channels, s),
                  (time.perf_counter() - start) * 1e3)

    for it in range(1, max_iters + 1):
        prev = s.tau

        start = time.perf_counter()
        b, _ = solve_scheduling_lp(per_slot_rates(channels, s))
        cand = s.copy()
        cand.b = b
        record(it, "schedule", "Optimal" if accept(cand) else "rejected", start)

        start = time.perf_counter()
        cand = s.copy()
        new_w = closed_form_beamforming(channels, s)
        cand.w = new_w
        ok = accept(cand)
        if not ok:
            # keep the closed form on single-UE slots only
            frac = ~np.isclose(s.b.max(axis=0), 1.0)
            cand = s.copy()
            cand.w[~frac] = new_w[~frac]
            ok = accept(cand)
        record(it, "beamforming", "Optimal" if ok else "rejected", start)

        start = time.perf_counter()
        track, status, _ = solve_trajectory(channels, s, settings.solver)
        txt = status.value
        if status is Status.OPTIMAL:
            cand = s.copy()
            cand.track = track
            if not accept(cand):
                txt = "rejected"
        record(it, "trajectory", txt, start)

        start = time.perf_counter()
        cand = s.copy()
        new_phi = passive_phase_closed_form(channels, s)
        cand.phi = new_phi
        ok = accept(cand)
        if not ok:
            frac = ~np.isclose(s.b.max(axis=0), 1.0)
            cand = s.copy()
            cand.phi[~frac] = new_phi[~frac]
            ok = accept(cand)
        record(it, "passive", "Optimal" if ok else "rejected", start)

        start = time.perf_counter()
        psi, status, _ = solve_active(channels, s, settings.solver, settings.active_mode)
        txt = status.value
        if status is Status.OPTIMAL:
            cand = s.copy()
            cand.psi = psi
            if not accept(cand):
                txt = "rejected"
        record(it, "active", txt, start)

        if s.tau - prev < eps:
            trace.stop_reason = "converged"
            break
    else:
        trace.stop_reason = "iteration cap"
    trace.metrics["relaxed_tau"] = s.tau
    trace.metrics["rounded_tau"] = rounded_objective(channels, s)
    return s, trace
