"""Verification suites comparing bounds, closed forms and SCA blocks to brute force.

Each suite returns a list of :class:`Check` records; a check is named
``suite/property`` so a failure says which property broke.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from . import oracle
from .channels import sample_channels
from .config import SystemConfig
from .evaluation import Schedule, noise_power
from .mobile import (MobileState, circular_track, passive_phase_closed_form, power_closed_form)
from .static import initialize_static, objective, repair, solve_ris

SUITES = ("bounds", "phase-closed-form", "power-closed-form", "tiny-ris")


@dataclass(frozen=True)
class Check:
    name: str
    value: float  # worst observed statistic
    threshold: float
    passed: bool

    def as_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "threshold": self.threshold, "passed": self.passed}


def _at_most(name: str, value: float, threshold: float) -> Check:
    return Check(name, float(value), threshold, bool(value <= threshold))


def _at_least(name: str, value: float, threshold: float) -> Check:
    return Check(name, float(value), threshold, bool(value >= threshold))


# -- bound families ---------------------------------------------------------

def _random_point(family: str, x0: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """A point in the family's domain, spread around the expansion point."""
    if family in ("pow", "bil+", "bil-"):
        return x0 * np.exp(rng.normal(0.0, 1.0, x0.shape))
    if family == "qua":
        return x0 + rng.normal(0.0, 2.0, x0.shape)
    if family == "qol":
        z = x0 + rng.normal(0.0, 2.0, x0.shape)
        z[-1] = x0[-1] * np.exp(rng.normal(0.0, 1.0))
        return z
    if family == "log":
        return np.array([rng.uniform(0.0, 10.0)])
    raise ValueError(family)


def bounds_suite(n_pairs: int = 10_000, seed: int = 0, step: float = 1e-6) -> list[Check]:
    """Majorization, tangency and gradient agreement for every bound family."""
    rng = np.random.default_rng(seed)
    checks = []
    for family in oracle.FAMILIES:
        worst_slack = np.inf
        worst_tan = 0.0
        worst_grad = 0.0
        offsets = None
        for _ in range(n_pairs):
            f, F, x0 = oracle.sample_family(family, rng)
            d = x0.size
            if offsets is None:
                # rows: random point, expansion point, then the difference stencil
                offsets = np.vstack([np.zeros((2, d)), oracle.central_difference_points(np.zeros(d), step)])
            offsets[0] = _random_point(family, x0, rng) - x0
            Z = x0 + offsets
            vf, vF = f(Z), F(Z)
            worst_slack = min(worst_slack, vF[0] - vf[0])
            worst_tan = max(worst_tan, abs(vF[1] - vf[1]))
            gf = (vf[2:2 + d] - vf[2 + d:]) / (2 * step)
            gF = (vF[2:2 + d] - vF[2 + d:]) / (2 * step)
            gap = np.sqrt(np.dot(gf - gF, gf - gF) / max(1.0, np.dot(gF, gF)))
            worst_grad = max(worst_grad, float(gap))
        checks.append(_at_least(f"bounds/{family}/majorization", worst_slack, -1e-9))
        checks.append(_at_most(f"bounds/{family}/tangency", worst_tan, 1e-9))
        checks.append(_at_most(f"bounds/{family}/gradient", worst_grad, 1e-4))
    return checks


# -- mobile closed forms ----------------------------------------------------

def _slot_scenario(seed: int, T: int, **overrides) -> tuple[SystemConfig, object, MobileState]:
    """Random per-slot beams, active coefficients and schedule on sampled channels."""
    base = dict(K=2, Nt=2, Nx=3, Ny=1, Na=1, T=T, seed=seed)
    base.update(overrides)
    cfg = SystemConfig(**base)
    track = circular_track(cfg)
    channels = sample_channels(cfg, track)
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(T, cfg.Nt)) + 1j * rng.normal(size=(T, cfg.Nt))
    w *= np.sqrt(cfg.pt_max * rng.uniform(0.1, 1.0, (T, 1))) / np.linalg.norm(w, axis=1, keepdims=True)
    b = np.zeros((cfg.K, T))
    b[rng.integers(0, cfg.K, T), np.arange(T)] = 1.0
    psi = np.zeros((T, cfg.N), complex)
    psi[:, cfg.active] = rng.uniform(0, cfg.a_max, (T, cfg.Na)) * np.exp(
        1j * rng.uniform(0, 2 * np.pi, (T, cfg.Na)))
    s = MobileState(track, b, w, np.zeros((T, cfg.N), complex), psi)
    return cfg, channels, s


def phase_suite(n_slots: int = 50, seed: int = 0, points: int = 360) -> list[Check]:
    """Closed-form passive phases against refined grid optima."""
    cfg, channels, s = _slot_scenario(seed, n_slots)
    phi = passive_phase_closed_form(channels, s)
    served = Schedule(s.b).served
    free = [int(n) for n in np.flatnonzero(~cfg.active_mask)]
    grid = oracle.GridSpec.phases(len(free), points)
    worst_angle = 0.0
    worst_rate = 0.0
    for t in range(n_slots):
        alpha_t = s.psi[t] + np.where(cfg.active_mask, 0, 1.0)
        x, best = oracle.grid_slot_phase_search(channels, s.w[t], alpha_t, s.track[t], t,
                                                int(served[t]), free, grid)
        diff = np.angle(np.exp(1j * (np.angle(phi[t, free]) - x)))
        worst_angle = max(worst_angle, float(np.max(np.abs(diff))))
        closed = oracle.slot_phase_objective(channels, s.w[t], alpha_t, s.track[t], t,
                                             int(served[t]), free)(np.angle(phi[t, free])[None, :])[0]
        worst_rate = max(worst_rate, best - float(closed))
    return [_at_most("phase-closed-form/angle", worst_angle, 1e-3),
            _at_most("phase-closed-form/rate-gap", worst_rate, 1e-9)]


def power_suite(n_slots: int = 50, seed: int = 0, points: int = 10_000) -> list[Check]:
    """Closed-form UAV power against a grid search, with binding and slack RIS budgets."""
    cfg, channels, s = _slot_scenario(seed, n_slots, Nx=4, Na=2)
    rng = np.random.default_rng(seed + 1)
    served = Schedule(s.b).served
    worst = 0.0
    binding = 0
    for t in range(n_slots):
        alpha_t = s.psi[t] + np.where(cfg.active_mask, 0, 1.0)
        h1_sq = np.sum(np.abs(channels.uav_ris(s.track[t], t)) ** 2, axis=1)
        a2 = np.abs(alpha_t[cfg.active]) ** 2
        # budget chosen so the boundary falls at ratio * ptMax
        ratio = rng.uniform(0.2, 2.0)
        pris = cfg.sigma_r2 * a2.sum() + ratio * cfg.pt_max * float(a2 @ h1_sq[cfg.active])
        slot_cfg = cfg.with_(pris_max=float(pris))
        slot_channels = dataclasses.replace(channels, cfg=slot_cfg)
        p_star = power_closed_form(slot_cfg, alpha_t, h1_sq)
        binding += p_star < cfg.pt_max
        h = slot_channels.effective_rows(alpha_t, s.track[t], t)[served[t]]
        p_grid, _, step = oracle.grid_power_search(slot_channels, h.conj(), alpha_t, s.track[t], t,
                                                   int(served[t]), points)
        worst = max(worst, abs(p_star - p_grid) / step)
    return [_at_most("power-closed-form/grid-steps", worst, 1.0),
            _at_least("power-closed-form/binding-slots", binding, 1)]


# -- tiny static RIS --------------------------------------------------------

def converge_ris(channels, state, max_iters: int = 100, tol: float = 1e-9):
    """Repeat the RIS block alone until the min-rate stops improving."""
    for _ in range(max_iters):
        alpha, status, _ = solve_ris(channels, state)
        cand = state.copy()
        cand.alpha = np.asarray(alpha)
        cand = repair(channels, cand)
        cand.tau = objective(channels, cand)
        if not status.value == "Optimal" or cand.tau < state.tau + tol:
            if cand.tau > state.tau:
                state = cand
            break
        state = cand
    return state


def tiny_ris_suite(seeds=range(20), points: int = 360) -> list[Check]:
    """Two passive elements, one UE, one antenna: RIS block against a phase grid."""
    worst = np.inf
    for seed in seeds:
        cfg = SystemConfig(K=1, Nt=1, Nx=2, Ny=1, Na=0, T=1, seed=int(seed))
        channels = sample_channels(cfg, [[cfg.D / 2, cfg.D / 2, cfg.z0]])
        state = converge_ris(channels, initialize_static(cfg, channels))
        unit = np.ones(cfg.N, complex)
        _, best = oracle.grid_phase_search(channels, state.W, unit, state.v, [0, 1],
                                           oracle.GridSpec.phases(2, points))
        worst = min(worst, state.tau / best)
    return [_at_least("tiny-ris/ratio-to-grid", worst, 0.98)]


RUNNERS = {
    "bounds": bounds_suite,
    "phase-closed-form": phase_suite,
    "power-closed-form": power_suite,
    "tiny-ris": tiny_ris_suite,
}


def run_suites(names=SUITES) -> dict:
    """Machine-readable report; ``passed`` is true only if every check passed."""
    report = {"suites": {}, "passed": True}
    for name in names:
        if name not in RUNNERS:
            raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
        start = time.perf_counter()
        checks = RUNNERS[name]()
        ok = all(c.passed for c in checks)
        report["suites"][name] = {"passed": ok, "checks": [c.as_dict() for c in checks],
                                  "seconds": time.perf_counter() - start}
        report["passed"] = report["passed"] and ok
    return report


def failures(report: dict) -> list[str]:
    return [c["name"] for s in report["suites"].values() for c in s["checks"] if not c["passed"]]
