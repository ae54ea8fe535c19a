"""Brute-force reference solvers used to check closed forms and SCA blocks.

Everything here evaluates the exact objective (no surrogates). Batched grid
evaluation is cross-checked against the evaluation module at the returned
point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bounds
from .channels import ChannelSet
from .evaluation import noise_power, rate_mobile_per_slot, rates_static, ris_tx_power_slot

GRID_CAP = 10**7
GOLDEN = (math.sqrt(5) - 1) / 2


class GridOverflow(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned grid: ``ranges[i] = (lo, hi)`` sampled with ``points[i]`` values."""

    ranges: tuple[tuple[float, float], ...]
    points: tuple[int, ...]
    cap: int = GRID_CAP
    endpoint: bool = False  # phases are periodic, so the upper end is skipped by default

    def __post_init__(self):
        if len(self.ranges) != len(self.points):
            raise ValueError("ranges and points differ in length")
        for (lo, hi), n in zip(self.ranges, self.points):
            if not hi > lo or n < 1:
                raise ValueError("each axis needs hi > lo and at least one point")
        if self.size > self.cap:
            raise GridOverflow(f"grid of {self.size} points exceeds cap {self.cap}")

    @property
    def size(self) -> int:
        return int(np.prod(self.points, dtype=np.int64))

    @property
    def steps(self) -> np.ndarray:
        div = [n - 1 if self.endpoint and n > 1 else n for n in self.points]
        return np.array([(hi - lo) / d for (lo, hi), d in zip(self.ranges, div)])

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n, endpoint=self.endpoint) for (lo, hi), n in zip(self.ranges, self.points)]

    @classmethod
    def phases(cls, dims: int, points: int, cap: int = GRID_CAP) -> "GridSpec":
        return cls(((0.0, 2 * np.pi),) * dims, (points,) * dims, cap)


def _golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float) -> tuple[float, float]:
    a, b = lo, hi
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def grid_search(batch_fn: Callable[[np.ndarray], np.ndarray], grid: GridSpec,
                refine: bool = True, tol: float = 1e-7, sweeps: int = 3,
                chunk: int = 200_000) -> tuple[np.ndarray, float]:
    """Maximize ``batch_fn`` ((M, d) -> (M,)) over the grid, then refine coordinate-wise.

    Refinement runs golden-section searches within one grid step of the best
    point and only keeps improvements, so it never returns less than the best
    raw grid value.
    """
    axes = grid.axes()
    best_val, best_x = -np.inf, None
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    for start in range(0, mesh.shape[0], chunk):
        part = mesh[start:start + chunk]
        vals = batch_fn(part)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_x = float(vals[i]), part[i].copy()
    if not refine:
        return best_x, best_val
    x = best_x.copy()
    steps = grid.steps
    for _ in range(sweeps):
        for d in range(len(axes)):
            def f1(z, d=d):
                y = x.copy()
                y[d] = z
                return float(batch_fn(y[None, :])[0])
            z, val = _golden_max(f1, x[d] - steps[d], x[d] + steps[d], tol)
            if val > best_val:
                best_val = val
                x[d] = z
    return x, best_val


# -- static RIS phases ------------------------------------------------------

def static_phase_objective(channels: ChannelSet, W: np.ndarray, alpha: np.ndarray,
                           v: np.ndarray, free: list[int]):
    """Batched min-rate as a function of the phases of elements ``free`` (amplitudes kept)."""
    cfg = channels.cfg
    free = list(free)
    base_alpha = np.asarray(alpha, complex).copy()
    amp = np.abs(base_alpha[free])
    base_alpha[free] = 0
    H_base = channels.effective_rows(base_alpha, v)  # (K, Nt)
    H1 = channels.uav_ris(v)
    H2 = channels.ris_rows()
    # contribution of element n at unit coefficient: outer(h2[:, n], H1[n])
    unit = np.stack([np.outer(H2[:, n], H1[n]) for n in free])  # (F, K, Nt)
    # free elements are passive here, so the noise does not move with their phase
    noise = noise_power(channels, np.where(np.isin(np.arange(cfg.N), free), 0, alpha))
    if np.any(cfg.active_mask[free]):
        raise ValueError("phase search expects passive free elements")

    def batch(phases: np.ndarray) -> np.ndarray:
        coef = amp[None, :] * np.exp(1j * phases)  # (M, F)
        H = H_base[None] + np.einsum("mf,fkn->mkn", coef, unit)
        G = np.abs(np.einsum("mkn,jn->mkj", H, W)) ** 2
        sig = np.einsum("mkk->mk", G)
        interf = G.sum(axis=2) - sig
        return np.min(np.log1p(sig / (interf + noise[None, :])), axis=1)

    return batch


def grid_phase_search(channels: ChannelSet, W, alpha, v, free: list[int], grid: GridSpec,
                      refine: bool = True):
    """Best phases of up to three passive elements; returns (phases, min-rate)."""
    if len(free) > 3:
        raise ValueError("at most 3 free phase dimensions")
    if len(grid.points) != len(free):
        raise ValueError("grid dimension must match the number of free elements")
    batch = static_phase_objective(channels, W, alpha, v, free)
    x, val = grid_search(batch, grid, refine=refine)
    x = np.mod(x, 2 * np.pi)
    check = np.asarray(alpha, complex).copy()
    check[free] = np.abs(check[free]) * np.exp(1j * x)
    exact = float(np.min(rates_static(channels, W, check, v)))
    if abs(exact - val) > 1e-9 * max(1.0, abs(val)):
        raise AssertionError("batched objective disagrees with the evaluation module")
    return x, exact


def coherent_phase(direct: complex, reflected: complex) -> tuple[float, float]:
    """Phase and received power of one passive element added to a direct term."""
    grid = GridSpec.phases(1, 3600)
    batch = lambda th: np.abs(direct + reflected * np.exp(1j * th[:, 0])) ** 2
    x, val = grid_search(batch, grid)
    return float(np.mod(x[0], 2 * np.pi)), float(val)


# -- mobile power -----------------------------------------------------------

def grid_power_search(channels: ChannelSet, w_dir: np.ndarray, alpha_t: np.ndarray,
                      v_t: np.ndarray, t: int, k: int, points: int = 10_000):
    """Best UAV power for a fixed beam direction in one slot; returns (p, rate, step).

    Grid points violating the RIS power budget are skipped. The chosen point
    is re-evaluated by the evaluation module.
    """
    cfg = channels.cfg
    w_dir = np.asarray(w_dir, complex) / np.linalg.norm(w_dir)
    alpha_t = np.asarray(alpha_t, complex)
    ps = np.linspace(0.0, cfg.pt_max, points)
    gain = abs(channels.effective_rows(alpha_t, v_t, t)[k] @ w_dir) ** 2
    rates = np.log1p(ps * gain / noise_power(channels, alpha_t)[k])
    if cfg.N and cfg.Na:
        a2 = np.abs(alpha_t[cfg.active]) ** 2
        h1_sq = np.sum(np.abs(channels.uav_ris(v_t, t)) ** 2, axis=1)[cfg.active]
        ris_power = cfg.sigma_r2 * a2.sum() + ps * float(a2 @ h1_sq)
        rates = np.where(ris_power <= cfg.pris_max, rates, -np.inf)
    i = int(np.argmax(rates))
    if not np.isfinite(rates[i]):
        return 0.0, float("-inf"), float(ps[1] - ps[0])
    w = np.sqrt(ps[i]) * w_dir
    exact = rate_mobile_per_slot(k, t, channels, w, alpha_t, v_t)
    if abs(exact - rates[i]) > 1e-9 * max(1.0, exact):
        raise AssertionError("batched objective disagrees with the evaluation module")
    if ris_tx_power_slot(channels, alpha_t, w, v_t, t) > cfg.pris_max * (1 + 1e-12):
        raise AssertionError("chosen power violates the RIS budget")
    return float(ps[i]), exact, float(ps[1] - ps[0])


# -- mobile passive phases --------------------------------------------------

def slot_phase_objective(channels: ChannelSet, w_t: np.ndarray, alpha_t: np.ndarray,
                         v_t: np.ndarray, t: int, k: int, free: list[int]):
    """Batched per-slot rate of UE ``k`` as a function of passive phases ``free``."""
    cfg = channels.cfg
    free = list(free)
    if np.any(cfg.active_mask[free]):
        raise ValueError("phase search expects passive free elements")
    base_alpha = np.asarray(alpha_t, complex).copy()
    amp = np.abs(base_alpha[free])
    base_alpha[free] = 0
    h_base = channels.effective_rows(base_alpha, v_t, t)[k] @ w_t
    refl = channels.ris_rows()[k, free] * (channels.uav_ris(v_t, t)[free] @ w_t)
    noise = noise_power(channels, alpha_t)[k]

    def batch(phases: np.ndarray) -> np.ndarray:
        y = h_base + (amp[None, :] * np.exp(1j * phases)) @ refl
        return np.log1p(np.abs(y) ** 2 / noise)

    return batch


def grid_slot_phase_search(channels: ChannelSet, w_t, alpha_t, v_t, t: int, k: int,
                           free: list[int], grid: GridSpec, refine: bool = True, sweeps: int = 6):
    """Best passive phases for UE ``k`` in slot ``t``; returns (phases, rate)."""
    if len(free) > 3:
        raise ValueError("at most 3 free phase dimensions")
    batch = slot_phase_objective(channels, w_t, alpha_t, v_t, t, k, free)
    x, val = grid_search(batch, grid, refine=refine, sweeps=sweeps)
    x = np.mod(x, 2 * np.pi)
    check = np.asarray(alpha_t, complex).copy()
    check[free] = np.abs(check[free]) * np.exp(1j * x)
    exact = rate_mobile_per_slot(k, t, channels, w_t, check, v_t)
    if abs(exact - val) > 1e-9 * max(1.0, abs(val)):
        raise AssertionError("batched objective disagrees with the evaluation module")
    return x, exact


# -- static location --------------------------------------------------------

def grid_location_search(channels: ChannelSet, W: np.ndarray, alpha: np.ndarray,
                         resolution: float, cap: int = GRID_CAP):
    """Best horizontal UAV position over [0, D]^2 at fixed (W, alpha); returns (v, min-rate)."""
    cfg = channels.cfg
    n = int(round(cfg.D / resolution)) + 1
    if n * n > cap:
        raise GridOverflow(f"{n * n} grid points exceed cap {cap}")
    xs = np.linspace(0.0, cfg.D, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    pos = np.stack([X.ravel(), Y.ravel(), np.full(X.size, cfg.z0)], axis=1)
    A0, A1 = channels.path_components(alpha, W)  # (K, K)
    noise = noise_power(channels, alpha)
    d_u = np.maximum(np.linalg.norm(pos[:, None, :] - cfg.ues[None], axis=2), 1.0)  # (M, K)
    d_r = np.maximum(np.linalg.norm(pos - cfg.ris, axis=1), 1.0)  # (M,)
    amp = d_u[:, :, None] ** (-cfg.eps0 / 2) * A0[None] + (d_r ** (-cfg.eps1 / 2))[:, None, None] * A1[None]
    G = np.abs(amp) ** 2
    sig = np.einsum("mkk->mk", G)
    vals = np.min(np.log1p(sig / (G.sum(axis=2) - sig + noise[None])), axis=1)
    i = int(np.argmax(vals))
    v = pos[i]
    exact = float(np.min(rates_static(channels, W, alpha, v)))
    if abs(exact - vals[i]) > 1e-9 * max(1.0, abs(exact)):
        raise AssertionError("batched objective disagrees with the evaluation module")
    return v, exact


# -- bound gradients --------------------------------------------------------

FAMILIES = ("pow", "qua", "bil+", "bil-", "qol", "log")


def _family(name: str, rng: np.random.Generator):
    """Random (f, F, x0) for one bound family.

    ``f`` and ``F`` map a stack of real points (M, d) to (M,) values.
    """
    if name == "pow":
        c = rng.uniform(1.1, 4.0) if rng.random() < 0.5 else -rng.uniform(0.1, 3.0)
        x0 = rng.uniform(0.2, 3.0)
        return (lambda z: bounds.f_pow(z[:, 0], c),
                lambda z: bounds.F_pow(z[:, 0], c, x0), np.array([x0]))
    if name == "qua":
        d = 3
        c = rng.normal(size=d)
        x0 = rng.normal(size=d)
        return (lambda z: bounds.f_qua(z, c), lambda z: bounds.F_qua(z, c, x0), x0)
    if name in ("bil+", "bil-"):
        sign = 1 if name == "bil+" else -1
        x0 = rng.uniform(0.2, 3.0, 2)
        return (lambda z: bounds.f_bil(z[:, 0], z[:, 1], sign),
                lambda z: bounds.F_bil(z[:, 0], z[:, 1], sign, x0[0], x0[1]), x0)
    if name == "qol":
        d = 2
        B = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        C = B @ B.conj().T
        xc = rng.normal(size=d) + 1j * rng.normal(size=d)
        y0 = rng.uniform(0.5, 3.0)

        def split(z):
            return z[:, :d] + 1j * z[:, d:2 * d], z[:, 2 * d]

        return (lambda z: bounds.f_qol(*split(z), C),
                lambda z: bounds.F_qol(*split(z), C, xc, y0),
                np.concatenate([xc.real, xc.imag, [y0]]))
    if name == "log":
        off = rng.uniform(0.1, 2.0)
        u0 = rng.uniform(0.0, 5.0)
        # log is concave; its tangent is the upper bound
        return (lambda z: np.log(z[:, 0] + off),
                lambda z: bounds.log_upper_bound(z[:, 0], u0, off), np.array([u0]))
    raise ValueError(f"unknown bound family {name!r}")


def central_difference_points(x0: np.ndarray, step: float) -> np.ndarray:
    """(2d, d) stack x0 + step e_i followed by x0 - step e_i."""
    E = step * np.eye(x0.size)
    return np.vstack([x0 + E, x0 - E])


def gradient_gap(f, F, x0: np.ndarray, step: float = 1e-6) -> float:
    """Relative gap between central-difference gradients of f and F at x0."""
    Z = central_difference_points(x0, step)
    d = x0.size
    vf, vF = f(Z), F(Z)
    gf = (vf[:d] - vf[d:]) / (2 * step)
    gF = (vF[:d] - vF[d:]) / (2 * step)
    return float(np.linalg.norm(gf - gF) / max(1.0, np.linalg.norm(gF)))


def finite_difference_check(family: str, n_points: int = 100, seed: int = 0,
                            step: float = 1e-6) -> float:
    """Max relative gap between central-difference gradients of f and F at the expansion point."""
    rng = np.random.default_rng(seed)
    return max(gradient_gap(*_family(family, rng), step=step) for _ in range(n_points))


def sample_family(family: str, rng: np.random.Generator):
    """Public access to one random (f, F, x0) triple."""
    return _family(family, rng)
