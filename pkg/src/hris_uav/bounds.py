"""Concave prototypes and their first-order convex majorizers.

Each ``f_*`` is a concave function of its argument; the matching ``F_*`` is
convex (affine or quadratic), upper-bounds ``f_*`` everywhere on the domain and
touches it with equal gradient at the expansion point. Every ``F_*`` accepts
either numbers/arrays or cvxpy expressions for the free arguments, so the same
code feeds numeric checks and convex programs. Complex vectors inside programs
are passed as objects exposing ``real_inner(a)`` (``Re{a^H x}``).
"""

from __future__ import annotations

import numpy as np

CLAMP = 1e-12  # expansion points are kept at least this far from zero


def _is_numeric(x) -> bool:
    return isinstance(x, (int, float, complex, np.number, np.ndarray))


def _check_positive(name: str, x) -> None:
    if _is_numeric(x) and (np.asarray(x) <= 0).any():
        raise ValueError(f"{name} must be > 0")


def _anchor(name: str, x0):
    """Validated expansion point, nudged off zero."""
    x0 = np.asarray(x0, dtype=float)
    if not np.isfinite(x0).all() or (x0 < 0).any():
        raise ValueError(f"{name} must be finite and > 0")
    return np.maximum(x0, CLAMP)


def _square(x):
    if _is_numeric(x):
        return np.asarray(x, float) ** 2
    import cvxpy as cp

    return cp.square(x)


def _check_exponent(c: float) -> None:
    if 0 <= c <= 1:
        raise ValueError("exponent c must satisfy c > 1 or c < 0")


# -- power ------------------------------------------------------------------

def f_pow(x, c: float):
    """-x^c, concave for c > 1 or c < 0 on x > 0."""
    _check_exponent(c)
    _check_positive("x", x)
    return -np.asarray(x, float) ** c


def F_pow(x, c: float, x0):
    """Affine majorizer (c - 1) x0^c - c x0^(c-1) x of ``f_pow``."""
    _check_exponent(c)
    _check_positive("x", x)
    x0 = _anchor("x0", x0)
    return (c - 1) * x0**c - c * x0 ** (c - 1) * x


# -- squared distance -------------------------------------------------------

def f_qua(x, c):
    """-||x - c||^2; ``x`` may stack points along its leading axes."""
    x, c = np.asarray(x, float), np.asarray(c, float)
    if x.shape[-1:] != c.shape:
        raise ValueError("x and c dimensions differ")
    out = -np.sum((x - c) ** 2, axis=-1)
    return float(out) if out.ndim == 0 else out


def F_qua(x, c, x0):
    """Affine majorizer 2 (c - x0)^T (x - x0) - ||x0 - c||^2 of ``-||x - c||^2``."""
    c, x0 = np.asarray(c, float), np.asarray(x0, float)
    if c.shape != x0.shape or (_is_numeric(x) and np.shape(x)[-1:] != x0.shape[-1:]):
        raise ValueError("x, c and x0 dimensions differ")
    d = c - x0
    if x0.ndim == 0:
        return 2 * d * (x - x0) - d * d
    return 2 * ((x - x0) @ d) - float(d @ d)


# -- bilinear ---------------------------------------------------------------

def _check_sign(sign: int) -> None:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")


def f_bil(x, y, sign: int):
    """``sign * x * y`` on the positive quadrant."""
    _check_sign(sign)
    _check_positive("x", x)
    _check_positive("y", y)
    return sign * np.asarray(x, float) * np.asarray(y, float)


def F_bil(x, y, sign: int, x0, y0):
    """Convex majorizer of ``sign * x * y``, tight at ``(x0, y0)``."""
    _check_sign(sign)
    _check_positive("x", x)
    _check_positive("y", y)
    x0, y0 = _anchor("x0", x0), _anchor("y0", y0)
    if sign == 1:
        return 0.5 * ((y0 / x0) * _square(x) + (x0 / y0) * _square(y))
    s0 = x0 + y0
    return 0.25 * _square(x - y) + 0.25 * s0**2 - 0.5 * s0 * (x + y)


# -- quadratic over linear --------------------------------------------------

def _check_psd(C) -> np.ndarray:
    C = np.atleast_2d(np.asarray(C, complex))
    if C.shape[0] != C.shape[1]:
        raise ValueError("C must be square")
    herm = 0.5 * (C + C.conj().T)
    if np.linalg.eigvalsh(herm).min() < -1e-9:
        raise ValueError("C must be positive semidefinite")
    return C


def _real_inner(a: np.ndarray, x):
    """Re{a^H x} for numeric (possibly stacked) or lifted complex ``x``."""
    if hasattr(x, "real_inner"):
        return x.real_inner(a)
    x = np.asarray(x, complex)
    if x.ndim <= 1:
        return float(np.real(np.vdot(a, np.atleast_1d(x))))
    return np.real(x @ np.conj(a))


def f_qol(x, y, C):
    """-x^H C x / y for y > 0; ``x`` may stack points along its leading axes."""
    C = _check_psd(C)
    _check_positive("y", y)
    x = np.asarray(x, complex)
    if x.ndim <= 1:
        x = np.atleast_1d(x)
        return -float(np.real(np.vdot(x, C @ x))) / y
    return -np.real(np.einsum("...i,ij,...j->...", np.conj(x), C, x)) / np.asarray(y, float)


def F_qol(x, y, C, x0, y0):
    """Majorizer (x0^H C x0 / y0^2) y - 2 Re{x0^H C x} / y0, affine in (Re x, Im x, y)."""
    C = _check_psd(C)
    _check_positive("y", y)
    y0 = float(_anchor("y0", y0))
    x0 = np.atleast_1d(np.asarray(x0, complex))
    a0 = C.conj().T @ x0  # Re{x0^H C x} = Re{(C^H x0)^H x}
    q0 = float(np.real(np.vdot(x0, C @ x0)))
    return (q0 / y0**2) * y - 2 * _real_inner(a0, x) / y0


# -- log terms --------------------------------------------------------------

def log_upper_bound(u, u0, offset: float = 0.0):
    """Affine upper bound log(u0 + offset) + (u - u0)/(u0 + offset) of log(u + offset)."""
    base = np.asarray(u0, float) + offset
    if np.any(base <= 0):
        raise ValueError("u0 + offset must be > 0")
    return np.log(base) + (u - u0) / base


def sq_norm_minorant(x, x0):
    """Affine lower bound 2 x0^T x - ||x0||^2 of ||x||^2 (negated ``F_qua`` at c = 0)."""
    x0 = np.asarray(x0, float)
    return -F_qua(x, np.zeros_like(x0), x0)
