import numpy as np
import pytest
from hypothesis import given, strategies as st

from hris_uav import bounds, oracle

pos = st.floats(0.05, 20.0)


# worked examples

def test_pow_examples():
    assert bounds.f_pow(1.0, 2) == -1 and bounds.F_pow(1.0, 2, 1.0) == -1
    assert bounds.F_pow(2.0, 2, 1.0) == -3 and bounds.f_pow(2.0, 2) == -4


def test_pow_negative_exponent_frozen():
    # (c-1) x0^c - c x0^(c-1) x at x=4, x0=2, c=-1, evaluated to 30 digits: 0.0
    assert bounds.F_pow(4.0, -1, 2.0) == pytest.approx(0.0, abs=1e-15)
    assert bounds.f_pow(4.0, -1) == pytest.approx(-0.25, abs=1e-15)


def test_qua_examples():
    c = np.array([1.0, 0.0])
    x0 = np.zeros(2)
    assert bounds.F_qua(x0, c, x0) == pytest.approx(-1.0)
    assert bounds.F_qua(c, c, c) == 0
    assert bounds.F_qua(np.array([2.0, 0.0]), c, x0) == pytest.approx(3.0)
    assert bounds.f_qua(np.array([2.0, 0.0]), c) == pytest.approx(-1.0)


def test_bil_examples():
    assert bounds.F_bil(1.0, 1.0, 1, 1.0, 1.0) == pytest.approx(1.0)
    assert bounds.F_bil(2.0, 3.0, 1, 1.0, 1.0) == pytest.approx(6.5)
    assert bounds.F_bil(1.0, 1.0, -1, 1.0, 1.0) == pytest.approx(-1.0)


def test_qol_examples():
    C = np.array([[2.0, 0.5], [0.5, 1.0]])
    x0 = np.array([1 + 1j, -0.5j])
    assert bounds.F_qol(x0, 2.0, C, x0, 2.0) == pytest.approx(bounds.f_qol(x0, 2.0, C))
    assert bounds.F_qol(np.array([3.0, 1j]), 1.5, C, np.zeros(2), 1.0) == 0
    assert bounds.F_qol(2.0, 4.0, 1.0, 1.0, 1.0) == pytest.approx(0.0)
    assert bounds.f_qol(2.0, 4.0, 1.0) == pytest.approx(-1.0)


def test_log_examples():
    assert bounds.log_upper_bound(1.7, 1.7, 0.3) == pytest.approx(np.log(2.0))
    assert bounds.log_upper_bound(1.0, 0.0, 1.0) == pytest.approx(1.0)
    assert bounds.log_upper_bound(np.e, 1.0, 0.0) == pytest.approx(np.e - 1)


# domain guards

@pytest.mark.parametrize("c", [0.0, 0.5, 1.0])
def test_pow_exponent_range(c):
    with pytest.raises(ValueError):
        bounds.F_pow(1.0, c, 1.0)


def test_nonpositive_inputs_rejected():
    with pytest.raises(ValueError):
        bounds.f_pow(-1.0, 2)
    with pytest.raises(ValueError):
        bounds.F_bil(1.0, 0.0, 1, 1.0, 1.0)
    with pytest.raises(ValueError):
        bounds.F_bil(1.0, 1.0, 2, 1.0, 1.0)
    with pytest.raises(ValueError):
        bounds.f_qol(1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        bounds.log_upper_bound(1.0, -2.0, 1.0)
    with pytest.raises(ValueError):
        bounds.F_qua(np.zeros(2), np.zeros(3), np.zeros(3))


def test_non_psd_rejected():
    with pytest.raises(ValueError):
        bounds.f_qol(np.ones(2), 1.0, np.diag([1.0, -1.0]))


def test_expansion_point_clamped_off_zero():
    assert np.isfinite(bounds.F_pow(1.0, -2, 0.0))


# properties

@given(pos, pos, st.one_of(st.floats(1.05, 4.0), st.floats(-3.0, -0.05)))
def test_pow_majorizes(x, x0, c):
    assert bounds.F_pow(x, c, x0) - bounds.f_pow(x, c) >= -1e-9 * max(1.0, abs(bounds.f_pow(x, c)))


@given(pos, pos, pos, pos, st.sampled_from([1, -1]))
def test_bil_majorizes(x, y, x0, y0, sign):
    assert bounds.F_bil(x, y, sign, x0, y0) >= bounds.f_bil(x, y, sign) - 1e-9 * max(1.0, x * y)


@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6))
def test_qua_majorizes(v):
    x, c, x0 = (np.array(v[i:i + 2]) for i in (0, 2, 4))
    assert bounds.F_qua(x, c, x0) >= bounds.f_qua(x, c) - 1e-9


@given(st.integers(0, 2**31 - 1))
def test_qol_majorizes(seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    C = B @ B.conj().T
    x, x0 = (rng.normal(size=3) + 1j * rng.normal(size=3) for _ in range(2))
    y, y0 = rng.uniform(0.1, 5.0, 2)
    assert bounds.F_qol(x, y, C, x0, y0) >= bounds.f_qol(x, y, C) - 1e-9


@given(st.floats(0, 50), st.floats(0, 50), st.floats(0.01, 5))
def test_log_bound_above(u, u0, off):
    assert bounds.log_upper_bound(u, u0, off) >= np.log(u + off) - 1e-12


@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_sq_norm_minorant(v):
    x, x0 = np.array(v[:2]), np.array(v[2:])
    assert bounds.sq_norm_minorant(x, x0) <= float(x @ x) + 1e-9


@pytest.mark.parametrize("family", oracle.FAMILIES)
def test_gradients_match(family):
    threshold = 1e-4 if family == "qol" else 1e-5
    assert oracle.finite_difference_check(family, n_points=100, seed=1) <= threshold


def test_cvxpy_expressions_accepted():
    import cvxpy as cp

    x = cp.Variable(pos=True)
    y = cp.Variable(pos=True)
    expr = bounds.F_bil(x, y, 1, 1.0, 2.0)
    assert expr.is_convex()
    assert bounds.F_bil(x, y, -1, 1.0, 2.0).is_convex()
    assert bounds.F_pow(x, 2, 1.5).is_affine()
