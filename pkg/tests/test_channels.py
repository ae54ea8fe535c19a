import numpy as np
import pytest
from hypothesis import given, strategies as st

from hris_uav.channels import (CsiErrorSpec, effective_channel, inject_csi_error, large_scale_gain,
                               sample_channels, upa_response)
from hris_uav.config import SystemConfig

from conftest import centre, small_config


# large-scale gain

def test_gain_at_reference_distance():
    assert large_scale_gain([0, 0, 0], [1, 0, 0], 3.2, 1e-3) == pytest.approx(1e-3, rel=1e-12)


def test_gain_square_law():
    assert large_scale_gain([0, 0, 0], [100, 0, 0], 2.0, 1e-3) == pytest.approx(1e-7, rel=1e-12)


def test_gain_frozen_value():
    # 1e-3 * 100^-3.2 from a 30-digit evaluation
    assert large_scale_gain([0, 0, 0], [0, 100, 0], 3.2, 1e-3) == pytest.approx(3.98107170553497e-10, rel=1e-12)


def test_gain_rejects_coincident_points():
    with pytest.raises(ValueError):
        large_scale_gain([1, 2, 3], [1, 2, 3], 2.0, 1e-3)


@given(st.floats(1.0, 500.0), st.floats(0.01, 100.0), st.floats(0.5, 3.9))
def test_gain_decreases_with_distance(d, extra, eps):
    near = large_scale_gain([0, 0, 0], [d, 0, 0], eps, 1e-3)
    far = large_scale_gain([0, 0, 0], [d + extra, 0, 0], eps, 1e-3)
    assert far < near


# UPA response

def test_upa_first_element_is_one():
    assert upa_response(0, 0.7, 1.3, 4) == 1 + 0j


def test_upa_adjacent_column():
    assert upa_response(1, np.pi / 2, 0.0, 4) == pytest.approx(-1, abs=1e-12)


def test_upa_next_row():
    # n = Nx lands in row 1, column 0: f = sin(pi/2) sin(pi/2) = 1
    Nx = 5
    direct = np.exp(1j * 2 * np.pi * 0.5 * (1 * np.sin(np.pi / 2) * np.sin(np.pi / 2)))
    assert upa_response(Nx, np.pi / 2, np.pi / 2, Nx) == pytest.approx(direct, abs=1e-12)
    assert upa_response(Nx, np.pi / 2, np.pi / 2, Nx) == pytest.approx(-1, abs=1e-12)


@given(st.integers(0, 63), st.floats(0, np.pi), st.floats(-np.pi, np.pi))
def test_upa_unit_modulus(n, azi, ele):
    assert abs(upa_response(n, azi, ele, 8)) == pytest.approx(1.0, abs=1e-12)


# sampling

def test_sampling_is_deterministic():
    cfg = small_config()
    a = sample_channels(cfg, centre(cfg))
    b = sample_channels(cfg, centre(cfg))
    for name in ("g0", "G1", "g2"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_los_entries_unit_modulus():
    cfg = small_config()
    ch = sample_channels(cfg, centre(cfg))
    assert np.allclose(np.abs(ch.G1), 1.0, atol=1e-12)


def test_rician_limit_is_los():
    cfg = small_config(kappa=1e12)
    ch = sample_channels(cfg, centre(cfg))
    inf = sample_channels(cfg.with_(kappa=float("inf")), centre(cfg))
    assert np.allclose(ch.g2, inf.g2, rtol=1e-5, atol=1e-5)


def test_rician_unit_average_power():
    cfg = SystemConfig(K=1, Nx=400, Ny=250, Na=0, T=1, kappa=10.0, seed=1)
    ch = sample_channels(cfg, centre(cfg))
    assert ch.g2.size == 10**5
    assert 0.98 <= np.mean(np.abs(ch.g2) ** 2) <= 1.02


def test_direct_fading_unit_power():
    cfg = SystemConfig(K=50, Nt=40, Nx=1, Ny=1, Na=0, T=50, seed=2)
    ch = sample_channels(cfg, np.tile(centre(cfg), (cfg.T, 1)))
    assert ch.g0.size == 10**5
    assert 0.98 <= np.mean(np.abs(ch.g0) ** 2) <= 1.02


def test_static_draw_is_first_mobile_slot():
    cfg = small_config()
    track = np.tile(centre(cfg), (cfg.T, 1))
    assert np.array_equal(sample_channels(cfg, centre(cfg)).g0[0], sample_channels(cfg, track).g0[0])


def test_wrong_track_length():
    cfg = small_config(T=4)
    with pytest.raises(ValueError):
        sample_channels(cfg, np.zeros((3, 3)))


# effective channel

def test_zero_alpha_gives_direct(static_setup):
    cfg, ch = static_setup
    for k in range(cfg.K):
        assert np.allclose(effective_channel(ch, np.zeros(cfg.N), k), ch.direct_rows(ch.track[0])[k])


def test_single_element_composition():
    cfg = SystemConfig(K=1, Nt=1, Nx=1, Ny=1, Na=0, T=1)
    ch = sample_channels(cfg, centre(cfg))
    h0 = ch.direct_rows(ch.track[0])[0, 0]
    refl = ch.ris_rows()[0, 0] * ch.uav_ris(ch.track[0])[0, 0]
    theta = 0.9
    got = effective_channel(ch, np.array([np.exp(1j * theta)]), 0)[0]
    assert got == pytest.approx(h0 + np.exp(1j * theta) * refl, abs=1e-20)


def _naive_effective(ch, alpha, k, v):
    cfg = ch.cfg
    h0 = ch.direct_rows(v)[k]
    h2 = ch.ris_rows()[k]
    H1 = ch.uav_ris(v)
    out = []
    for m in range(cfg.Nt):
        acc = h0[m]
        for n in range(cfg.N):
            acc += h2[n] * alpha[n] * H1[n, m]
        out.append(acc)
    return np.array(out)


def test_effective_matches_triple_loop(static_setup):
    cfg, ch = static_setup
    rng = np.random.default_rng(0)
    alpha = rng.normal(size=cfg.N) + 1j * rng.normal(size=cfg.N)
    v = np.array([30.0, 140.0, cfg.z0])
    for k in range(cfg.K):
        fast = ch.effective_rows(alpha, v)[k]
        slow = _naive_effective(ch, alpha, k, v)
        assert np.max(np.abs(fast - slow)) <= 1e-12 * max(1.0, np.max(np.abs(slow)))


@given(st.integers(0, 2**31 - 1))
def test_effective_is_linear_in_alpha(seed):
    cfg = small_config()
    ch = sample_channels(cfg, centre(cfg))
    rng = np.random.default_rng(seed)
    a1, a2 = (rng.normal(size=cfg.N) + 1j * rng.normal(size=cfg.N) for _ in range(2))
    v = ch.track[0]
    h = lambda a: ch.effective_rows(a, v)
    zero = h(np.zeros(cfg.N))
    lhs = h(a1 + a2) - zero
    rhs = (h(a1) - zero) + (h(a2) - zero)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1e-30, np.max(np.abs(lhs))) + 1e-25


# CSI error

def test_zero_error_is_identity(static_setup):
    _, ch = static_setup
    est = inject_csi_error(ch, CsiErrorSpec.uniform(0.0))
    assert np.array_equal(est.g0, ch.g0) and np.array_equal(est.g2, ch.g2)


def test_error_variance_after_scaling():
    cfg = SystemConfig(K=1, Nx=400, Ny=250, Na=0, T=1, seed=6)
    ch = sample_channels(cfg, centre(cfg))
    est = inject_csi_error(ch, CsiErrorSpec.uniform(0.1))
    beta = cfg.zeta0 * np.linalg.norm(cfg.ris - cfg.ues[0]) ** (-cfg.eps2)
    diff = (est.ris_rows() - ch.ris_rows()) / np.sqrt(beta)
    assert 0.009 <= np.var(diff) <= 0.011


def test_error_is_deterministic(static_setup):
    _, ch = static_setup
    a = inject_csi_error(ch, CsiErrorSpec.uniform(0.2))
    b = inject_csi_error(ch, CsiErrorSpec.uniform(0.2))
    assert np.array_equal(a.G1, b.G1)


def test_negative_error_rejected():
    with pytest.raises(ValueError):
        CsiErrorSpec(eps0=-0.1)
