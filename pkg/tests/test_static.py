import dataclasses

import numpy as np
import pytest

from hris_uav import oracle, static
from hris_uav.channels import sample_channels
from hris_uav.config import SystemConfig
from hris_uav.conic import Status
from hris_uav.evaluation import ris_tx_power_static, static_residuals

from conftest import centre, small_config


def _setup(**kw):
    cfg = small_config(**kw)
    ch = sample_channels(cfg, centre(cfg))
    return cfg, ch, static.initialize_static(cfg, ch)


# initialization

def test_init_single_ue_full_power():
    cfg, ch, s = _setup(K=1)
    assert np.sum(np.abs(s.W) ** 2) == pytest.approx(cfg.pt_max, rel=1e-12)
    assert np.allclose(s.v, centre(cfg))


def test_init_passive_unit_amplitudes():
    cfg, ch, s = _setup(Na=0)
    assert np.allclose(np.abs(s.alpha), 1.0)


@pytest.mark.parametrize("pris", [1e-12, 1e-9, 1e-3])
def test_init_respects_ris_budget(pris):
    cfg, ch, s = _setup(pris_max=pris, Na=2)
    assert ris_tx_power_static(ch, s.alpha, s.W, s.v) <= cfg.pris_max + 1e-9
    assert max(static_residuals(ch, s.W, s.alpha, s.v).values()) <= 1e-12


# beamforming block

def test_beamforming_single_ue_is_matched_filter():
    cfg = SystemConfig(K=1, Nt=3, Nx=0, Ny=1, Na=0, T=1, seed=2)
    ch = sample_channels(cfg, centre(cfg))
    s = static.initialize_static(cfg, ch)
    s.W = np.array([[1.0, 0.0, 0.0]]) * np.sqrt(cfg.pt_max) * 0.5
    s.tau = static.objective(ch, s)
    for _ in range(3):
        W, status, _ = static.solve_beamforming(ch, s)
        s.W = W
    h = ch.direct_rows(s.v)[0]
    w = s.W[0]
    assert status is Status.OPTIMAL
    assert np.sum(np.abs(w) ** 2) == pytest.approx(cfg.pt_max, rel=1e-5)
    assert abs(np.vdot(h.conj(), w)) / (np.linalg.norm(h) * np.linalg.norm(w)) == pytest.approx(1.0, abs=1e-6)


def test_beamforming_refeed_does_not_decrease():
    cfg, ch, s = _setup()
    for _ in range(2):
        W, status, _ = static.solve_beamforming(ch, s)
        cand = s.copy()
        cand.W = W
        cand = static.repair(ch, cand)
        cand.tau = static.objective(ch, cand)
        assert cand.tau >= s.tau - 1e-6
        s = cand


def _symmetric_pair():
    cfg = SystemConfig(K=2, Nt=2, Nx=0, Ny=1, Na=0, T=1, seed=4,
                       ue_positions=((60.0, 100.0, 0.0), (140.0, 100.0, 0.0)))
    ch = sample_channels(cfg, centre(cfg))
    g0 = ch.g0.copy()
    g0[0, 1] = g0[0, 0][::-1]  # UE 2 sees UE 1's channel with the antennas swapped
    return cfg, dataclasses.replace(ch, g0=g0)


def test_beamforming_symmetric_users_get_equal_power():
    cfg, ch = _symmetric_pair()
    s = static.initialize_static(cfg, ch)
    W, status, _ = static.solve_beamforming(ch, s)
    assert status is Status.OPTIMAL
    n = np.linalg.norm(W, axis=1)
    assert abs(n[0] - n[1]) <= 1e-4

    # relabel the users: the solution relabels with them
    swapped_cfg = cfg.with_(ue_positions=tuple(map(tuple, cfg.ues[::-1])))
    swapped = dataclasses.replace(ch, cfg=swapped_cfg, g0=ch.g0[:, ::-1])
    s2 = static.initialize_static(swapped_cfg, swapped)
    W2, _, _ = static.solve_beamforming(swapped, s2)
    assert np.allclose(np.linalg.norm(W2, axis=1)[::-1], n, atol=1e-4)


# location block

def _single_ue_no_ris():
    cfg = SystemConfig(K=1, Nt=2, Nx=0, Ny=1, Na=0, T=1, eps0=2.0, seed=5)
    ch = sample_channels(cfg, centre(cfg))
    return cfg, ch, static.initialize_static(cfg, ch)


def _iterate_location(ch, s, iters=60):
    for _ in range(iters):
        v, status, _, _ = static.solve_location(ch, s)
        assert status is Status.OPTIMAL
        step = np.linalg.norm(np.asarray(v) - s.v)
        s.v = np.asarray(v)
        s.tau = static.objective(ch, s)
        if step < 1e-4:
            break
    return s


def test_location_moves_above_single_ue():
    cfg, ch, s = _single_ue_no_ris()
    s = _iterate_location(ch, s)
    grid_v, _ = oracle.grid_location_search(ch, s.W, s.alpha, 0.5)
    assert np.linalg.norm(s.v[:2] - cfg.ues[0, :2]) <= 1.0
    assert np.linalg.norm(s.v[:2] - grid_v[:2]) <= 1.0
    assert s.v[2] == cfg.z0


def test_location_fixed_point():
    cfg, ch, s = _single_ue_no_ris()
    s = _iterate_location(ch, s)
    v, _, _, _ = static.solve_location(ch, s)
    assert np.linalg.norm(np.asarray(v) - s.v) <= 1e-3


def test_location_handles_both_signs_of_cross_term():
    cfg = SystemConfig(K=3, Nt=2, Nx=4, Ny=1, Na=1, T=1, seed=0)
    ch = sample_channels(cfg, centre(cfg))
    s = static.initialize_static(cfg, ch)
    _, _, c2 = static._distance_coefficients(ch, s)
    assert np.any(c2 > 0) and np.any(c2 < 0)
    v, status, _, slacks = static.solve_location(ch, s)
    assert status is Status.OPTIMAL and slacks


def test_location_near_grid_optimum():
    cfg = SystemConfig(K=2, Nt=2, Nx=2, Ny=1, Na=0, T=1, seed=8)
    ch = sample_channels(cfg, centre(cfg))
    s = _iterate_location(ch, static.initialize_static(cfg, ch))
    _, best = oracle.grid_location_search(ch, s.W, s.alpha, 1.0)
    # SCA is local; 0.95 of the grid optimum was the agreed bound
    assert s.tau >= 0.95 * best


# RIS block

def test_ris_single_element_coherent_phase():
    cfg = SystemConfig(K=1, Nt=1, Nx=1, Ny=1, Na=0, T=1, seed=3)
    ch = sample_channels(cfg, centre(cfg))
    s = static.initialize_static(cfg, ch)
    for _ in range(50):
        alpha, status, _ = static.solve_ris(ch, s)
        old = s.alpha
        s.alpha = np.asarray(alpha)
        if abs(np.angle(s.alpha[0] / old[0])) < 1e-9:
            break
    h0 = (ch.direct_rows(s.v) @ s.W[0])[0]
    refl = (ch.ris_rows()[0, 0] * ch.uav_ris(s.v)[0] @ s.W[0])
    best, _ = oracle.coherent_phase(h0, refl)
    expected = np.angle(h0) - np.angle(refl)
    assert abs(np.angle(np.exp(1j * (np.angle(s.alpha[0]) - expected)))) <= 1e-3
    assert abs(np.angle(np.exp(1j * (best - expected)))) <= 1e-3


def test_ris_irrelevant_without_reflection():
    cfg, ch, s = _setup(Na=0)
    ch = dataclasses.replace(ch, g2=np.zeros_like(ch.g2))
    s.tau = static.objective(ch, s)
    alpha, status, _ = static.solve_ris(ch, s)
    cand = s.copy()
    cand.alpha = np.asarray(alpha)
    assert static.objective(ch, cand) == pytest.approx(s.tau, abs=1e-9)


def test_ris_refeed_does_not_decrease():
    cfg, ch, s = _setup()
    for _ in range(2):
        alpha, status, _ = static.solve_ris(ch, s)
        cand = s.copy()
        cand.alpha = np.asarray(alpha)
        cand = static.repair(ch, cand)
        cand.tau = static.objective(ch, cand)
        assert cand.tau >= s.tau - 1e-6
        s = cand


# full loop

def test_run_static_monotone_feasible_and_reproducible():
    cfg = small_config(T=1, max_iters=6)
    ch = sample_channels(cfg, centre(cfg))
    s1, t1 = static.run_static(cfg, ch)
    s2, t2 = static.run_static(cfg, ch)
    assert t1.is_monotone(1e-6)
    assert t1.to_csv() == t2.to_csv()
    assert t1.max_residual() <= 1e-6
    assert s1.tau == pytest.approx(static.objective(ch, s1), abs=1e-6)
    assert t1.stop_reason in ("converged", "iteration cap")


def test_run_static_bisection_mode():
    from hris_uav.conic import SolverSettings

    cfg = small_config(T=1, max_iters=3)
    ch = sample_channels(cfg, centre(cfg))
    settings = static.OptimizerSettings(solver=SolverSettings(mode="bisection"))
    s, trace = static.run_static(cfg, ch, settings)
    assert trace.is_monotone(1e-6) and s.tau > trace.taus()[0]
