"""Acceptance criteria, one test each; every test records a PASS/FAIL line in the summary."""

import functools
import json
import time

import numpy as np
import pytest

from hris_uav import verify
from hris_uav.channels import sample_channels
from hris_uav.cli import main
from hris_uav.config import SystemConfig, config_to_dict, dbm_to_watt
from hris_uav.evaluation import mobile_residuals, static_residuals
from hris_uav.mobile import circular_track
from hris_uav.sweep import apply_scheme, run_single

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow

DESK = SystemConfig(K=2, Nt=2, Nx=4, Ny=4, Na=4, T=20, pt_max=dbm_to_watt(20), pris_max=dbm_to_watt(0))
FULL = SystemConfig(K=4, Nt=2, Nx=8, Ny=4, Na=2, T=50, D=200.0, pt_max=dbm_to_watt(20),
                    pris_max=dbm_to_watt(0))
CSI = SystemConfig(K=4, Nt=2, Nx=8, Ny=4, Na=4, T=50, D=50.0, pt_max=dbm_to_watt(20), pris_max=dbm_to_watt(0))


def record(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@functools.lru_cache(maxsize=None)
def run(cfg: SystemConfig, mode: str, csi_eps: float = 0.0):
    return run_single(cfg, mode, csi_eps)


def test_c01_bound_families():
    start = time.perf_counter()
    checks = verify.bounds_suite(n_pairs=10_000)
    elapsed = time.perf_counter() - start
    bad = [c.name for c in checks if not c.passed]
    record(1, not bad and elapsed < 10.0,
           f"{len(checks)} checks over {len(verify.oracle.FAMILIES)} families, failed={bad}, {elapsed:.1f}s")


def test_c02_monotone_convergence():
    start = time.perf_counter()
    worst_drop, most_iters = 0.0, 0
    for seed in range(20):
        for mode in ("static", "mobile"):
            res = run(DESK.with_(seed=seed), mode)
            taus = np.array(res.trace.taus())
            worst_drop = min(worst_drop, float(np.min(np.diff(taus), initial=0.0)))
            most_iters = max(most_iters, res.iterations)
    elapsed = time.perf_counter() - start
    record(2, worst_drop >= -1e-6 and most_iters <= 50 and elapsed < 600,
           f"worst tau step {worst_drop:.2e}, most iterations {most_iters}, {elapsed:.0f}s")


def test_c03_convergence_speed():
    start = time.perf_counter()
    static = run(FULL, "static")
    mobile = run(FULL, "mobile")
    elapsed = time.perf_counter() - start
    converged = static.stop_reason == mobile.stop_reason == "converged"
    record(3, converged and static.iterations <= 20 and mobile.iterations <= 15 and elapsed < 900,
           f"seed {FULL.seed}: static {static.iterations} it ({static.stop_reason}, tau {static.min_rate:.3f}), "
           f"mobile {mobile.iterations} it ({mobile.stop_reason}, tau {mobile.min_rate:.3f}), {elapsed:.0f}s")


def test_c04_closed_forms():
    start = time.perf_counter()
    checks = verify.phase_suite(n_slots=50) + verify.power_suite(n_slots=50)
    elapsed = time.perf_counter() - start
    detail = ", ".join(f"{c.name}={c.value:.2e}" for c in checks)
    record(4, all(c.passed for c in checks) and elapsed < 300, f"{detail}, {elapsed:.0f}s")


def test_c05_tiny_ris():
    start = time.perf_counter()
    (check,) = verify.tiny_ris_suite(seeds=range(20), points=360)
    elapsed = time.perf_counter() - start
    record(5, check.passed and elapsed < 300, f"worst ratio to grid {check.value:.5f}, {elapsed:.0f}s")


def test_c06_feasibility():
    cases = [(DESK.with_(seed=s), m) for s in range(20) for m in ("static", "mobile")]
    cases += [(FULL, "static"), (FULL, "mobile")]
    worst, where = 0.0, ""
    for cfg, mode in cases:
        st = run(cfg, mode).state
        if mode == "static":
            ch = sample_channels(cfg, [cfg.D / 2, cfg.D / 2, cfg.z0])
            res = static_residuals(ch, st.W, st.alpha, st.v)
        else:
            ch = sample_channels(cfg, circular_track(cfg))
            res = mobile_residuals(ch, st.w, st.alpha, st.track, st.b)
        name, value = max(res.items(), key=lambda kv: kv[1])
        if value >= worst:
            worst, where = value, f"{name}, {mode} seed {cfg.seed}"
    record(6, worst <= 1e-6, f"worst relative residual {worst:.2e} ({where}) over {len(cases)} runs")


def test_c07_scheme_ordering():
    start = time.perf_counter()
    means = {}
    for scheme in ("noRis", "passive", "hybrid"):
        means[scheme] = float(np.mean([run(apply_scheme(DESK.with_(seed=s), scheme), "mobile").min_rate
                                       for s in range(10)]))
    elapsed = time.perf_counter() - start
    gain = means["hybrid"] / means["noRis"] - 1
    ok = means["hybrid"] > means["passive"] > means["noRis"] and gain >= 0.25 and elapsed < 1800
    record(7, ok, ", ".join(f"{k} {v:.4f}" for k, v in means.items()) + f", hybrid gain {gain:.1%}, {elapsed:.0f}s")


def test_c08_mobile_beats_static():
    wins, pairs = 0, []
    for seed in range(10):
        s = run(FULL.with_(seed=seed), "static").min_rate
        m = run(FULL.with_(seed=seed), "mobile").min_rate
        wins += m > s
        pairs.append((s, m))
    mean_s, mean_m = np.mean(pairs, axis=0)
    record(8, wins >= 9, f"mobile wins {wins}/10 at the full-size configuration, "
                         f"mean static {mean_s:.3f}, mean mobile {mean_m:.3f}")


def test_c09_csi_degradation():
    start = time.perf_counter()
    levels = (0.0, 0.1, 0.4)
    hybrid = [float(np.mean([run(CSI.with_(seed=s), "mobile", e).min_rate for s in range(5)])) for e in levels]
    passive = float(np.mean([run(apply_scheme(CSI.with_(seed=s), "passive"), "mobile").min_rate
                             for s in range(5)]))
    elapsed = time.perf_counter() - start
    ok = hybrid[0] >= hybrid[1] >= hybrid[2] > passive and elapsed < 1200
    record(9, ok, "hybrid " + ", ".join(f"eps={e}: {h:.4f}" for e, h in zip(levels, hybrid))
           + f"; passive eps=0: {passive:.4f}, {elapsed:.0f}s")


def test_c10_determinism(tmp_path):
    cfg = tmp_path / "desk.json"
    cfg.write_text(json.dumps(config_to_dict(DESK.with_(seed=3))))
    files = {"run-static": ("trace.csv", "summary.json", "ris_profile.csv"),
             "run-mobile": ("trace.csv", "summary.json", "trajectory.csv", "schedule.csv", "ris_profile.csv")}
    same = True
    for cmd, names in files.items():
        for rep in ("a", "b"):
            assert main([cmd, "--config", str(cfg), "--out", str(tmp_path / cmd / rep), "--csi-eps", "0.1"]) == 0
        same &= all((tmp_path / cmd / "a" / n).read_bytes() == (tmp_path / cmd / "b" / n).read_bytes()
                    for n in names)
    record(10, same, "run-static and run-mobile artifacts byte-identical across reruns")
