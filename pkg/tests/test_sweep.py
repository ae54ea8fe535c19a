import json
import math

import pytest

from hris_uav.config import ConfigError
from hris_uav.sweep import (SCHEMES, aggregate, apply_scheme, load_spec, run_single, run_sweep,
                            spec_from_dict, gnuplot_script)

from conftest import small_config

TINY = {"K": 2, "Nt": 1, "Nx": 2, "Ny": 1, "Na": 1, "T": 3, "maxIters": 2}


def _spec(**kw):
    data = {"base": TINY, "mode": "static", "axis": {"name": "ptMaxDbm", "values": [20]},
            "schemes": list(SCHEMES), "seeds": [0, 1]}
    data.update(kw)
    return spec_from_dict(data)


def test_cardinality():
    spec = _spec(seeds=[0, 1, 2])
    assert len(spec.cells()) == 3 * 3
    assert [c[0] for c in spec.cells()] == list(range(9))


def test_empty_seeds_rejected():
    with pytest.raises(ConfigError, match="seeds"):
        _spec(seeds=[])


@pytest.mark.parametrize("bad", [{"schemes": ["activeOnly"]}, {"axis": {"name": "T", "values": [1]}},
                                 {"axis": {"name": "N", "values": []}}, {"mode": "both"}])
def test_invalid_specs(bad):
    with pytest.raises(ConfigError):
        _spec(**bad)


def test_aggregate_mean():
    rows = [{"axis": "N", "value": 16, "scheme": "hybrid", "min_rate": 0.2},
            {"axis": "N", "value": 16, "scheme": "hybrid", "min_rate": 0.4},
            {"axis": "N", "value": 16, "scheme": "noRis", "min_rate": float("nan")}]
    out = aggregate(rows)
    assert out[0]["mean"] == pytest.approx(0.3) and out[0]["n"] == 2
    assert out[0]["std"] == pytest.approx(0.1)
    assert out[1]["n"] == 0 and math.isnan(out[1]["mean"])


def test_schemes():
    cfg = small_config()
    assert apply_scheme(cfg, "noRis").N == 0
    p = apply_scheme(cfg, "passive")
    assert p.N == cfg.N and p.Na == 0
    assert apply_scheme(cfg, "hybrid") == cfg
    with pytest.raises(ConfigError):
        apply_scheme(cfg, "other")


def test_axis_values_applied():
    spec = _spec(axis={"name": "N", "values": [6]})
    cfg, eps = spec.cell_config(6, "hybrid", 4)
    assert cfg.N == 6 and cfg.seed == 4 and eps == 0.0
    spec = _spec(axis={"name": "epsilon", "values": [0.1]})
    assert spec.cell_config(0.1, "passive", 0)[1] == 0.1


def test_sweep_outputs_deterministic(tmp_path):
    spec = _spec()
    rows = run_sweep(spec, tmp_path / "a")
    run_sweep(spec, tmp_path / "b", jobs=2)
    assert len(rows) == 6 and all(r["status"] != "" and not r["status"].startswith("error") for r in rows)
    for name in ("results.csv", "summary.csv", "experiment.json", "cells/cell_00003.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_schemes_share_channels():
    # common random numbers: the direct channel is the same in every scheme
    from hris_uav.channels import sample_channels
    cfg = small_config()
    a = sample_channels(cfg, [100.0, 100.0, 100.0])
    b = sample_channels(apply_scheme(cfg, "noRis"), [100.0, 100.0, 100.0])
    assert (a.g0 == b.g0).all()


def test_load_spec_relative_base(tmp_path):
    (tmp_path / "base.json").write_text(json.dumps(TINY))
    (tmp_path / "exp.json").write_text(json.dumps({"baseConfig": "base.json", "mode": "mobile",
                                                   "axis": {"name": "Na", "values": [0, 1]},
                                                   "seeds": [0]}))
    spec = load_spec(tmp_path / "exp.json")
    assert spec.base.K == 2 and len(spec.cells()) == 6


def test_run_single_modes():
    cfg = small_config(T=3, max_iters=2)
    static = run_single(cfg, "static")
    mobile = run_single(cfg, "mobile")
    assert static.rates.shape == (cfg.K,) and static.min_rate == static.rates.min()
    assert mobile.extras["relaxed_min_rate"] >= mobile.min_rate - 1e-12
    with pytest.raises(ConfigError):
        run_single(cfg, "hover")


def test_gnuplot_lists_schemes():
    text = gnuplot_script("s.csv", "N")
    assert all(f"'{s}'" in text for s in SCHEMES)
