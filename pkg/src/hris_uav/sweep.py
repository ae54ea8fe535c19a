"""Single runs and seeded parameter sweeps.

A run samples true channels, optionally corrupts them into estimates,
optimizes on the estimates and reports rates on the truth.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .channels import CsiErrorSpec, inject_csi_error, sample_channels
from .config import ConfigError, SystemConfig, config_from_dict, config_to_dict, dbm_to_watt, load_config
from .conic import SolverSettings
from .evaluation import Schedule, average_rate_mobile, rates_mobile_per_slot, rates_static
from .mobile import circular_track, initialize_mobile, run_mobile
from .static import OptimizerSettings, initialize_static, run_static

SCHEMES = ("noRis", "passive", "hybrid")
AXES = ("ptMaxDbm", "prisMaxDbm", "N", "Na", "epsilon")


@dataclass
class RunResult:
    mode: str
    min_rate: float  # on true channels (rounded schedule in mobile mode)
    rates: np.ndarray
    iterations: int
    stop_reason: str
    state: Any
    trace: Any
    extras: dict = field(default_factory=dict)


def apply_scheme(cfg: SystemConfig, scheme: str) -> SystemConfig:
    """noRis removes the surface, passive drops the active set, hybrid keeps it."""
    if scheme == "noRis":
        return cfg.with_(Nx=0, Na=0, active_set=None)
    if scheme == "passive":
        return cfg.with_(Na=0, active_set=None)
    if scheme == "hybrid":
        return cfg
    raise ConfigError(f"scheme: unknown scheme {scheme!r}")


def run_single(cfg: SystemConfig, mode: str, csi_eps: float = 0.0,
               settings: OptimizerSettings | None = None) -> RunResult:
    settings = settings or OptimizerSettings()
    if mode == "static":
        truth = sample_channels(cfg, [cfg.D / 2, cfg.D / 2, cfg.z0])
        est = inject_csi_error(truth, CsiErrorSpec.uniform(csi_eps))
        state, trace = run_static(cfg, est, settings, initialize_static(cfg, est))
        rates = rates_static(truth, state.W, state.alpha, state.v)
        return RunResult(mode, float(rates.min()), rates, trace.iterations, trace.stop_reason,
                         state, trace)
    if mode == "mobile":
        track = circular_track(cfg)
        truth = sample_channels(cfg, track)
        est = inject_csi_error(truth, CsiErrorSpec.uniform(csi_eps))
        state, trace = run_mobile(cfg, est, settings, initialize_mobile(cfg, est, track))
        per_slot = rates_mobile_per_slot(truth, state.w, state.alpha, state.track)
        rates = average_rate_mobile(Schedule(state.b).rounded, per_slot)
        relaxed = average_rate_mobile(state.b, per_slot)
        return RunResult(mode, float(rates.min()), rates, trace.iterations, trace.stop_reason,
                         state, trace, {"relaxed_min_rate": float(relaxed.min())})
    raise ConfigError(f"mode: expected 'static' or 'mobile', got {mode!r}")


# -- experiment specs -------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    base: SystemConfig
    mode: str
    axis: str
    values: tuple
    schemes: tuple[str, ...]
    seeds: tuple[int, ...]
    csi_eps: float = 0.0
    max_iters: int | None = None
    eps_conv: float | None = None
    solver_mode: str = "expcone"

    def __post_init__(self):
        if self.mode not in ("static", "mobile"):
            raise ConfigError("mode: expected 'static' or 'mobile'")
        if self.axis not in AXES:
            raise ConfigError(f"axis.name: expected one of {AXES}")
        if not self.values:
            raise ConfigError("axis.values: must be nonempty")
        if not self.seeds:
            raise ConfigError("seeds: must be nonempty")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ConfigError(f"schemes: expected a nonempty subset of {SCHEMES}")

    def cells(self) -> list[tuple[int, Any, str, int]]:
        """(cell index, axis value, scheme, seed) in a fixed order."""
        out = []
        for value in self.values:
            for scheme in self.schemes:
                for seed in self.seeds:
                    out.append((len(out), value, scheme, seed))
        return out

    def cell_config(self, value, scheme: str, seed: int) -> tuple[SystemConfig, float]:
        cfg = self.base.with_(seed=int(seed))
        eps = self.csi_eps
        if self.axis == "ptMaxDbm":
            cfg = cfg.with_(pt_max=dbm_to_watt(float(value)))
        elif self.axis == "prisMaxDbm":
            cfg = cfg.with_(pris_max=dbm_to_watt(float(value)))
        elif self.axis == "N":
            n = int(value)
            if n % cfg.Ny:
                raise ConfigError(f"axis.values: N={n} is not a multiple of Ny={cfg.Ny}")
            cfg = cfg.with_(Nx=n // cfg.Ny, active_set=None)
        elif self.axis == "Na":
            cfg = cfg.with_(Na=int(value), active_set=None)
        elif self.axis == "epsilon":
            eps = float(value)
        return apply_scheme(cfg, scheme), eps


def spec_from_dict(data: dict, base_dir: Path | None = None) -> ExperimentSpec:
    data = {k: v for k, v in data.items() if not k.startswith("_")}
    if "baseConfig" in data:
        path = Path(data["baseConfig"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        base = load_config(path)
    else:
        base = config_from_dict(data.get("base", {}))
    axis = data.get("axis") or {}
    return ExperimentSpec(
        base=base,
        mode=data.get("mode", "mobile"),
        axis=axis.get("name", ""),
        values=tuple(axis.get("values", ())),
        schemes=tuple(data.get("schemes", SCHEMES)),
        seeds=tuple(int(s) for s in data.get("seeds", ())),
        csi_eps=float(data.get("csiEps", 0.0)),
        max_iters=data.get("maxIters"),
        eps_conv=data.get("epsConv"),
        solver_mode=data.get("solverMode", "expcone"),
    )


def load_spec(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return spec_from_dict(data, path.parent)


# -- execution --------------------------------------------------------------

def _run_cell(spec: ExperimentSpec, cell) -> dict:
    index, value, scheme, seed = cell
    row = {"cell": index, "axis": spec.axis, "value": value, "scheme": scheme, "seed": seed}
    try:
        cfg, eps = spec.cell_config(value, scheme, seed)
        settings = OptimizerSettings(solver=SolverSettings(mode=spec.solver_mode),
                                     max_iters=spec.max_iters, eps_conv=spec.eps_conv)
        res = run_single(cfg, spec.mode, eps, settings)
        row.update(min_rate=res.min_rate, iterations=res.iterations, status=res.stop_reason)
    except Exception as exc:  # a failed cell is recorded and the sweep goes on
        row.update(min_rate=float("nan"), iterations=0, status=f"error: {type(exc).__name__}: {exc}")
    return row


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


RESULT_COLUMNS = ("cell", "axis", "value", "scheme", "seed", "min_rate", "iterations", "status")
SUMMARY_COLUMNS = ("axis", "value", "scheme", "n", "mean", "std")


def aggregate(rows: list[dict]) -> list[dict]:
    """Mean and (population) std of min-rate per (value, scheme), in first-seen order."""
    groups: dict[tuple, list[float]] = {}
    meta: dict[tuple, dict] = {}
    for r in rows:
        key = (json.dumps(r["value"]), r["scheme"])
        groups.setdefault(key, [])
        meta.setdefault(key, r)
        if np.isfinite(r["min_rate"]):
            groups[key].append(float(r["min_rate"]))
    out = []
    for key, vals in groups.items():
        m = meta[key]
        out.append({"axis": m["axis"], "value": m["value"], "scheme": m["scheme"], "n": len(vals),
                    "mean": float(np.mean(vals)) if vals else float("nan"),
                    "std": float(np.std(vals)) if vals else float("nan")})
    return out


def _csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([f"{r[c]:.12e}" if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def run_sweep(spec: ExperimentSpec, out_dir: str | Path | None = None, jobs: int = 1) -> list[dict]:
    cells = spec.cells()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell, [spec] * len(cells), cells))
    else:
        rows = [_run_cell(spec, c) for c in cells]
    if out_dir is not None:
        out = Path(out_dir)
        (out / "cells").mkdir(parents=True, exist_ok=True)
        for r in rows:
            _write_atomic(out / "cells" / f"cell_{r['cell']:05d}.json", json.dumps(r, sort_keys=True) + "\n")
        _write_atomic(out / "results.csv", _csv(rows, RESULT_COLUMNS))
        _write_atomic(out / "summary.csv", _csv(aggregate(rows), SUMMARY_COLUMNS))
        _write_atomic(out / "experiment.json", json.dumps({
            "base": config_to_dict(spec.base), "mode": spec.mode,
            "axis": {"name": spec.axis, "values": list(spec.values)},
            "schemes": list(spec.schemes), "seeds": list(spec.seeds), "csiEps": spec.csi_eps,
        }, sort_keys=True, indent=1) + "\n")
    return rows


def gnuplot_script(summary_csv: str, axis: str) -> str:
    """Plot mean min-rate against the sweep axis, one line per scheme."""
    lines = [
        "set datafile separator ','",
        f"set xlabel '{axis}'",
        "set ylabel 'min rate (nats/s/Hz)'",
        "set key left top",
        "plot \\",
    ]
    plots = [f"  '{summary_csv}' every ::1 using 2:(strcol(3) eq '{s}' ? $5 : 1/0) with linespoints title '{s}'"
             for s in SCHEMES]
    lines.append(", \\\n".join(plots))
    return "\n".join(lines) + "\n"
