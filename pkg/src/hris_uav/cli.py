"""Command-line entry point: single runs, sweeps and verification suites."""

from __future__ import annotations

import argparse
import dataclasses
import csv
import io
import json
import math
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .conic import SolverSettings
from .evaluation import Schedule
from .static import OptimizerSettings
from .sweep import gnuplot_script, load_spec, run_single, run_sweep
from . import verify

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
NATS_TO_BITS = 1 / math.log(2)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.12e}"


def _settings(args) -> OptimizerSettings:
    return OptimizerSettings(solver=SolverSettings(mode=args.solver_mode or "expcone"), max_iters=args.max_iters,
                             eps_conv=args.eps, timing=args.timing)


def _summary(res, scale: float, unit: str) -> dict:
    out = {
        "mode": res.mode,
        "unit": unit,
        "minRate": res.min_rate * scale,
        "rates": [float(r) * scale for r in res.rates],
        "iterations": res.iterations,
        "stopReason": res.stop_reason,
        "maxResidual": res.trace.max_residual(),
    }
    if "relaxed_min_rate" in res.extras:
        out["relaxedMinRate"] = res.extras["relaxed_min_rate"] * scale
    return out


def _solver_broke(res) -> bool:
    return res.stop_reason == "all blocks failed"


def cmd_run(args, mode: str) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    res = run_single(cfg, mode, args.csi_eps, _settings(args))
    out = Path(args.out)
    scale, unit = (NATS_TO_BITS, "bits/s/Hz") if args.bits else (1.0, "nats/s/Hz")
    _write(out / "trace.csv", res.trace.to_csv(timing=args.timing))
    _write(out / "summary.json", _json(_summary(res, scale, unit)))
    if mode == "mobile":
        s = res.state
        served = Schedule(s.b).served
        _write(out / "trajectory.csv", _rows_csv(
            ("t", "x", "y", "z", "scheduledUe"),
            [(t, _fmt(p[0]), _fmt(p[1]), _fmt(p[2]), int(served[t])) for t, p in enumerate(s.track)]))
        _write(out / "schedule.csv", _rows_csv(
            ["t"] + [f"b{k}" for k in range(cfg.K)],
            [[t] + [_fmt(v) for v in s.b[:, t]] for t in range(cfg.T)]))
        _write(out / "ris_profile.csv", _rows_csv(
            ("t", "n", "active", "re", "im"),
            [(t, n, int(cfg.active_mask[n]), _fmt(a.real), _fmt(a.imag))
             for t in range(cfg.T) for n, a in enumerate(s.alpha[t])]))
    else:
        s = res.state
        _write(out / "ris_profile.csv", _rows_csv(
            ("n", "active", "re", "im"),
            [(n, int(cfg.active_mask[n]), _fmt(a.real), _fmt(a.imag)) for n, a in enumerate(s.alpha)]))
    print(f"min rate {res.min_rate * scale:.6f} {unit} after {res.iterations} iterations ({res.stop_reason})")
    if _solver_broke(res):
        print("solver breakdown: every block failed; partial trace written", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = load_spec(args.config)
    overrides = {"seeds": (args.seed,) if args.seed is not None else None,
                 "solver_mode": args.solver_mode, "max_iters": args.max_iters, "eps_conv": args.eps}
    spec = dataclasses.replace(spec, **{k: v for k, v in overrides.items() if v is not None})
    out = Path(args.out)
    rows = run_sweep(spec, out, jobs=args.jobs)
    if args.gnuplot_script:
        _write(out / "plot.gp", gnuplot_script(str(out / "summary.csv"), spec.axis))
    failed = [r for r in rows if str(r["status"]).startswith("error")]
    print(f"{len(rows)} cells, {len(failed)} failed; results in {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    names = verify.SUITES if args.suite == "all" else (args.suite,)
    report = verify.run_suites(names)
    for name, suite in report["suites"].items():
        for c in suite["checks"]:
            print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']} value={c['value']:.3e} "
                  f"threshold={c['threshold']:.3e}")
    if args.out:
        for suite in report["suites"].values():
            suite.pop("seconds")
        _write(Path(args.out), _json(report))
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hris-uav", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(q, out_required=True):
        q.add_argument("--config", required=True, help="scenario (or experiment) JSON file")
        q.add_argument("--seed", type=int, default=None, help="override the seed in the file")
        q.add_argument("--out", required=out_required, help="output directory")
        q.add_argument("--solver-mode", choices=("expcone", "bisection"), default=None,
                       help="how rate targets are handled (default expcone)")
        q.add_argument("--max-iters", type=int, default=None)
        q.add_argument("--eps", type=float, default=None, help="convergence threshold on tau")

    for name in ("run-static", "run-mobile"):
        q = sub.add_parser(name)
        run_flags(q)
        q.add_argument("--csi-eps", type=float, default=0.0, help="relative CSI error level")
        q.add_argument("--bits", action="store_true", help="report rates in bits/s/Hz")
        q.add_argument("--timing", action="store_true", help="record wall-clock time in the trace")

    q = sub.add_parser("sweep")
    run_flags(q)
    q.add_argument("--jobs", type=int, default=1)
    q.add_argument("--gnuplot-script", action="store_true", help="also write plot.gp")

    q = sub.add_parser("verify")
    q.add_argument("--suite", choices=("all",) + verify.SUITES, default="all")
    q.add_argument("--out", default=None, help="JSON report path")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run-static":
            return cmd_run(args, "static")
        if args.command == "run-mobile":
            return cmd_run(args, "mobile")
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_verify(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
