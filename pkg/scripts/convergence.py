"""Min-rate per outer iteration for both optimizers on one scenario.

    python3 scripts/convergence.py --config configs/full.json --out results/convergence
"""

import argparse
import csv
from pathlib import Path

from hris_uav.config import load_config
from hris_uav.sweep import run_single


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/full.json")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default="results/convergence")
    args = ap.parse_args()

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    taus = {}
    for mode in ("static", "mobile"):
        res = run_single(cfg, mode)
        taus[mode] = res.trace.taus()
        print(f"{mode}: {res.iterations} iterations ({res.stop_reason}), true min rate {res.min_rate:.4f} nats/s/Hz")
    n = max(len(t) for t in taus.values())
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("iteration", "static_tau", "mobile_tau"))
        for i in range(n):
            w.writerow([i] + [f"{t[min(i, len(t) - 1)]:.12e}" for t in (taus["static"], taus["mobile"])])
    print(f"wrote {out / 'convergence.csv'}")


if __name__ == "__main__":
    main()
