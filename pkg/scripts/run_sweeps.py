"""Run every sweep spec in configs/ and write one result directory per spec.

    python3 scripts/run_sweeps.py --jobs 4
"""

import argparse
import sys
from pathlib import Path

from hris_uav.cli import main as cli

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=str(ROOT / "results"))
    ap.add_argument("specs", nargs="*", help="spec files (default: configs/sweep_*.json)")
    args = ap.parse_args()

    specs = [Path(s) for s in args.specs] or sorted((ROOT / "configs").glob("sweep_*.json"))
    code = 0
    for spec in specs:
        out = Path(args.out) / spec.stem
        print(f"{spec.name} -> {out}")
        code = max(code, cli(["sweep", "--config", str(spec), "--out", str(out),
                              "--jobs", str(args.jobs), "--gnuplot-script"]))
    sys.exit(code)


if __name__ == "__main__":
    main()
