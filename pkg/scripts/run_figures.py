"""Run every figure preset and collect the CSVs under one directory.

    python scripts/run_figures.py --out results/ --trials 500
"""

import argparse
import time
from pathlib import Path

from nlconsensus.cli import run_figure


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (default 500)")
    p.add_argument("--figures", type=int, nargs="*", default=list(range(1, 9)))
    args = p.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for n in args.figures:
        t0 = time.perf_counter()
        written, lines = run_figure(n, str(out / "nlc"), trials=args.trials)
        print("\n".join(lines))
        print(f"# figure {n}: {len(written)} files in {time.perf_counter() - t0:.1f}s\n")


if __name__ == "__main__":
    main()
