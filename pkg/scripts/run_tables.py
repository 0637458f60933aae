"""Run the built-in Monte Carlo studies and write Markdown and CSV reports.

Usage::

    python scripts/run_tables.py --reps 300 --out results/
    python scripts/run_tables.py table2 table4 --reps 2000 --workers 4
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from weakmoments.simharness import builtin_scenarios, emit_report, get_builtin, run_scenario


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("names", nargs="*", help="scenario names (default: all built-ins)")
    parser.add_argument("--reps", type=int, default=300)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default="results")
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenarios = [get_builtin(n) for n in args.names] if args.names else builtin_scenarios()
    for sc in scenarios:
        t0 = time.perf_counter()
        report = run_scenario(
            sc,
            args.reps,
            args.seed,
            workers=args.workers,
            progress=lambda design, n: print(f"  {sc.name}: {design} n={n}", file=sys.stderr),
        )
        emit_report(report, "csv", out / f"{sc.name}.csv")
        emit_report(report, "markdown", out / f"{sc.name}.md")
        print(f"{sc.name}: {time.perf_counter() - t0:.1f} s -> {out / sc.name}.{{csv,md}}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
