"""
Run the Hodge exactness check and the convergence presets one after another.

Usage (from project root, with venv activated):

  python reproduce_tables.py [--out-dir results] [--only poisson-quadratic,poiseuille]

Each preset is written to <out-dir>/<preset>.csv.  A failing preset is
reported and skipped; the script exits 1 if any preset failed.
"""

import argparse
import time
from pathlib import Path

from dechodge.cli import hodge_table
from dechodge.errors import DecError
from dechodge.harness import PRESETS, preset_cases, sweep, write_csv
from dechodge.settings import configure_logging, load_config




def main() -> None:
  parser = argparse.ArgumentParser(description="Reproduce the Hodge and convergence tables.")
  parser.add_argument("--out-dir", default="results", help="Directory for the CSV files.")
  parser.add_argument("--only", default="", help="Comma-separated subset of presets.")
  parser.add_argument("--workers", type=int, default=1, help="Parallel cases per preset.")
  args = parser.parse_args()
  configure_logging()

  out_dir = Path(args.out_dir)
  out_dir.mkdir(parents=True, exist_ok=True)
  config = load_config(overrides={"workers": args.workers})

  rows = hodge_table(config.quad_order)
  print("Hodge exactness errors:")
  for r in rows:
    print(f"  {r['mesh']:<14} {r['strategy']:<12} {r['form']:<14} {r['error']:.4e}")

  wanted = [p for p in args.only.split(",") if p] or list(PRESETS)
  failed = 0
  for idx, name in enumerate(wanted, start=1):
    print(f"[{idx}/{len(wanted)}] {name}")
    started = time.perf_counter()
    try:
      reports = sweep(preset_cases(name, config), workers=config.workers)
    except DecError as exc:
      print(f"  ERROR: {type(exc).__name__}: {exc}")
      failed += 1
      continue
    path = out_dir / f"{name}.csv"
    write_csv(reports, path)
    print(f"  -> {len(reports)} cases in {time.perf_counter() - started:.1f}s, wrote {path}")

  if failed:
    raise SystemExit(1)


if __name__ == "__main__":  # pragma: no cover - CLI helper
  main()
