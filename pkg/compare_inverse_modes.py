"""
Compare the elementwise H1 inverse against a direct solve on one Poisson case.

Usage (from project root, with venv activated):

  python compare_inverse_modes.py [--kind acute] [--n 17] [--problem poisson-sinsinh]

Read-only diagnostic: prints the relative error of each mode per strategy.
"""

import argparse

from dechodge.errors import DecError
from dechodge.harness import run_case
from dechodge.models import MeshRecipe, SolverConfig
from dechodge.settings import configure_logging


def main() -> None:
  parser = argparse.ArgumentParser(description="Elementwise vs direct-solve H1 inverse.")
  parser.add_argument("--kind", default="acute", choices=("right", "acute", "unstructured"))
  parser.add_argument("--n", type=int, default=17)
  parser.add_argument("--problem", default="poisson-quadratic", choices=("poisson-quadratic", "poisson-sinsinh"))
  args = parser.parse_args()
  configure_logging()

  recipe = MeshRecipe(kind=args.kind, n=args.n)
  strategies = ("barycentric", "incentric") if args.kind == "right" else ("circumcentric", "barycentric", "incentric")
  print(f"{args.problem} on {args.kind} mesh, n={args.n}")

  gaps = 0
  for strategy in strategies:
    errors = {}
    for mode in ("elementwise", "direct-solve"):
      try:
        report = run_case(recipe, strategy, args.problem, SolverConfig(inverse_mode=mode))
      except DecError as exc:
        print(f"  ! {strategy}/{mode} failed: {exc}")
        continue
      errors[mode] = report.err_psi
    if len(errors) == 2:
      print(
        f"{strategy}: elementwise={errors['elementwise']:.6e}, "
        f"direct-solve={errors['direct-solve']:.6e}"
      )
      if errors["elementwise"] > errors["direct-solve"]:
        gaps += 1

  print(f"Strategies where elementwise is less accurate: {gaps}")


if __name__ == "__main__":  # pragma: no cover - CLI helper
  main()
