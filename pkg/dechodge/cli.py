from __future__ import annotations

"""
Command-line entry point for dechodge.

Usage (from project root, with venv activated):

  python -m dechodge.cli mesh gen --kind acute --n 17 --out acute17.mesh
  python -m dechodge.cli mesh stats --in acute17.mesh
  python -m dechodge.cli hodge check
  python -m dechodge.cli --strategy incentric solve poisson --problem poisson-quadratic --kind right --n 33
  python -m dechodge.cli --out poisson.csv converge --preset poisson-quadratic

Global flags (--strategy, --inverse-mode, --config, --out, --seed) go before
the subcommand.  Numeric output is CSV with 17 significant digits.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import ValidationError

from .dual_mesh import BUILTIN_STRATEGIES, build_dual
from .errors import ConfigError, DecError
from .exact import SOLUTION_NAMES, exact_solution
from .gmsh_io import read_gmsh
from .harness import (
  PRESETS,
  Case,
  execute_case,
  line_trace,
  preset_cases,
  sweep,
  write_csv,
  write_field_csv,
)
from .hodge import build_hodge, export_matrix, hodge_exactness_error
from .mesh_core import SimplicialComplex2, build_complex, mesh_stats, read_mesh, write_mesh
from .mesh_gen import (
  gen_acute_mesh,
  gen_compressed_mesh,
  gen_right_mesh,
  gen_unstructured_mesh,
  non_delaunay_ratio,
  perturb_to_non_delaunay,
)
from .models import MeshRecipe
from .settings import configure_logging, load_config, load_fluid_overrides

logger = logging.getLogger("cli")

PROBLEM_KINDS = {"poisson": "poisson", "ns": "ns", "boussinesq": "boussinesq"}

# (label, form) pairs of the Hodge exactness table
HODGE_FORMS = (
  ("(x-y)(dx-dy)", lambda x, y: ((x - y), -(x - y))),
  ("(x+y)(dx+dy)", lambda x, y: ((x + y), (x + y))),
)


def _load_any_mesh(path: str) -> SimplicialComplex2:
  if path.lower().endswith(".msh"):
    return read_gmsh(path)
  return read_mesh(path)


def _domain(text: str):
  try:
    values = tuple(float(v) for v in text.split(","))
  except ValueError as exc:
    raise argparse.ArgumentTypeError(f"bad domain '{text}'") from exc
  if len(values) != 4:
    raise argparse.ArgumentTypeError("domain must be x0,y0,x1,y1")
  return values


def _int_list(text: str) -> List[int]:
  return [int(v) for v in text.split(",") if v.strip()]


def _emit(text: str, out: Optional[str]) -> None:
  if out:
    Path(out).write_text(text, encoding="utf-8")
    logger.info("Wrote %s", out)
  else:
    sys.stdout.write(text)


def cmd_mesh(args: argparse.Namespace) -> None:
  if args.mesh_cmd == "gen":
    if args.kind == "right":
      cx = gen_right_mesh(args.n, args.domain)
    elif args.kind == "acute":
      cx = gen_acute_mesh(args.n, args.domain)
    elif args.kind == "compressed":
      cx = gen_compressed_mesh(args.n, args.domain, args.ratio, seed=args.seed)
    else:
      cx = gen_unstructured_mesh(args.n, args.domain, seed=args.seed)
    _write_mesh_out(cx, args.out)
  elif args.mesh_cmd == "perturb":
    cx = perturb_to_non_delaunay(_load_any_mesh(args.input), args.ratio, seed=args.seed, quality_floor=args.floor)
    _write_mesh_out(cx, args.out)
  elif args.mesh_cmd == "import":
    _write_mesh_out(read_gmsh(args.input), args.out)
  else:
    cx = _load_any_mesh(args.input)
    stats = mesh_stats(cx)
    stats.non_delaunay_ratio = non_delaunay_ratio(cx)
    lines = [f"{key}={value:.16e}" if isinstance(value, float) else f"{key}={value}" for key, value in stats.model_dump().items()]
    _emit("\n".join(lines) + "\n", args.out)


def _write_mesh_out(cx: SimplicialComplex2, out: Optional[str]) -> None:
  if not out:
    raise DecError("--out is required for this command")
  write_mesh(cx, out)


def hodge_table(quad_order: int = 5, n: int = 20) -> List[dict]:
  """Exactness errors of the analytic H1 on the unit right triangle and an n x n right mesh."""
  meshes = (
    ("unit-triangle", build_complex([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0, 1, 2]])),
    (f"right-{n}", gen_right_mesh(n)),
  )
  rows = []
  for mesh_name, cx in meshes:
    for strategy in ("barycentric", "incentric"):
      dual = build_dual(cx, strategy)
      for label, form in HODGE_FORMS:
        rows.append({
          "mesh": mesh_name,
          "strategy": strategy,
          "form": label,
          "error": hodge_exactness_error(form, cx, dual, quad_order),
        })
  return rows


def cmd_hodge(args: argparse.Namespace, config) -> None:
  rows = hodge_table(config.quad_order, args.n)
  text = "mesh,strategy,form,error\n" + "".join(
    f"{r['mesh']},{r['strategy']},{r['form']},{r['error']:.16e}\n" for r in rows
  )
  _emit(text, args.out)
  if args.export:
    cx = _load_any_mesh(args.mesh) if args.mesh else gen_right_mesh(args.n)
    ops = build_hodge(cx, build_dual(cx, config.strategy), config.hodge_kind, config.inverse_mode)
    export_dir = Path(args.export)
    export_dir.mkdir(parents=True, exist_ok=True)
    for name in ("H0", "H1", "H2"):
      export_matrix(getattr(ops, name), export_dir / f"{name}.mtx", comment=f"{config.strategy} {config.hodge_kind}")
    if ops.inv_h1.matrix is not None:
      export_matrix(ops.inv_h1.matrix, export_dir / "H1_inv.mtx", comment="elementwise inverse")


def _recipe(args: argparse.Namespace, n: int, kind: Optional[str] = None) -> MeshRecipe:
  kind = kind or args.kind
  try:
    return MeshRecipe(
      kind=kind,
      n=n,
      seed=args.seed,
      target_non_delaunay_ratio=args.ratio if kind in ("compressed", "perturbed", "gmsh") else 0.0,
      path=getattr(args, "mesh", None),
    )
  except ValidationError as exc:
    raise ConfigError(f"bad mesh recipe: {exc.errors()[0].get('msg')}") from exc


def cmd_solve(args: argparse.Namespace, config, fluid: Optional[dict] = None) -> None:
  problem = args.problem or {
    "poisson": "poisson-quadratic", "ns": "poiseuille", "boussinesq": "travel-nu-ne-kappa",
  }[args.solve_cmd]
  exact = exact_solution(problem, fluid)
  if exact.problem != PROBLEM_KINDS[args.solve_cmd]:
    raise DecError(f"problem '{problem}' is not a {args.solve_cmd} problem")
  kind = "gmsh" if args.mesh else args.kind
  result = execute_case(Case(_recipe(args, args.n, kind), config.strategy, problem, config, fluid or None))
  report = result.report
  print(write_csv([report]), end="")
  if args.field:
    name = "u" if "u" in result.fields else args.field_name
    values = result.fields[name]
    coords = result.cx.vertex_coords
    if name == "u":
      coords = build_dual(result.cx, config.strategy).triangle_centers
    write_field_csv(coords, values, args.field)
    logger.info("Wrote field %s to %s", name, args.field)
  if args.trace is not None and exact.problem != "poisson":
    trace = line_trace(result.cx, result.fields[args.field_name], y=args.trace)
    lines = ["x,y,value"] + [f"{x:.16e},{y:.16e},{v:.16e}" for x, y, v in trace.tolist()]
    _emit("\n".join(lines) + "\n", args.out)


def cmd_converge(args: argparse.Namespace, config, fluid: Optional[dict] = None) -> None:
  ns = _int_list(args.ns) if args.ns else None
  if args.preset:
    cases = preset_cases(args.preset, config, ns, seed=args.seed, params=fluid or None)
  else:
    if not args.problem or not ns:
      raise DecError("converge needs --preset or both --problem and --ns")
    strategies = args.strategies.split(",") if args.strategies else [config.strategy]
    for s in strategies:
      if s not in BUILTIN_STRATEGIES:
        raise DecError(f"unknown strategy '{s}'")
    cases = [
      Case(_recipe(args, n, args.kind), s, args.problem, config, fluid or None)
      for s in strategies for n in ns
    ]
  logger.info("Running %d cases with %d workers", len(cases), config.workers)
  reports = sweep(cases, workers=config.workers)
  text = write_csv(reports)
  _emit(text, args.out)


def build_parser() -> argparse.ArgumentParser:
  parser = argparse.ArgumentParser(prog="dechodge", description="DEC Hodge operators, solvers and convergence studies.")
  parser.add_argument("--strategy", choices=BUILTIN_STRATEGIES, help="Dual center strategy.")
  parser.add_argument("--inverse-mode", choices=("elementwise", "direct-solve"), help="How H1 is inverted.")
  parser.add_argument("--hodge-kind", choices=("analytic", "diagonal"), help="Analytic or diagonal H1.")
  parser.add_argument("--config", help="key=value config file (solver settings and fluid constants).")
  parser.add_argument("--out", help="Output file (default: stdout).")
  parser.add_argument("--seed", type=int, default=0, help="Seed for random meshes.")
  parser.add_argument("--workers", type=int, help="Parallel cases in sweeps.")
  parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")
  sub = parser.add_subparsers(dest="command", required=True)

  mesh = sub.add_parser("mesh", help="Generate, perturb, import or inspect meshes.")
  mesh_sub = mesh.add_subparsers(dest="mesh_cmd", required=True)
  gen = mesh_sub.add_parser("gen")
  gen.add_argument("--kind", choices=("right", "acute", "unstructured", "compressed"), required=True)
  gen.add_argument("--n", type=int, required=True)
  gen.add_argument("--domain", type=_domain, default=(0.0, 0.0, 1.0, 1.0))
  gen.add_argument("--ratio", type=float, default=0.4, help="Non-Delaunay target of compressed meshes.")
  perturb = mesh_sub.add_parser("perturb")
  perturb.add_argument("--in", dest="input", required=True)
  perturb.add_argument("--ratio", type=float, required=True)
  perturb.add_argument("--floor", type=float, default=None, help="Absolute minimum triangle area.")
  stats = mesh_sub.add_parser("stats")
  stats.add_argument("--in", dest="input", required=True)
  imp = mesh_sub.add_parser("import")
  imp.add_argument("--in", dest="input", required=True)

  hodge = sub.add_parser("hodge", help="Hodge operator checks.")
  hodge_sub = hodge.add_subparsers(dest="hodge_cmd", required=True)
  check = hodge_sub.add_parser("check", help="Exactness errors on the unit triangle and a right mesh.")
  check.add_argument("--n", type=int, default=20)
  check.add_argument("--export", help="Directory for MatrixMarket exports of H0, H1, H2.")
  check.add_argument("--mesh", help="Mesh to export operators for (default: right mesh).")

  solve = sub.add_parser("solve", help="Solve one problem on one mesh.")
  solve_sub = solve.add_subparsers(dest="solve_cmd", required=True)
  for name in PROBLEM_KINDS:
    p = solve_sub.add_parser(name)
    p.add_argument("--problem", choices=SOLUTION_NAMES)
    p.add_argument("--kind", choices=("right", "acute", "unstructured", "compressed", "perturbed"), default="right")
    p.add_argument("--n", type=int, default=17)
    p.add_argument("--ratio", type=float, default=0.0, help="Non-Delaunay target for perturbed meshes.")
    p.add_argument("--mesh", help="Gmsh .msh file instead of a generated mesh.")
    p.add_argument("--field", help="Write the solution field as id,x,y,value CSV.")
    p.add_argument("--field-name", default="psi", choices=("psi", "theta"))
    p.add_argument("--trace", type=float, default=None, help="Emit a nearest-vertex trace along y=TRACE.")

  conv = sub.add_parser("converge", help="Convergence sweep.")
  conv.add_argument("--preset", choices=PRESETS, help="Named convergence study.")
  conv.add_argument("--problem", choices=SOLUTION_NAMES)
  conv.add_argument("--kind", choices=("right", "acute", "unstructured", "compressed", "perturbed"), default="right")
  conv.add_argument("--ns", help="Comma-separated resolutions.")
  conv.add_argument("--strategies", help="Comma-separated strategies (default: --strategy).")
  conv.add_argument("--ratio", type=float, default=0.0)
  conv.add_argument("--mesh", help=argparse.SUPPRESS)
  return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
  parser = build_parser()
  args = parser.parse_args(argv)
  configure_logging(args.verbose)
  try:
    config = load_config(args.config, {
      "strategy": args.strategy,
      "inverse_mode": args.inverse_mode,
      "hodge_kind": args.hodge_kind,
      "workers": args.workers,
    })
    fluid = load_fluid_overrides(args.config)
    if args.command == "mesh":
      cmd_mesh(args)
    elif args.command == "hodge":
      cmd_hodge(args, config)
    elif args.command == "solve":
      cmd_solve(args, config, fluid)
    else:
      cmd_converge(args, config, fluid)
  except DecError as exc:
    logger.error("%s: %s", type(exc).__name__, exc)
    return 1
  return 0


if __name__ == "__main__":
  raise SystemExit(main())
