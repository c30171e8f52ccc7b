"""
Convergence-study harness: error norms, rate fits, single cases, sweeps and
their CSV tables.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, InsufficientPoints, ZeroExactNorm
from .exact import ExactSolution, exact_solution
from .mesh_core import SimplicialComplex2
from .mesh_gen import build_from_recipe, non_delaunay_ratio
from .models import CaseReport, MeshRecipe, SolverConfig
from .solvers import (
  BoundaryData,
  build_operators,
  reconstruct_velocity,
  solve_boussinesq,
  solve_navier_stokes,
  solve_poisson,
)

logger = logging.getLogger("harness")

CSV_COLUMNS = [
  "mesh_kind", "n", "dx_mean", "strategy", "problem",
  "err_psi", "err_u", "err_theta",
  "rate_psi", "rate_u", "rate_theta",
  "pair_rate_psi", "pair_rate_u", "pair_rate_theta",
  "steps", "wall_time", "non_delaunay_ratio", "converged",
]
ERROR_FIELDS = ("psi", "u", "theta")


def relative_error(numeric, exact, weights: Optional[np.ndarray] = None) -> float:
  """||numeric - exact|| / ||exact|| with ||v||^2 = sum_i w_i |v_i|^2 (rows may be vectors)."""
  num = np.asarray(numeric.values if hasattr(numeric, "values") else numeric, dtype=float)
  ref = np.asarray(exact.values if hasattr(exact, "values") else exact, dtype=float)
  if num.shape != ref.shape:
    raise ValueError(f"carrier mismatch: {num.shape} vs {ref.shape}")
  w = np.ones(len(ref)) if weights is None else np.asarray(weights, dtype=float)
  sq_diff = (num - ref) ** 2
  sq_ref = ref ** 2
  if ref.ndim == 2:
    sq_diff = sq_diff.sum(axis=1)
    sq_ref = sq_ref.sum(axis=1)
  denom = float(np.sum(w * sq_ref))
  if denom == 0.0:
    raise ZeroExactNorm("exact field has zero norm")
  return float(np.sqrt(np.sum(w * sq_diff) / denom))


def _checked_points(points: Sequence[Tuple[float, float]]) -> np.ndarray:
  pts = np.asarray(points, dtype=float).reshape(-1, 2)
  if len(pts) < 2:
    raise InsufficientPoints("a rate needs at least 2 (dx, error) points")
  if np.any(pts <= 0):
    raise ValueError("mesh sizes and errors must be positive")
  return pts


def convergence_rate(points: Sequence[Tuple[float, float]]) -> float:
  """Least-squares slope of log E against log dx."""
  pts = _checked_points(points)
  slope, _ = np.polyfit(np.log(pts[:, 0]), np.log(pts[:, 1]), 1)
  return float(slope)


def pairwise_rates(points: Sequence[Tuple[float, float]]) -> List[float]:
  """Rates between successive refinements, coarsest first."""
  pts = _checked_points(points)
  pts = pts[np.argsort(-pts[:, 0])]
  logs = np.log(pts)
  return [float(r) for r in np.diff(logs[:, 1]) / np.diff(logs[:, 0])]


def line_trace(cx: SimplicialComplex2, values: np.ndarray, y: float = 0.0, samples: Optional[int] = None) -> np.ndarray:
  """Nearest-vertex trace of a vertex field along the horizontal line at y: rows (x, y_vertex, value)."""
  x_min, x_max = cx.vertex_coords[:, 0].min(), cx.vertex_coords[:, 0].max()
  if samples is None:
    samples = int(round((x_max - x_min) / cx.mean_edge_length)) + 1
  xs = np.linspace(x_min, x_max, max(samples, 2))
  _, idx = cKDTree(cx.vertex_coords).query(np.column_stack([xs, np.full(len(xs), y)]))
  idx = np.unique(idx)
  idx = idx[np.argsort(cx.vertex_coords[idx, 0])]
  return np.column_stack([cx.vertex_coords[idx], np.asarray(values)[idx]])


@dataclass
class Case:
  recipe: MeshRecipe
  strategy: str
  problem: str
  config: SolverConfig
  params: Optional[Dict[str, Any]] = None


@dataclass
class CaseResult:
  report: CaseReport
  cx: SimplicialComplex2
  fields: Dict[str, np.ndarray]


def _weights(config: SolverConfig, measure: np.ndarray) -> Optional[np.ndarray]:
  return measure if config.norm_weight == "area" else None


def _velocity_at(exact: ExactSolution, coords: np.ndarray, t: float) -> np.ndarray:
  ux, uy = exact.velocity(coords[:, 0], coords[:, 1], t)
  return np.column_stack([np.broadcast_to(ux, len(coords)), np.broadcast_to(uy, len(coords))])


def execute_case(case: Case, case_index: int = 0) -> CaseResult:
  """Mesh -> dual -> operators -> solve -> errors for one case."""
  started = time.perf_counter()
  exact = exact_solution(case.problem, case.params)
  recipe = case.recipe
  if recipe.kind != "gmsh":
    recipe = recipe.model_copy(update={"domain": exact.domain})
  cx = build_from_recipe(recipe)
  config = case.config.model_copy(update={"strategy": case.strategy})
  ops = build_operators(cx, case.strategy, config.hodge_kind, config.inverse_mode)
  coords = cx.vertex_coords
  cell_areas = ops.dual.dual_cell_areas
  errs: Dict[str, Optional[float]] = {"psi": None, "u": None, "theta": None}
  fields: Dict[str, np.ndarray] = {}
  steps = 0
  converged = True

  if exact.problem == "poisson":
    u = solve_poisson(cx, case.strategy, exact.f, exact.u, config, ops=ops)
    ct = ops.dual.triangle_centers
    errs["psi"] = relative_error(u.values, exact.u(ct[:, 0], ct[:, 1]), _weights(config, cx.triangle_areas))
    fields["u"] = u.values
  elif exact.problem == "ns":
    result = solve_navier_stokes(
      cx, case.strategy, exact.fluid, BoundaryData.from_exact(exact),
      config=config, source=exact.vorticity_source, ops=ops,
    )
    steps = result.steps
    converged = result.converged
    errs["psi"] = relative_error(result.psi, exact.psi(coords[:, 0], coords[:, 1], result.time), _weights(config, cell_areas))
    vel = reconstruct_velocity(result.psi, cx)
    errs["u"] = relative_error(vel, _velocity_at(exact, coords, result.time), cell_areas)
    fields["psi"] = result.psi
  else:
    psi0 = exact.psi(coords[:, 0], coords[:, 1], 0.0)
    theta0 = exact.theta(coords[:, 0], coords[:, 1], 0.0)

    def monitor(t: float, psi: np.ndarray, theta: np.ndarray) -> Dict[str, float]:
      return {
        "psi": relative_error(psi, exact.psi(coords[:, 0], coords[:, 1], t), _weights(config, cell_areas)),
        "u": relative_error(reconstruct_velocity(psi, cx), _velocity_at(exact, coords, t), cell_areas),
        "theta": relative_error(theta, exact.theta(coords[:, 0], coords[:, 1], t), _weights(config, cell_areas)),
      }

    result = solve_boussinesq(
      cx, case.strategy, exact.fluid, BoundaryData.from_exact(exact),
      psi0=psi0, theta0=theta0, t_end=exact.end_time, config=config, ops=ops, monitor=monitor,
    )
    steps = result.steps
    # overall errors of the profiles at t = T
    for key in ERROR_FIELDS:
      errs[key] = result.error_history[key][-1]
    fields["psi"] = result.psi
    fields["theta"] = result.theta

  ratio = non_delaunay_ratio(cx) if recipe.kind in ("compressed", "perturbed", "unstructured", "gmsh") else None
  report = CaseReport(
    case_index=case_index,
    mesh_kind=recipe.kind,
    n=recipe.n,
    dx_mean=cx.mean_edge_length,
    strategy=case.strategy,
    problem=case.problem,
    err_psi=errs["psi"],
    err_u=errs["u"],
    err_theta=errs["theta"],
    steps=steps,
    wall_time=time.perf_counter() - started,
    non_delaunay_ratio=ratio,
    target_ratio=recipe.target_non_delaunay_ratio if recipe.kind in ("compressed", "perturbed", "gmsh") else None,
    converged=converged,
  )
  if not converged:
    logger.warning(
      "case %d %s/%s n=%d stopped at max_steps=%d before reaching a steady state",
      case_index, recipe.kind, case.strategy, recipe.n, steps,
    )
  logger.info(
    "case %d %s/%s n=%d dx=%.4e err_psi=%s err_u=%s err_theta=%s (%.2fs)",
    case_index, recipe.kind, case.strategy, recipe.n, report.dx_mean,
    _fmt(report.err_psi), _fmt(report.err_u), _fmt(report.err_theta), report.wall_time,
  )
  return CaseResult(report=report, cx=cx, fields=fields)


def run_case(recipe: MeshRecipe, strategy: str, problem: str, config: Optional[SolverConfig] = None, params=None) -> CaseReport:
  return execute_case(Case(recipe, strategy, problem, config or SolverConfig(), params)).report


def sweep(cases: Sequence[Case], workers: int = 1) -> List[CaseReport]:
  """Run cases, possibly in parallel; reports come back in case order."""
  if not cases:
    return []
  if workers <= 1:
    return [execute_case(case, idx).report for idx, case in enumerate(cases)]
  with ThreadPoolExecutor(max_workers=workers) as pool:
    futures = [pool.submit(execute_case, case, idx) for idx, case in enumerate(cases)]
    return [f.result().report for f in futures]


def _fmt(value: Optional[float]) -> str:
  return "" if value is None else f"{value:.16e}"


def _group_key(report: CaseReport) -> Tuple[str, str, str, Optional[float]]:
  return report.mesh_kind, report.strategy, report.problem, report.target_ratio


def table_rows(reports: Sequence[CaseReport]) -> List[Dict[str, str]]:
  """CSV rows; least-squares rates on the last row of each group, pair rates on every refined row."""
  rows = [
    {
      "mesh_kind": r.mesh_kind, "n": str(r.n), "dx_mean": _fmt(r.dx_mean), "strategy": r.strategy,
      "problem": r.problem, "err_psi": _fmt(r.err_psi), "err_u": _fmt(r.err_u), "err_theta": _fmt(r.err_theta),
      "rate_psi": "", "rate_u": "", "rate_theta": "",
      "pair_rate_psi": "", "pair_rate_u": "", "pair_rate_theta": "",
      "steps": str(r.steps), "wall_time": _fmt(r.wall_time), "non_delaunay_ratio": _fmt(r.non_delaunay_ratio),
      "converged": str(r.converged).lower(),
    }
    for r in reports
  ]
  groups: Dict[Tuple[str, str, str, Optional[float]], List[int]] = {}
  for idx, r in enumerate(reports):
    groups.setdefault(_group_key(r), []).append(idx)
  for members in groups.values():
    if len(members) < 2:
      continue
    for name in ERROR_FIELDS:
      pts = [(reports[i].dx_mean, getattr(reports[i], f"err_{name}")) for i in members]
      if any(e is None or e <= 0 for _, e in pts):
        continue
      rows[members[-1]][f"rate_{name}"] = _fmt(convergence_rate(pts))
      for prev, cur in zip(members, members[1:]):
        pair = [pts[members.index(prev)], pts[members.index(cur)]]
        rows[cur][f"pair_rate_{name}"] = _fmt(convergence_rate(pair))
  return rows


def write_csv(reports: Sequence[CaseReport], out: Optional[str | Path | TextIO] = None) -> str:
  buf = io.StringIO()
  writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
  writer.writeheader()
  writer.writerows(table_rows(reports))
  text = buf.getvalue()
  if isinstance(out, (str, Path)):
    Path(out).write_text(text, encoding="utf-8")
    logger.info("Wrote %d rows to %s", len(reports), out)
  elif out is not None:
    out.write(text)
  return text


def write_field_csv(coords: np.ndarray, values: np.ndarray, out: str | Path | TextIO) -> None:
  """Export a field as 'id,x,y,value' rows."""
  buf = io.StringIO()
  buf.write("id,x,y,value\n")
  for idx, ((x, y), v) in enumerate(zip(np.asarray(coords).tolist(), np.asarray(values).tolist())):
    buf.write(f"{idx},{x:.16e},{y:.16e},{v:.16e}\n")
  if isinstance(out, (str, Path)):
    Path(out).write_text(buf.getvalue(), encoding="utf-8")
  else:
    out.write(buf.getvalue())


# Named convergence studies

PRESETS = (
  "poisson-quadratic", "poisson-sinsinh", "poiseuille", "taylor-green",
  "traveling-wave", "compressed", "non-delaunay",
)
POISSON_NS = (9, 17, 33, 65)
FLOW_NS = (9, 17, 33)
COMPRESSED_NS = (4, 7, 13, 25, 50)
COMPRESSED_RATIO = 0.4
PERTURBED_NS = (6, 11, 20, 38)
PERTURBED_RATIOS = (0.15, 0.25, 0.5)


def preset_cases(
  name: str,
  config: SolverConfig,
  ns: Optional[Iterable[int]] = None,
  seed: int = 0,
  params: Optional[Dict[str, Any]] = None,
) -> List[Case]:
  """Cases of a named study; params (e.g. fluid overrides) reach every exact solution."""
  def grid(kind: str, strategies: Sequence[str], problem: str, levels: Sequence[int]) -> List[Case]:
    return [
      Case(MeshRecipe(kind=kind, n=n, seed=seed), s, problem, config, params)
      for s in strategies for n in levels
    ]

  def randomized(kind: str, ratio: float, levels: Sequence[int]) -> List[Case]:
    return [
      Case(MeshRecipe(kind=kind, n=n, seed=seed + lvl, target_non_delaunay_ratio=ratio),
           "barycentric", "travel-nu-eq-kappa", config, params)
      for lvl, n in enumerate(levels)
    ]

  all_three = ("circumcentric", "barycentric", "incentric")
  two = ("barycentric", "incentric")
  if name in ("poisson-quadratic", "poisson-sinsinh", "poiseuille", "taylor-green"):
    levels = tuple(ns or (POISSON_NS if name.startswith("poisson") else FLOW_NS))
    return grid("acute", all_three, name, levels) + grid("right", two, name, levels)
  if name == "traveling-wave":
    return grid("right", two, "travel-nu-ne-kappa", tuple(ns or (61,)))
  if name == "compressed":
    return randomized("compressed", COMPRESSED_RATIO, tuple(ns or COMPRESSED_NS))
  if name == "non-delaunay":
    levels = tuple(ns or PERTURBED_NS)
    cases: List[Case] = []
    for ratio in PERTURBED_RATIOS:
      cases += randomized("perturbed", ratio, levels)
    return cases
  raise ConfigError(f"unknown preset '{name}' ({', '.join(PRESETS)})")
