"""
DEC solvers: Poisson on dual vertices, Navier-Stokes in stream-function
form and the Boussinesq system, all on primal vertices.

Operator conventions (V vertices, E edges, F triangles):
  D0 (E x V), D1 (F x E)        primal exterior derivatives
  Dd0 (E x F), Dd1 (V x E)      dual exterior derivatives
  A = Dd1 H1 D0                 (A psi)_v ~ integral of lap(psi) over the dual cell of v
Time stepping is backward Euler for diffusion with explicit convection and
buoyancy; each constant matrix is factored once with SuperLU.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .dual_mesh import CenterStrategy, DualMesh, build_dual, validate_dual
from .errors import ConfigError, DegenerateDual, NonFinite, SingularSystem
from .hodge import HodgeOperators, build_hodge
from .mesh_core import Cochain, SimplicialComplex2, _line_integral, discretize_form, exterior_derivative_matrix
from .models import FluidParams, SolverConfig

logger = logging.getLogger("solvers")


@dataclass
class BoundaryData:
  """Dirichlet data. Poisson uses u(x, y); flow problems use samplers of (x, y, t)."""

  u: Optional[Callable] = None
  psi: Optional[Callable] = None
  velocity: Optional[Callable] = None
  theta: Optional[Callable] = None

  @classmethod
  def from_exact(cls, exact) -> "BoundaryData":
    return cls(u=exact.u, psi=exact.psi, velocity=exact.velocity, theta=exact.theta)


@dataclass
class DecOperators:
  cx: SimplicialComplex2
  dual: DualMesh
  hodge: HodgeOperators
  D0: sparse.csr_matrix
  D1: sparse.csr_matrix
  Dd0: sparse.csr_matrix
  Dd1: sparse.csr_matrix

  @cached_property
  def stream(self) -> "StreamOperators":
    return assemble_stream_laplacian(self.cx, self.dual, self.hodge)

  @property
  def stream_laplacian(self) -> sparse.csr_matrix:
    return self.stream.laplacian

  @cached_property
  def flux_operator(self) -> sparse.csr_matrix:
    """Maps primal-vertex psi to the flux through each dual edge, tail to head of e."""
    return _flux_operator(self.cx, self.dual)


def build_operators(
  cx: SimplicialComplex2,
  strategy: str | CenterStrategy,
  hodge_kind: str = "analytic",
  inverse_mode: str = "elementwise",
) -> DecOperators:
  dual = build_dual(cx, strategy)
  report = validate_dual(cx, dual)
  if not report.ok:
    raise DegenerateDual(
      f"{report.strategy} dual is degenerate: {len(report.short_edges)} vanishing dual edges, "
      f"{len(report.singular_triangles)} singular triangles",
      report,
    )
  if hodge_kind == "diagonal" and np.any(dual.half_lengths <= 0):
    raise DegenerateDual("the diagonal Hodge needs every half dual edge to point along +90 degrees (well-centered mesh)")
  hodge = build_hodge(cx, dual, hodge_kind, inverse_mode)
  return DecOperators(
    cx=cx,
    dual=dual,
    hodge=hodge,
    D0=exterior_derivative_matrix(cx, 0, "primal"),
    D1=exterior_derivative_matrix(cx, 1, "primal"),
    Dd0=exterior_derivative_matrix(cx, 0, "dual"),
    Dd1=exterior_derivative_matrix(cx, 1, "dual"),
  )


def _factor(matrix: sparse.spmatrix, what: str):
  try:
    return splu(sparse.csc_matrix(matrix))
  except RuntimeError as exc:
    raise SingularSystem(f"{what} is singular: {exc}") from exc


def _solve(lu, rhs: np.ndarray, what: str) -> np.ndarray:
  out = lu.solve(rhs)
  if not np.all(np.isfinite(out)):
    raise SingularSystem(f"{what} solve produced non-finite values")
  return out


# Poisson

def solve_poisson(
  cx: SimplicialComplex2,
  strategy: str | CenterStrategy,
  f: Callable,
  g: Callable,
  config: Optional[SolverConfig] = None,
  ops: Optional[DecOperators] = None,
) -> Cochain:
  """Solve -lap(u) = f, u = g on the boundary, for u on dual vertices.

  Boundary edge centers carry ghost values g(c_e), so across a boundary edge
  (d u)_e = sign * (u_T - g(c_e)).
  """
  config = config or SolverConfig()
  if ops is None:
    ops = build_operators(cx, strategy, config.hodge_kind, config.inverse_mode)
  dual, hodge = ops.dual, ops.hodge

  ct = dual.triangle_centers
  rhs_f = np.asarray(f(ct[:, 0], ct[:, 1]), dtype=float) * np.ones(cx.n_triangles)
  ghost = np.zeros(cx.n_edges)
  b_edges = np.flatnonzero(cx.boundary_edge_flags)
  sign = np.asarray(cx.boundary2.sum(axis=1)).ravel()
  ce = dual.edge_centers[b_edges]
  ghost[b_edges] = -sign[b_edges] * np.asarray(g(ce[:, 0], ce[:, 1]), dtype=float)

  if hodge.inverse_mode == "direct-solve":
    n_e, n_f = cx.n_edges, cx.n_triangles
    block = sparse.bmat([[hodge.H1, -ops.Dd0], [hodge.H2 @ ops.D1, None]], format="csc")
    rhs = np.concatenate([ghost, rhs_f])
    sol = _solve(_factor(block, "mixed Poisson system"), rhs, "mixed Poisson system")
    u = sol[n_e:n_e + n_f]
  else:
    inv = hodge.inv_h1.matrix
    lap = sparse.csr_matrix(hodge.H2 @ ops.D1 @ inv @ ops.Dd0)
    rhs = rhs_f - hodge.H2 @ (ops.D1 @ (inv @ ghost))
    u = _solve(_factor(lap, "Poisson matrix"), rhs, "Poisson matrix")
  logger.info("Poisson solved on F=%d dual vertices (%s, %s)", cx.n_triangles, dual.strategy.kind, hodge.inverse_mode)
  return Cochain(0, "dual", u)


# Stream-function operators

@dataclass
class StreamOperators:
  laplacian: sparse.csr_matrix  # A
  viscous: sparse.csr_matrix  # A M^-1 A


def assemble_stream_laplacian(cx: SimplicialComplex2, dual: DualMesh, hodge: HodgeOperators) -> StreamOperators:
  d0 = exterior_derivative_matrix(cx, 0, "primal")
  dd1 = exterior_derivative_matrix(cx, 1, "dual")
  lap = sparse.csr_matrix(dd1 @ hodge.H1 @ d0)
  viscous = sparse.csr_matrix(lap @ sparse.diags(1.0 / dual.dual_cell_areas) @ lap)
  return StreamOperators(laplacian=lap, viscous=viscous)


def _interpolation_weights(cx: SimplicialComplex2, points: np.ndarray) -> np.ndarray:
  """P1 barycentric coordinates of one point per triangle (points may lie outside)."""
  p = cx.vertex_coords[cx.triangles]
  d1 = p[:, 1] - p[:, 0]
  d2 = p[:, 2] - p[:, 0]
  r = points - p[:, 0]
  det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
  l1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
  l2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
  return np.stack([1.0 - l1 - l2, l1, l2], axis=1)


def _flux_operator(cx: SimplicialComplex2, dual: DualMesh) -> sparse.csr_matrix:
  # flux through a curve = psi(end) - psi(start); each half runs c_e -> c_T times the incidence sign
  n_v, n_e, n_f = cx.n_vertices, cx.n_edges, cx.n_triangles
  w = _interpolation_weights(cx, dual.triangle_centers)
  at_centers = sparse.csr_matrix(
    (w.ravel(), (np.repeat(np.arange(n_f), 3), cx.triangles.ravel())), shape=(n_f, n_v)
  )
  tails = cx.vertex_coords[cx.edges[:, 0]]
  d = cx.edge_vectors
  tau = np.einsum("ij,ij->i", dual.edge_centers - tails, d) / np.einsum("ij,ij->i", d, d)
  at_edges = sparse.csr_matrix(
    (np.concatenate([1.0 - tau, tau]), (np.tile(np.arange(n_e), 2), cx.edges.T.ravel())), shape=(n_e, n_v)
  )
  sign_sum = np.asarray(cx.boundary2.sum(axis=1)).ravel()
  return sparse.csr_matrix(cx.boundary2 @ at_centers - sparse.diags(sign_sum) @ at_edges)


def _edge_average(cx: SimplicialComplex2, values: np.ndarray, flux: np.ndarray, scheme: str) -> np.ndarray:
  tail = values[cx.edges[:, 0]]
  head = values[cx.edges[:, 1]]
  if scheme == "upwind":
    return np.where(flux > 0, tail, head)
  if scheme == "centered":
    return 0.5 * (tail + head)
  raise ConfigError(f"unknown convection scheme '{scheme}'")


def boundary_circulation(
  cx: SimplicialComplex2,
  dual: DualMesh,
  velocity: Optional[Callable],
  t: float = 0.0,
  quad_order: int = 5,
) -> np.ndarray:
  """Per boundary vertex, circulation of the velocity along c_in -> v -> c_out (counterclockwise)."""
  gamma = np.zeros(cx.n_vertices)
  if velocity is None:
    return gamma
  b_edges = np.flatnonzero(cx.boundary_edge_flags)
  tri = cx.edge_triangles[b_edges, 0]
  local = np.argmax(cx.edge_of_triangle[tri] == b_edges[:, None], axis=1)
  start = cx.triangles[tri, local]
  end = cx.triangles[tri, (local + 1) % 3]
  coords = cx.vertex_coords
  mid = dual.edge_centers[b_edges]

  def field_at(x, y):
    return velocity(x, y, t)

  np.add.at(gamma, start, _line_integral(field_at, coords[start], mid, quad_order))
  np.add.at(gamma, end, _line_integral(field_at, mid, coords[end], quad_order))
  return gamma


def pointwise_vorticity(ops: DecOperators, psi: np.ndarray, gamma: np.ndarray) -> np.ndarray:
  return (-(ops.stream_laplacian @ psi) + gamma) / ops.dual.dual_cell_areas


def convection_term(
  psi: np.ndarray,
  ops: DecOperators,
  scheme: str = "centered",
  gamma: Optional[np.ndarray] = None,
) -> np.ndarray:
  """Integrated d(i_u d omega) per dual cell: Dd1 (Q * W_e) with Q the dual-edge flux."""
  if gamma is None:
    gamma = np.zeros(ops.cx.n_vertices)
  w = pointwise_vorticity(ops, psi, gamma)
  q = ops.flux_operator @ psi
  return ops.Dd1 @ (q * _edge_average(ops.cx, w, q, scheme))


def buoyancy_term(theta: np.ndarray, ops: DecOperators, params: FluidParams) -> np.ndarray:
  """beta g times the integral of d theta/dx over each dual cell, as the circulation of theta dy."""
  cx = ops.cx
  theta_e = 0.5 * (theta[cx.edges[:, 0]] + theta[cx.edges[:, 1]])
  return params.beta * params.g * (ops.Dd1 @ (theta_e * ops.dual.dual_edge_vectors[:, 1]))


def reconstruct_velocity(
  psi: np.ndarray,
  cx: SimplicialComplex2,
  dual: Optional[DualMesh] = None,
  hodge: Optional[HodgeOperators] = None,
) -> np.ndarray:
  """Per-vertex velocity from the least-squares constant gradient of psi on each triangle."""
  e = cx.edge_vectors[cx.edge_of_triangle]  # (F, 3, 2)
  dpsi = psi[cx.edges[:, 1]] - psi[cx.edges[:, 0]]
  d = dpsi[cx.edge_of_triangle]
  normal = np.einsum("fki,fkj->fij", e, e)
  rhs = np.einsum("fki,fk->fi", e, d)
  grad = np.linalg.solve(normal, rhs[:, :, None])[:, :, 0]
  tri_u = np.stack([grad[:, 1], -grad[:, 0]], axis=1)
  weight = np.repeat(cx.triangle_areas, 3)
  out = np.zeros((cx.n_vertices, 2))
  np.add.at(out, cx.triangles.ravel(), weight[:, None] * np.repeat(tri_u, 3, axis=0))
  total = np.bincount(cx.triangles.ravel(), weights=weight, minlength=cx.n_vertices)
  return out / total[:, None]


# Time integration

@dataclass
class FlowResult:
  psi: np.ndarray
  theta: Optional[np.ndarray]
  steps: int
  time: float
  dt: float
  converged: bool
  residual_history: List[float] = field(default_factory=list)
  error_history: Dict[str, List[float]] = field(default_factory=dict)
  ops: Optional[DecOperators] = None


def default_dt(cx: SimplicialComplex2, params: FluidParams) -> float:
  diff = max(params.nu, params.kappa)
  if diff <= 0:
    raise ConfigError("dt must be set explicitly when nu and kappa are both 0")
  return 0.25 * cx.mean_edge_length ** 2 / diff


def _dirichlet_rows(matrix: sparse.spmatrix, boundary: np.ndarray) -> sparse.csr_matrix:
  keep = sparse.diags((~boundary).astype(float))
  pin = sparse.diags(boundary.astype(float))
  return sparse.csr_matrix(keep @ matrix + pin)


class _FlowStepper:
  def __init__(
    self,
    ops: DecOperators,
    params: FluidParams,
    config: SolverConfig,
    dt: float,
    bc: BoundaryData,
    source: Optional[Callable],
    with_theta: bool,
  ) -> None:
    cx = ops.cx
    self.ops = ops
    self.params = params
    self.config = config
    self.dt = dt
    self.bc = bc
    self.boundary = cx.boundary_vertex_flags
    self.coords = cx.vertex_coords
    self.areas = ops.dual.dual_cell_areas
    lap = ops.stream.laplacian
    self.lap = lap
    self.visc = ops.stream.viscous
    self.lu_psi = _factor(_dirichlet_rows(-lap / dt + params.nu * self.visc, self.boundary), "stream-function matrix")
    self.lu_theta = None
    if with_theta:
      heat = sparse.diags(self.areas / dt) - params.kappa * lap
      self.lu_theta = _factor(_dirichlet_rows(heat, self.boundary), "temperature matrix")
    self.source = source
    self._steady_source = None
    if source is not None:
      self._steady_source = discretize_form(
        lambda x, y: source(x, y, 0.0), 2, "dual", cx, ops.dual, quad_order=config.quad_order
      ).values

  def _boundary_values(self, sampler: Optional[Callable], t: float) -> np.ndarray:
    if sampler is None:
      return np.zeros(int(self.boundary.sum()))
    xy = self.coords[self.boundary]
    return np.asarray(sampler(xy[:, 0], xy[:, 1], t), dtype=float) * np.ones(len(xy))

  def gamma(self, t: float) -> np.ndarray:
    return boundary_circulation(self.ops.cx, self.ops.dual, self.bc.velocity, t, self.config.quad_order)

  def step(self, psi: np.ndarray, theta: Optional[np.ndarray], t: float) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    dt = self.dt
    t_new = t + dt
    gamma_old = self.gamma(t)
    gamma_new = self.gamma(t_new)
    rhs = -(self.lap @ psi) / dt
    rhs -= convection_term(psi, self.ops, self.config.convection_scheme, gamma_old)
    if theta is not None and self.params.beta != 0.0:
      rhs -= buoyancy_term(theta, self.ops, self.params)
    if self.source is not None:
      rhs += self._steady_source
    rhs += self.params.nu * (self.lap @ (gamma_new / self.areas))
    rhs[self.boundary] = self._boundary_values(self.bc.psi, t_new)
    psi_new = self.lu_psi.solve(rhs)

    theta_new = None
    if theta is not None:
      q = self.ops.flux_operator @ psi_new
      theta_e = _edge_average(self.ops.cx, theta, q, self.config.convection_scheme)
      rhs_t = self.areas * theta / dt - self.ops.Dd1 @ (q * theta_e)
      rhs_t[self.boundary] = self._boundary_values(self.bc.theta, t_new)
      theta_new = self.lu_theta.solve(rhs_t)
    return psi_new, theta_new


def _initial(values: Optional[np.ndarray], sampler: Optional[Callable], cx: SimplicialComplex2, t: float) -> np.ndarray:
  if values is not None:
    out = np.array(values, dtype=float)
    if out.shape != (cx.n_vertices,):
      raise ValueError(f"initial field has shape {out.shape}, expected ({cx.n_vertices},)")
    return out
  out = np.zeros(cx.n_vertices)
  if sampler is not None:
    b = cx.boundary_vertex_flags
    xy = cx.vertex_coords[b]
    out[b] = sampler(xy[:, 0], xy[:, 1], t)
  return out


def _march(
  ops: DecOperators,
  params: FluidParams,
  bc: BoundaryData,
  psi: np.ndarray,
  theta: Optional[np.ndarray],
  config: SolverConfig,
  source: Optional[Callable],
  t_end: Optional[float],
  monitor: Optional[Callable[[float, np.ndarray, Optional[np.ndarray]], Dict[str, float]]],
) -> FlowResult:
  cx = ops.cx
  dt = config.dt or default_dt(cx, params)
  n_steps = config.max_steps
  if t_end is not None:
    n_steps = max(1, math.ceil(t_end / dt - 1e-9))
    dt = t_end / n_steps
  stepper = _FlowStepper(ops, params, config, dt, bc, source, theta is not None)
  logger.info(
    "time march: V=%d dt=%.3e steps<=%d nu=%g kappa=%g scheme=%s",
    cx.n_vertices, dt, n_steps, params.nu, params.kappa, config.convection_scheme,
  )

  t = 0.0
  history: List[float] = []
  errors: Dict[str, List[float]] = {}
  converged = False
  step = 0
  for step in range(1, n_steps + 1):
    psi_new, theta_new = stepper.step(psi, theta, t)
    t += dt
    if not np.all(np.isfinite(psi_new)):
      raise NonFinite(step, "psi")
    if theta_new is not None and not np.all(np.isfinite(theta_new)):
      raise NonFinite(step, "theta")
    scale = float(np.max(np.abs(psi_new))) or 1.0
    step_change = float(np.max(np.abs(psi_new - psi))) / scale
    change = step_change / dt
    history.append(change)
    psi, theta = psi_new, theta_new
    if monitor is not None:
      for key, value in monitor(t, psi, theta).items():
        errors.setdefault(key, []).append(value)
    logger.debug("step %d t=%.5f change=%.3e", step, t, change)
    if t_end is None and (change < config.steady_tol or step_change < config.stall_tol):
      converged = True
      break
  if t_end is None and not converged:
    logger.warning("no steady state after %d steps (last change %.3e)", step, history[-1] if history else float("nan"))
  if t_end is not None:
    converged = True
  return FlowResult(
    psi=psi, theta=theta, steps=step, time=t, dt=dt, converged=converged,
    residual_history=history, error_history=errors, ops=ops,
  )


def solve_navier_stokes(
  cx: SimplicialComplex2,
  strategy: str | CenterStrategy,
  params: FluidParams,
  bc: BoundaryData,
  psi0: Optional[np.ndarray] = None,
  config: Optional[SolverConfig] = None,
  source: Optional[Callable] = None,
  t_end: Optional[float] = None,
  ops: Optional[DecOperators] = None,
  monitor: Optional[Callable] = None,
) -> FlowResult:
  """March the stream-function equation to a steady state (or to t_end).

  Interior rows integrate the vorticity equation over dual cells, boundary rows
  pin psi; the tangential boundary velocity enters through the circulation
  along each boundary dual cell.
  """
  config = config or SolverConfig()
  if ops is None:
    ops = build_operators(cx, strategy, config.hodge_kind, config.inverse_mode)
  psi = _initial(psi0, bc.psi, cx, 0.0)
  return _march(ops, params, bc, psi, None, config, source, t_end, monitor)


def solve_boussinesq(
  cx: SimplicialComplex2,
  strategy: str | CenterStrategy,
  params: FluidParams,
  bc: BoundaryData,
  psi0: Optional[np.ndarray] = None,
  theta0: Optional[np.ndarray] = None,
  t_end: float = 1.0,
  config: Optional[SolverConfig] = None,
  ops: Optional[DecOperators] = None,
  monitor: Optional[Callable] = None,
) -> FlowResult:
  config = config or SolverConfig()
  if ops is None:
    ops = build_operators(cx, strategy, config.hodge_kind, config.inverse_mode)
  psi = _initial(psi0, bc.psi, cx, 0.0)
  theta = _initial(theta0, bc.theta, cx, 0.0)
  return _march(ops, params, bc, psi, theta, config, None, t_end, monitor)
