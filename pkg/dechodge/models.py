from __future__ import annotations

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator


Strategy = Literal["circumcentric", "barycentric", "incentric"]
InverseMode = Literal["elementwise", "direct-solve"]
HodgeKind = Literal["analytic", "diagonal"]
ConvectionScheme = Literal["centered", "upwind"]
MeshKind = Literal["right", "acute", "unstructured", "compressed", "perturbed", "gmsh"]


class MeshStats(BaseModel):
  n_vertices: int
  n_edges: int
  n_triangles: int
  mean_edge_length: float
  min_area: float
  max_area: float
  min_angle: float  # degrees
  max_angle: float  # degrees
  non_delaunay_ratio: Optional[float] = None


class DualReport(BaseModel):
  strategy: str
  short_edges: List[int] = Field(default_factory=list)
  singular_triangles: List[int] = Field(default_factory=list)

  @property
  def ok(self) -> bool:
    return not self.short_edges and not self.singular_triangles


class MeshRecipe(BaseModel):
  kind: MeshKind
  n: int = 11
  domain: Tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)
  target_non_delaunay_ratio: float = 0.0
  seed: int = 0
  quality_floor: Optional[float] = None
  path: Optional[str] = None  # gmsh input

  @field_validator("n")
  @classmethod
  def _check_n(cls, v: int) -> int:
    if v < 2:
      raise ValueError("n must be >= 2")
    return v

  @field_validator("target_non_delaunay_ratio")
  @classmethod
  def _check_ratio(cls, v: float) -> float:
    if not 0.0 <= v < 1.0:
      raise ValueError("target_non_delaunay_ratio must lie in [0, 1)")
    return v

  @field_validator("domain")
  @classmethod
  def _check_domain(cls, v: Tuple[float, float, float, float]) -> Tuple[float, float, float, float]:
    x0, y0, x1, y1 = v
    if not (x1 > x0 and y1 > y0):
      raise ValueError("domain must be x0,y0,x1,y1 with x1>x0 and y1>y0")
    return v


class FluidParams(BaseModel):
  rho: float = 1.0
  nu: float = 1.0
  kappa: float = 0.0
  beta: float = 0.0
  g: float = 10.0  # acts along -y

  @field_validator("rho")
  @classmethod
  def _check_rho(cls, v: float) -> float:
    if v <= 0:
      raise ValueError("rho must be > 0")
    return v

  @field_validator("nu", "kappa")
  @classmethod
  def _check_nonneg(cls, v: float) -> float:
    if v < 0:
      raise ValueError("nu and kappa must be >= 0")
    return v


class SolverConfig(BaseModel):
  strategy: Strategy = "barycentric"
  hodge_kind: HodgeKind = "analytic"
  inverse_mode: InverseMode = "elementwise"
  convection_scheme: ConvectionScheme = "centered"
  dt: Optional[float] = None  # None -> 0.25 * dx_mean**2 / max(nu, kappa)
  max_steps: int = 20000
  steady_tol: float = 1e-8  # on max|d psi| / (dt * max|psi|)
  stall_tol: float = 1e-9  # on max|d psi| / max|psi| per step, above the round-off floor
  quad_order: int = 5
  norm_weight: Literal["unit", "area"] = "unit"
  workers: int = 1
  linear_solver: Literal["lu"] = "lu"

  @field_validator("dt")
  @classmethod
  def _check_dt(cls, v: Optional[float]) -> Optional[float]:
    if v is not None and v <= 0:
      raise ValueError("dt must be > 0")
    return v

  @field_validator("steady_tol", "stall_tol")
  @classmethod
  def _check_tol(cls, v: float) -> float:
    if v <= 0:
      raise ValueError("tolerances must be > 0")
    return v

  @field_validator("max_steps", "quad_order", "workers")
  @classmethod
  def _check_positive(cls, v: int) -> int:
    if v < 1:
      raise ValueError("must be >= 1")
    return v


class TravelingWaveParams(BaseModel):
  """Constants of a traveling wave reference solution, xi = a*x + b*y + c*t."""

  a: float = 1.0
  b: float = 1.0
  c: float = -1.0
  w: float = 2.0
  u1: float = 0.0
  theta1: float = 1.0
  x0: float = 0.5

  @model_validator(mode="after")
  def _check_constraints(self) -> "TravelingWaveParams":
    if self.b == 0:
      raise ValueError("traveling wave requires b != 0")
    if self.w == -self.c:
      raise ValueError("traveling wave requires w != -c")
    return self

  @property
  def lam(self) -> float:
    return (self.c + self.w) / (self.a ** 2 + self.b ** 2)


class CaseReport(BaseModel):
  case_index: int = 0
  mesh_kind: str
  n: int
  dx_mean: float
  strategy: str
  problem: str
  err_psi: Optional[float] = None
  err_u: Optional[float] = None
  err_theta: Optional[float] = None
  steps: int = 0
  wall_time: float = 0.0
  non_delaunay_ratio: Optional[float] = None
  target_ratio: Optional[float] = None
  converged: bool = True
