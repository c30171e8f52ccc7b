"""
Dual meshes built from a choice of triangle and edge centers.

The dual edge e* of a primal edge e points along e rotated by +90 degrees.
Each triangle T contributes one half dual edge per side, the segment
between the edge center c_e and the triangle center c_T, carried with the
incidence sign of e in the boundary of T so that it follows that direction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import ConfigError, DegenerateTriangle
from .mesh_core import SimplicialComplex2
from .models import DualReport

logger = logging.getLogger("dual_mesh")

BUILTIN_STRATEGIES = ("circumcentric", "barycentric", "incentric")
_COLLINEAR_TOL = 1e-14


# Point centers of one triangle

def _check_triangle(p, q, r) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
  p, q, r = (np.asarray(v, dtype=float) for v in (p, q, r))
  a, b = q - p, r - p
  scale = max(a @ a, b @ b, (r - q) @ (r - q))
  if abs(a[0] * b[1] - a[1] * b[0]) <= _COLLINEAR_TOL * scale:
    raise DegenerateTriangle(f"collinear points {p.tolist()}, {q.tolist()}, {r.tolist()}")
  return p, q, r


def circumcenter(p, q, r) -> np.ndarray:
  p, q, r = _check_triangle(p, q, r)
  return _circumcenters(np.array([[p, q, r]]))[0]


def barycenter(p, q, r) -> np.ndarray:
  p, q, r = _check_triangle(p, q, r)
  return (p + q + r) / 3.0


def incenter(p, q, r) -> np.ndarray:
  p, q, r = _check_triangle(p, q, r)
  return _incenters(np.array([[p, q, r]]))[0]


# Vectorized over (F, 3, 2) triangle vertex arrays

def _circumcenters(pts: np.ndarray) -> np.ndarray:
  p = pts[:, 0]
  a = pts[:, 1] - p
  b = pts[:, 2] - p
  d = 2.0 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
  a2 = np.einsum("ij,ij->i", a, a)
  b2 = np.einsum("ij,ij->i", b, b)
  ux = (b[:, 1] * a2 - a[:, 1] * b2) / d
  uy = (a[:, 0] * b2 - b[:, 0] * a2) / d
  return p + np.stack([ux, uy], axis=1)


def _barycenters(pts: np.ndarray) -> np.ndarray:
  return pts.mean(axis=1)


def _incenters(pts: np.ndarray) -> np.ndarray:
  # weight of each vertex = length of the opposite side
  w = np.stack(
    [np.linalg.norm(pts[:, (i + 2) % 3] - pts[:, (i + 1) % 3], axis=1) for i in range(3)], axis=1
  )
  return np.einsum("fi,fij->fj", w, pts) / w.sum(axis=1)[:, None]


def _midpoints(tails: np.ndarray, heads: np.ndarray) -> np.ndarray:
  return 0.5 * (tails + heads)


@dataclass(frozen=True)
class CenterStrategy:
  kind: str
  triangle_center_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
  edge_center_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

  def triangle_centers(self, pts: np.ndarray) -> np.ndarray:
    if self.kind == "circumcentric":
      return _circumcenters(pts)
    if self.kind == "barycentric":
      return _barycenters(pts)
    if self.kind == "incentric":
      return _incenters(pts)
    if self.triangle_center_fn is None:
      raise ConfigError(f"custom strategy '{self.kind}' has no triangle_center_fn")
    return np.asarray(self.triangle_center_fn(pts), dtype=float)

  def edge_centers(self, tails: np.ndarray, heads: np.ndarray) -> np.ndarray:
    if self.edge_center_fn is None:
      return _midpoints(tails, heads)
    centers = np.asarray(self.edge_center_fn(tails, heads), dtype=float)
    d = heads - tails
    t = np.einsum("ij,ij->i", centers - tails, d) / np.einsum("ij,ij->i", d, d)
    off = np.abs(d[:, 0] * (centers - tails)[:, 1] - d[:, 1] * (centers - tails)[:, 0])
    if np.any(t <= 0.0) or np.any(t >= 1.0) or np.any(off > 1e-12 * np.einsum("ij,ij->i", d, d)):
      raise ConfigError("custom edge centers must lie strictly inside their edge")
    return centers

  @classmethod
  def from_weights(cls, w0: float, w1: float, w2: float) -> "CenterStrategy":
    """Custom strategy placing c_T at fixed barycentric weights of the triangle."""
    w = np.array([w0, w1, w2], dtype=float)
    w = w / w.sum()

    def center(pts: np.ndarray) -> np.ndarray:
      return np.einsum("i,fij->fj", w, pts)

    return cls(kind="custom", triangle_center_fn=center)


def parse_strategy(token: str | CenterStrategy) -> CenterStrategy:
  if isinstance(token, CenterStrategy):
    return token
  name = token.strip().lower()
  if name not in BUILTIN_STRATEGIES:
    raise ConfigError(f"unknown center strategy '{token}' (expected one of {', '.join(BUILTIN_STRATEGIES)})")
  return CenterStrategy(kind=name)


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
  return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True)
class DualMesh:
  strategy: CenterStrategy
  triangle_centers: np.ndarray  # (F, 2)
  edge_centers: np.ndarray  # (E, 2)
  half_vectors: np.ndarray  # (F, 3, 2), oriented along the dual direction
  half_lengths: np.ndarray  # (F, 3), signed
  dual_edge_vectors: np.ndarray  # (E, 2)
  dual_edge_lengths: np.ndarray  # (E,), sum of |half| lengths
  signed_dual_lengths: np.ndarray  # (E,), sum of signed half lengths
  kite_areas: np.ndarray  # (F, 3), signed, part of the dual cell of triangles[:, i]
  dual_cell_areas: np.ndarray  # (V,)

  @property
  def dual_orientation_signs(self) -> np.ndarray:
    return np.sign(self.half_lengths)


def build_dual(cx: SimplicialComplex2, strategy: str | CenterStrategy) -> DualMesh:
  strategy = parse_strategy(strategy)
  coords = cx.vertex_coords
  pts = coords[cx.triangles]
  ct = strategy.triangle_centers(pts)
  ce = strategy.edge_centers(coords[cx.edges[:, 0]], coords[cx.edges[:, 1]])

  eot = cx.edge_of_triangle
  half = cx.edge_sign[:, :, None] * (ct[:, None, :] - ce[eot])
  lengths = np.linalg.norm(half, axis=2)
  half_lengths = lengths * np.sign(_cross(cx.edge_vectors[eot], half))

  flat_e = eot.ravel()
  n_e = cx.n_edges
  dual_vectors = np.stack(
    [np.bincount(flat_e, weights=half[:, :, k].ravel(), minlength=n_e) for k in range(2)], axis=1
  )
  dual_lengths = np.bincount(flat_e, weights=lengths.ravel(), minlength=n_e)
  signed = np.bincount(flat_e, weights=half_lengths.ravel(), minlength=n_e)

  # kite of vertex i: (v, c(edge v->next), c_T, c(edge prev->v)), shoelace
  kites = np.empty((cx.n_triangles, 3))
  for i in range(3):
    v = pts[:, i]
    c_next = ce[eot[:, i]]
    c_prev = ce[eot[:, (i + 2) % 3]]
    kites[:, i] = 0.5 * (_cross(c_next - v, ct - v) + _cross(ct - v, c_prev - v))
  cell_areas = np.bincount(cx.triangles.ravel(), weights=kites.ravel(), minlength=cx.n_vertices)

  logger.debug("built %s dual: %d dual cells", strategy.kind, cx.n_vertices)
  return DualMesh(
    strategy=strategy,
    triangle_centers=ct,
    edge_centers=ce,
    half_vectors=half,
    half_lengths=half_lengths,
    dual_edge_vectors=dual_vectors,
    dual_edge_lengths=dual_lengths,
    signed_dual_lengths=signed,
    kite_areas=kites,
    dual_cell_areas=cell_areas,
  )


def dual_angles(cx: SimplicialComplex2, dual: DualMesh) -> Tuple[np.ndarray, np.ndarray]:
  """cos and sin of the angle from each primal edge to its half dual edges, (F, 3).

  Zero-length halves have no angle and come back as nan.
  """
  e = cx.edge_vectors[cx.edge_of_triangle]
  h = dual.half_vectors
  denom = np.linalg.norm(e, axis=2) * np.linalg.norm(h, axis=2)
  with np.errstate(invalid="ignore", divide="ignore"):
    cos = np.einsum("fij,fij->fi", e, h) / denom
    sin = _cross(e, h) / denom
  cos[denom == 0] = np.nan
  sin[denom == 0] = np.nan
  return cos, sin


def validate_dual(cx: SimplicialComplex2, dual: DualMesh, min_length_ratio: float = 1e-6) -> DualReport:
  threshold = min_length_ratio * cx.mean_edge_length
  short_edges = np.flatnonzero(dual.dual_edge_lengths < threshold)
  singular = np.flatnonzero(np.any(np.abs(dual.half_lengths) < threshold, axis=1))
  report = DualReport(
    strategy=dual.strategy.kind,
    short_edges=short_edges.tolist(),
    singular_triangles=singular.tolist(),
  )
  if not report.ok:
    logger.debug(
      "%s dual: %d short dual edges, %d singular triangles",
      dual.strategy.kind, len(report.short_edges), len(report.singular_triangles),
    )
  return report


def is_well_centered(cx: SimplicialComplex2) -> bool:
  """True when every circumcenter lies strictly inside its triangle."""
  dual = build_dual(cx, "circumcentric")
  return bool(np.all(dual.half_lengths > 1e-12 * cx.mean_edge_length))
