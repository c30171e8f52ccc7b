"""
Oriented 2D simplicial complexes, cochains and discrete exterior derivatives.

Local edge i of triangle (a, b, c) is (a, b), (b, c), (c, a) for i = 0, 1, 2,
i.e. the counterclockwise boundary of the triangle.  edge_sign[t, i] is +1
when the global edge has the same orientation as that local edge.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import sparse

from .errors import (
  DegenerateTriangle,
  DuplicateTriangle,
  InvalidComplex,
  MissingDualMesh,
  NonManifoldEdge,
)
from .models import MeshStats

if TYPE_CHECKING:
  from .dual_mesh import DualMesh

logger = logging.getLogger("mesh_core")

AREA_TOL = 1e-14
CARRIERS = ("primal", "dual")


@dataclass(frozen=True)
class SimplicialComplex2:
  vertex_coords: np.ndarray  # (V, 2)
  edges: np.ndarray  # (E, 2) tail, head
  triangles: np.ndarray  # (F, 3) counterclockwise
  edge_of_triangle: np.ndarray  # (F, 3)
  edge_sign: np.ndarray  # (F, 3) +-1
  boundary1: sparse.csr_matrix  # V x E
  boundary2: sparse.csr_matrix  # E x F
  boundary_vertex_flags: np.ndarray
  boundary_edge_flags: np.ndarray
  edge_triangles: np.ndarray  # (E, 2), -1 where absent
  edge_vectors: np.ndarray
  edge_lengths: np.ndarray
  triangle_areas: np.ndarray

  @property
  def n_vertices(self) -> int:
    return len(self.vertex_coords)

  @property
  def n_edges(self) -> int:
    return len(self.edges)

  @property
  def n_triangles(self) -> int:
    return len(self.triangles)

  @property
  def mean_edge_length(self) -> float:
    return float(self.edge_lengths.mean())

  @property
  def total_area(self) -> float:
    return float(self.triangle_areas.sum())

  @property
  def interior_vertices(self) -> np.ndarray:
    return np.flatnonzero(~self.boundary_vertex_flags)

  def count(self, degree: int, carrier: str = "primal") -> int:
    sizes = (self.n_vertices, self.n_edges, self.n_triangles)
    if carrier == "primal":
      return sizes[degree]
    return sizes[2 - degree]


@dataclass
class Cochain:
  degree: int
  carrier: str
  values: np.ndarray

  def check(self, cx: SimplicialComplex2) -> "Cochain":
    expected = cx.count(self.degree, self.carrier)
    if self.values.shape != (expected,):
      raise InvalidComplex(
        f"{self.carrier} {self.degree}-cochain has {self.values.shape} values, expected {expected}"
      )
    return self


def signed_areas(coords: np.ndarray, triangles: np.ndarray) -> np.ndarray:
  p0 = coords[triangles[:, 0]]
  d1 = coords[triangles[:, 1]] - p0
  d2 = coords[triangles[:, 2]] - p0
  return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _local_pairs(triangles: np.ndarray) -> np.ndarray:
  return np.stack(
    [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1
  )  # (F, 3, 2)


def build_complex(
  vertex_coords: Sequence,
  triangle_vertex_triples: Sequence,
  edges: Optional[Sequence] = None,
) -> SimplicialComplex2:
  """Build and validate an oriented complex.

  Edges are derived with the lower vertex index as tail and sorted, unless an
  explicit oriented edge list is given; then its order and orientation are kept.
  """
  coords = np.asarray(vertex_coords, dtype=float)
  tris = np.asarray(triangle_vertex_triples, dtype=np.int64)
  if coords.ndim != 2 or coords.shape[1] != 2:
    raise InvalidComplex("vertex coordinates must be an (V, 2) array")
  if len(coords) < 3:
    raise InvalidComplex("a complex needs at least 3 vertices")
  if tris.ndim != 2 or tris.shape[1] != 3 or len(tris) == 0:
    raise InvalidComplex("triangles must be a non-empty (F, 3) array")
  if tris.min() < 0 or tris.max() >= len(coords):
    raise InvalidComplex(f"triangle vertex index out of range [0, {len(coords)})")

  srt = np.sort(tris, axis=1)
  if np.any((srt[:, 0] == srt[:, 1]) | (srt[:, 1] == srt[:, 2])):
    bad = int(np.flatnonzero((srt[:, 0] == srt[:, 1]) | (srt[:, 1] == srt[:, 2]))[0])
    raise DegenerateTriangle(f"triangle {bad} repeats a vertex")
  uniq, counts = np.unique(srt, axis=0, return_counts=True)
  if len(uniq) != len(tris):
    raise DuplicateTriangle(f"duplicate triangle {uniq[counts > 1][0].tolist()}")

  extent = coords.max(axis=0) - coords.min(axis=0)
  tol = AREA_TOL * float(extent @ extent)
  areas = signed_areas(coords, tris)
  small = np.flatnonzero(np.abs(areas) < tol)
  if len(small):
    raise DegenerateTriangle(f"triangle {int(small[0])} has area {areas[small[0]]:.3e}")
  tris = tris.copy()
  flip = areas < 0
  tris[flip] = tris[flip][:, [0, 2, 1]]
  areas = np.abs(areas)

  used = np.zeros(len(coords), dtype=bool)
  used[tris.ravel()] = True
  if not used.all():
    raise InvalidComplex(f"vertex {int(np.flatnonzero(~used)[0])} belongs to no triangle")

  pairs = _local_pairs(tris)
  flat = pairs.reshape(-1, 2)
  if edges is None:
    keys = np.sort(flat, axis=1)
    edge_arr, inverse = np.unique(keys, axis=0, return_inverse=True)
    edge_of_triangle = inverse.reshape(-1, 3)
  else:
    edge_arr = np.asarray(edges, dtype=np.int64)
    lookup = {}
    for idx, (a, b) in enumerate(edge_arr.tolist()):
      key = (min(a, b), max(a, b))
      if a == b or key in lookup:
        raise InvalidComplex(f"edge {idx} ({a}, {b}) is degenerate or repeated")
      lookup[key] = idx
    try:
      edge_of_triangle = np.array(
        [lookup[(min(a, b), max(a, b))] for a, b in flat.tolist()], dtype=np.int64
      ).reshape(-1, 3)
    except KeyError as exc:
      raise InvalidComplex(f"triangle edge {exc.args[0]} missing from the edge list") from exc
  edge_sign = np.where(edge_arr[edge_of_triangle, 0] == pairs[:, :, 0], 1, -1)

  n_edges = len(edge_arr)
  n_tris = len(tris)
  owners = np.bincount(edge_of_triangle.ravel(), minlength=n_edges)
  if np.any(owners > 2):
    raise NonManifoldEdge(f"edge {int(np.flatnonzero(owners > 2)[0])} is shared by more than 2 triangles")
  if np.any(owners == 0):
    raise InvalidComplex(f"edge {int(np.flatnonzero(owners == 0)[0])} belongs to no triangle")
  sign_sum = np.bincount(edge_of_triangle.ravel(), weights=edge_sign.ravel(), minlength=n_edges)
  folded = np.flatnonzero((owners == 2) & (sign_sum != 0))
  if len(folded):
    raise NonManifoldEdge(f"edge {int(folded[0])} is traversed twice in the same direction (folded mesh)")

  tri_ids = np.repeat(np.arange(n_tris), 3)
  boundary2 = sparse.csr_matrix(
    (edge_sign.ravel().astype(np.int64), (edge_of_triangle.ravel(), tri_ids)), shape=(n_edges, n_tris)
  )
  cols = np.arange(n_edges)
  boundary1 = sparse.csr_matrix(
    (
      np.concatenate([-np.ones(n_edges, dtype=np.int64), np.ones(n_edges, dtype=np.int64)]),
      (np.concatenate([edge_arr[:, 0], edge_arr[:, 1]]), np.concatenate([cols, cols])),
    ),
    shape=(len(coords), n_edges),
  )

  edge_triangles = -np.ones((n_edges, 2), dtype=np.int64)
  order = np.argsort(edge_of_triangle.ravel(), kind="stable")
  sorted_edges = edge_of_triangle.ravel()[order]
  slot = np.zeros(len(order), dtype=np.int64)
  slot[1:] = sorted_edges[1:] == sorted_edges[:-1]
  edge_triangles[sorted_edges, slot] = tri_ids[order]

  boundary_edge_flags = owners == 1
  boundary_vertex_flags = np.zeros(len(coords), dtype=bool)
  boundary_vertex_flags[edge_arr[boundary_edge_flags].ravel()] = True

  vectors = coords[edge_arr[:, 1]] - coords[edge_arr[:, 0]]
  cx = SimplicialComplex2(
    vertex_coords=coords,
    edges=edge_arr,
    triangles=tris,
    edge_of_triangle=edge_of_triangle,
    edge_sign=edge_sign,
    boundary1=boundary1,
    boundary2=boundary2,
    boundary_vertex_flags=boundary_vertex_flags,
    boundary_edge_flags=boundary_edge_flags,
    edge_triangles=edge_triangles,
    edge_vectors=vectors,
    edge_lengths=np.hypot(vectors[:, 0], vectors[:, 1]),
    triangle_areas=areas,
  )
  logger.debug("built complex V=%d E=%d F=%d", cx.n_vertices, cx.n_edges, cx.n_triangles)
  return cx


def exterior_derivative_matrix(cx: SimplicialComplex2, degree: int, carrier: str = "primal") -> sparse.csr_matrix:
  """d on primal or dual cochains.

  Primal: D0 = boundary1^T, D1 = boundary2^T.  Dual: D_k = (-1)^k (primal D_{1-k})^T,
  which makes the dual 2-cells counterclockwise around their primal vertex.
  """
  if degree not in (0, 1) or carrier not in CARRIERS:
    raise ValueError(f"no exterior derivative for degree={degree!r} carrier={carrier!r}")
  if carrier == "primal":
    mat = cx.boundary1.T if degree == 0 else cx.boundary2.T
  else:
    mat = cx.boundary2 if degree == 0 else -cx.boundary1
  return sparse.csr_matrix(mat)


def pairing(cochain: Cochain | np.ndarray, chain: np.ndarray) -> float:
  values = cochain.values if isinstance(cochain, Cochain) else np.asarray(cochain)
  return float(np.dot(values, np.asarray(chain, dtype=float)))


# Quadrature

def _line_integral(form: Callable, start: np.ndarray, end: np.ndarray, order: int) -> np.ndarray:
  nodes, weights = leggauss(order)
  t = 0.5 * (nodes + 1.0)
  w = 0.5 * weights
  d = end - start
  total = np.zeros(len(start))
  for tk, wk in zip(t, w):
    pts = start + tk * d
    p, q = form(pts[:, 0], pts[:, 1])
    total += wk * (np.asarray(p) * d[:, 0] + np.asarray(q) * d[:, 1])
  return total


def _triangle_integral(density: Callable, p0: np.ndarray, p1: np.ndarray, p2: np.ndarray, order: int) -> np.ndarray:
  """Signed integral of a density over triangles (p0, p1, p2) by collapsed Gauss-Legendre."""
  nodes, weights = leggauss(order)
  t = 0.5 * (nodes + 1.0)
  w = 0.5 * weights
  d1 = p1 - p0
  d2 = p2 - p0
  jac = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
  total = np.zeros(len(p0))
  for u, wu in zip(t, w):
    for v, wv in zip(t, w):
      xi, eta = u, v * (1.0 - u)
      pts = p0 + xi * d1 + eta * d2
      total += wu * wv * (1.0 - u) * np.asarray(density(pts[:, 0], pts[:, 1]), dtype=float)
  return total * jac


def discretize_form(
  sampler: Callable,
  degree: int,
  carrier: str,
  cx: SimplicialComplex2,
  dual: Optional["DualMesh"] = None,
  quad_order: int = 5,
) -> Cochain:
  """Integrate a smooth form on primal simplices or dual cells.

  sampler(x, y) returns: the value for degree 0, the pair (P, Q) of
  P dx + Q dy for degree 1, the density f of f dx^dy for degree 2.
  """
  if carrier not in CARRIERS or degree not in (0, 1, 2):
    raise ValueError(f"cannot discretize degree={degree!r} on carrier={carrier!r}")
  if quad_order < 1:
    raise ValueError("quad_order must be >= 1")
  if carrier == "dual" and dual is None:
    raise MissingDualMesh("a dual mesh is required for dual cochains")

  coords = cx.vertex_coords
  tris = cx.triangles
  if carrier == "primal":
    if degree == 0:
      values = np.asarray(sampler(coords[:, 0], coords[:, 1]), dtype=float)
    elif degree == 1:
      values = _line_integral(sampler, coords[cx.edges[:, 0]], coords[cx.edges[:, 1]], quad_order)
    else:
      values = _triangle_integral(sampler, coords[tris[:, 0]], coords[tris[:, 1]], coords[tris[:, 2]], quad_order)
  else:
    ct = dual.triangle_centers
    ce = dual.edge_centers
    if degree == 0:
      values = np.asarray(sampler(ct[:, 0], ct[:, 1]), dtype=float)
    elif degree == 1:
      # each half dual edge runs c_e -> c_T, oriented by the incidence sign
      e_idx = cx.edge_of_triangle.ravel()
      t_idx = np.repeat(np.arange(cx.n_triangles), 3)
      halves = _line_integral(sampler, ce[e_idx], ct[t_idx], quad_order) * cx.edge_sign.ravel()
      values = np.bincount(e_idx, weights=halves, minlength=cx.n_edges)
    else:
      values = np.zeros(cx.n_vertices)
      for i in range(3):
        v = coords[tris[:, i]]
        c_next = ce[cx.edge_of_triangle[:, i]]
        c_prev = ce[cx.edge_of_triangle[:, (i + 2) % 3]]
        part = _triangle_integral(sampler, v, c_next, ct, quad_order)
        part += _triangle_integral(sampler, v, ct, c_prev, quad_order)
        np.add.at(values, tris[:, i], part)
  if values.shape == ():
    values = np.full(cx.count(degree, carrier), float(values))
  return Cochain(degree, carrier, values).check(cx)


# Diagnostics and IO

def triangle_angles(cx: SimplicialComplex2) -> np.ndarray:
  """Interior angles in degrees, (F, 3), angle i at vertex triangles[:, i]."""
  p = cx.vertex_coords[cx.triangles]
  out = np.empty((cx.n_triangles, 3))
  for i in range(3):
    a = p[:, (i + 1) % 3] - p[:, i]
    b = p[:, (i + 2) % 3] - p[:, i]
    cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
    out[:, i] = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
  return out


def mesh_stats(cx: SimplicialComplex2) -> MeshStats:
  angles = triangle_angles(cx)
  return MeshStats(
    n_vertices=cx.n_vertices,
    n_edges=cx.n_edges,
    n_triangles=cx.n_triangles,
    mean_edge_length=cx.mean_edge_length,
    min_area=float(cx.triangle_areas.min()),
    max_area=float(cx.triangle_areas.max()),
    min_angle=float(angles.min()),
    max_angle=float(angles.max()),
  )


def write_mesh(cx: SimplicialComplex2, path: str | Path) -> None:
  lines = [f"{cx.n_vertices} {cx.n_edges} {cx.n_triangles}"]
  lines += [f"{x:.17g} {y:.17g}" for x, y in cx.vertex_coords.tolist()]
  lines += [f"{a} {b} {c}" for a, b, c in cx.triangles.tolist()]
  Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
  logger.info("Wrote mesh V=%d F=%d to %s", cx.n_vertices, cx.n_triangles, path)


def parse_mesh(text: str) -> SimplicialComplex2:
  """Parse the native 'V E_hint F' text format."""
  tokens = text.split()
  try:
    n_v, _e_hint, n_f = (int(t) for t in tokens[:3])
    body = np.array(tokens[3:3 + 2 * n_v + 3 * n_f], dtype=float)
  except ValueError as exc:
    raise InvalidComplex(f"malformed mesh text: {exc}") from exc
  if n_v < 0 or n_f < 0 or len(body) != 2 * n_v + 3 * n_f:
    raise InvalidComplex("mesh text is truncated")
  coords = body[:2 * n_v].reshape(n_v, 2)
  tris = body[2 * n_v:].reshape(n_f, 3)
  if not np.all(tris == np.round(tris)):
    raise InvalidComplex("triangle indices must be integers")
  return build_complex(coords, tris.astype(np.int64))


def read_mesh(path: str | Path) -> SimplicialComplex2:
  cx = parse_mesh(Path(path).read_text(encoding="utf-8"))
  logger.info("Read mesh V=%d F=%d from %s", cx.n_vertices, cx.n_triangles, path)
  return cx
