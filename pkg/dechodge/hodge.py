"""
Discrete Hodge operators.

H1 is assembled from one 3x3 matrix per triangle that is exact for constant
1-forms whatever the position of the dual centers.  With local edges e_i
(counterclockwise), half dual edges h_i and k the third index:

  M[i, i] = (e_i x h_i) / |e_i|^2
  M[i, j] = (e_i . h_i) / |e_i|^2 * (e_i . e_k) / (e_j x e_k)

The diagonal Hodge keeps only |h_i| / |e_i| and is exact only when every
h_i is perpendicular to e_i (circumcentric duals).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import io as sio
from scipy import sparse
from scipy.sparse.linalg import splu

from .dual_mesh import DualMesh
from .errors import ConfigError, DegenerateTriangle, SingularDecomposition, SingularGlobalHodge, SingularLocalHodge
from .mesh_core import SimplicialComplex2, discretize_form

logger = logging.getLogger("hodge")

COND_LIMIT = 1e12
HODGE_KINDS = ("analytic", "diagonal")
INVERSE_MODES = ("elementwise", "direct-solve")


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
  return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
  return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]


def _local_matrices_ccw(e: np.ndarray, h: np.ndarray) -> np.ndarray:
  """Analytic local matrices in counterclockwise local orientation.

  e, h: (F, 3, 2) local edge vectors and half dual edges (c_T - c_e).
  """
  n = len(e)
  e2 = _dot(e, e)
  m = np.zeros((n, 3, 3))
  for i in range(3):
    j, k = (i + 1) % 3, (i + 2) % 3
    ei, ej, ek = e[:, i], e[:, j], e[:, k]
    along = _dot(ei, h[:, i]) / e2[:, i]
    jk = _cross(ej, ek)
    scale = np.sqrt(e2[:, j] * e2[:, k])
    if np.any(np.abs(jk) <= 1e-14 * scale):
      bad = int(np.flatnonzero(np.abs(jk) <= 1e-14 * scale)[0])
      raise SingularDecomposition(f"edges of triangle {bad} are collinear")
    m[:, i, i] = _cross(ei, h[:, i]) / e2[:, i]
    m[:, i, j] = along * _dot(ei, ek) / jk
    m[:, i, k] = along * _dot(ei, ej) / _cross(ek, ej)
  return m


def _local_frames(cx: SimplicialComplex2, dual: DualMesh):
  coords = cx.vertex_coords
  tris = cx.triangles
  e = np.stack([coords[tris[:, (i + 1) % 3]] - coords[tris[:, i]] for i in range(3)], axis=1)
  h = dual.triangle_centers[:, None, :] - dual.edge_centers[cx.edge_of_triangle]
  return e, h


def local_hodge_matrices(cx: SimplicialComplex2, dual: DualMesh, kind: str = "analytic") -> np.ndarray:
  """(F, 3, 3) local H1 blocks acting on globally oriented cochains."""
  if kind not in HODGE_KINDS:
    raise ConfigError(f"unknown hodge kind '{kind}'")
  if kind == "diagonal":
    ratios = dual.half_lengths / cx.edge_lengths[cx.edge_of_triangle]
    m = np.zeros((cx.n_triangles, 3, 3))
    idx = np.arange(3)
    m[:, idx, idx] = ratios
    return m
  e, h = _local_frames(cx, dual)
  m = _local_matrices_ccw(e, h)
  s = cx.edge_sign.astype(float)
  return s[:, :, None] * m * s[:, None, :]


@dataclass
class LocalHodge1:
  triangle: int
  matrix: np.ndarray  # (3, 3)
  edges: np.ndarray  # local -> global edge ids


def local_hodge1(
  triangle_points,
  center,
  edge_centers,
  signs=(1, 1, 1),
  triangle: int = -1,
  edges=(0, 1, 2),
) -> LocalHodge1:
  """Local matrix of one triangle; edge i runs from point i to point i+1."""
  pts = np.asarray(triangle_points, dtype=float)
  d1, d2 = pts[1] - pts[0], pts[2] - pts[0]
  scale = max(d1 @ d1, d2 @ d2)
  if abs(_cross(d1, d2)) <= 1e-14 * scale:
    raise DegenerateTriangle(f"triangle {triangle} is degenerate")
  if _cross(d1, d2) < 0:
    raise DegenerateTriangle(f"triangle {triangle} is not counterclockwise")
  e = np.stack([pts[(i + 1) % 3] - pts[i] for i in range(3)])[None]
  h = (np.asarray(center, dtype=float)[None, :] - np.asarray(edge_centers, dtype=float))[None]
  s = np.asarray(signs, dtype=float)
  m = s[:, None] * _local_matrices_ccw(e, h)[0] * s[None, :]
  return LocalHodge1(triangle=triangle, matrix=m, edges=np.asarray(edges))


def local_hodge1_trig(triangle_points, center, edge_centers) -> np.ndarray:
  """Angle-based evaluation of the same matrix: |h|/|e| (sin, a cos, a cos)."""
  pts = np.asarray(triangle_points, dtype=float)
  e = np.stack([pts[(i + 1) % 3] - pts[i] for i in range(3)])
  h = np.asarray(center, dtype=float)[None, :] - np.asarray(edge_centers, dtype=float)
  m = np.zeros((3, 3))
  for i in range(3):
    j, k = (i + 1) % 3, (i + 2) % 3
    theta = np.arctan2(_cross(e[i], h[i]), _dot(e[i], h[i]))
    ratio = np.linalg.norm(h[i]) / np.linalg.norm(e[i])
    a_ij = _dot(e[i], e[k]) / _cross(e[j], e[k])
    a_ik = _dot(e[i], e[j]) / _cross(e[k], e[j])
    m[i, i] = ratio * np.sin(theta)
    m[i, j] = ratio * a_ij * np.cos(theta)
    m[i, k] = ratio * a_ik * np.cos(theta)
  return m


def _scatter(cx: SimplicialComplex2, blocks: np.ndarray) -> sparse.csr_matrix:
  eot = cx.edge_of_triangle
  rows = np.repeat(eot[:, :, None], 3, axis=2).ravel()
  cols = np.repeat(eot[:, None, :], 3, axis=1).ravel()
  mat = sparse.coo_matrix((blocks.ravel(), (rows, cols)), shape=(cx.n_edges, cx.n_edges)).tocsr()
  mat.sum_duplicates()
  mat.eliminate_zeros()
  return mat


def assemble_hodge1(
  cx: SimplicialComplex2,
  dual: DualMesh,
  kind: str = "analytic",
  blocks: Optional[np.ndarray] = None,
) -> sparse.csr_matrix:
  if blocks is None:
    blocks = local_hodge_matrices(cx, dual, kind)
  return _scatter(cx, blocks)


def assemble_hodge0(cx: SimplicialComplex2, dual: DualMesh) -> sparse.csr_matrix:
  return sparse.diags(dual.dual_cell_areas).tocsr()


def assemble_hodge2(cx: SimplicialComplex2, dual: DualMesh) -> sparse.csr_matrix:
  return sparse.diags(1.0 / cx.triangle_areas).tocsr()


@dataclass
class InverseHodge1:
  """Application of H1^-1 to dual 1-cochains."""

  mode: str
  matrix: Optional[sparse.csr_matrix] = None
  _lu: Optional[object] = field(default=None, repr=False)

  def apply(self, values: np.ndarray) -> np.ndarray:
    if self.matrix is not None:
      return self.matrix @ values
    out = self._lu.solve(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(out)):
      raise SingularGlobalHodge("H1 solve produced non-finite values")
    return out


def _chord_frames(cx: SimplicialComplex2, dual: DualMesh):
  """Edge vectors and full dual chords c_T - c_neighbour (c_T - c_e on the boundary)."""
  e, k = _local_frames(cx, dual)
  owners = cx.edge_triangles[cx.edge_of_triangle]
  tri = np.arange(cx.n_triangles)[:, None]
  nb = np.where(owners[..., 0] == tri, owners[..., 1], owners[..., 0])
  inner = nb >= 0
  own = np.broadcast_to(dual.triangle_centers[:, None, :], k.shape)
  k[inner] = own[inner] - dual.triangle_centers[nb[inner]]
  return e, k


def inverse_hodge1(
  cx: SimplicialComplex2,
  dual: DualMesh,
  h1: sparse.csr_matrix,
  blocks: np.ndarray,
  mode: str = "elementwise",
  kind: str = "analytic",
) -> InverseHodge1:
  """Approximate or factorized H1^-1.

  Elementwise: every triangle inverts the local matrix built on the full dual
  chords through its edges, which maps the dual cochain of a constant form
  back to its primal values.  Rows are blended by the share |h_{T,e}| / |e*|.
  The diagonal kind is inverted exactly.
  """
  if mode not in INVERSE_MODES:
    raise ConfigError(f"unknown inverse mode '{mode}'")
  if mode == "direct-solve":
    try:
      lu = splu(sparse.csc_matrix(h1))
    except RuntimeError as exc:
      raise SingularGlobalHodge(f"H1 LU factorization failed: {exc}") from exc
    return InverseHodge1(mode=mode, _lu=lu)

  if kind == "diagonal":
    diag = h1.diagonal()
    if np.any(diag == 0.0):
      raise SingularGlobalHodge(f"diagonal H1 has {int(np.sum(diag == 0.0))} zero entries")
    return InverseHodge1(mode=mode, matrix=sparse.diags(1.0 / diag).tocsr())

  e, k = _chord_frames(cx, dual)
  chords = _local_matrices_ccw(e, k)
  cond = np.linalg.cond(chords)
  bad = np.flatnonzero(~np.isfinite(cond) | (cond > COND_LIMIT))
  if len(bad):
    raise SingularLocalHodge(int(bad[0]), float(cond[bad[0]]))
  s = cx.edge_sign.astype(float)
  inv = s[:, :, None] * np.linalg.inv(chords) * s[:, None, :]
  share = np.abs(dual.half_lengths) / dual.dual_edge_lengths[cx.edge_of_triangle]
  return InverseHodge1(mode=mode, matrix=_scatter(cx, share[:, :, None] * inv))


@dataclass
class HodgeOperators:
  H0: sparse.csr_matrix
  H1: sparse.csr_matrix
  H2: sparse.csr_matrix
  blocks: np.ndarray
  kind: str
  inverse_mode: str
  inv_h1: InverseHodge1


def build_hodge(
  cx: SimplicialComplex2,
  dual: DualMesh,
  kind: str = "analytic",
  inverse_mode: str = "elementwise",
) -> HodgeOperators:
  blocks = local_hodge_matrices(cx, dual, kind)
  h1 = _scatter(cx, blocks)
  ops = HodgeOperators(
    H0=assemble_hodge0(cx, dual),
    H1=h1,
    H2=assemble_hodge2(cx, dual),
    blocks=blocks,
    kind=kind,
    inverse_mode=inverse_mode,
    inv_h1=inverse_hodge1(cx, dual, h1, blocks, inverse_mode, kind),
  )
  logger.debug("assembled %s Hodge (%s inverse), nnz(H1)=%d", kind, inverse_mode, h1.nnz)
  return ops


def hodge_star_form(form: Callable) -> Callable:
  """Analytic star of P dx + Q dy, which is -Q dx + P dy."""

  def starred(x, y):
    p, q = form(x, y)
    return -np.asarray(q, dtype=float), np.asarray(p, dtype=float)

  return starred


def hodge_exactness_residual(
  form: Callable,
  cx: SimplicialComplex2,
  dual: DualMesh,
  quad_order: int = 5,
  kind: str = "analytic",
) -> np.ndarray:
  """Per dual edge: H1 * omega - (star omega)."""
  primal = discretize_form(form, 1, "primal", cx, quad_order=quad_order)
  exact = discretize_form(hodge_star_form(form), 1, "dual", cx, dual, quad_order=quad_order)
  h1 = assemble_hodge1(cx, dual, kind)
  return h1 @ primal.values - exact.values


def hodge_exactness_error(
  form: Callable,
  cx: SimplicialComplex2,
  dual: DualMesh,
  quad_order: int = 5,
  kind: str = "analytic",
) -> float:
  """l2 norm of the exactness residual."""
  return float(np.linalg.norm(hodge_exactness_residual(form, cx, dual, quad_order, kind)))


def export_matrix(matrix: sparse.spmatrix, path: str | Path, comment: str = "") -> None:
  sio.mmwrite(str(path), sparse.coo_matrix(matrix), comment=comment)
  logger.info("Exported %dx%d matrix (nnz=%d) to %s", matrix.shape[0], matrix.shape[1], matrix.nnz, path)
