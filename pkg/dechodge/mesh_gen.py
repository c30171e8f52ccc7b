"""
Mesh families: right-isoceles grids, strictly acute tilings, jittered
Delaunay meshes, stretched-Delaunay (compressed) meshes and randomly
perturbed non-Delaunay meshes.
"""

from __future__ import annotations

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .dual_mesh import _circumcenters
from .errors import ConfigError, TargetUnreachable
from .mesh_core import SimplicialComplex2, build_complex, signed_areas
from .models import MeshRecipe

logger = logging.getLogger("mesh_gen")

Domain = Tuple[float, float, float, float]
UNIT_SQUARE: Domain = (0.0, 0.0, 1.0, 1.0)

RATIO_TOL = 0.03
DRIFT_LIMIT = 0.4
# stretched-Delaunay family: scan of y stretches and the accepted band around the target
COMPRESSED_STRETCHES = np.round(np.arange(1.0, 8.0 + 1e-9, 0.05), 2)
COMPRESSED_TOL = 0.05
COMPRESSED_ATTEMPTS = 6
# admissible row/column spacing ratios for the acute pattern
_ACUTE_RHO = (0.6, 0.9)
_ACUTE_RHO_TARGET = 2.0 / 3.0  # rows = 1.5 * cols, the same shape at every n with 4 | n - 1


def _check_n(n: int) -> None:
  if n < 2:
    raise ConfigError("n must be >= 2")


def gen_right_mesh(n: int, domain: Domain = UNIT_SQUARE) -> SimplicialComplex2:
  """(n-1)^2 squares, each cut along the same diagonal."""
  _check_n(n)
  x0, y0, x1, y1 = domain
  xs = np.linspace(x0, x1, n)
  ys = np.linspace(y0, y1, n)
  gx, gy = np.meshgrid(xs, ys)
  coords = np.column_stack([gx.ravel(), gy.ravel()])
  j, i = np.meshgrid(np.arange(n - 1), np.arange(n - 1), indexing="ij")
  a = (j * n + i).ravel()
  b, c, d = a + 1, a + n, a + n + 1
  tris = np.concatenate([np.column_stack([a, b, c]), np.column_stack([b, d, c])])
  return build_complex(coords, tris)


def _acute_layout(n: int, width: float, height: float) -> Tuple[int, int, float]:
  cols = max(n - 1, 3)
  while True:
    hx = width / cols
    best = None
    for rows in range(2, 4 * cols + 4, 2):
      rho = height / rows / hx
      if _ACUTE_RHO[0] <= rho <= _ACUTE_RHO[1]:
        if best is None or abs(rho - _ACUTE_RHO_TARGET) < abs(best[1] - _ACUTE_RHO_TARGET):
          best = (rows, rho)
    if best is not None:
      return cols, best[0], best[1]
    cols += 1


def gen_acute_mesh(n: int, domain: Domain = UNIT_SQUARE) -> SimplicialComplex2:
  """Strictly acute tiling of a rectangle.

  Even rows carry N+1 equally spaced points, odd rows N points at the column
  midpoints, the two outermost pulled in to s = (1 + rho) / 2 column widths so
  that the boundary triangles they form with the side walls stay acute.
  rho = row gap / column gap is kept in [0.6, 0.9], as close to 2/3 as the
  rectangle allows; every angle is below 87 degrees.
  """
  _check_n(n)
  x0, y0, x1, y1 = domain
  cols, rows, rho = _acute_layout(n, x1 - x0, y1 - y0)
  hx = (x1 - x0) / cols
  hy = (y1 - y0) / rows
  s = 0.5 * (1.0 + rho)

  even_x = np.arange(cols + 1, dtype=float)
  odd_x = np.arange(cols, dtype=float) + 0.5
  odd_x[0], odd_x[-1] = s, cols - s

  coords: List[np.ndarray] = []
  starts: List[int] = []
  offset = 0
  for r in range(rows + 1):
    xs = even_x if r % 2 == 0 else odd_x
    starts.append(offset)
    coords.append(np.column_stack([x0 + xs * hx, np.full(len(xs), y0 + r * hy)]))
    offset += len(xs)

  tris: List[Tuple[int, int, int]] = []
  for r in range(rows):
    lo, hi = starts[r], starts[r + 1]
    if r % 2 == 0:
      for i in range(cols):
        tris.append((lo + i, lo + i + 1, hi + i))
      for k in range(cols - 1):
        tris.append((lo + k + 1, hi + k + 1, hi + k))
    else:
      for i in range(cols):
        tris.append((lo + i, hi + i + 1, hi + i))
      for k in range(cols - 1):
        tris.append((lo + k, lo + k + 1, hi + k + 1))
  for r in range(0, rows, 2):
    lo, mid, hi = starts[r], starts[r + 1], starts[r + 2]
    tris.append((lo, mid, hi))
    tris.append((lo + cols, hi + cols, mid + cols - 1))

  return build_complex(np.concatenate(coords), np.array(tris))


def _compact(coords: np.ndarray, tris: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
  used = np.unique(tris.ravel())
  remap = -np.ones(len(coords), dtype=np.int64)
  remap[used] = np.arange(len(used))
  return coords[used], remap[tris]


def _jittered_points(n: int, domain: Domain, rng: np.random.Generator, jitter: float) -> np.ndarray:
  x0, y0, x1, y1 = domain
  xs = np.linspace(x0, x1, n)
  ys = np.linspace(y0, y1, n)
  boundary = np.concatenate([
    np.column_stack([xs, np.full(n, y0)]),
    np.column_stack([xs, np.full(n, y1)]),
    np.column_stack([np.full(n - 2, x0), ys[1:-1]]),
    np.column_stack([np.full(n - 2, x1), ys[1:-1]]),
  ])
  gx, gy = np.meshgrid(xs[1:-1], ys[1:-1])
  interior = np.column_stack([gx.ravel(), gy.ravel()])
  if len(interior):
    h = np.array([(x1 - x0) / (n - 1), (y1 - y0) / (n - 1)])
    interior = interior + rng.uniform(-jitter, jitter, size=interior.shape) * h
  return np.concatenate([boundary, interior])


def _triangulate(points: np.ndarray, domain: Domain, n: int, stretch: float = 1.0) -> SimplicialComplex2:
  tris = Delaunay(points * np.array([1.0, stretch])).simplices
  x0, y0, x1, y1 = domain
  extent = np.array([x1 - x0, y1 - y0])
  keep = np.abs(signed_areas(points, tris)) > 1e-10 * float(extent @ extent) / (n * n)
  coords, tris = _compact(points, tris[keep])
  return build_complex(coords, tris)


def gen_unstructured_mesh(n: int, domain: Domain = UNIT_SQUARE, seed: int = 0, jitter: float = 0.35) -> SimplicialComplex2:
  """Delaunay triangulation of jittered interior points and n points per side."""
  _check_n(n)
  rng = np.random.default_rng(seed)
  return _triangulate(_jittered_points(n, domain, rng, jitter), domain, n)


def gen_compressed_mesh(
  n: int,
  domain: Domain = UNIT_SQUARE,
  target_ratio: float = 0.4,
  seed: int = 0,
  tol: float = COMPRESSED_TOL,
  jitter: float = 0.35,
) -> SimplicialComplex2:
  """Jittered points triangulated with y stretched, then mapped back.

  The triangulation is Delaunay in the stretched plane, so the flattened
  triangles fail the empty-circle test in the true one.  The stretch is the
  first on a fixed scan whose non-Delaunay ratio lies within tol of the target;
  a few point sets are tried before giving up.
  """
  _check_n(n)
  if not 0.0 <= target_ratio < 1.0:
    raise ConfigError("target_ratio must lie in [0, 1)")
  best: Optional[Tuple[float, SimplicialComplex2]] = None
  for attempt in range(COMPRESSED_ATTEMPTS):
    points = _jittered_points(n, domain, np.random.default_rng(seed + attempt), jitter)
    for stretch in COMPRESSED_STRETCHES:
      cx = _triangulate(points, domain, n, stretch)
      ratio = non_delaunay_ratio(cx)
      if abs(ratio - target_ratio) <= tol:
        logger.info("compressed mesh n=%d: stretch %.2f gives ratio %.4f (point set %d)", n, stretch, ratio, attempt)
        return cx
      if best is None or abs(ratio - target_ratio) < abs(best[0] - target_ratio):
        best = (ratio, cx)
  raise TargetUnreachable(best[0], target_ratio, best[1])


def _foreign_inside(coords: np.ndarray, tris: np.ndarray, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
  tree = cKDTree(coords)
  hits = tree.query_ball_point(centers, radii * (1.0 - 1e-12))
  own = [set(t) for t in tris.tolist()]
  return np.array([len(set(h) - o) for h, o in zip(hits, own)], dtype=np.int64)


def non_delaunay_ratio(cx: SimplicialComplex2) -> float:
  """Fraction of triangles whose open circumdisk holds another mesh vertex."""
  pts = cx.vertex_coords[cx.triangles]
  centers = _circumcenters(pts)
  radii = np.linalg.norm(centers - pts[:, 0], axis=1)
  counts = _foreign_inside(cx.vertex_coords, cx.triangles, centers, radii)
  return float(np.count_nonzero(counts)) / cx.n_triangles


class _Perturber:
  """Incremental bookkeeping of circumdisk contents while vertices move."""

  def __init__(self, cx: SimplicialComplex2) -> None:
    self.coords = cx.vertex_coords.copy()
    self.tris = cx.triangles
    pts = self.coords[self.tris]
    self.centers = _circumcenters(pts)
    self.r2 = np.einsum("ij,ij->i", self.centers - pts[:, 0], self.centers - pts[:, 0])
    self.counts = _foreign_inside(self.coords, self.tris, self.centers, np.sqrt(self.r2))
    self.incident: List[np.ndarray] = [[] for _ in range(len(self.coords))]
    for t, tri in enumerate(self.tris.tolist()):
      for v in tri:
        self.incident[v].append(t)
    self.incident = [np.array(ts, dtype=np.int64) for ts in self.incident]

  @property
  def ratio(self) -> float:
    return float(np.count_nonzero(self.counts)) / len(self.tris)

  def _inside(self, p: np.ndarray, tris: Optional[np.ndarray] = None) -> np.ndarray:
    c = self.centers if tris is None else self.centers[tris]
    r2 = self.r2 if tris is None else self.r2[tris]
    d = c - p
    return np.einsum("ij,ij->i", d, d) < r2 * (1.0 - 2e-12)

  def trial(self, v: int, q: np.ndarray, floor: float):
    """Counts after moving v to q, or None if a triangle would drop below the area floor."""
    inc = self.incident[v]
    old = self.coords[v].copy()
    self.coords[v] = q
    try:
      if np.any(signed_areas(self.coords, self.tris[inc]) < floor):
        return None
      counts = self.counts.copy()
      counts += self._inside(q).astype(np.int64) - self._inside(old).astype(np.int64)
      pts = self.coords[self.tris[inc]]
      centers = _circumcenters(pts)
      r2 = np.einsum("ij,ij->i", centers - pts[:, 0], centers - pts[:, 0])
      for slot, t in enumerate(inc):
        d = self.coords - centers[slot]
        inside = np.einsum("ij,ij->i", d, d) < r2[slot] * (1.0 - 2e-12)
        inside[self.tris[t]] = False
        counts[t] = int(np.count_nonzero(inside))
      return counts, centers, r2
    finally:
      self.coords[v] = old

  def commit(self, v: int, q: np.ndarray, state) -> None:
    counts, centers, r2 = state
    inc = self.incident[v]
    self.coords[v] = q
    self.counts = counts
    self.centers[inc] = centers
    self.r2[inc] = r2


def perturb_to_non_delaunay(
  cx: SimplicialComplex2,
  target_ratio: float,
  seed: int = 0,
  quality_floor: Optional[float] = None,
  max_iter: Optional[int] = None,
  tol: float = RATIO_TOL,
) -> SimplicialComplex2:
  """Move random interior vertices until the non-Delaunay ratio is target +- tol.

  A move is kept only if every incident triangle keeps an area >= quality_floor
  (default 1e-8 of the bounding-box area) and the ratio does not decrease or
  overshoot target + tol.  Moves that leave the ratio unchanged must stay within
  DRIFT_LIMIT local mean edge lengths of the starting position.  Step sizes
  start at 0.3 local mean edge lengths and halve on each rejection.
  """
  if not 0.0 <= target_ratio < 1.0:
    raise ConfigError("target_ratio must lie in [0, 1)")
  rng = np.random.default_rng(seed)
  extent = cx.vertex_coords.max(axis=0) - cx.vertex_coords.min(axis=0)
  floor = quality_floor if quality_floor is not None else 1e-8 * float(extent[0] * extent[1])
  interior = cx.interior_vertices
  state = _Perturber(cx)
  if max_iter is None:
    max_iter = 400 * max(len(interior), 1)

  local = np.zeros(cx.n_vertices)
  np.add.at(local, cx.edges[:, 0], cx.edge_lengths)
  np.add.at(local, cx.edges[:, 1], cx.edge_lengths)
  degree = np.bincount(cx.edges.ravel(), minlength=cx.n_vertices)
  local = local / np.maximum(degree, 1)
  sigma = 0.3 * local
  origin = cx.vertex_coords.copy()

  ratio = state.ratio
  accepted = 0
  it = 0
  while abs(ratio - target_ratio) > tol and it < max_iter and len(interior):
    it += 1
    v = int(interior[rng.integers(len(interior))])
    q = state.coords[v] + rng.normal(0.0, sigma[v], size=2)
    trial = state.trial(v, q, floor)
    new_ratio = None if trial is None else float(np.count_nonzero(trial[0])) / cx.n_triangles
    drifting = new_ratio == ratio and np.linalg.norm(q - origin[v]) > DRIFT_LIMIT * local[v]
    if new_ratio is None or new_ratio < ratio or new_ratio > target_ratio + tol or drifting:
      sigma[v] *= 0.5
      if sigma[v] < 0.01 * local[v]:
        sigma[v] = 0.3 * local[v]
      continue
    state.commit(v, q, trial)
    ratio = new_ratio
    accepted += 1

  logger.info(
    "perturbation: target=%.3f achieved=%.4f after %d iterations (%d accepted moves)",
    target_ratio, ratio, it, accepted,
  )
  out = build_complex(state.coords, cx.triangles)
  if abs(ratio - target_ratio) > tol:
    raise TargetUnreachable(ratio, target_ratio, out)
  return out


def gen_perturbed_sequence(
  ns: Sequence[int],
  ratio: float,
  domain: Domain = UNIT_SQUARE,
  seed: int = 0,
) -> List[SimplicialComplex2]:
  meshes = []
  for level, n in enumerate(ns):
    base = gen_unstructured_mesh(n, domain, seed=seed + level)
    meshes.append(perturb_to_non_delaunay(base, ratio, seed=seed + level) if ratio > 0 else base)
  return meshes


def build_from_recipe(recipe: MeshRecipe) -> SimplicialComplex2:
  if recipe.kind == "right":
    return gen_right_mesh(recipe.n, recipe.domain)
  if recipe.kind == "acute":
    return gen_acute_mesh(recipe.n, recipe.domain)
  if recipe.kind == "unstructured":
    return gen_unstructured_mesh(recipe.n, recipe.domain, seed=recipe.seed)
  if recipe.kind == "compressed":
    return gen_compressed_mesh(recipe.n, recipe.domain, recipe.target_non_delaunay_ratio, seed=recipe.seed)
  if recipe.kind == "perturbed":
    base = gen_unstructured_mesh(recipe.n, recipe.domain, seed=recipe.seed)
    return perturb_to_non_delaunay(
      base, recipe.target_non_delaunay_ratio, seed=recipe.seed, quality_floor=recipe.quality_floor
    )
  from .gmsh_io import read_gmsh

  if recipe.path is None:
    raise ConfigError("gmsh recipe needs a path")
  cx = read_gmsh(recipe.path)
  if recipe.target_non_delaunay_ratio > 0:
    cx = perturb_to_non_delaunay(
      cx, recipe.target_non_delaunay_ratio, seed=recipe.seed, quality_floor=recipe.quality_floor
    )
  return cx
