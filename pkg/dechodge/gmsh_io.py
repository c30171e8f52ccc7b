"""
Reader for Gmsh MSH 2.2 ASCII files.

Only 3-node triangles (element type 2) are kept; nodes that no triangle uses
are dropped and the remaining ids are renumbered densely in id order.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List

import numpy as np

from .errors import MalformedSection, NonPlanarMesh, NoTriangles, UnsupportedVersion
from .mesh_core import SimplicialComplex2, build_complex

logger = logging.getLogger("gmsh_io")

TRIANGLE = 2
Z_TOL = 1e-9


def _sections(text: str) -> Dict[str, List[str]]:
  sections: Dict[str, List[str]] = {}
  current = None
  body: List[str] = []
  for raw in text.splitlines():
    line = raw.strip()
    if not line:
      continue
    if line.startswith("$End"):
      if current is None or line[4:] != current:
        raise MalformedSection(f"unexpected {line}")
      sections[current] = body
      current = None
    elif line.startswith("$"):
      if current is not None:
        raise MalformedSection(f"section ${current} is not closed before {line}")
      current, body = line[1:], []
    elif current is not None:
      body.append(line)
  if current is not None:
    raise MalformedSection(f"section ${current} is not closed")
  return sections


def _count(body: List[str], name: str) -> int:
  try:
    count = int(body[0])
  except (IndexError, ValueError) as exc:
    raise MalformedSection(f"${name} has no entry count") from exc
  if len(body) - 1 != count:
    raise MalformedSection(f"${name} announces {count} entries, found {len(body) - 1}")
  return count


def import_gmsh(text: str) -> SimplicialComplex2:
  sections = _sections(text)
  for name in ("MeshFormat", "Nodes", "Elements"):
    if name not in sections:
      raise MalformedSection(f"missing ${name} section")

  fmt = sections["MeshFormat"][0].split() if sections["MeshFormat"] else []
  if len(fmt) < 2:
    raise MalformedSection("$MeshFormat needs 'version file-type data-size'")
  if not fmt[0].startswith("2."):
    raise UnsupportedVersion(f"MSH version {fmt[0]} is not supported (need 2.x)")
  if fmt[1] != "0":
    raise UnsupportedVersion("binary MSH files are not supported")

  nodes = sections["Nodes"]
  _count(nodes, "Nodes")
  try:
    table = np.array([line.split()[:4] for line in nodes[1:]], dtype=float)
  except ValueError as exc:
    raise MalformedSection(f"bad $Nodes entry: {exc}") from exc
  if table.ndim != 2 or table.shape[1] != 4:
    raise MalformedSection("$Nodes entries need 'id x y z'")
  if np.any(np.abs(table[:, 3]) > Z_TOL):
    raise NonPlanarMesh("mesh has nodes with z != 0")
  node_ids = table[:, 0].astype(np.int64)
  position = {nid: row for row, nid in enumerate(node_ids.tolist())}
  if len(position) != len(node_ids):
    raise MalformedSection("duplicate node ids in $Nodes")

  elements = sections["Elements"]
  _count(elements, "Elements")
  triangles: List[List[int]] = []
  for line in elements[1:]:
    try:
      fields = [int(tok) for tok in line.split()]
      etype, ntags = fields[1], fields[2]
    except (ValueError, IndexError) as exc:
      raise MalformedSection(f"bad $Elements entry '{line}'") from exc
    if etype != TRIANGLE:
      continue
    verts = fields[3 + ntags:6 + ntags]
    if len(verts) != 3:
      raise MalformedSection(f"triangle entry '{line}' has {len(verts)} nodes")
    triangles.append(verts)
  if not triangles:
    raise NoTriangles("no 3-node triangle elements in $Elements")

  tri_ids = np.array(triangles, dtype=np.int64)
  used = np.unique(tri_ids)
  missing = [int(n) for n in used if int(n) not in position]
  if missing:
    raise MalformedSection(f"element references unknown node {missing[0]}")
  remap = {int(nid): k for k, nid in enumerate(used.tolist())}
  coords = table[[position[int(n)] for n in used], 1:3]
  tris = np.vectorize(remap.__getitem__, otypes=[np.int64])(tri_ids)
  cx = build_complex(coords, tris)
  logger.info("Imported Gmsh mesh: V=%d F=%d", cx.n_vertices, cx.n_triangles)
  return cx


def read_gmsh(path: str | Path) -> SimplicialComplex2:
  return import_gmsh(Path(path).read_text(encoding="utf-8"))
