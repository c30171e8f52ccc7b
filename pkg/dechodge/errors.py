"""Exception types raised by dechodge.

Every error derives from DecError so the CLI can report library failures
without swallowing programming errors.
"""

from __future__ import annotations

from typing import Any, Optional


class DecError(RuntimeError):
  pass


class ConfigError(DecError):
  pass


# mesh_core

class InvalidComplex(DecError):
  pass


class DuplicateTriangle(DecError):
  pass


class DegenerateTriangle(DecError):
  pass


class NonManifoldEdge(DecError):
  pass


class MissingDualMesh(DecError):
  pass


# hodge

class SingularDecomposition(DecError):
  pass


class SingularLocalHodge(DecError):
  def __init__(self, triangle: int, cond: float) -> None:
    super().__init__(f"local Hodge of triangle {triangle} is singular (cond={cond:.3e})")
    self.triangle = triangle
    self.cond = cond


class SingularGlobalHodge(DecError):
  pass


class DegenerateDual(DecError):
  def __init__(self, message: str, report: Any = None) -> None:
    super().__init__(message)
    self.report = report


# solvers

class SingularSystem(DecError):
  pass


class NonFinite(DecError):
  def __init__(self, step: int, field: str = "psi") -> None:
    super().__init__(f"non-finite {field} at step {step}")
    self.step = step
    self.field = field


# mesh_gen / gmsh_io

class TargetUnreachable(DecError):
  def __init__(self, achieved: float, target: float, mesh: Optional[Any] = None) -> None:
    super().__init__(f"non-Delaunay ratio {achieved:.4f} did not reach target {target:.4f}")
    self.achieved = achieved
    self.target = target
    self.mesh = mesh


class UnsupportedVersion(DecError):
  pass


class MalformedSection(DecError):
  pass


class NonPlanarMesh(DecError):
  pass


class NoTriangles(DecError):
  pass


# harness

class ZeroExactNorm(DecError):
  pass


class InsufficientPoints(DecError):
  pass


class UnknownSolution(DecError):
  pass


class ConstraintViolation(DecError):
  pass
