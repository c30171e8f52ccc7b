"""Discrete exterior calculus on 2D triangle meshes with arbitrary dual centers."""

from .dual_mesh import CenterStrategy, DualMesh, build_dual
from .errors import DecError
from .hodge import HodgeOperators, build_hodge
from .mesh_core import Cochain, SimplicialComplex2, build_complex
from .mesh_gen import gen_acute_mesh, gen_right_mesh, perturb_to_non_delaunay
from .solvers import solve_boussinesq, solve_navier_stokes, solve_poisson

__version__ = "0.1.0"

__all__ = [
  "CenterStrategy",
  "Cochain",
  "DecError",
  "DualMesh",
  "HodgeOperators",
  "SimplicialComplex2",
  "build_complex",
  "build_dual",
  "build_hodge",
  "gen_acute_mesh",
  "gen_right_mesh",
  "perturb_to_non_delaunay",
  "solve_boussinesq",
  "solve_navier_stokes",
  "solve_poisson",
]
