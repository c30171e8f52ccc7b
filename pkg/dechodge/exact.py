"""
Closed-form reference solutions.

Conventions: u = (d psi/dy, -d psi/dx), vorticity w = -lap(psi), the Poisson
problem is -lap(u) = f, gravity acts along -y and enters the vorticity
equation as beta * g * d theta/dx.  Samplers take (x, y, t) arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from .errors import ConstraintViolation, UnknownSolution
from .models import FluidParams, TravelingWaveParams

Domain = Tuple[float, float, float, float]

SOLUTION_NAMES = (
  "poisson-quadratic",
  "poisson-sinsinh",
  "poiseuille",
  "taylor-green",
  "travel-nu-ne-kappa",
  "travel-nu-eq-kappa",
)


@dataclass
class ExactSolution:
  name: str
  problem: str  # poisson | ns | boussinesq
  domain: Domain
  fluid: FluidParams = field(default_factory=FluidParams)
  u: Optional[Callable] = None
  f: Optional[Callable] = None
  psi: Optional[Callable] = None
  velocity: Optional[Callable] = None
  theta: Optional[Callable] = None
  vorticity_source: Optional[Callable] = None
  wave: Optional[TravelingWaveParams] = None
  end_time: Optional[float] = None


def _poisson_quadratic() -> ExactSolution:
  return ExactSolution(
    name="poisson-quadratic",
    problem="poisson",
    domain=(0.0, 0.0, 1.0, 1.0),
    u=lambda x, y: x ** 2 + y ** 2,
    f=lambda x, y: np.full(np.shape(x), -4.0),
  )


def _poisson_sinsinh() -> ExactSolution:
  return ExactSolution(
    name="poisson-sinsinh",
    problem="poisson",
    domain=(0.0, 0.0, 1.0, 1.0),
    u=lambda x, y: np.sin(np.pi * x) * np.sinh(np.pi * y),
    f=lambda x, y: np.zeros(np.shape(x)),
  )


def _on_grid(values, x, y) -> np.ndarray:
  """values as a float array of the broadcast shape of x and y."""
  shape = np.broadcast_shapes(np.shape(x), np.shape(y))
  return np.broadcast_to(np.asarray(values, dtype=float), shape).copy()


def _poiseuille(amplitude: float = 1.0) -> ExactSolution:
  return ExactSolution(
    name="poiseuille",
    problem="ns",
    domain=(0.0, 0.0, 1.0, 1.0),
    fluid=FluidParams(rho=1.0, nu=1.0),
    psi=lambda x, y, t=0.0: _on_grid(amplitude * (2.0 * y ** 2 - 4.0 * y ** 3 / 3.0), x, y),
    velocity=lambda x, y, t=0.0: (_on_grid(amplitude * 4.0 * y * (1.0 - y), x, y), _on_grid(0.0, x, y)),
  )


def _taylor_green(fluid: FluidParams) -> ExactSolution:
  nu = fluid.nu

  # steady only with a vorticity source balancing viscous decay: S = 2 nu w, w = 2 cos x cos y
  return ExactSolution(
    name="taylor-green",
    problem="ns",
    domain=(-math.pi, -math.pi, math.pi, math.pi),
    fluid=fluid,
    psi=lambda x, y, t=0.0: np.cos(x) * np.cos(y),
    velocity=lambda x, y, t=0.0: (-np.cos(x) * np.sin(y), np.sin(x) * np.cos(y)),
    vorticity_source=lambda x, y, t=0.0: 4.0 * nu * np.cos(x) * np.cos(y),
  )


def _traveling_wave(name: str, wave: TravelingWaveParams, fluid: FluidParams, domain: Domain) -> ExactSolution:
  a, b, c, w = wave.a, wave.b, wave.c, wave.w
  lam = wave.lam
  nu, kappa = fluid.nu, fluid.kappa
  bg = fluid.beta * fluid.g
  theta1 = wave.theta1

  def xi(x, y, t):
    return a * x + b * y + c * t

  if name == "travel-nu-ne-kappa":
    if nu == kappa:
      raise ConstraintViolation("travel-nu-ne-kappa requires nu != kappa")
    k = kappa ** 2 * bg * a * b / ((c + w) ** 2 * (kappa - nu))

    def ux(x, y, t):
      z = xi(x, y, t)
      return wave.u1 * np.exp(lam * z / nu) + k * theta1 * np.exp(lam * z / kappa)

    def profile(z):
      return (wave.u1 * nu / lam * np.exp(lam * z / nu) + k * theta1 * kappa / lam * np.exp(lam * z / kappa)) / b
  else:
    if nu != kappa:
      raise ConstraintViolation("travel-nu-eq-kappa requires nu == kappa")
    s = lam / kappa
    amp = bg * a * b * theta1 / ((c + w) * (a ** 2 + b ** 2))

    def ux(x, y, t):
      z = xi(x, y, t)
      return amp * (wave.x0 - z) * np.exp(s * z)

    def profile(z):
      return amp / b * ((wave.x0 - z) / s + 1.0 / s ** 2) * np.exp(s * z)

  def psi(x, y, t=0.0):
    return profile(xi(x, y, t)) - (w / b) * x

  def velocity(x, y, t=0.0):
    vx = ux(x, y, t)
    return vx, (w - a * vx) / b

  def theta(x, y, t=0.0):
    return theta1 * np.exp(lam * xi(x, y, t) / kappa)

  return ExactSolution(
    name=name,
    problem="boussinesq",
    domain=domain,
    fluid=fluid,
    psi=psi,
    velocity=velocity,
    theta=theta,
    wave=wave,
    end_time=kappa / abs(lam * c) if lam * c != 0 else None,
  )


def exact_solution(name: str, params: Optional[Dict[str, Any]] = None) -> ExactSolution:
  """Look up a reference solution; params override wave and fluid constants."""
  params = dict(params or {})
  if name not in SOLUTION_NAMES:
    raise UnknownSolution(f"unknown solution '{name}' (expected one of {', '.join(SOLUTION_NAMES)})")
  wave_keys = set(TravelingWaveParams.model_fields)
  fluid_keys = set(FluidParams.model_fields)
  unknown = set(params) - wave_keys - fluid_keys - {"amplitude"}
  if unknown:
    raise ConstraintViolation(f"unknown parameters for {name}: {sorted(unknown)}")
  wave_over = {k: v for k, v in params.items() if k in wave_keys}
  fluid_over = {k: v for k, v in params.items() if k in fluid_keys}

  try:
    if name == "poisson-quadratic":
      return _poisson_quadratic()
    if name == "poisson-sinsinh":
      return _poisson_sinsinh()
    if name == "poiseuille":
      sol = _poiseuille(float(params.get("amplitude", 1.0)))
      sol.fluid = FluidParams(**{**sol.fluid.model_dump(), **fluid_over})
      return sol
    if name == "taylor-green":
      return _taylor_green(FluidParams(**{"rho": 1.0, "nu": 1.0, **fluid_over}))
    if name == "travel-nu-ne-kappa":
      wave = TravelingWaveParams(**{
        "a": 1.0, "b": 1.0, "c": -1.0, "w": 2.0,
        "theta1": math.exp(-5.0), "u1": 2.0 * math.exp(-5.0), **wave_over,
      })
      fluid = FluidParams(**{"rho": 1.0, "nu": 0.2, "kappa": 0.1, "beta": 1.0, "g": 10.0, **fluid_over})
      return _traveling_wave(name, wave, fluid, (-0.5, -0.5, 0.5, 0.5))
    wave = TravelingWaveParams(**{
      "a": 1.0, "b": 1.0, "c": -1.0, "w": 0.0, "x0": 0.5, "theta1": math.exp(-5.0), **wave_over,
    })
    fluid = FluidParams(**{"rho": 1.0, "nu": 0.1, "kappa": 0.1, "beta": 1.0, "g": 10.0, **fluid_over})
    return _traveling_wave(name, wave, fluid, (0.0, -0.5, 1.0, 0.5))
  except ValidationError as exc:
    raise ConstraintViolation(str(exc.errors()[0].get("msg"))) from exc
