import math

import numpy as np
import pytest

from dechodge.errors import ConstraintViolation, UnknownSolution
from dechodge.exact import SOLUTION_NAMES, exact_solution

H = 1e-2


def _dx(f, x, y, t, h=H):
  return (f(x + h, y, t) - f(x - h, y, t)) / (2 * h)


def _dy(f, x, y, t, h=H):
  return (f(x, y + h, t) - f(x, y - h, t)) / (2 * h)


def _dt(f, x, y, t, h=H):
  return (f(x, y, t + h) - f(x, y, t - h)) / (2 * h)


def _lap(f, x, y, t, h=H):
  return (f(x + h, y, t) + f(x - h, y, t) + f(x, y + h, t) + f(x, y - h, t) - 4 * f(x, y, t)) / h ** 2


POINTS = {
  "poiseuille": [(0.3, 0.2), (0.7, 0.9)],
  "taylor-green": [(0.4, -1.1), (2.0, 0.5)],
  "travel-nu-ne-kappa": [(0.2, 0.1), (-0.3, 0.25), (0.4, -0.4)],
  "travel-nu-eq-kappa": [(0.5, 0.1), (0.8, -0.3), (0.3, 0.4)],
}


@pytest.mark.parametrize("name", list(POINTS))
def test_velocity_derives_from_stream_function(name):
  sol = exact_solution(name)
  for x, y in POINTS[name]:
    ux, uy = sol.velocity(x, y, 0.05)
    assert ux == pytest.approx(_dy(sol.psi, x, y, 0.05, 1e-5), rel=1e-6, abs=1e-8)
    assert uy == pytest.approx(-_dx(sol.psi, x, y, 0.05, 1e-5), rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("name", ["poisson-quadratic", "poisson-sinsinh"])
def test_poisson_sources(name):
  sol = exact_solution(name)
  u = lambda x, y, t: sol.u(x, y)
  for x, y in [(0.3, 0.4), (0.8, 0.1)]:
    assert -_lap(u, x, y, 0.0, 1e-3) == pytest.approx(float(sol.f(np.array(x), np.array(y))), abs=1e-4)


@pytest.mark.parametrize("name", list(POINTS))
def test_vorticity_equation_residual(name):
  sol = exact_solution(name)
  nu, bg = sol.fluid.nu, sol.fluid.beta * sol.fluid.g

  def w(x, y, t):
    return -_lap(sol.psi, x, y, t)

  for x, y in POINTS[name]:
    t = 0.05
    ux, uy = sol.velocity(x, y, t)
    terms = [_dt(w, x, y, t), ux * _dx(w, x, y, t) + uy * _dy(w, x, y, t), -nu * _lap(w, x, y, t)]
    if sol.theta is not None:
      terms.append(bg * _dx(sol.theta, x, y, t))
    if sol.vorticity_source is not None:
      terms.append(-sol.vorticity_source(x, y, t))
    scale = max(max(abs(v) for v in terms), 1e-3)
    assert abs(sum(terms)) < 1e-2 * scale


@pytest.mark.parametrize("name", ["travel-nu-ne-kappa", "travel-nu-eq-kappa"])
def test_temperature_equation_residual(name):
  sol = exact_solution(name)
  kappa = sol.fluid.kappa
  for x, y in POINTS[name]:
    t = 0.05
    ux, uy = sol.velocity(x, y, t)
    terms = [
      _dt(sol.theta, x, y, t),
      ux * _dx(sol.theta, x, y, t) + uy * _dy(sol.theta, x, y, t),
      -kappa * _lap(sol.theta, x, y, t),
    ]
    assert abs(sum(terms)) < 1e-3 * max(abs(v) for v in terms)


def test_traveling_wave_defaults():
  sol = exact_solution("travel-nu-ne-kappa")
  assert sol.domain == (-0.5, -0.5, 0.5, 0.5)
  assert (sol.fluid.nu, sol.fluid.kappa, sol.fluid.beta, sol.fluid.g) == (0.2, 0.1, 1.0, 10.0)
  assert sol.wave.lam == pytest.approx(0.5)
  assert sol.end_time == pytest.approx(0.2)
  assert sol.wave.u1 == pytest.approx(2 * math.exp(-5))


def test_parameters_override_defaults():
  sol = exact_solution("poiseuille", {"amplitude": 2.0, "nu": 0.5})
  ux, _ = sol.velocity(0.0, 0.5)
  assert float(ux) == pytest.approx(2.0)
  assert sol.fluid.nu == 0.5


def test_poiseuille_samplers_follow_the_input_shape():
  sol = exact_solution("poiseuille")
  x = np.linspace(0.0, 1.0, 4)
  psi = sol.psi(x, 0.5)
  ux, uy = sol.velocity(x, 0.5)
  assert psi.shape == ux.shape == uy.shape == (4,)
  np.testing.assert_allclose(psi, 2.0 * 0.25 - 4.0 * 0.125 / 3.0)
  np.testing.assert_allclose(ux, 1.0)
  psi[0] = -1.0
  assert sol.psi(x, 0.5)[0] != -1.0


def test_taylor_green_box():
  sol = exact_solution("taylor-green")
  assert sol.domain == pytest.approx((-math.pi, -math.pi, math.pi, math.pi))
  assert sol.vorticity_source(0.0, 0.0) == pytest.approx(4.0 * sol.fluid.nu)


def test_constraints():
  with pytest.raises(ConstraintViolation):
    exact_solution("travel-nu-ne-kappa", {"kappa": 0.2})
  with pytest.raises(ConstraintViolation):
    exact_solution("travel-nu-eq-kappa", {"nu": 0.3})
  with pytest.raises(ConstraintViolation):
    exact_solution("travel-nu-ne-kappa", {"b": 0.0})
  with pytest.raises(ConstraintViolation):
    exact_solution("travel-nu-ne-kappa", {"w": 1.0})
  with pytest.raises(ConstraintViolation):
    exact_solution("poisson-quadratic", {"viscosity": 1.0})


def test_unknown_solution():
  with pytest.raises(UnknownSolution):
    exact_solution("lid-driven-cavity")
  assert len(SOLUTION_NAMES) == 6
