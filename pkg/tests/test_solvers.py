import numpy as np
import pytest

from dechodge.dual_mesh import CenterStrategy
from dechodge.errors import ConfigError, DegenerateDual
from dechodge.exact import exact_solution
from dechodge.harness import FLOW_NS, POISSON_NS, convergence_rate, run_case
from dechodge.mesh_core import discretize_form
from dechodge.models import FluidParams, MeshRecipe, SolverConfig
from dechodge.solvers import (
  BoundaryData,
  boundary_circulation,
  buoyancy_term,
  build_operators,
  default_dt,
  reconstruct_velocity,
  solve_navier_stokes,
  solve_poisson,
)


def test_poisson_reproduces_constants(unstructured9):
  u = solve_poisson(unstructured9, "incentric", lambda x, y: 0.0, lambda x, y: np.ones_like(x))
  assert u.carrier == "dual" and u.degree == 0
  np.testing.assert_allclose(u.values, 1.0, atol=1e-10)


@pytest.mark.parametrize("strategy", ["barycentric", "incentric"])
def test_direct_poisson_reproduces_linear_fields(unstructured9, strategy):
  exact = lambda x, y: 1.0 + x - 2.0 * y
  config = SolverConfig(inverse_mode="direct-solve")
  u = solve_poisson(unstructured9, strategy, lambda x, y: 0.0, exact, config)
  ops = build_operators(unstructured9, strategy)
  ct = ops.dual.triangle_centers
  np.testing.assert_allclose(u.values, exact(ct[:, 0], ct[:, 1]), atol=1e-10)


@pytest.mark.parametrize("kind, strategy", [("right", "barycentric"), ("right", "incentric"), ("acute", "circumcentric")])
@pytest.mark.parametrize("mode", ["elementwise", "direct-solve"])
def test_poisson_converges(kind, strategy, mode):
  config = SolverConfig(inverse_mode=mode)
  reports = [run_case(MeshRecipe(kind=kind, n=n), strategy, "poisson-quadratic", config) for n in (9, 17)]
  assert reports[1].err_psi < reports[0].err_psi
  assert reports[1].err_psi < 1e-2
  rate = convergence_rate([(r.dx_mean, r.err_psi) for r in reports])
  assert rate > 1.5


@pytest.mark.parametrize("mesh", ["acute9", "unstructured9"])
@pytest.mark.parametrize("strategy", ["barycentric", "incentric"])
def test_elementwise_poisson_reproduces_linear_fields(request, mesh, strategy):
  cx = request.getfixturevalue(mesh)
  exact = lambda x, y: 0.5 - 2.0 * x + 3.0 * y
  u = solve_poisson(cx, strategy, lambda x, y: 0.0, exact)
  ct = build_operators(cx, strategy).dual.triangle_centers
  np.testing.assert_allclose(u.values, exact(ct[:, 0], ct[:, 1]), atol=1e-10)


def test_stream_laplacian_kills_constants_and_linear_fields(acute9):
  ops = build_operators(acute9, "barycentric")
  x, y = acute9.vertex_coords.T
  lap = ops.stream_laplacian
  np.testing.assert_allclose(lap @ np.ones(acute9.n_vertices), 0.0, atol=1e-12)
  interior = ~acute9.boundary_vertex_flags
  np.testing.assert_allclose((lap @ (2 * x - 3 * y))[interior], 0.0, atol=1e-12)


def test_circumcentric_stream_laplacian_is_symmetric(acute9):
  lap = build_operators(acute9, "circumcentric").stream_laplacian.toarray()
  np.testing.assert_allclose(lap, lap.T, atol=1e-12)


def test_flux_is_the_dual_integral_of_d_psi(unstructured9):
  ops = build_operators(unstructured9, "incentric")
  x, y = unstructured9.vertex_coords.T
  psi = 0.5 + 2 * x - 3 * y
  expected = discretize_form(lambda x, y: (2.0, -3.0), 1, "dual", unstructured9, ops.dual)
  np.testing.assert_allclose(ops.flux_operator @ psi, expected.values, atol=1e-12)


def test_velocity_of_linear_stream_function(unstructured9):
  x, y = unstructured9.vertex_coords.T
  np.testing.assert_allclose(reconstruct_velocity(2 * x - 3 * y, unstructured9), np.tile([-3.0, -2.0], (len(x), 1)), atol=1e-10)
  # psi = -x moves the fluid upward
  np.testing.assert_allclose(reconstruct_velocity(-x, unstructured9), np.tile([0.0, 1.0], (len(x), 1)), atol=1e-10)


def test_boundary_circulation_of_uniform_flow(right5):
  ops = build_operators(right5, "barycentric")
  gamma = boundary_circulation(right5, ops.dual, lambda x, y, t: (np.ones_like(x), np.zeros_like(x)))
  x, y = right5.vertex_coords.T
  bottom = (y == 0.0) & (x > 0.0) & (x < 1.0)
  top = (y == 1.0) & (x > 0.0) & (x < 1.0)
  sides = ((x == 0.0) | (x == 1.0)) & (y > 0.0) & (y < 1.0)
  np.testing.assert_allclose(gamma[bottom], 0.25)
  np.testing.assert_allclose(gamma[top], -0.25)
  np.testing.assert_allclose(gamma[sides], 0.0, atol=1e-15)
  assert gamma[(x == 0.0) & (y == 0.0)][0] == pytest.approx(0.125)
  assert np.all(gamma[~right5.boundary_vertex_flags] == 0.0)
  assert not boundary_circulation(right5, ops.dual, None).any()


def test_uniform_temperature_has_no_buoyancy(acute9):
  ops = build_operators(acute9, "incentric")
  b = buoyancy_term(np.full(acute9.n_vertices, 3.0), ops, FluidParams(beta=1.0, g=10.0))
  np.testing.assert_allclose(b[~acute9.boundary_vertex_flags], 0.0, atol=1e-12)


def test_degenerate_duals_are_refused(right5, unstructured9):
  with pytest.raises(DegenerateDual):
    build_operators(right5, "circumcentric")
  with pytest.raises(DegenerateDual):
    build_operators(unstructured9, "circumcentric", hodge_kind="diagonal")


def test_default_dt(right5):
  assert default_dt(right5, FluidParams(nu=2.0)) == pytest.approx(0.125 * right5.mean_edge_length ** 2)
  with pytest.raises(ConfigError):
    default_dt(right5, FluidParams(nu=0.0, kappa=0.0))


def test_fixed_end_time_sets_the_step_count(right5):
  exact = exact_solution("poiseuille")
  result = solve_navier_stokes(
    right5, "barycentric", exact.fluid, BoundaryData.from_exact(exact),
    config=SolverConfig(dt=0.01), t_end=0.055,
  )
  assert result.steps == 6
  assert result.time == pytest.approx(0.055)
  assert result.converged


@pytest.mark.slow
def test_poiseuille_reaches_steady_state():
  report = run_case(MeshRecipe(kind="right", n=9), "barycentric", "poiseuille")
  assert report.err_psi < 5e-2
  assert report.err_u < 0.3
  assert report.steps < SolverConfig().max_steps


@pytest.mark.slow
@pytest.mark.parametrize("strategy", ["barycentric", "incentric"])
def test_poiseuille_converges(strategy):
  reports = [run_case(MeshRecipe(kind="right", n=n), strategy, "poiseuille") for n in (9, 17)]
  assert reports[1].err_psi < reports[0].err_psi
  assert convergence_rate([(r.dx_mean, r.err_psi) for r in reports]) > 1.0


@pytest.mark.slow
def test_taylor_green_vortex_is_held_by_its_source():
  report = run_case(MeshRecipe(kind="acute", n=17), "circumcentric", "taylor-green")
  assert report.err_psi < 0.1


@pytest.mark.slow
@pytest.mark.parametrize("scheme", ["centered", "upwind"])
def test_traveling_wave_tracks_temperature(scheme):
  config = SolverConfig(convection_scheme=scheme)
  report = run_case(MeshRecipe(kind="right", n=9), "barycentric", "travel-nu-ne-kappa", config)
  assert report.err_psi < 2e-2
  assert report.err_theta < 0.2
  assert report.steps > 0


def test_stream_laplacian_does_not_depend_on_triangle_centers(acute9, unstructured9):
  # fluxes of a piecewise constant gradient through c_e1 -> c_T -> c_e2 depend on the end points only
  for cx, strategies in ((acute9, ("circumcentric", "incentric")), (unstructured9, ("incentric",))):
    ref = build_operators(cx, "barycentric").stream_laplacian.toarray()
    for strategy in strategies + (CenterStrategy.from_weights(0.7, 0.2, 0.1),):
      np.testing.assert_allclose(build_operators(cx, strategy).stream_laplacian.toarray(), ref, atol=1e-10)


def test_reruns_are_bit_identical(right5):
  exact = exact_solution("poiseuille")
  config = SolverConfig(dt=1e-3, max_steps=25)
  runs = [
    solve_navier_stokes(right5, "incentric", exact.fluid, BoundaryData.from_exact(exact), config=config)
    for _ in range(2)
  ]
  assert runs[0].residual_history == runs[1].residual_history
  assert np.array_equal(runs[0].psi, runs[1].psi)


def test_step_cap_leaves_the_run_unconverged(right5):
  exact = exact_solution("poiseuille")
  result = solve_navier_stokes(
    right5, "barycentric", exact.fluid, BoundaryData.from_exact(exact), config=SolverConfig(max_steps=3),
  )
  assert result.steps == 3
  assert not result.converged


def test_relative_step_change_ends_the_march(right5):
  exact = exact_solution("poiseuille")
  result = solve_navier_stokes(
    right5, "barycentric", exact.fluid, BoundaryData.from_exact(exact), config=SolverConfig(stall_tol=1e-3),
  )
  assert result.converged
  assert result.steps < SolverConfig().max_steps
  assert result.residual_history[-1] * result.dt < 1e-3


@pytest.mark.slow
def test_fine_poiseuille_stops_at_the_round_off_floor():
  report = run_case(MeshRecipe(kind="right", n=33), "barycentric", "poiseuille")
  assert report.converged
  assert report.steps < SolverConfig().max_steps
  assert report.err_psi < 5e-3


POISSON_RATES = [
  ("poisson-quadratic", "acute", "circumcentric", 1.995),
  ("poisson-quadratic", "acute", "barycentric", 1.985),
  ("poisson-quadratic", "acute", "incentric", 1.992),
  ("poisson-quadratic", "right", "barycentric", 1.923),
  ("poisson-quadratic", "right", "incentric", 1.921),
  ("poisson-sinsinh", "acute", "circumcentric", 1.975),
  ("poisson-sinsinh", "acute", "barycentric", 1.979),
  ("poisson-sinsinh", "acute", "incentric", 1.982),
  ("poisson-sinsinh", "right", "barycentric", 1.809),
  ("poisson-sinsinh", "right", "incentric", 1.840),
]


@pytest.mark.slow
@pytest.mark.parametrize("problem, kind, strategy, expected", POISSON_RATES)
def test_poisson_rates_over_four_levels(problem, kind, strategy, expected):
  reports = [run_case(MeshRecipe(kind=kind, n=n), strategy, problem) for n in POISSON_NS]
  errors = [r.err_psi for r in reports]
  assert errors == sorted(errors, reverse=True)
  assert convergence_rate([(r.dx_mean, r.err_psi) for r in reports]) == pytest.approx(expected, abs=0.15)


FLOW_RATES = [
  ("poiseuille", "acute", "circumcentric", 2.006, 1.421),
  ("poiseuille", "acute", "barycentric", 2.184, 1.106),
  ("poiseuille", "acute", "incentric", 2.185, 1.096),
  ("poiseuille", "right", "barycentric", 1.989, 1.553),
  ("poiseuille", "right", "incentric", 1.989, 1.539),
  ("taylor-green", "acute", "circumcentric", 1.996, 1.187),
  ("taylor-green", "acute", "barycentric", 2.065, 1.130),
  ("taylor-green", "acute", "incentric", 2.088, 1.118),
  ("taylor-green", "right", "barycentric", 2.018, 1.735),
  ("taylor-green", "right", "incentric", 2.067, 1.736),
]


@pytest.mark.slow
@pytest.mark.parametrize("problem, kind, strategy, rate_psi, rate_u", FLOW_RATES)
def test_steady_flow_rates_over_three_levels(problem, kind, strategy, rate_psi, rate_u):
  reports = [run_case(MeshRecipe(kind=kind, n=n), strategy, problem) for n in FLOW_NS]
  assert all(r.converged for r in reports)
  assert convergence_rate([(r.dx_mean, r.err_psi) for r in reports]) == pytest.approx(rate_psi, abs=0.3)
  assert convergence_rate([(r.dx_mean, r.err_u) for r in reports]) == pytest.approx(rate_u, abs=0.3)


@pytest.mark.slow
def test_traveling_wave_at_fine_resolution():
  bary = run_case(MeshRecipe(kind="right", n=61), "barycentric", "travel-nu-ne-kappa")
  inc = run_case(MeshRecipe(kind="right", n=61), "incentric", "travel-nu-ne-kappa")
  assert bary.dx_mean == pytest.approx(1.894e-2, rel=1e-3)
  assert 2.651e-5 / 3 < bary.err_psi < 3 * 2.651e-5
  assert inc.err_psi < 3 * 8.875e-5
  assert bary.err_theta < 3 * 5.529e-3
  assert inc.err_theta < 3 * 5.589e-3
  assert inc.err_theta == pytest.approx(bary.err_theta, rel=0.15)
