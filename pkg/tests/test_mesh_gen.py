import numpy as np
import pytest

from dechodge.errors import ConfigError, TargetUnreachable
from dechodge.mesh_core import triangle_angles
from dechodge.mesh_gen import (
  COMPRESSED_TOL,
  build_from_recipe,
  gen_acute_mesh,
  gen_compressed_mesh,
  gen_perturbed_sequence,
  gen_right_mesh,
  gen_unstructured_mesh,
  non_delaunay_ratio,
  perturb_to_non_delaunay,
)
from dechodge.models import MeshRecipe


def test_right_mesh_counts(right5):
  assert (right5.n_vertices, right5.n_edges, right5.n_triangles) == (25, 56, 32)
  assert right5.total_area == pytest.approx(1.0)
  assert right5.boundary_vertex_flags.sum() == 16


def test_right_mesh_on_a_rectangle():
  cx = gen_right_mesh(4, (-1.0, 0.0, 2.0, 0.5))
  np.testing.assert_allclose(cx.vertex_coords.min(axis=0), [-1.0, 0.0])
  np.testing.assert_allclose(cx.vertex_coords.max(axis=0), [2.0, 0.5])
  assert cx.total_area == pytest.approx(1.5)


@pytest.mark.parametrize("n", [3, 5, 9, 17])
def test_acute_mesh_is_strictly_acute(n):
  cx = gen_acute_mesh(n)
  assert cx.total_area == pytest.approx(1.0)
  assert triangle_angles(cx).max() < 87.0
  assert non_delaunay_ratio(cx) == 0.0


def test_acute_mesh_on_the_taylor_green_box():
  cx = gen_acute_mesh(9, (-np.pi, -np.pi, np.pi, np.pi))
  assert cx.total_area == pytest.approx(4 * np.pi ** 2)
  assert triangle_angles(cx).max() < 90.0


def test_acute_mesh_refines_with_n():
  assert gen_acute_mesh(17).mean_edge_length < 0.6 * gen_acute_mesh(9).mean_edge_length


def test_acute_levels_share_one_triangle_shape_family():
  extremes = []
  for n in (5, 9, 17, 33):
    cx = gen_acute_mesh(n)
    assert cx.n_vertices == (n + (n - 1)) * 3 * (n - 1) // 4 + n
    angles = triangle_angles(cx)
    extremes.append((angles.min(), angles.max()))
  np.testing.assert_allclose(extremes, [extremes[0]] * 4, atol=1e-9)
  assert extremes[0][1] < 80.0


def test_unstructured_mesh_is_delaunay_and_reproducible():
  a = gen_unstructured_mesh(9, seed=7)
  b = gen_unstructured_mesh(9, seed=7)
  np.testing.assert_array_equal(a.vertex_coords, b.vertex_coords)
  assert a.total_area == pytest.approx(1.0)
  assert non_delaunay_ratio(a) == 0.0


def test_right_mesh_cocircular_points_do_not_count(right5):
  assert non_delaunay_ratio(right5) == 0.0


@pytest.mark.parametrize("target", [0.15, 0.3])
def test_perturbation_reaches_target(unstructured9, target):
  cx = perturb_to_non_delaunay(unstructured9, target, seed=2)
  assert abs(non_delaunay_ratio(cx) - target) <= 0.03
  np.testing.assert_array_equal(cx.triangles, unstructured9.triangles)
  b = unstructured9.boundary_vertex_flags
  np.testing.assert_array_equal(cx.vertex_coords[b], unstructured9.vertex_coords[b])
  assert cx.triangle_areas.min() > 0


def test_zero_target_leaves_delaunay_mesh_alone(unstructured9):
  cx = perturb_to_non_delaunay(unstructured9, 0.0)
  np.testing.assert_array_equal(cx.vertex_coords, unstructured9.vertex_coords)


def test_unreachable_target_reports_best_mesh(unstructured9):
  with pytest.raises(TargetUnreachable) as info:
    perturb_to_non_delaunay(unstructured9, 0.9, max_iter=20)
  assert info.value.achieved < 0.9
  assert info.value.mesh is not None


@pytest.mark.parametrize("bad", [-0.1, 1.0])
def test_target_must_be_a_fraction(unstructured9, bad):
  with pytest.raises(ConfigError):
    perturb_to_non_delaunay(unstructured9, bad)


def test_too_small_n_is_rejected():
  with pytest.raises(ConfigError):
    gen_right_mesh(1)


@pytest.mark.slow
def test_half_non_delaunay_mesh():
  cx = perturb_to_non_delaunay(gen_unstructured_mesh(17, seed=1), 0.5, seed=1)
  assert abs(non_delaunay_ratio(cx) - 0.5) <= 0.03


def test_perturbed_sequence():
  meshes = gen_perturbed_sequence([7, 9], 0.15, seed=3)
  assert len(meshes) == 2
  assert meshes[1].n_vertices > meshes[0].n_vertices
  for cx in meshes:
    assert abs(non_delaunay_ratio(cx) - 0.15) <= 0.03


def test_recipes():
  assert build_from_recipe(MeshRecipe(kind="right", n=3)).n_triangles == 8
  acute = build_from_recipe(MeshRecipe(kind="acute", n=5, domain=(0.0, 0.0, 2.0, 1.0)))
  assert acute.total_area == pytest.approx(2.0)
  with pytest.raises(ConfigError):
    build_from_recipe(MeshRecipe(kind="gmsh"))


def test_compressed_mesh_hits_its_ratio():
  cx = gen_compressed_mesh(13, seed=2)
  assert abs(non_delaunay_ratio(cx) - 0.4) <= COMPRESSED_TOL
  assert cx.total_area == pytest.approx(1.0)
  assert cx.triangle_areas.min() > 0


def test_unstretched_compressed_mesh_is_the_delaunay_one():
  cx = gen_compressed_mesh(9, target_ratio=0.0, seed=7)
  np.testing.assert_array_equal(cx.vertex_coords, gen_unstructured_mesh(9, seed=7).vertex_coords)
  assert non_delaunay_ratio(cx) == 0.0


def test_compressed_recipe_on_the_wave_box():
  recipe = MeshRecipe(kind="compressed", n=7, domain=(0.0, -0.5, 1.0, 0.5), target_non_delaunay_ratio=0.4, seed=1)
  cx = build_from_recipe(recipe)
  assert cx.vertex_coords[:, 1].min() == pytest.approx(-0.5)
  assert abs(non_delaunay_ratio(cx) - 0.4) <= COMPRESSED_TOL
