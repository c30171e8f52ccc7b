import numpy as np
import pytest

from dechodge.mesh_core import build_complex
from dechodge.mesh_gen import gen_acute_mesh, gen_right_mesh, gen_unstructured_mesh


UNIT_TRIANGLE = ([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0, 1, 2]])


@pytest.fixture
def unit_triangle():
  return build_complex(*UNIT_TRIANGLE)


@pytest.fixture
def right5():
  return gen_right_mesh(5)


@pytest.fixture
def acute9():
  return gen_acute_mesh(9)


@pytest.fixture
def unstructured9():
  return gen_unstructured_mesh(9, seed=4)


@pytest.fixture
def rng():
  return np.random.default_rng(1234)
