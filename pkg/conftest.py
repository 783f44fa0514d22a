"""
Shared fixtures: small analytic meshes and a small synthetic family
"""
import numpy as np
import pytest

from src.mesh.mesh_core import TriangleMesh
from src.model.shape_model import train_model
from src.synth.family import make_family, sample_family
from src.synth.profiles import template_profile
from src.synth.templates import MIN_RESOLUTION, build_template

SQUARE = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]
# square with a V notch cut into its top edge; same convex hull as SQUARE
NOTCHED_SQUARE = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (1.5, 2.0), (1.0, 1.0), (0.5, 2.0),
                  (0.0, 2.0)]


def extrude(polygon, heights=(-1.0, 0.0, 1.0)) -> TriangleMesh:
    """Open prism: one ring of `polygon` per height, walls between consecutive rings"""
    k = len(polygon)
    vertices = [(x, y, z) for z in heights for x, y in polygon]
    triangles = []
    for level in range(len(heights) - 1):
        low, high = level * k, (level + 1) * k
        for i in range(k):
            j = (i + 1) % k
            triangles += [(low + i, low + j, high + j), (low + i, high + j, high + i)]
    return TriangleMesh(np.array(vertices), np.array(triangles))


@pytest.fixture
def octahedron():
    """Unit octahedron: 0..3 on the equator (+x, +y, -x, -y), 4 = +z, 5 = -z"""
    vertices = [(1, 0, 0), (0, 1, 0), (-1, 0, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    triangles = [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4),
                 (1, 0, 5), (2, 1, 5), (3, 2, 5), (0, 3, 5)]
    return TriangleMesh(np.array(vertices, dtype=float), np.array(triangles))


@pytest.fixture
def unit_square():
    """Two triangles sharing the diagonal 0-2"""
    vertices = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)]
    return TriangleMesh(np.array(vertices, dtype=float), np.array([(0, 1, 2), (0, 2, 3)]))


@pytest.fixture
def notched_prism():
    return extrude(NOTCHED_SQUARE)


@pytest.fixture
def square_prism():
    return extrude(SQUARE)


@pytest.fixture(scope="session")
def small_template():
    return build_template("mannequin", MIN_RESOLUTION)


@pytest.fixture(scope="session")
def small_profile(small_template):
    return template_profile(small_template)


@pytest.fixture(scope="session")
def small_family(small_template):
    return make_family(small_template.mesh, 4, seed=7)


@pytest.fixture(scope="session")
def small_training(small_family):
    return sample_family(small_family, 12, seed=8)


@pytest.fixture(scope="session")
def small_model(small_training, small_profile):
    model, _ = train_model(small_training, small_profile)
    return model
