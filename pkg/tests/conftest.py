import numpy as np
import pytest

from vemwave.assembly import Material
from vemwave.mesh import PolygonalMesh, generate_family, reference_periodic_cell


@pytest.fixture(scope="session")
def unit_square_mesh():
    return reference_periodic_cell("quad", 1.0)


@pytest.fixture(scope="session")
def unit_triangle_mesh():
    return PolygonalMesh([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0, 1, 2]])


@pytest.fixture(scope="session")
def octagon_mesh():
    return generate_family("nonconvex_octagon", 0)


@pytest.fixture(scope="session")
def hexagonal_mesh():
    return generate_family("hexagonal", 0)


@pytest.fixture(scope="session")
def material():
    return Material(1.0, 1.0, 1.0)


def pentagon_vertices(distort: float = 0.25, seed: int = 7) -> np.ndarray:
    """A mildly irregular convex pentagon used across basis/projector tests."""
    rng = np.random.default_rng(seed)
    angles = np.sort(rng.uniform(0, 2 * np.pi, 5))
    radii = 1.0 + distort * rng.uniform(-1, 1, 5)
    pts = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    return pts + np.array([0.3, -0.2])
