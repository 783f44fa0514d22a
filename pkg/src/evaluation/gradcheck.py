"""
Finite-difference verification of the analytic energy gradients
"""
from typing import Callable, Dict, List, Optional

import numpy as np
from pydantic import BaseModel

from ..mesh.mesh_core import TriangleMesh
from ..refinement.constraints import FrozenConstraints
from ..refinement.energies import (combined_energy, energy_circumference, energy_euclidean,
                                   energy_geodesic, energy_smoothness)
from ..solver.lbfgs import finite_difference_gradient

GRADIENT_TOLERANCE = 1e-6
STEP = 1e-5

# term(positions, frozen, reference, smoothness_lambda) -> (energy, [m, 3] gradient)
TermFunction = Callable[[np.ndarray, FrozenConstraints, TriangleMesh, float], tuple]

DEFAULT_TERMS: Dict[str, TermFunction] = {
    "euclidean": lambda p, frozen, ref, lam: energy_euclidean(p, frozen),
    "geodesic": lambda p, frozen, ref, lam: energy_geodesic(p, frozen),
    "circumference": lambda p, frozen, ref, lam: energy_circumference(p, frozen),
    "smoothness": lambda p, frozen, ref, lam: energy_smoothness(p, ref),
    "combined": lambda p, frozen, ref, lam: combined_energy(p, frozen, ref, lam),
}


class TermCheck(BaseModel):
    term: str
    configurations: int
    max_relative_error: float
    passed: bool


class GradcheckReport(BaseModel):
    seed: int
    tolerance: float
    terms: List[TermCheck]
    passed: bool

    @property
    def failed_terms(self) -> List[str]:
        return [t.term for t in self.terms if not t.passed]


def random_grid_mesh(rng: np.random.Generator, size: int = 4) -> TriangleMesh:
    """Jittered size x size grid patch with random heights, unit spacing"""
    x, y = np.meshgrid(np.arange(size, dtype=np.float64), np.arange(size, dtype=np.float64))
    vertices = np.column_stack([x.ravel(), y.ravel(), np.zeros(size * size)])
    vertices += rng.uniform(-0.2, 0.2, vertices.shape)
    triangles = []
    for r in range(size - 1):
        for c in range(size - 1):
            a = r * size + c
            triangles += [(a, a + 1, a + size + 1), (a, a + size + 1, a + size)]
    return TriangleMesh(vertices, np.array(triangles))


def random_constraints(mesh: TriangleMesh, rng: np.random.Generator,
                       terms: int = 6) -> FrozenConstraints:
    """Random terms with targets between half and twice the current lengths"""
    p = mesh.vertices
    m = mesh.vertex_count
    edges = mesh.edges

    pairs = np.array([rng.choice(m, 2, replace=False) for _ in range(terms)])
    path_edges = edges[rng.choice(len(edges), terms, replace=False)]
    hull_points = edges[rng.choice(len(edges), 2 * terms)]
    index = np.column_stack([hull_points[:terms], hull_points[terms:]])
    alpha = rng.uniform(0.0, 1.0, (terms, 2))

    def scaled(lengths):
        return lengths * rng.uniform(0.5, 2.0, len(lengths))

    qi = alpha[:, :1] * p[index[:, 0]] + (1 - alpha[:, :1]) * p[index[:, 1]]
    qj = alpha[:, 1:] * p[index[:, 2]] + (1 - alpha[:, 1:]) * p[index[:, 3]]
    return FrozenConstraints(
        euclidean_pairs=pairs,
        euclidean_targets=scaled(np.linalg.norm(p[pairs[:, 0]] - p[pairs[:, 1]], axis=1)),
        geodesic_edges=path_edges,
        geodesic_targets=scaled(np.linalg.norm(p[path_edges[:, 0]] - p[path_edges[:, 1]], axis=1)),
        circumference_index=index,
        circumference_alpha=alpha,
        circumference_targets=scaled(np.linalg.norm(qi - qj, axis=1) + 0.1),
    )


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), np.finfo(float).tiny)
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_term(name: str, term: TermFunction, seed: int, configurations: int = 20) -> TermCheck:
    worst = 0.0
    for i in range(configurations):
        rng = np.random.default_rng([seed, i])
        reference = random_grid_mesh(rng)
        frozen = random_constraints(reference, rng)
        positions = reference.vertices + rng.normal(0.0, 0.1, reference.vertices.shape)
        lam = float(rng.uniform(0.0, 1.0))

        def energy(x):
            return term(x.reshape(-1, 3), frozen, reference, lam)[0]

        _, analytic = term(positions, frozen, reference, lam)
        numeric = finite_difference_gradient(energy, positions.reshape(-1), STEP)
        worst = max(worst, relative_error(np.asarray(analytic).reshape(-1), numeric))
    return TermCheck(term=name, configurations=configurations, max_relative_error=worst,
                     passed=worst < GRADIENT_TOLERANCE)


def run_gradcheck(seed: int, configurations: int = 20,
                  terms: Optional[Dict[str, TermFunction]] = None) -> GradcheckReport:
    """Check every energy term at seeded random configurations.

    `terms` replaces entries of the default term table by name.
    """
    table = dict(DEFAULT_TERMS)
    table.update(terms or {})
    checks = [check_term(name, fn, seed, configurations) for name, fn in table.items()]
    return GradcheckReport(seed=seed, tolerance=GRADIENT_TOLERANCE, terms=checks,
                           passed=all(c.passed for c in checks))
