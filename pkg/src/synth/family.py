"""
Linear shape families over a template and local out-of-family bumps
"""
import itertools
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..errors import InputFormatError
from ..measurements.engine import dijkstra_distances
from ..mesh.mesh_core import TriangleMesh, build_edge_graph, edge_lengths

# per-mode bounds relative to the template
MAX_DISPLACEMENT_FRACTION = 0.05
MAX_EDGE_STRETCH = 0.45

_FREQUENCIES = [f for f in itertools.product(range(3), repeat=3) if any(f)]


@dataclass(frozen=True, eq=False)
class ShapeFamily:
    """Shapes template + sum_k c_k * modes[k] with c_k ~ N(0, stddevs[k]^2).

    Modes are [K, m, 3] millimetre displacement fields; coefficients are unitless.
    """
    template: TriangleMesh
    modes: np.ndarray
    stddevs: np.ndarray

    def __post_init__(self):
        modes = np.array(self.modes, dtype=np.float64).reshape(-1, *self.template.vertices.shape)
        stddevs = np.array(self.stddevs, dtype=np.float64).reshape(-1)
        if len(stddevs) != len(modes):
            raise InputFormatError(f"{len(stddevs)} stddevs for {len(modes)} modes")
        if (stddevs < 0).any():
            raise InputFormatError("mode stddevs must be non-negative")
        modes.flags.writeable = False
        stddevs.flags.writeable = False
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "stddevs", stddevs)

    @property
    def mode_count(self) -> int:
        return len(self.modes)

    def shape(self, coefficients: Sequence[float]) -> TriangleMesh:
        coefficients = np.asarray(coefficients, dtype=np.float64).reshape(-1)
        if len(coefficients) != self.mode_count:
            raise InputFormatError(
                f"expected {self.mode_count} coefficients, got {len(coefficients)}")
        displacement = np.tensordot(coefficients, self.modes, axes=1)
        return self.template.with_vertices(self.template.vertices + displacement)


def make_modes(template: TriangleMesh, K: int, seed: int) -> np.ndarray:
    """K independent smooth displacement fields from low-frequency cosine harmonics.

    Each field is scaled so its largest vertex displacement stays within 5% of the
    bounding-box diagonal and no edge changes by more than 0.45 of its length.
    """
    if K < 1:
        raise InputFormatError(f"need at least one mode, got {K}")
    if K > 3 * len(_FREQUENCIES):
        raise InputFormatError(f"at most {3 * len(_FREQUENCIES)} modes are available")
    rng = np.random.default_rng(seed)
    p = template.vertices
    low = p.min(axis=0)
    size = p.max(axis=0) - low
    size[size == 0] = 1.0
    unit = (p - low) / size

    harmonics = np.column_stack([
        np.prod(np.cos(np.pi * np.asarray(f) * unit), axis=1) for f in _FREQUENCIES])
    decay = np.array([1.0 / (1.0 + sum(f)) ** 2 for f in _FREQUENCIES])
    fields = np.stack([
        harmonics @ (rng.standard_normal((len(_FREQUENCIES), 3)) * decay[:, None])
        for _ in range(K)])

    # orthonormalize the flattened fields so the modes are linearly independent
    q, _ = np.linalg.qr(fields.reshape(K, -1).T)
    fields = q.T.reshape(K, -1, 3)

    diagonal = template.bounding_box_diagonal
    edges = template.edges
    lengths = edge_lengths(p, edges)
    modes = []
    for field in fields:
        largest = np.linalg.norm(field, axis=1).max()
        stretch = (edge_lengths(field, edges) / lengths).max()
        scale = min(MAX_DISPLACEMENT_FRACTION * diagonal / largest, MAX_EDGE_STRETCH / stretch)
        modes.append(field * scale)
    return np.stack(modes)


def make_family(template: TriangleMesh, K: int, seed: int,
                stddevs: Optional[Sequence[float]] = None) -> ShapeFamily:
    stddevs = np.linspace(0.6, 0.2, K) if stddevs is None else stddevs
    return ShapeFamily(template, make_modes(template, K, seed), stddevs)


def sample_coefficients(family: ShapeFamily, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, family.mode_count)) * family.stddevs


def sample_family(family: ShapeFamily, n: int, seed: int) -> List[TriangleMesh]:
    """n seeded shapes from the family"""
    if n < 2:
        raise InputFormatError(f"need >= 2 samples, got {n}")
    return [family.shape(c) for c in sample_coefficients(family, n, seed)]


def add_local_bump(mesh: TriangleMesh, center: int, radius: float,
                   amplitude: float) -> TriangleMesh:
    """Push vertices within geodesic `radius` of `center` along their normals.

    The offset is amplitude * cos^2(pi d / (2 radius)); vertices at d >= radius keep
    their exact positions.
    """
    if not 0 <= center < mesh.vertex_count:
        raise InputFormatError(f"bump centre {center} out of range for {mesh.vertex_count} vertices")
    if not radius > 0:
        raise InputFormatError(f"bump radius must be positive, got {radius}")
    if amplitude == 0:
        return mesh
    distances = dijkstra_distances(build_edge_graph(mesh), center, cutoff=radius)
    inside = np.array([v for v, d in sorted(distances.items()) if d < radius], dtype=np.int64)
    d = np.array([distances[v] for v in inside.tolist()])
    vertices = mesh.vertices.copy()
    offsets = amplitude * np.cos(np.pi * d / (2.0 * radius)) ** 2
    vertices[inside] += offsets[:, None] * mesh.vertex_normals[inside]
    return mesh.with_vertices(vertices)
