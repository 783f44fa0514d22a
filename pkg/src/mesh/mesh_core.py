"""
Indexed triangle meshes, edge graphs and the geometric helpers built on them
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Set, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import laplacian

from ..errors import DegenerateGeometryError, InputFormatError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Triangle surface with millimetre vertex positions.

    Arrays are stored read-only; derive a new mesh instead of mutating one.

    Attributes:
        vertices (np.ndarray): [m, 3] float positions.
        triangles (np.ndarray): [t, 3] int vertex indices.
    """
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        vertices.flags.writeable = False
        triangles.flags.writeable = False
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    def with_vertices(self, vertices: np.ndarray) -> "TriangleMesh":
        """Same topology, new positions"""
        vertices = np.asarray(vertices, dtype=np.float64)
        if vertices.shape != self.vertices.shape:
            raise InputFormatError(
                f"expected {self.vertices.shape} vertex array, got {vertices.shape}")
        return TriangleMesh(vertices, self.triangles)

    def same_topology(self, other: "TriangleMesh") -> bool:
        return (self.vertex_count == other.vertex_count
                and np.array_equal(self.triangles, other.triangles))

    def validate(self) -> "TriangleMesh":
        """Check index ranges, repeated indices and vertex usage.

        Non-manifold edges are reported as a warning only.
        """
        m = self.vertex_count
        if self.triangle_count == 0:
            raise InputFormatError("mesh has no triangles")
        if self.triangles.min() < 0 or self.triangles.max() >= m:
            raise InputFormatError(f"triangle index out of range for {m} vertices")
        t = self.triangles
        repeated = (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
        if repeated.any():
            raise InputFormatError(
                f"triangle {int(np.flatnonzero(repeated)[0])} repeats a vertex index")
        used = np.zeros(m, dtype=bool)
        used[t.ravel()] = True
        if not used.all():
            raise InputFormatError(
                f"{int((~used).sum())} vertices are not referenced by any triangle")
        if not np.isfinite(self.vertices).all():
            raise InputFormatError("vertex coordinates must be finite")

        _, counts = np.unique(self._directed_edges_sorted, axis=0, return_counts=True)
        if (counts > 2).any():
            log.warning("mesh has %d non-manifold edges", int((counts > 2).sum()))
        return self

    @cached_property
    def _directed_edges_sorted(self) -> np.ndarray:
        t = self.triangles
        pairs = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.sort(pairs, axis=1)

    @cached_property
    def edges(self) -> np.ndarray:
        """[e, 2] unique undirected edges, each row sorted, rows lexicographic"""
        return np.unique(self._directed_edges_sorted, axis=0)

    @cached_property
    def neighbors(self) -> Tuple[Tuple[int, ...], ...]:
        """Sorted one-ring of every vertex"""
        rings: List[Set[int]] = [set() for _ in range(self.vertex_count)]
        for a, b in self.edges:
            rings[a].add(int(b))
            rings[b].add(int(a))
        return tuple(tuple(sorted(r)) for r in rings)

    @cached_property
    def graph_laplacian(self) -> sp.csr_matrix:
        """Combinatorial Laplacian D - A of the edge graph"""
        m = self.vertex_count
        e = self.edges
        data = np.ones(2 * len(e))
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        adjacency = sp.csr_matrix((data, (rows, cols)), shape=(m, m))
        return sp.csr_matrix(laplacian(adjacency))

    @cached_property
    def face_normals(self) -> np.ndarray:
        """Unnormalized face normals; their length is twice the triangle area"""
        v = self.vertices
        t = self.triangles
        return np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])

    @cached_property
    def vertex_normals(self) -> np.ndarray:
        """Area-weighted unit vertex normals"""
        normals = np.zeros_like(self.vertices)
        for corner in range(3):
            np.add.at(normals, self.triangles[:, corner], self.face_normals)
        lengths = np.linalg.norm(normals, axis=1)
        lengths[lengths == 0] = 1.0
        return normals / lengths[:, None]

    @property
    def bounding_box_diagonal(self) -> float:
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))


@dataclass
class EdgeGraph:
    """Weighted vertex adjacency of a mesh.

    `adjacency[i]` lists (neighbor, edge length) pairs sorted by neighbor index.
    """
    adjacency: List[List[Tuple[int, float]]]
    edges: np.ndarray = field(repr=False)
    lengths: np.ndarray = field(repr=False)

    @property
    def vertex_count(self) -> int:
        return len(self.adjacency)


def edge_lengths(vertices: np.ndarray, edges: np.ndarray) -> np.ndarray:
    return np.linalg.norm(vertices[edges[:, 0]] - vertices[edges[:, 1]], axis=1)


def build_edge_graph(mesh: TriangleMesh) -> EdgeGraph:
    """One graph edge per unique mesh edge, weighted by its current length"""
    edges = mesh.edges
    lengths = edge_lengths(mesh.vertices, edges)
    if (lengths <= 0).any():
        a, b = edges[int(np.argmin(lengths))]
        raise DegenerateGeometryError(f"zero-length edge between vertices {a} and {b}")

    adjacency: List[List[Tuple[int, float]]] = [[] for _ in range(mesh.vertex_count)]
    for (a, b), w in zip(edges.tolist(), lengths.tolist()):
        adjacency[a].append((b, w))
        adjacency[b].append((a, w))
    for row in adjacency:
        row.sort()
    return EdgeGraph(adjacency=adjacency, edges=edges, lengths=lengths)


def one_ring(mesh: TriangleMesh, v: int) -> Set[int]:
    """Vertices sharing a triangle with `v`, excluding `v`"""
    if not 0 <= v < mesh.vertex_count:
        raise InputFormatError(f"vertex index {v} out of range for {mesh.vertex_count} vertices")
    return set(mesh.neighbors[v])


def flatten(mesh: TriangleMesh) -> np.ndarray:
    """(x0, y0, z0, x1, ...) copy of the vertex positions"""
    return mesh.vertices.reshape(-1).copy()


def unflatten(vector: np.ndarray, triangles: np.ndarray) -> TriangleMesh:
    vector = np.asarray(vector, dtype=np.float64).reshape(-1)
    if len(vector) % 3:
        raise InputFormatError(f"flattened mesh length {len(vector)} is not divisible by 3")
    return TriangleMesh(vector.reshape(-1, 3), triangles)


def compact(vertices: np.ndarray, triangles: np.ndarray) -> Tuple[TriangleMesh, np.ndarray]:
    """Drop unreferenced vertices.

    Returns the mesh and an old→new index map (-1 for dropped vertices).
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    used = np.zeros(len(vertices), dtype=bool)
    used[triangles.ravel()] = True
    remap = np.full(len(vertices), -1, dtype=np.int64)
    remap[used] = np.arange(int(used.sum()))
    return TriangleMesh(vertices[used], remap[triangles]), remap
