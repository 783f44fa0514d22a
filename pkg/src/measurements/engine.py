"""
Digital evaluation of Euclidean, geodesic and circumference measurements on a mesh
"""
import heapq
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ..config import config
from ..errors import (InputFormatError, MeasurementUndefinedError, Measure2ShapeError,
                      TopologyMismatchError, UnreachableError)
from ..mesh.mesh_core import EdgeGraph, TriangleMesh, build_edge_graph
from .hull import closed_edges, convex_hull_2d, hull_edge_lengths
from .specs import (CircumferenceSpec, EuclideanSpec, GeodesicSpec, MeasurementProfile,
                    MeasurementSpec, MeasurementVector)

log = logging.getLogger(__name__)

# (a, a) for a vertex lying on the plane, (a, b) with a < b for a crossing edge
SectionKey = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class GeodesicPath:
    """Shortest edge-graph path; `vertices` holds just `a` when a == b"""
    vertices: Tuple[int, ...]
    edge_lengths: np.ndarray

    @property
    def length(self) -> float:
        return float(self.edge_lengths.sum())

    @property
    def edges(self) -> np.ndarray:
        v = np.asarray(self.vertices, dtype=np.int64)
        return np.column_stack([v[:-1], v[1:]]).reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class SectionPoint:
    """q = alpha * p_a + (1 - alpha) * p_b"""
    a: int
    b: int
    alpha: float
    position: np.ndarray

    @property
    def key(self) -> SectionKey:
        return (self.a, self.b)


@dataclass(frozen=True, eq=False)
class SectionChain:
    points: Tuple[SectionPoint, ...]
    closed: bool

    def contains_vertex(self, v: int) -> bool:
        return any(p.a == v and p.b == v for p in self.points)

    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.points]).reshape(-1, 3)


@dataclass(frozen=True, eq=False)
class CircumferencePolygon:
    """Convex hull of a section chain, points in counter-clockwise in-plane order"""
    points: Tuple[SectionPoint, ...]
    edge_lengths: np.ndarray

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())

    def edge_encoding(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per hull edge: parent indices (a_i, b_i, a_j, b_j) and weights (alpha_i, alpha_j)"""
        ends = closed_edges(len(self.points))
        idx = np.array([[self.points[i].a, self.points[i].b, self.points[j].a, self.points[j].b]
                        for i, j in ends.tolist()], dtype=np.int64).reshape(-1, 4)
        alpha = np.array([[self.points[i].alpha, self.points[j].alpha]
                          for i, j in ends.tolist()], dtype=np.float64).reshape(-1, 2)
        return idx, alpha


def _check_vertex(mesh: TriangleMesh, *indices: int) -> None:
    for v in indices:
        if not 0 <= v < mesh.vertex_count:
            raise InputFormatError(
                f"vertex index {v} out of range for {mesh.vertex_count} vertices")


def euclidean_length(mesh: TriangleMesh, spec: EuclideanSpec) -> float:
    _check_vertex(mesh, spec.a, spec.b)
    return float(np.linalg.norm(mesh.vertices[spec.a] - mesh.vertices[spec.b]))


def _dijkstra(graph: EdgeGraph, source: int, target: Optional[int] = None,
              cutoff: Optional[float] = None) -> Tuple[Dict[int, float], Dict[int, int]]:
    """Settled distances and predecessors.

    Equal-length alternatives keep the smaller predecessor index.
    """
    dist: Dict[int, float] = {source: 0.0}
    pred: Dict[int, int] = {}
    settled: Dict[int, float] = {}
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in settled or d > dist[u]:
            continue
        if cutoff is not None and d > cutoff:
            break
        settled[u] = d
        if u == target:
            break
        for v, w in graph.adjacency[u]:
            if v in settled:
                continue
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
            elif nd == dist[v] and u < pred[v]:
                pred[v] = u
    return settled, pred


def dijkstra_distances(graph: EdgeGraph, source: int,
                       cutoff: Optional[float] = None) -> Dict[int, float]:
    """Graph distance from `source` to every vertex within `cutoff`"""
    if not 0 <= source < graph.vertex_count:
        raise InputFormatError(f"vertex index {source} out of range")
    settled, _ = _dijkstra(graph, source, cutoff=cutoff)
    return settled


def geodesic_path(mesh: TriangleMesh, spec: GeodesicSpec,
                  graph: Optional[EdgeGraph] = None) -> GeodesicPath:
    _check_vertex(mesh, spec.a, spec.b)
    if spec.a == spec.b:
        return GeodesicPath((spec.a,), np.zeros(0))
    graph = graph or build_edge_graph(mesh)
    settled, pred = _dijkstra(graph, spec.a, target=spec.b)
    if spec.b not in settled:
        raise UnreachableError(
            f"vertices {spec.a} and {spec.b} are not connected")

    path = [spec.b]
    while path[-1] != spec.a:
        path.append(pred[path[-1]])
    path.reverse()
    v = mesh.vertices
    steps = np.linalg.norm(v[path[1:]] - v[path[:-1]], axis=1)
    return GeodesicPath(tuple(path), steps)


def plane_section(mesh: TriangleMesh, region: Sequence[int], point: np.ndarray,
                  normal: np.ndarray) -> List[SectionChain]:
    """Intersect the region's triangles with a plane.

    Chains are ordered by their smallest section key; an open chain starts at its
    lowest endpoint.
    """
    region = np.asarray(sorted(set(int(t) for t in region)), dtype=np.int64)
    if len(region) and (region[0] < 0 or region[-1] >= mesh.triangle_count):
        raise InputFormatError(
            f"region triangle index out of range for {mesh.triangle_count} triangles")
    p = mesh.vertices
    d = (p - np.asarray(point, dtype=np.float64)) @ np.asarray(normal, dtype=np.float64)
    on_plane = np.abs(d) < config.ON_PLANE_TOLERANCE

    segments = set()
    nodes = set()
    for tri in mesh.triangles[region].tolist():
        keys = set()
        for i in tri:
            if on_plane[i]:
                keys.add((i, i))
        for i, j in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            if not on_plane[i] and not on_plane[j] and d[i] * d[j] < 0:
                keys.add((min(i, j), max(i, j)))
        keys = sorted(keys)
        nodes.update(keys)
        if len(keys) == 2:
            segments.add((keys[0], keys[1]))
        elif len(keys) == 3:
            # face lying in the plane
            segments.update({(keys[0], keys[1]), (keys[1], keys[2]), (keys[0], keys[2])})

    if not nodes:
        return []

    ordered = sorted(nodes)
    index = {k: n for n, k in enumerate(ordered)}
    pairs = np.array([(index[a], index[b]) for a, b in segments], dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    adjacency = sp.csr_matrix((np.ones(len(rows)), (rows, cols)),
                              shape=(len(ordered), len(ordered)))
    _, labels = connected_components(adjacency, directed=False)
    neighbours: List[List[int]] = [[] for _ in ordered]
    for i, j in zip(rows.tolist(), cols.tolist()):
        neighbours[i].append(j)
    for row in neighbours:
        row.sort()

    components: Dict[int, List[int]] = {}
    for n, label in enumerate(labels.tolist()):
        components.setdefault(label, []).append(n)

    chains = []
    for members in sorted(components.values(), key=min):
        degree = {n: len(neighbours[n]) for n in members}
        ends = [n for n in members if degree[n] == 1]
        walk = [ends[0] if ends else members[0]]
        seen = {walk[0]}
        while True:
            step = [n for n in neighbours[walk[-1]] if n not in seen]
            if not step:
                break
            walk.append(step[0])
            seen.add(step[0])
        walk += [n for n in members if n not in seen]
        closed = len(members) >= 3 and all(deg == 2 for deg in degree.values())
        chains.append(SectionChain(tuple(_section_point(ordered[n], p, d) for n in walk),
                                   closed))
    return chains


def _section_point(key: SectionKey, p: np.ndarray, d: np.ndarray) -> SectionPoint:
    a, b = key
    if a == b:
        return SectionPoint(a, a, 1.0, p[a].copy())
    t = d[a] / (d[a] - d[b])
    alpha = float(1.0 - t)
    return SectionPoint(a, b, alpha, alpha * p[a] + (1.0 - alpha) * p[b])


def plane_frame(normal: np.ndarray) -> np.ndarray:
    """[2, 3] orthonormal in-plane axes built from the normal's smallest component"""
    n = np.asarray(normal, dtype=np.float64)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(n)))] = 1.0
    u = np.cross(n, axis)
    u /= np.linalg.norm(u)
    return np.stack([u, np.cross(n, u)])


def circumference(mesh: TriangleMesh, spec: CircumferenceSpec) -> CircumferencePolygon:
    _check_vertex(mesh, spec.anchor)
    anchor = mesh.vertices[spec.anchor]
    normal = np.asarray(spec.normal)
    chains = plane_section(mesh, spec.region, anchor, normal)
    if not chains:
        raise MeasurementUndefinedError(spec.name, "plane section is empty")

    chain = next((c for c in chains if c.contains_vertex(spec.anchor)), None)
    if chain is None:
        gaps = [float(np.linalg.norm(c.positions() - anchor, axis=1).min()) for c in chains]
        chain = chains[int(np.argmin(gaps))]

    positions = chain.positions()
    flat = (positions - anchor) @ plane_frame(normal).T
    hull = convex_hull_2d(flat)
    if len(hull) < 2:
        raise MeasurementUndefinedError(spec.name, "section degenerates to a single point")

    points = tuple(chain.points[i] for i in hull)
    return CircumferencePolygon(points, hull_edge_lengths(positions, hull))


def evaluate_spec(mesh: TriangleMesh, spec: MeasurementSpec,
                  graph: Optional[EdgeGraph] = None) -> float:
    if isinstance(spec, EuclideanSpec):
        return euclidean_length(mesh, spec)
    if isinstance(spec, GeodesicSpec):
        return geodesic_path(mesh, spec, graph).length
    return circumference(mesh, spec).perimeter


def check_profile_mesh(mesh: TriangleMesh, profile: MeasurementProfile) -> None:
    if (mesh.vertex_count, mesh.triangle_count) != (profile.vertex_count,
                                                     profile.triangle_count):
        raise TopologyMismatchError(
            f"mesh has {mesh.vertex_count} vertices / {mesh.triangle_count} triangles, "
            f"profile expects {profile.vertex_count} / {profile.triangle_count}")


def measure_all(mesh: TriangleMesh, profile: MeasurementProfile,
                graph: Optional[EdgeGraph] = None) -> MeasurementVector:
    """Evaluate every spec in profile order"""
    check_profile_mesh(mesh, profile)
    values = []
    for spec in profile.specs:
        if graph is None and isinstance(spec, GeodesicSpec):
            graph = build_edge_graph(mesh)
        try:
            values.append(evaluate_spec(mesh, spec, graph))
        except MeasurementUndefinedError:
            raise
        except Measure2ShapeError as e:
            raise type(e)(f"{spec.name}: {e}") from e
    return MeasurementVector(np.array(values), tuple(profile.names))


def measure_residuals(mesh: TriangleMesh, profile: MeasurementProfile,
                      targets: MeasurementVector) -> np.ndarray:
    """|measured - target| per spec; NaN where a circumference is undefined"""
    check_profile_mesh(mesh, profile)
    targets = targets.aligned_to(profile)
    graph = None
    residuals = np.full(len(profile), np.nan)
    for i, spec in enumerate(profile.specs):
        if graph is None and isinstance(spec, GeodesicSpec):
            graph = build_edge_graph(mesh)
        try:
            residuals[i] = abs(evaluate_spec(mesh, spec, graph) - targets.values[i])
        except MeasurementUndefinedError as e:
            log.warning("%s", e)
    return residuals
