"""
Deterministic template meshes: a limbed mannequin and a deformed-sphere blob
"""
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..config import config
from ..errors import InputFormatError
from ..mesh.mesh_core import TriangleMesh, compact

MIN_RESOLUTION = 16
KINDS = ("mannequin", "blob")

TORSO_BOTTOM = 830.0
TORSO_TOP = 1750.0
BLOB_RADIUS = 100.0


@dataclass(frozen=True, eq=False)
class Template:
    """A template mesh with named triangle regions, landmark vertices and vertex rings"""
    kind: str
    resolution: int
    mesh: TriangleMesh
    regions: Dict[str, Tuple[int, ...]]
    landmarks: Dict[str, int]
    rings: Dict[str, Tuple[int, ...]]


class _MeshBuilder:
    def __init__(self):
        self.points: List[np.ndarray] = []
        self.count = 0
        self.faces: List[Tuple[int, int, int]] = []
        self.regions: Dict[str, List[int]] = {}

    def add_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        self.points.append(points)
        indices = np.arange(self.count, self.count + len(points))
        self.count += len(points)
        return indices

    def add_face(self, face: Sequence[int], *regions: str) -> None:
        for region in regions:
            self.regions.setdefault(region, []).append(len(self.faces))
        self.faces.append(tuple(int(v) for v in face))

    def add_band(self, lower: Sequence[int], upper: Sequence[int], *regions: str) -> None:
        """Quads between two rings of equal size, split into two triangles each"""
        n = len(lower)
        for i in range(n):
            j = (i + 1) % n
            self.add_face((lower[i], lower[j], upper[j]), *regions)
            self.add_face((lower[i], upper[j], upper[i]), *regions)

    def build(self) -> Tuple[TriangleMesh, np.ndarray, Dict[str, Tuple[int, ...]]]:
        mesh, remap = compact(np.concatenate(self.points), np.array(self.faces))
        regions = {name: tuple(faces) for name, faces in self.regions.items()}
        return mesh, remap, regions


def _ring(center_z: float, rx: float, ry: float, count: int) -> np.ndarray:
    phi = 2.0 * np.pi * np.arange(count) / count
    return np.column_stack([rx * np.cos(phi), ry * np.sin(phi), np.full(count, center_z)])


def _boundary_loop(faces: Sequence[Tuple[int, int, int]]) -> List[int]:
    """Boundary of a disk-shaped face patch, in the patch's own winding"""
    directed = set()
    for a, b, c in faces:
        directed.update({(a, b), (b, c), (c, a)})
    following = {a: b for a, b in directed if (b, a) not in directed}
    start = min(following)
    loop = [start]
    while following[loop[-1]] != start:
        loop.append(following[loop[-1]])
    return loop


def _sweep_tube(builder: _MeshBuilder, positions: np.ndarray, loop: List[int],
                offsets: Sequence[Tuple[float, float]], radii: Sequence[float],
                ring_count: int, region: str) -> Tuple[List[np.ndarray], int]:
    """Grow a capped tube out of a hole along a control polyline.

    `offsets` are (outward, vertical) millimetre offsets from the hole centre; the
    first radius is replaced by the hole's mean radius. Frames are rotation minimizing.
    """
    hole = positions[loop]
    centre = hole.mean(axis=0)
    outward = np.array([centre[0], centre[1], 0.0])
    outward /= np.linalg.norm(outward)
    controls = np.array([centre + a * outward + np.array([0.0, 0.0, z]) for a, z in offsets])
    radii = np.array(radii, dtype=np.float64)
    radii[0] = float(np.linalg.norm(hole - centre, axis=1).mean())

    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(controls, axis=0), axis=1))])
    stations = arc[-1] * np.arange(ring_count + 1) / ring_count
    path = np.column_stack([np.interp(stations, arc, controls[:, i]) for i in range(3)])
    tangents = np.gradient(path, axis=0)
    tangents /= np.linalg.norm(tangents, axis=1)[:, None]
    ring_radii = np.interp(stations, arc, radii)

    u = hole[0] - centre
    u -= (u @ tangents[0]) * tangents[0]
    u /= np.linalg.norm(u)
    winding = np.sign(np.cross(hole[0] - centre, hole[1] - centre) @ tangents[0]) or 1.0
    angles = winding * 2.0 * np.pi * np.arange(len(loop)) / len(loop)

    rings = []
    previous = loop
    for j in range(1, ring_count + 1):
        t = tangents[j]
        u = u - (u @ t) * t
        u /= np.linalg.norm(u)
        v = np.cross(t, u)
        points = path[j] + ring_radii[j] * (np.outer(np.cos(angles), u)
                                            + np.outer(np.sin(angles), v))
        current = builder.add_points(points)
        builder.add_band(previous, current, region)
        rings.append(current)
        previous = current

    apex = int(builder.add_points(path[-1] + tangents[-1] * 0.6 * ring_radii[-1])[0])
    for i in range(len(previous)):
        builder.add_face((previous[i], previous[(i + 1) % len(previous)], apex), region)
    return rings, apex


def _block_cells(rows: range, centre_column: int, width: int, columns: int) -> List[Tuple[int, int]]:
    first = centre_column - width // 2
    return [(k, (first + j) % columns) for k in rows for j in range(width)]


def _mannequin(resolution: int) -> Template:
    n = resolution
    block = max(2, n // 8)

    # ring roles, bottom to top
    hip = block + 2
    waist = max(hip + 1, round(0.30 * (n - 1)))
    chest = max(waist + 2, round(0.48 * (n - 1)))
    shoulder = max(chest + 1, round(0.58 * (n - 1)))
    neck = max(shoulder + block + 1, round(0.74 * (n - 1)))
    head = max(neck + 1, round(0.86 * (n - 1)))
    if head > n - 2:
        raise InputFormatError(f"resolution {n} is too small for a mannequin")

    profile_rings = [0, hip, waist, chest, shoulder, shoulder + block, neck, head, n - 1]
    rx = np.interp(np.arange(n), profile_rings, [150, 175, 145, 175, 185, 170, 55, 85, 40])
    ry = np.interp(np.arange(n), profile_rings, [115, 125, 105, 125, 120, 105, 55, 95, 45])
    heights = TORSO_BOTTOM + (TORSO_TOP - TORSO_BOTTOM) * np.arange(n) / (n - 1)

    builder = _MeshBuilder()
    rings = [builder.add_points(_ring(heights[k], rx[k], ry[k], n)) for k in range(n)]
    spacing = heights[1] - heights[0]
    bottom = int(builder.add_points([0.0, 0.0, TORSO_BOTTOM - 0.6 * spacing])[0])
    top = int(builder.add_points([0.0, 0.0, TORSO_TOP + 0.8 * spacing])[0])

    holes = {
        "leg_right": _block_cells(range(1, 1 + block), 0, block, n),
        "leg_left": _block_cells(range(1, 1 + block), n // 2, block, n),
        "arm_right": _block_cells(range(shoulder, shoulder + block), 0, block, n),
        "arm_left": _block_cells(range(shoulder, shoulder + block), n // 2, block, n),
    }
    cell_owner = {cell: name for name, cells in holes.items() for cell in cells}
    removed: Dict[str, List[Tuple[int, int, int]]] = {name: [] for name in holes}

    for k in range(n - 1):
        for j in range(n):
            jn = (j + 1) % n
            pair = [(rings[k][j], rings[k][jn], rings[k + 1][jn]),
                    (rings[k][j], rings[k + 1][jn], rings[k + 1][j])]
            owner = cell_owner.get((k, j))
            if owner:
                removed[owner].extend(pair)
                continue
            regions = ("torso", "head") if k >= neck else ("torso",)
            for face in pair:
                builder.add_face(face, *regions)
    for j in range(n):
        builder.add_face((bottom, rings[0][(j + 1) % n], rings[0][j]), "torso")
        builder.add_face((rings[-1][j], rings[-1][(j + 1) % n], top), "torso", "head")

    positions = np.concatenate(builder.points)
    leg_offsets = [(0, 0), (60, -60), (90, -400), (90, -780)]
    leg_radii = [0, 85, 58, 40]
    arm_offsets = [(0, 0), (50, -20), (70, -280), (80, -520)]
    arm_radii = [0, 45, 36, 28]
    limb_rings: Dict[str, List[np.ndarray]] = {}
    apexes: Dict[str, int] = {}
    loops: Dict[str, List[int]] = {}
    for name in ("leg_right", "leg_left", "arm_right", "arm_left"):
        loops[name] = _boundary_loop(removed[name])
        offsets, radii = (leg_offsets, leg_radii) if name.startswith("leg") else \
            (arm_offsets, arm_radii)
        limb_rings[name], apexes[name] = _sweep_tube(builder, positions, loops[name], offsets,
                                                     radii, n, name)

    mesh, remap, regions = builder.build()

    def vertex(index) -> int:
        return int(remap[int(index)])

    # joint ring sits at the third control point of the limb polyline
    def joint_ring(offsets) -> int:
        controls = np.array(offsets, dtype=np.float64)
        arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(controls, axis=0), axis=1))])
        return max(1, int(round(n * arc[2] / arc[-1]))) - 1

    knee = joint_ring(leg_offsets)
    elbow = joint_ring(arm_offsets)
    front = n // 4
    landmarks = {"crown": vertex(top), "crotch": vertex(bottom),
                 "neck_front": vertex(rings[neck][front])}
    named_rings: Dict[str, Tuple[int, ...]] = {
        "hip": tuple(vertex(v) for v in rings[hip]),
        "waist": tuple(vertex(v) for v in rings[waist]),
        "chest": tuple(vertex(v) for v in rings[chest]),
        "head": tuple(vertex(v) for v in rings[head]),
    }
    for side in ("right", "left"):
        for limb, joint, hole_name in (("leg", knee, "hip"), ("arm", elbow, "shoulder")):
            name = f"{limb}_{side}"
            loop = loops[name]
            landmarks[f"{side}_{hole_name}"] = vertex(loop[int(np.argmax(positions[loop, 2]))])
            landmarks[f"{side}_{'foot' if limb == 'leg' else 'hand'}"] = vertex(apexes[name])
            joint_name = "knee" if limb == "leg" else "elbow"
            landmarks[f"{side}_{joint_name}"] = vertex(limb_rings[name][joint][0])
            named_rings[f"{joint_name}_{side}"] = tuple(vertex(v) for v in limb_rings[name][joint])
    return Template("mannequin", resolution, mesh, regions, landmarks, named_rings)


def _blob(resolution: int) -> Template:
    n = resolution
    builder = _MeshBuilder()
    phi = 2.0 * np.pi * np.arange(n) / n

    def surface(theta, phi):
        # mildly egg-shaped and flattened front to back
        r = BLOB_RADIUS * (1.0 + 0.12 * np.cos(theta) + 0.08 * np.cos(2 * phi) * np.sin(theta) ** 2)
        return np.column_stack([r * np.sin(theta) * np.cos(phi),
                                0.85 * r * np.sin(theta) * np.sin(phi),
                                1.15 * r * np.cos(theta)])

    thetas = np.pi * (1.0 - np.arange(1, n) / n)  # bottom to top
    rings = [builder.add_points(surface(np.full(n, t), phi)) for t in thetas]
    bottom = int(builder.add_points(surface(np.array([np.pi]), np.array([0.0])))[0])
    top = int(builder.add_points(surface(np.array([0.0]), np.array([0.0])))[0])
    for lower, upper in zip(rings[:-1], rings[1:]):
        builder.add_band(lower, upper, "surface")
    for j in range(n):
        builder.add_face((bottom, rings[0][(j + 1) % n], rings[0][j]), "surface")
        builder.add_face((rings[-1][j], rings[-1][(j + 1) % n], top), "surface")

    mesh, _, regions = builder.build()
    unit = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1)[:, None]

    def nearest(direction) -> int:
        direction = np.asarray(direction, dtype=np.float64)
        return int(np.argmax(unit @ (direction / np.linalg.norm(direction))))

    landmarks = {
        "forehead": nearest([0, 1, 0.8]),
        "nose": nearest([0, 1, 0]),
        "chin": nearest([0, 1, -0.9]),
        "eye_right": nearest([0.45, 1, 0.35]),
        "eye_left": nearest([-0.45, 1, 0.35]),
        "ear_right": nearest([1, 0, 0]),
        "ear_left": nearest([-1, 0, 0]),
    }
    return Template("blob", resolution, mesh, regions, landmarks, {})


def build_template(kind: str = "mannequin", resolution: int = None) -> Template:
    resolution = config.TEMPLATE_RESOLUTION if resolution is None else int(resolution)
    if resolution < MIN_RESOLUTION:
        raise InputFormatError(f"resolution must be >= {MIN_RESOLUTION}, got {resolution}")
    if kind == "mannequin":
        return _mannequin(resolution)
    if kind == "blob":
        return _blob(resolution)
    raise InputFormatError(f"unknown template kind '{kind}', expected one of {', '.join(KINDS)}")


def make_template(kind: str = "mannequin", resolution: int = None) -> TriangleMesh:
    return build_template(kind, resolution).mesh
