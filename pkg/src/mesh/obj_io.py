"""
Wavefront OBJ reading and writing
"""
from pathlib import Path
from typing import List, Union

import numpy as np

from ..errors import InputFormatError
from .mesh_core import TriangleMesh


def read_obj(path: Union[str, Path]) -> TriangleMesh:
    """Read `v` and `f` records; normals, texture coordinates and groups are ignored.

    Polygon faces are split into triangle fans.
    """
    vertices: List[List[float]] = []
    triangles: List[List[int]] = []

    # v, v/vt, v//vn or v/vt/vn; negative indices count from the end
    def parse_index(token: str, line_no: int) -> int:
        try:
            index = int(token.split("/")[0])
        except ValueError:
            raise InputFormatError(f"{path}:{line_no}: bad face index '{token}'")
        if index < 0:
            index = len(vertices) + index + 1
        return index - 1

    with open(path, "r", encoding="utf-8") as objf:
        for line_no, line in enumerate(objf, 1):
            toks = line.split()
            if not toks or toks[0].startswith("#"):
                continue
            if toks[0] == "v":
                if len(toks) < 4:
                    raise InputFormatError(f"{path}:{line_no}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(v) for v in toks[1:4]])
                except ValueError:
                    raise InputFormatError(f"{path}:{line_no}: bad vertex coordinate")
            elif toks[0] == "f":
                poly = [parse_index(tok, line_no) for tok in toks[1:]]
                if len(poly) < 3:
                    raise InputFormatError(f"{path}:{line_no}: face needs 3 vertices")
                for i in range(2, len(poly)):
                    triangles.append([poly[0], poly[i - 1], poly[i]])

    if not vertices:
        raise InputFormatError(f"{path}: no vertices")
    return TriangleMesh(np.array(vertices), np.array(triangles, dtype=np.int64)).validate()


def write_obj(mesh: TriangleMesh, path: Union[str, Path]) -> None:
    """Write round-trip exact coordinates and 1-based face indices"""
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles.tolist()]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
