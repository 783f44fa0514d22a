"""
Per-edge length targets frozen on the current mesh between outer refinement steps
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..errors import MeasurementUndefinedError
from ..measurements.engine import check_profile_mesh, circumference, geodesic_path
from ..measurements.specs import (CircumferenceSpec, EuclideanSpec, MeasurementProfile,
                                  MeasurementVector)
from ..mesh.mesh_core import EdgeGraph, TriangleMesh, build_edge_graph

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FrozenConstraints:
    """Length terms with fixed endpoints and targets.

    Circumference terms join two hull points, each a convex combination of two
    vertices: q = alpha * p[idx[0]] + (1 - alpha) * p[idx[1]].
    """
    euclidean_pairs: np.ndarray
    euclidean_targets: np.ndarray
    geodesic_edges: np.ndarray
    geodesic_targets: np.ndarray
    circumference_index: np.ndarray
    circumference_alpha: np.ndarray
    circumference_targets: np.ndarray
    dropped: Tuple[str, ...] = ()

    @property
    def term_count(self) -> int:
        return (len(self.euclidean_targets) + len(self.geodesic_targets)
                + len(self.circumference_targets))


def freeze_constraints(mesh: TriangleMesh, profile: MeasurementProfile,
                       targets: MeasurementVector, drop_undefined: bool = False,
                       graph: Optional[EdgeGraph] = None) -> FrozenConstraints:
    """Recompute paths and hulls on `mesh` and split every target over their edges.

    Each edge gets target * (current edge length / current total length). With
    `drop_undefined`, circumferences whose section vanished are skipped with a warning.
    """
    check_profile_mesh(mesh, profile)
    targets = targets.aligned_to(profile)

    e_pairs, e_targets = [], []
    g_edges, g_targets = [], []
    c_index, c_alpha, c_targets = [], [], []
    dropped = []

    for spec, target in zip(profile.specs, targets.values.tolist()):
        if isinstance(spec, EuclideanSpec):
            e_pairs.append((spec.a, spec.b))
            e_targets.append(target)
        elif isinstance(spec, CircumferenceSpec):
            try:
                polygon = circumference(mesh, spec)
            except MeasurementUndefinedError as e:
                if not drop_undefined:
                    raise
                log.warning("dropping %s from this refinement step: %s", spec.name, e.reason)
                dropped.append(spec.name)
                continue
            idx, alpha = polygon.edge_encoding()
            c_index.extend(idx.tolist())
            c_alpha.extend(alpha.tolist())
            c_targets.extend((target / polygon.perimeter * polygon.edge_lengths).tolist())
        else:
            if spec.a == spec.b:
                log.warning("geodesic %s has coincident endpoints and adds no terms", spec.name)
                continue
            graph = graph or build_edge_graph(mesh)
            path = geodesic_path(mesh, spec, graph)
            g_edges.extend(path.edges.tolist())
            g_targets.extend((target / path.length * path.edge_lengths).tolist())

    return FrozenConstraints(
        euclidean_pairs=np.array(e_pairs, dtype=np.int64).reshape(-1, 2),
        euclidean_targets=np.array(e_targets, dtype=np.float64),
        geodesic_edges=np.array(g_edges, dtype=np.int64).reshape(-1, 2),
        geodesic_targets=np.array(g_targets, dtype=np.float64),
        circumference_index=np.array(c_index, dtype=np.int64).reshape(-1, 4),
        circumference_alpha=np.array(c_alpha, dtype=np.float64).reshape(-1, 2),
        circumference_targets=np.array(c_targets, dtype=np.float64),
        dropped=tuple(dropped),
    )
