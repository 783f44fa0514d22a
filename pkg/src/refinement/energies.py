"""
Measurement and smoothness energies with analytic per-vertex gradients
"""
from typing import Tuple, Union

import numpy as np

from ..errors import InputFormatError, TopologyMismatchError
from ..mesh.mesh_core import TriangleMesh
from .constraints import FrozenConstraints

Positions = Union[TriangleMesh, np.ndarray]
EnergyGradient = Tuple[float, np.ndarray]


def _positions(mesh: Positions) -> np.ndarray:
    if isinstance(mesh, TriangleMesh):
        return mesh.vertices
    positions = np.asarray(mesh, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 3:
        positions = positions.reshape(-1, 3)
    return positions


def segment_energy(positions: np.ndarray, index: np.ndarray, alpha: np.ndarray,
                   targets: np.ndarray) -> EnergyGradient:
    """sum over terms of (|q_i - q_j|^2 - t^2)^2.

    index is [k, 4] (a_i, b_i, a_j, b_j), alpha is [k, 2] (alpha_i, alpha_j).
    """
    p = positions
    gradient = np.zeros_like(p)
    if len(targets) == 0:
        return 0.0, gradient
    wi = alpha[:, 0:1]
    wj = alpha[:, 1:2]
    qi = wi * p[index[:, 0]] + (1.0 - wi) * p[index[:, 1]]
    qj = wj * p[index[:, 2]] + (1.0 - wj) * p[index[:, 3]]
    u = qi - qj
    residual = np.einsum("ij,ij->i", u, u) - targets * targets
    energy = float(np.sum(residual * residual))

    g = 4.0 * residual[:, None] * u
    np.add.at(gradient, index[:, 0], wi * g)
    np.add.at(gradient, index[:, 1], (1.0 - wi) * g)
    np.add.at(gradient, index[:, 2], -wj * g)
    np.add.at(gradient, index[:, 3], -(1.0 - wj) * g)
    return energy, gradient


def _vertex_pairs(pairs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    index = np.column_stack([pairs[:, 0], pairs[:, 0], pairs[:, 1], pairs[:, 1]])
    return index, np.ones((len(pairs), 2))


def energy_euclidean(mesh: Positions, frozen: FrozenConstraints) -> EnergyGradient:
    index, alpha = _vertex_pairs(frozen.euclidean_pairs)
    return segment_energy(_positions(mesh), index, alpha, frozen.euclidean_targets)


def energy_geodesic(mesh: Positions, frozen: FrozenConstraints) -> EnergyGradient:
    index, alpha = _vertex_pairs(frozen.geodesic_edges)
    return segment_energy(_positions(mesh), index, alpha, frozen.geodesic_targets)


def energy_circumference(mesh: Positions, frozen: FrozenConstraints) -> EnergyGradient:
    return segment_energy(_positions(mesh), frozen.circumference_index,
                          frozen.circumference_alpha, frozen.circumference_targets)


def energy_smoothness(mesh: Positions, reference: TriangleMesh) -> EnergyGradient:
    """sum_i sum_{j in N(i)} |d_i - d_j|^2 with d = displacement from `reference`.

    Every edge is counted from both ends, so E = 2 tr(D^T L D) and grad = 4 L D.
    """
    if isinstance(mesh, TriangleMesh) and not mesh.same_topology(reference):
        raise TopologyMismatchError("smoothness reference has a different topology")
    p = _positions(mesh)
    if p.shape != reference.vertices.shape:
        raise InputFormatError(
            f"expected {reference.vertices.shape} positions, got {p.shape}")
    displacement = p - reference.vertices
    smoothed = reference.graph_laplacian @ displacement
    energy = 2.0 * float(np.sum(displacement * smoothed))
    return energy, 4.0 * smoothed


def measurement_energy(mesh: Positions, frozen: FrozenConstraints) -> EnergyGradient:
    """E_m = E_e + E_g + E_c"""
    p = _positions(mesh)
    e_e, g_e = energy_euclidean(p, frozen)
    e_g, g_g = energy_geodesic(p, frozen)
    e_c, g_c = energy_circumference(p, frozen)
    return e_e + e_g + e_c, g_e + g_g + g_c


def combined_energy(mesh: Positions, frozen: FrozenConstraints, reference: TriangleMesh,
                    smoothness_lambda: float) -> EnergyGradient:
    """(1 - lambda) E_m + lambda E_s"""
    if not 0.0 <= smoothness_lambda <= 1.0:
        raise InputFormatError(f"smoothness weight must lie in [0, 1], got {smoothness_lambda}")
    e_m, g_m = measurement_energy(mesh, frozen)
    e_s, g_s = energy_smoothness(mesh, reference)
    weight = 1.0 - smoothness_lambda
    return weight * e_m + smoothness_lambda * e_s, weight * g_m + smoothness_lambda * g_s
