"""
PCA shape space, the measurement-to-weight feature map and weight clamping
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from ..config import config
from ..errors import InputFormatError, TopologyMismatchError
from ..measurements.engine import measure_all
from ..measurements.specs import MeasurementProfile, MeasurementVector
from ..mesh.mesh_core import TriangleMesh

log = logging.getLogger(__name__)

NORMALIZATIONS = ("eigenvalue", "stddev")

# eigenvalues below this fraction of the largest are treated as numerical noise
EIGENVALUE_CUTOFF = 1e-10

ShapeWeights = np.ndarray


def _read_only(array: np.ndarray, dtype=np.float64) -> np.ndarray:
    array = np.array(array, dtype=dtype)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Mean shape and orthonormal principal directions of a corresponded mesh set.

    Attributes:
        mean (np.ndarray): [3m] flattened mean shape.
        basis (np.ndarray): [3m, r] orthonormal columns, strongest component first.
        variances (np.ndarray): [r] eigenvalues of the sample covariance, descending.
        triangles (np.ndarray): [t, 3] shared topology.
        training_count (int): number of training meshes n.
    """
    mean: np.ndarray
    basis: np.ndarray
    variances: np.ndarray
    triangles: np.ndarray
    training_count: int

    def __post_init__(self):
        object.__setattr__(self, "mean", _read_only(self.mean).reshape(-1))
        object.__setattr__(self, "variances", _read_only(self.variances).reshape(-1))
        object.__setattr__(self, "basis", _read_only(self.basis).reshape(len(self.mean),
                                                                          len(self.variances)))
        object.__setattr__(self, "triangles", _read_only(self.triangles, np.int64).reshape(-1, 3))
        if self.basis.shape[1] != len(self.variances):
            raise InputFormatError(
                f"{self.basis.shape[1]} basis columns for {len(self.variances)} variances")

    @property
    def component_count(self) -> int:
        return self.basis.shape[1]

    @property
    def vertex_count(self) -> int:
        return len(self.mean) // 3

    @property
    def stddevs(self) -> np.ndarray:
        return np.sqrt(self.variances)

    @property
    def mean_mesh(self) -> TriangleMesh:
        return TriangleMesh(self.mean.reshape(-1, 3), self.triangles)

    def check_topology(self, mesh: TriangleMesh) -> None:
        if mesh.vertex_count != self.vertex_count or not np.array_equal(mesh.triangles,
                                                                         self.triangles):
            raise TopologyMismatchError(
                f"mesh with {mesh.vertex_count} vertices does not share the model topology")

    def check_weights(self, weights: Sequence[float]) -> ShapeWeights:
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if len(weights) != self.component_count:
            raise InputFormatError(
                f"expected {self.component_count} weights, got {len(weights)}")
        if not np.isfinite(weights).all():
            raise InputFormatError("shape weights must be finite")
        return weights


def train_pca(meshes: Sequence[TriangleMesh], components: Optional[int] = None,
              labels: Optional[Sequence[str]] = None) -> PcaModel:
    """Snapshot PCA on the n x n Gram matrix of centred, flattened meshes.

    Components with vanishing variance are dropped, so r can be below n - 1.
    """
    n = len(meshes)
    if n < 2:
        raise InputFormatError(f"need >= 2 training meshes, got {n}")
    labels = list(labels) if labels is not None else [f"mesh {i}" for i in range(n)]
    reference = meshes[0]
    offenders = [labels[i] for i, mesh in enumerate(meshes) if not reference.same_topology(mesh)]
    if offenders:
        raise TopologyMismatchError(f"topology differs from {labels[0]}", offenders)
    if components is not None and not 0 <= components <= n - 1:
        raise InputFormatError(f"component count {components} outside [0, {n - 1}]")

    X = np.stack([mesh.vertices.reshape(-1) for mesh in meshes])
    mean = X.mean(axis=0)
    D = X - mean
    gram = D @ D.T / (n - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(gram)
    eigenvalues = eigenvalues[::-1]
    eigenvectors = eigenvectors[:, ::-1]

    top = eigenvalues[0]
    keep = int(np.sum(eigenvalues > top * EIGENVALUE_CUTOFF)) if top > 0 else 0
    if components is not None:
        keep = min(keep, components)
    eigenvalues = eigenvalues[:keep]

    basis = D.T @ eigenvectors[:, :keep] / np.sqrt((n - 1) * eigenvalues)
    # largest-magnitude entry of every direction is positive
    pivots = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[pivots, np.arange(keep)])
    basis *= np.where(signs == 0, 1.0, signs)

    log.debug("trained PCA on %d meshes, kept %d components", n, keep)
    return PcaModel(mean, basis, eigenvalues, reference.triangles, n)


def project(model: PcaModel, mesh: Union[TriangleMesh, np.ndarray]) -> ShapeWeights:
    """W = A^T (X - mu)"""
    if isinstance(mesh, TriangleMesh):
        model.check_topology(mesh)
        x = mesh.vertices.reshape(-1)
    else:
        x = np.asarray(mesh, dtype=np.float64).reshape(-1)
        if len(x) != len(model.mean):
            raise InputFormatError(f"expected {len(model.mean)} coordinates, got {len(x)}")
    return model.basis.T @ (x - model.mean)


def synthesize_flat(model: PcaModel, weights: Sequence[float]) -> np.ndarray:
    return model.basis @ model.check_weights(weights) + model.mean


def synthesize(model: PcaModel, weights: Sequence[float]) -> TriangleMesh:
    """X = A W + mu on the shared topology"""
    return TriangleMesh(synthesize_flat(model, weights).reshape(-1, 3), model.triangles)


def clamp_weights(model: PcaModel, weights: Sequence[float], l: float) -> ShapeWeights:
    """Limit every weight to l standard deviations of its component"""
    if not l > 0:
        raise InputFormatError(f"clamp multiplier must be positive, got {l}")
    weights = model.check_weights(weights)
    bound = l * model.stddevs
    return np.clip(weights, -bound, bound)


def normalization_divisors(model: PcaModel, normalization: str) -> np.ndarray:
    if normalization == "eigenvalue":
        return model.variances.copy()
    if normalization == "stddev":
        return model.stddevs
    raise InputFormatError(
        f"unknown normalization '{normalization}', expected one of {', '.join(NORMALIZATIONS)}")


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Affine map from measurements (mm) to normalized PCA weights.

    `matrix` is [r, q + 1]; its last column multiplies the constant 1.
    """
    matrix: np.ndarray
    normalization: str = "eigenvalue"

    def __post_init__(self):
        object.__setattr__(self, "matrix", _read_only(self.matrix))
        if self.matrix.ndim != 2:
            raise InputFormatError("feature map matrix must be two-dimensional")
        if self.normalization not in NORMALIZATIONS:
            raise InputFormatError(f"unknown normalization '{self.normalization}'")
        if self.matrix.shape[1] < 1:
            raise InputFormatError("feature map needs a bias column")

    @property
    def measurement_count(self) -> int:
        return self.matrix.shape[1] - 1


def _as_rows(values, label: str) -> np.ndarray:
    rows = [v.values if isinstance(v, MeasurementVector) else np.asarray(v, dtype=np.float64)
            for v in values]
    if not rows:
        raise InputFormatError(f"no {label} given")
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise InputFormatError(f"{label} have inconsistent lengths {sorted(lengths)}")
    return np.stack(rows)


def train_feature_map(model: PcaModel, measurements: Sequence, weights: Sequence,
                      normalization: Optional[str] = None,
                      ridge: Optional[float] = None) -> FeatureMap:
    """Least squares fit of normalized weights against [P; 1].

    Measurement columns are standardized before a ridge-regularized normal-equation
    solve; the bias is not penalized. The result is expressed in raw millimetres.
    """
    normalization = normalization or config.FEATURE_NORMALIZATION
    ridge = config.FEATURE_RIDGE if ridge is None else ridge
    P = _as_rows(measurements, "measurement vectors")
    W = _as_rows(weights, "weight vectors")
    n, q = P.shape
    if len(W) != n:
        raise InputFormatError(f"{n} measurement vectors for {len(W)} weight vectors")
    if n < 2:
        raise InputFormatError(f"need >= 2 training pairs, got {n}")
    if W.shape[1] != model.component_count:
        raise InputFormatError(
            f"weights have {W.shape[1]} entries, model has {model.component_count} components")

    W_hat = W / normalization_divisors(model, normalization)
    bias = W_hat.mean(axis=0)
    if q == 0:
        return FeatureMap(bias[:, None], normalization)

    centre = P.mean(axis=0)
    scale = P.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (P - centre) / scale
    normal = Z.T @ Z
    trace = float(np.trace(normal))
    rho = ridge * trace / q if trace > 0 else ridge
    coef = scipy.linalg.solve(normal + rho * np.eye(q), Z.T @ (W_hat - bias), assume_a="pos")

    B_p = (coef / scale[:, None]).T
    B_1 = bias - B_p @ centre
    return FeatureMap(np.column_stack([B_p, B_1]), normalization)


def predict_weights(featmap: FeatureMap, model: PcaModel,
                    measurements: Union[MeasurementVector, Sequence[float]]) -> ShapeWeights:
    """W[j] = (B [P; 1])[j] * divisor_j"""
    P = measurements.values if isinstance(measurements, MeasurementVector) else \
        np.asarray(measurements, dtype=np.float64).reshape(-1)
    if len(P) != featmap.measurement_count:
        raise InputFormatError(
            f"expected {featmap.measurement_count} measurements, got {len(P)}")
    if featmap.matrix.shape[0] != model.component_count:
        raise InputFormatError(
            f"feature map has {featmap.matrix.shape[0]} rows, "
            f"model has {model.component_count} components")
    W_hat = featmap.matrix @ np.append(P, 1.0)
    return W_hat * normalization_divisors(model, featmap.normalization)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Everything `predict` needs: shape space, feature map and measurement profile"""
    pca: PcaModel
    feature_map: FeatureMap
    profile: MeasurementProfile

    def __post_init__(self):
        if self.feature_map.measurement_count != len(self.profile):
            raise InputFormatError(
                f"feature map expects {self.feature_map.measurement_count} measurements, "
                f"profile has {len(self.profile)}")
        if self.profile.vertex_count != self.pca.vertex_count:
            raise TopologyMismatchError(
                f"profile is defined on {self.profile.vertex_count} vertices, "
                f"model has {self.pca.vertex_count}")


def measure_meshes(meshes: Sequence[TriangleMesh], profile: MeasurementProfile,
                   threads: int = 1) -> List[MeasurementVector]:
    """measure_all over many meshes, results in input order"""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda mesh: measure_all(mesh, profile), meshes))
    return [measure_all(mesh, profile) for mesh in meshes]


def train_model(meshes: Sequence[TriangleMesh], profile: MeasurementProfile,
                components: Optional[int] = None, normalization: Optional[str] = None,
                labels: Optional[Sequence[str]] = None,
                threads: int = 1) -> Tuple[TrainedModel, List[MeasurementVector]]:
    """PCA, per-mesh measurement and feature-map training in one step"""
    pca = train_pca(meshes, components, labels)
    measured = measure_meshes(meshes, profile, threads)
    weights = [project(pca, mesh) for mesh in meshes]
    feature_map = train_feature_map(pca, measured, weights, normalization)
    return TrainedModel(pca, feature_map, profile), measured
