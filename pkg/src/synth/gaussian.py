"""
Multivariate Gaussian over measurement vectors, with near and far samplers
"""
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..errors import InputFormatError
from ..measurements.specs import MeasurementVector

RIDGE = 1e-9
MAX_REDRAWS = 1000


@dataclass(frozen=True, eq=False)
class MeasurementGaussian:
    """N(mean, covariance) with lower Cholesky factor"""
    mean: np.ndarray
    covariance: np.ndarray
    cholesky: np.ndarray
    names: Tuple[str, ...]

    @property
    def dimension(self) -> int:
        return len(self.mean)

    def mahalanobis(self, x: Sequence[float]) -> float:
        x = x.values if isinstance(x, MeasurementVector) else np.asarray(x, dtype=np.float64)
        z = scipy.linalg.solve_triangular(self.cholesky, x - self.mean, lower=True)
        return float(np.linalg.norm(z))


def fit_gaussian(vectors: Sequence) -> MeasurementGaussian:
    """Sample mean and covariance (divisor n - 1) plus a small diagonal ridge"""
    if len(vectors) < 2:
        raise InputFormatError(f"need >= 2 measurement vectors, got {len(vectors)}")
    names = vectors[0].names if isinstance(vectors[0], MeasurementVector) else ()
    rows = [v.values if isinstance(v, MeasurementVector) else np.asarray(v, dtype=np.float64)
            for v in vectors]
    if len({len(r) for r in rows}) != 1:
        raise InputFormatError("measurement vectors have different lengths")
    data = np.stack(rows)
    mean = data.mean(axis=0)
    covariance = np.atleast_2d(np.cov(data, rowvar=False, ddof=1))
    diagonal_mean = float(np.mean(np.diag(covariance))) if len(mean) else 0.0
    ridge = RIDGE * diagonal_mean if diagonal_mean > 0 else RIDGE
    covariance = covariance + ridge * np.eye(len(mean))
    cholesky = scipy.linalg.cholesky(covariance, lower=True) if len(mean) else covariance
    names = tuple(names) or tuple(f"m{i}" for i in range(len(mean)))
    return MeasurementGaussian(mean, covariance, cholesky, names)


def _positive_draws(gaussian: MeasurementGaussian, count: int, rng: np.random.Generator,
                    directions) -> List[MeasurementVector]:
    samples = []
    for _ in range(count):
        for _ in range(MAX_REDRAWS):
            x = gaussian.mean + gaussian.cholesky @ directions(rng)
            if (x > 0).all():
                break
        else:
            raise InputFormatError(
                f"no positive sample after {MAX_REDRAWS} draws; the distribution "
                "sits too close to zero")
        samples.append(MeasurementVector(x, gaussian.names))
    return samples


def sample_close(gaussian: MeasurementGaussian, count: int, seed: int) -> List[MeasurementVector]:
    """Draws from the distribution itself; non-positive draws are redrawn"""
    if count < 1:
        raise InputFormatError(f"sample count must be positive, got {count}")
    q = gaussian.dimension
    return _positive_draws(gaussian, count, np.random.default_rng(seed),
                           lambda rng: rng.standard_normal(q))


def sample_ellipsoid(gaussian: MeasurementGaussian, k: float, count: int,
                     seed: int) -> List[MeasurementVector]:
    """Uniform directions on the Mahalanobis sphere of radius k"""
    if k < 0:
        raise InputFormatError(f"Mahalanobis radius must be non-negative, got {k}")
    if count < 1:
        raise InputFormatError(f"sample count must be positive, got {count}")
    q = gaussian.dimension

    def direction(rng):
        z = rng.standard_normal(q)
        return k * z / np.linalg.norm(z)

    return _positive_draws(gaussian, count, np.random.default_rng(seed), direction)


def diagonal_offset_point(gaussian: MeasurementGaussian, k: float) -> MeasurementVector:
    """The single point mean + k * diag(covariance)"""
    return MeasurementVector(gaussian.mean + k * np.diag(gaussian.covariance), gaussian.names)
