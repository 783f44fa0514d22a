"""
Two-stage prediction: feature-analysis start, PCA-weight refinement, then free vertex refinement
"""
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..config import config
from ..errors import InputFormatError
from ..measurements.engine import measure_residuals
from ..measurements.specs import MeasurementProfile, MeasurementVector
from ..mesh.mesh_core import TriangleMesh
from ..model.shape_model import (PcaModel, ShapeWeights, TrainedModel, clamp_weights,
                                 predict_weights, synthesize, synthesize_flat)
from ..solver.lbfgs import SolveConfig, SolveReport, minimize
from .constraints import freeze_constraints
from .energies import combined_energy, measurement_energy

log = logging.getLogger(__name__)

PRESETS: Dict[str, Dict[str, float]] = {
    "synthetic": {"clamp_l": 3.0, "smoothness_lambda": 0.1, "recompute_s": 3},
    "real": {"clamp_l": 10.0, "smoothness_lambda": 0.1, "recompute_s": 3},
    "noisy": {"clamp_l": 3.0, "smoothness_lambda": 1.0, "recompute_s": 3},
    "small-training": {"clamp_l": 3.0, "smoothness_lambda": 0.1, "recompute_s": 10},
}


class RefinementConfig(BaseModel):
    """Clamp multiplier l, smoothness weight lambda and outer refreeze count s"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    clamp_l: float = Field(default_factory=lambda: config.CLAMP_L, gt=0)
    smoothness_lambda: float = Field(default_factory=lambda: config.SMOOTHNESS_LAMBDA,
                                     ge=0, le=1)
    recompute_s: int = Field(default_factory=lambda: config.RECOMPUTE_S, ge=1)
    # stage 2 uses recompute_s when unset
    recompute_s_vertices: Optional[int] = Field(default=None, ge=1)
    # clamp the feature-analysis start; stage 1 always clamps
    clamp: bool = True
    solver: SolveConfig = Field(default_factory=SolveConfig)

    @classmethod
    def preset(cls, name: str, **overrides) -> "RefinementConfig":
        if name not in PRESETS:
            raise InputFormatError(
                f"unknown preset '{name}', expected one of {', '.join(PRESETS)}")
        values = dict(PRESETS[name])
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @property
    def vertex_outer_steps(self) -> int:
        return self.recompute_s_vertices or self.recompute_s


class SolveSummary(BaseModel):
    stage: int
    outer: int
    iterations: int
    termination: str
    initial_energy: float
    energy: float
    gradient_norm: float
    evaluations: int
    dropped: List[str] = []


class StageReport(BaseModel):
    name: str
    measurement_energy: Optional[float] = None
    # None where a measurement is undefined on this stage's mesh
    residuals: List[Optional[float]]


class PredictionReport(BaseModel):
    measurement_names: List[str]
    targets: List[float]
    stages: List[StageReport]
    solves: List[SolveSummary]
    dropped: List[str]
    weights_initial: List[float]
    weights_stage1: List[float]
    config: dict

    def stage(self, name: str) -> StageReport:
        return next(s for s in self.stages if s.name == name)


def _summary(stage: int, outer: int, report: SolveReport,
             dropped: Tuple[str, ...]) -> SolveSummary:
    return SolveSummary(stage=stage, outer=outer, initial_energy=report.energy_trace[0],
                        dropped=list(dropped), **report.summary())


def optimize_weights(model: PcaModel, profile: MeasurementProfile, targets: MeasurementVector,
                     weights: ShapeWeights, settings: Optional[RefinementConfig] = None,
                     solves: Optional[List[SolveSummary]] = None) -> ShapeWeights:
    """Stage 1: minimize E_m over PCA weights, refreezing s times and clamping after each solve"""
    settings = settings or RefinementConfig()
    W = model.check_weights(weights)
    for outer in range(settings.recompute_s):
        frozen = freeze_constraints(synthesize(model, W), profile, targets, drop_undefined=True)

        def objective(w, frozen=frozen):
            energy, gradient = measurement_energy(synthesize_flat(model, w), frozen)
            return energy, model.basis.T @ gradient.reshape(-1)

        report = minimize(objective, W, settings.solver)
        W = clamp_weights(model, report.x, settings.clamp_l)
        log.debug("stage 1 step %d: E_m %.6g -> %.6g (%s)", outer, report.energy_trace[0],
                  report.energy, report.termination.value)
        if solves is not None:
            solves.append(_summary(1, outer, report, frozen.dropped))
    return W


def optimize_vertices(start: TriangleMesh, profile: MeasurementProfile,
                      targets: MeasurementVector, settings: Optional[RefinementConfig] = None,
                      solves: Optional[List[SolveSummary]] = None) -> TriangleMesh:
    """Stage 2: minimize (1 - lambda) E_m + lambda E_s over vertex positions.

    Displacements are always measured from `start`.
    """
    settings = settings or RefinementConfig()
    lam = settings.smoothness_lambda
    mesh = start
    for outer in range(settings.vertex_outer_steps):
        frozen = freeze_constraints(mesh, profile, targets, drop_undefined=True)

        def objective(x, frozen=frozen):
            energy, gradient = combined_energy(x.reshape(-1, 3), frozen, start, lam)
            return energy, gradient.reshape(-1)

        report = minimize(objective, mesh.vertices.reshape(-1), settings.solver)
        mesh = start.with_vertices(report.x.reshape(-1, 3))
        log.debug("stage 2 step %d: E %.6g -> %.6g (%s)", outer, report.energy_trace[0],
                  report.energy, report.termination.value)
        if solves is not None:
            solves.append(_summary(2, outer, report, frozen.dropped))
    return mesh


def feature_analysis_weights(model: TrainedModel, targets: MeasurementVector,
                             clamp_l: Optional[float] = None) -> ShapeWeights:
    """W = B [P; 1], clamped to clamp_l standard deviations when given"""
    weights = predict_weights(model.feature_map, model.pca, targets.aligned_to(model.profile))
    if clamp_l is not None:
        weights = clamp_weights(model.pca, weights, clamp_l)
    return weights


def initial_weights(model: TrainedModel, targets: MeasurementVector,
                    settings: RefinementConfig) -> ShapeWeights:
    """Feature-analysis start, clamped unless `settings.clamp` is off"""
    return feature_analysis_weights(model, targets,
                                    settings.clamp_l if settings.clamp else None)


def stage_energy(mesh: TriangleMesh, profile: MeasurementProfile,
                 targets: MeasurementVector) -> float:
    """E_m on constraints freshly frozen on `mesh`"""
    frozen = freeze_constraints(mesh, profile, targets, drop_undefined=True)
    return measurement_energy(mesh, frozen)[0]


def _stage(name: str, mesh: TriangleMesh, profile: MeasurementProfile,
           targets: MeasurementVector) -> StageReport:
    residuals = measure_residuals(mesh, profile, targets)
    return StageReport(name=name, measurement_energy=stage_energy(mesh, profile, targets),
                       residuals=[None if np.isnan(r) else float(r) for r in residuals])


def predict_shape(model: TrainedModel, targets: MeasurementVector,
                  settings: Optional[RefinementConfig] = None
                  ) -> Tuple[TriangleMesh, PredictionReport]:
    """Feature analysis, stage 1 over PCA weights, stage 2 over vertices"""
    settings = settings or RefinementConfig()
    profile = model.profile
    targets = targets.aligned_to(profile).require_positive()

    W_init = initial_weights(model, targets, settings)
    solves: List[SolveSummary] = []
    W_pca = optimize_weights(model.pca, profile, targets, W_init, settings, solves)
    X_pca = synthesize(model.pca, W_pca)
    X_new = optimize_vertices(X_pca, profile, targets, settings, solves)

    dropped = sorted({name for solve in solves for name in solve.dropped})
    report = PredictionReport(
        measurement_names=profile.names,
        targets=targets.values.tolist(),
        stages=[_stage("initial", synthesize(model.pca, W_init), profile, targets),
                _stage("stage1", X_pca, profile, targets),
                _stage("stage2", X_new, profile, targets)],
        solves=solves,
        dropped=dropped,
        weights_initial=W_init.tolist(),
        weights_stage1=W_pca.tolist(),
        config=settings.model_dump(),
    )
    return X_new, report
