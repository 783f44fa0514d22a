"""
Synthetic experiment protocols comparing the feature-analysis start with the full pipeline
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from jinja2 import Environment, FileSystemLoader
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import config
from ..errors import InputFormatError
from ..measurements.engine import measure_residuals
from ..measurements.specs import MeasurementVector
from ..measurements.tables import write_measurement_table
from ..model.shape_model import TrainedModel, measure_meshes, synthesize, train_model
from ..refinement.pipeline import RefinementConfig, predict_shape
from ..synth.family import add_local_bump, make_family, sample_family
from ..synth.gaussian import fit_gaussian, sample_close, sample_ellipsoid
from ..synth.profiles import template_profile
from ..synth.templates import KINDS, MIN_RESOLUTION, Template, build_template
from .report import EvaluationReport, build_report, dump_report

log = logging.getLogger(__name__)

PROTOCOLS = ("close", "ellipsoid", "heldout", "small-training")
METHODS = ("feature-analysis", "full-pipeline")

# bump radius / amplitude in mm per template kind
BUMPS = {"mannequin": (60.0, 30.0), "blob": (30.0, 10.0)}

# wraps an iterable of per-subject results, e.g. a progress bar
Progress = Callable[[Iterable, int], Iterable]


class ExperimentSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    protocol: str
    seed: int
    kind: str = "mannequin"
    resolution: int = Field(default_factory=lambda: config.TEMPLATE_RESOLUTION,
                            ge=MIN_RESOLUTION)
    modes: int = Field(default=8, ge=1)
    training: Optional[int] = Field(default=None, ge=2)
    subjects: Optional[int] = Field(default=None, ge=1)
    ks: List[float] = [2.0, 4.0]
    components: Optional[int] = Field(default=None, ge=1)
    preset: Optional[str] = None
    # clamp the feature-analysis baseline and start
    clamp: bool = True
    threads: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if self.protocol not in PROTOCOLS:
            raise InputFormatError(
                f"unknown protocol '{self.protocol}', expected one of {', '.join(PROTOCOLS)}")
        if self.kind not in KINDS:
            raise InputFormatError(f"unknown template kind '{self.kind}'")
        if any(k < 0 for k in self.ks):
            raise InputFormatError("Mahalanobis radii must be non-negative")
        if self.protocol == "ellipsoid" and not self.ks:
            raise InputFormatError("the ellipsoid protocol needs at least one k")
        return self

    @property
    def small_training(self) -> bool:
        return self.protocol == "small-training"

    @property
    def training_count(self) -> int:
        return self.training or (35 if self.small_training else 50)

    @property
    def subject_count(self) -> int:
        return self.subjects or (5 if self.small_training else 10)

    @property
    def refinement(self) -> RefinementConfig:
        return RefinementConfig.preset(
            self.preset or ("small-training" if self.small_training else "synthetic"),
            clamp=self.clamp)


class SubjectRecord(BaseModel):
    """Per-subject pipeline trace"""
    set: str
    index: int
    stage1_energy: Optional[float]
    stage2_energy: Optional[float]
    # max_i |W_i| / sigma_i of the stage-1 weights and of the baseline weights
    clamp_ratio: float
    baseline_clamp_ratio: float
    residuals: Dict[str, List[Optional[float]]]
    terminations: List[str]


class MethodResult(BaseModel):
    method: str
    set: str
    report: EvaluationReport


class TableRow(BaseModel):
    method: str
    averages: Dict[str, Optional[float]]


class ExperimentReport(BaseModel):
    settings: dict
    measurement_names: List[str]
    vertex_count: int
    components: int
    sets: List[str]
    table: List[TableRow]
    results: List[MethodResult]
    subjects: List[SubjectRecord]

    def result(self, method: str, set_name: str) -> MethodResult:
        return next(r for r in self.results if r.method == method and r.set == set_name)

    def average(self, method: str, set_name: str) -> Optional[float]:
        return self.result(method, set_name).report.overall_average


def _bump_center(template: Template) -> int:
    if template.kind == "mannequin":
        waist = template.rings["waist"]
        return waist[len(waist) // 4]
    return template.landmarks["nose"]


def _target_sets(settings: ExperimentSettings, template: Template, model: TrainedModel,
                 family, measured: List[MeasurementVector]
                 ) -> Dict[str, List[MeasurementVector]]:
    seed = settings.seed
    count = settings.subject_count
    if settings.protocol in ("close", "ellipsoid"):
        gaussian = fit_gaussian(measured)
        sets = {"S_close": sample_close(gaussian, count, seed + 2)}
        if settings.protocol == "ellipsoid":
            for i, k in enumerate(settings.ks):
                sets[f"S_{k:g}"] = sample_ellipsoid(gaussian, k, count, seed + 3 + i)
        return sets

    held_out = sample_family(family, max(count, 2), seed + 2)[:count]
    if settings.protocol == "heldout":
        return {"S_heldout": measure_meshes(held_out, model.profile, settings.threads)}

    radius, amplitude = BUMPS[template.kind]
    center = _bump_center(template)
    bumped = [add_local_bump(mesh, center, radius, amplitude) for mesh in held_out]
    return {"S_bump": measure_meshes(bumped, model.profile, settings.threads)}


def clamp_ratio(model: TrainedModel, weights) -> float:
    """max_i |W_i| / sigma_i"""
    weights = np.asarray(weights, dtype=np.float64)
    return float(np.max(np.abs(weights) / model.pca.stddevs)) if len(weights) else 0.0


def _run_subject(model: TrainedModel, refinement: RefinementConfig,
                 targets: MeasurementVector) -> Tuple[np.ndarray, np.ndarray, dict]:
    """Absolute errors of both methods plus the pipeline trace for one target vector"""
    profile = model.profile
    mesh, report = predict_shape(model, targets, refinement)
    baseline = synthesize(model.pca, report.weights_initial)
    trace = {
        "stage1_energy": report.stage("stage1").measurement_energy,
        "stage2_energy": report.stage("stage2").measurement_energy,
        "clamp_ratio": clamp_ratio(model, report.weights_stage1),
        "baseline_clamp_ratio": clamp_ratio(model, report.weights_initial),
        "residuals": {stage.name: stage.residuals for stage in report.stages},
        "terminations": [solve.termination for solve in report.solves],
    }
    return (measure_residuals(baseline, profile, targets),
            measure_residuals(mesh, profile, targets), trace)


def run_experiment(settings: ExperimentSettings, progress: Optional[Progress] = None
                   ) -> Tuple[ExperimentReport, Dict[str, List[MeasurementVector]]]:
    """Generate a family, train, sample target sets and evaluate both methods.

    Returns the report and the target vectors of each set, in set order.
    """
    template = build_template(settings.kind, settings.resolution)
    profile = template_profile(template)
    family = make_family(template.mesh, settings.modes, settings.seed)
    training = sample_family(family, settings.training_count, settings.seed + 1)
    model, measured = train_model(training, profile, settings.components,
                                  threads=settings.threads)
    log.info("trained %d components on %d %s shapes", model.pca.component_count,
             len(training), settings.kind)

    sets = _target_sets(settings, template, model, family, measured)
    refinement = settings.refinement
    jobs = [(name, i, targets) for name, vectors in sets.items()
            for i, targets in enumerate(vectors)]

    def job(item):
        return _run_subject(model, refinement, item[2])

    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        outcomes = pool.map(job, jobs)
        if progress is not None:
            outcomes = progress(outcomes, len(jobs))
        outcomes = list(outcomes)

    results, table, subjects = [], [], []
    for m, method in enumerate(METHODS):
        averages = {}
        for name in sets:
            errors = np.array([outcome[m] for (set_name, _, _), outcome in zip(jobs, outcomes)
                               if set_name == name])
            report = build_report(errors, profile)
            results.append(MethodResult(method=method, set=name, report=report))
            averages[name] = report.overall_average
        table.append(TableRow(method=method, averages=averages))
    for (name, i, _), (_, _, trace) in zip(jobs, outcomes):
        subjects.append(SubjectRecord(set=name, index=i, **trace))

    report = ExperimentReport(
        settings={**settings.model_dump(exclude={"threads"}), "refinement": refinement.model_dump()},
        measurement_names=profile.names,
        vertex_count=template.mesh.vertex_count,
        components=model.pca.component_count,
        sets=list(sets),
        table=table,
        results=results,
        subjects=subjects,
    )
    return report, sets


def render_summary(report: ExperimentReport) -> str:
    env = Environment(loader=FileSystemLoader(config.TEMPLATES_DIR), keep_trailing_newline=True)
    return env.get_template("experiment_summary.md.j2").render(report=report)


def write_bundle(report: ExperimentReport, sets: Dict[str, List[MeasurementVector]],
                 output_dir: Union[str, Path], fmt: str = "json") -> List[Path]:
    """report.<fmt>, targets.csv (all sets in order) and summary.md"""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written = [dump_report(report, output_dir / "report", fmt)]

    targets_path = output_dir / "targets.csv"
    rows = [v.values for vectors in sets.values() for v in vectors]
    write_measurement_table(targets_path, report.measurement_names, rows)
    written.append(targets_path)

    summary_path = output_dir / "summary.md"
    with open(summary_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(render_summary(report))
    written.append(summary_path)
    return written

