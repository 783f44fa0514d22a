"""
Error reports over a set of subjects and report serialization
"""
import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import yaml
from pydantic import BaseModel

from ..errors import InputFormatError
from ..measurements.engine import measure_residuals
from ..measurements.specs import MeasurementProfile, MeasurementVector
from ..mesh.mesh_core import TriangleMesh

REPORT_FORMATS = ("json", "yaml")


class ErrorSummary(BaseModel):
    name: str
    average: Optional[float]
    maximum: Optional[float]


class EvaluationReport(BaseModel):
    """Absolute per-dimension errors (mm) with per-dimension, group and overall summaries.

    `errors[s][d]` is subject s, dimension d; None marks an undefined measurement.
    A group's error per subject is the sum of its members' errors.
    """
    measurement_names: List[str]
    errors: List[List[Optional[float]]]
    dimensions: List[ErrorSummary]
    groups: List[ErrorSummary]
    overall_average: Optional[float]


def _finite_or_none(value: float) -> Optional[float]:
    return float(value) if np.isfinite(value) else None


def _summaries(names: Sequence[str], table: np.ndarray) -> List[ErrorSummary]:
    summaries = []
    for name, column in zip(names, table.T):
        defined = column[np.isfinite(column)]
        summaries.append(ErrorSummary(
            name=name,
            average=float(defined.mean()) if len(defined) else None,
            maximum=float(defined.max()) if len(defined) else None))
    return summaries


def build_report(errors: np.ndarray, profile: MeasurementProfile) -> EvaluationReport:
    """Summaries over an [n, q] table of absolute errors (NaN for undefined)"""
    errors = np.asarray(errors, dtype=np.float64).reshape(-1, len(profile))
    groups = profile.groups()
    group_names = list(groups)
    group_table = np.column_stack([
        errors[:, [profile.names.index(member) for member in groups[g]]].sum(axis=1)
        for g in group_names]) if group_names else np.zeros((len(errors), 0))
    defined = errors[np.isfinite(errors)]
    return EvaluationReport(
        measurement_names=profile.names,
        errors=[[_finite_or_none(v) for v in row] for row in errors.tolist()],
        dimensions=_summaries(profile.names, errors),
        groups=_summaries(group_names, group_table),
        overall_average=float(defined.mean()) if len(defined) else None,
    )


def evaluate_meshes(meshes: Sequence[TriangleMesh], targets: Sequence[MeasurementVector],
                    profile: MeasurementProfile) -> EvaluationReport:
    """Compare each mesh's measurements with its target vector"""
    if len(meshes) != len(targets):
        raise InputFormatError(f"{len(meshes)} meshes for {len(targets)} target rows")
    errors = np.array([measure_residuals(mesh, profile, target)
                       for mesh, target in zip(meshes, targets)]).reshape(-1, len(profile))
    return build_report(errors, profile)


def dump_report(report: Union[BaseModel, Dict], path: Union[str, Path],
                fmt: str = "json") -> Path:
    """Write a report as JSON or YAML; the suffix follows the format"""
    if fmt not in REPORT_FORMATS:
        raise InputFormatError(f"unknown report format '{fmt}'")
    data = report.model_dump(mode="json") if isinstance(report, BaseModel) else report
    path = Path(path).with_suffix(f".{fmt}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if fmt == "json":
            json.dump(data, f, indent=2)
            f.write("\n")
        else:
            yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False)
    return path
