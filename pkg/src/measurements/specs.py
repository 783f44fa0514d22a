"""
Measurement definitions, profiles and measurement vectors
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Dict, Iterable, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import (BaseModel, ConfigDict, Field, TypeAdapter, ValidationError,
                      field_validator, model_validator)

from ..config import config
from ..errors import InputFormatError


class _SpecBase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = Field(min_length=1)
    group: Optional[str] = None


class EuclideanSpec(_SpecBase):
    """Straight-line distance between two vertices"""
    type: Literal["euclidean"] = "euclidean"
    a: int = Field(ge=0)
    b: int = Field(ge=0)


class GeodesicSpec(_SpecBase):
    """Edge-graph shortest path length between two vertices"""
    type: Literal["geodesic"] = "geodesic"
    a: int = Field(ge=0)
    b: int = Field(ge=0)


class CircumferenceSpec(_SpecBase):
    """Convex-hull perimeter of a plane section through `anchor`, restricted to `region`"""
    type: Literal["circumference"] = "circumference"
    anchor: int = Field(ge=0)
    normal: Tuple[float, float, float]
    region: Tuple[int, ...] = Field(min_length=1)

    @field_validator("normal")
    @classmethod
    def _unit_normal(cls, value):
        n = np.asarray(value, dtype=np.float64)
        length = float(np.linalg.norm(n))
        if not np.isfinite(length) or length == 0.0:
            raise ValueError("normal must be a non-zero finite vector")
        if abs(length - 1.0) > config.UNIT_NORMAL_TOLERANCE:
            n = n / length
        return tuple(float(c) for c in n)

    @field_validator("region")
    @classmethod
    def _sorted_region(cls, value):
        if min(value) < 0:
            raise ValueError("region triangle indices must be non-negative")
        return tuple(sorted(set(int(t) for t in value)))


MeasurementSpec = Annotated[
    Union[EuclideanSpec, GeodesicSpec, CircumferenceSpec], Field(discriminator="type")
]
_SPEC_LIST = TypeAdapter(List[MeasurementSpec])


class MeasurementProfile(BaseModel):
    """Ordered measurement definitions valid for one reference topology"""
    model_config = ConfigDict(frozen=True)

    specs: Tuple[MeasurementSpec, ...] = ()
    vertex_count: int = Field(ge=0)
    triangle_count: int = Field(ge=0)

    @model_validator(mode="after")
    def _check_specs(self):
        names = [s.name for s in self.specs]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"duplicate measurement names: {', '.join(duplicates)}")
        for spec in self.specs:
            if isinstance(spec, CircumferenceSpec):
                vertices = [spec.anchor]
                if spec.region[-1] >= self.triangle_count:
                    raise ValueError(
                        f"{spec.name}: region triangle {spec.region[-1]} out of range "
                        f"for {self.triangle_count} triangles")
            else:
                vertices = [spec.a, spec.b]
            if max(vertices) >= self.vertex_count:
                raise ValueError(
                    f"{spec.name}: vertex {max(vertices)} out of range "
                    f"for {self.vertex_count} vertices")
        return self

    def __len__(self) -> int:
        return len(self.specs)

    @property
    def names(self) -> List[str]:
        return [s.name for s in self.specs]

    def groups(self) -> Dict[str, List[str]]:
        """Group label -> member names, in profile order"""
        groups: Dict[str, List[str]] = {}
        for spec in self.specs:
            if spec.group:
                groups.setdefault(spec.group, []).append(spec.name)
        return groups

    def without(self, exclude: Iterable[str]) -> "MeasurementProfile":
        """Drop specs whose name or group label is listed"""
        exclude = set(exclude)
        kept = tuple(s for s in self.specs if s.name not in exclude and s.group not in exclude)
        return MeasurementProfile(specs=kept, vertex_count=self.vertex_count,
                                  triangle_count=self.triangle_count)

    def to_json_list(self) -> list:
        return [s.model_dump(exclude_none=True) for s in self.specs]


def profile_from_json_list(items: list, vertex_count: int,
                           triangle_count: int) -> MeasurementProfile:
    try:
        specs = _SPEC_LIST.validate_python(items)
        return MeasurementProfile(specs=tuple(specs), vertex_count=vertex_count,
                                  triangle_count=triangle_count)
    except ValidationError as e:
        raise InputFormatError(f"invalid measurement profile: {e}") from e


def load_profile(path: Union[str, Path], vertex_count: int,
                 triangle_count: int) -> MeasurementProfile:
    """Read a JSON array of spec objects; indices are 0-based"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            items = json.load(f)
    except json.JSONDecodeError as e:
        raise InputFormatError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(items, list):
        raise InputFormatError(f"{path}: expected a JSON array of measurement specs")
    return profile_from_json_list(items, vertex_count, triangle_count)


def save_profile(profile: MeasurementProfile, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(profile.to_json_list(), f, indent=2)
        f.write("\n")


@dataclass(frozen=True, eq=False)
class MeasurementVector:
    """Lengths in millimetres, aligned to a profile"""
    values: np.ndarray
    names: Tuple[str, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(self.names))
        if len(values) != len(self.names):
            raise InputFormatError(
                f"{len(values)} values for {len(self.names)} measurement names")

    def __len__(self) -> int:
        return len(self.values)

    def require_positive(self) -> "MeasurementVector":
        bad = [n for n, v in zip(self.names, self.values) if not (np.isfinite(v) and v > 0)]
        if bad:
            raise InputFormatError(f"measurements must be positive: {', '.join(bad)}")
        return self

    def aligned_to(self, profile: MeasurementProfile) -> "MeasurementVector":
        """Re-order by name to match `profile`"""
        lookup = dict(zip(self.names, self.values))
        missing = [n for n in profile.names if n not in lookup]
        if missing:
            raise InputFormatError(f"missing measurements: {', '.join(missing)}")
        return MeasurementVector(np.array([lookup[n] for n in profile.names]), profile.names)
