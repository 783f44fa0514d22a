"""
Model file: PCA shape space, feature map and measurement profile in one JSON document
"""
import json
from pathlib import Path
from typing import List, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from ..errors import InputFormatError
from ..measurements.specs import profile_from_json_list
from .shape_model import FeatureMap, PcaModel, TrainedModel


class FeatureMapFile(BaseModel):
    matrix: List[List[float]]
    normalization: str = "eigenvalue"


class ModelFile(BaseModel):
    """On-disk layout; `basis` holds one list per component (column-major)"""
    m: int = Field(ge=1)
    r: int = Field(ge=0)
    n: int = Field(ge=2)
    mean: List[float]
    basis: List[List[float]]
    variances: List[float]
    triangles: List[List[int]]
    feature_map: FeatureMapFile
    profile: list = []


def model_to_file(model: TrainedModel) -> ModelFile:
    pca = model.pca
    return ModelFile(
        m=pca.vertex_count,
        r=pca.component_count,
        n=pca.training_count,
        mean=pca.mean.tolist(),
        basis=pca.basis.T.tolist(),
        variances=pca.variances.tolist(),
        triangles=pca.triangles.tolist(),
        feature_map=FeatureMapFile(matrix=model.feature_map.matrix.tolist(),
                                   normalization=model.feature_map.normalization),
        profile=model.profile.to_json_list(),
    )


def model_from_file(data: ModelFile) -> TrainedModel:
    if len(data.mean) != 3 * data.m:
        raise InputFormatError(f"mean has {len(data.mean)} entries, expected {3 * data.m}")
    if len(data.basis) != data.r or len(data.variances) != data.r:
        raise InputFormatError(f"model declares r={data.r} but stores "
                               f"{len(data.basis)} basis columns, {len(data.variances)} variances")
    if any(len(column) != 3 * data.m for column in data.basis):
        raise InputFormatError("basis column length does not match the vertex count")

    triangles = np.array(data.triangles, dtype=np.int64).reshape(-1, 3)
    basis = np.array(data.basis, dtype=np.float64).reshape(data.r, 3 * data.m).T
    pca = PcaModel(np.array(data.mean), basis, np.array(data.variances), triangles, data.n)
    matrix = np.array(data.feature_map.matrix, dtype=np.float64).reshape(data.r, -1) \
        if data.r else np.zeros((0, len(data.profile) + 1))
    feature_map = FeatureMap(matrix, data.feature_map.normalization)
    profile = profile_from_json_list(data.profile, data.m, len(triangles))
    return TrainedModel(pca, feature_map, profile)


def save_model(model: TrainedModel, path: Union[str, Path]) -> None:
    """Floats are written with repr precision so a reload is bit-identical"""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(model_to_file(model).model_dump(), f)
        f.write("\n")


def load_model(path: Union[str, Path]) -> TrainedModel:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        return model_from_file(ModelFile.model_validate(raw))
    except json.JSONDecodeError as e:
        raise InputFormatError(f"{path}: not valid JSON ({e})") from e
    except ValidationError as e:
        raise InputFormatError(f"{path}: invalid model file ({e})") from e
