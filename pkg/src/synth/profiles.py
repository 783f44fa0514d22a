"""
Measurement profiles for the synthetic templates
"""
from typing import List

from ..errors import InputFormatError
from ..measurements.specs import (CircumferenceSpec, EuclideanSpec, GeodesicSpec,
                                  MeasurementProfile, MeasurementSpec)
from .templates import Template

BODY_LENGTHS = [
    ("stature", "crown", "right_foot"),
    ("torso_height", "crotch", "neck_front"),
    ("head_height", "neck_front", "crown"),
    ("shoulder_breadth", "left_shoulder", "right_shoulder"),
    ("hip_breadth", "left_hip", "right_hip"),
    ("arm_length_right", "right_shoulder", "right_hand"),
    ("arm_length_left", "left_shoulder", "left_hand"),
    ("upper_arm_right", "right_shoulder", "right_elbow"),
    ("forearm_right", "right_elbow", "right_hand"),
    ("leg_length_right", "right_hip", "right_foot"),
    ("leg_length_left", "left_hip", "left_foot"),
    ("thigh_right", "right_hip", "right_knee"),
    ("shin_right", "right_knee", "right_foot"),
    ("crotch_height", "crotch", "left_foot"),
]

BODY_GIRTHS = [("hip", "torso"), ("waist", "torso"), ("chest", "torso"), ("head", "head")]

FACE_DISTANCES = [
    ("eye_span", "eye_right", "eye_left"),
    ("face_height", "forehead", "chin"),
    ("nose_chin", "nose", "chin"),
    ("forehead_nose", "forehead", "nose"),
    ("ear_span", "ear_right", "ear_left"),
    ("ear_nose_right", "ear_right", "nose"),
    ("ear_nose_left", "ear_left", "nose"),
]


def _quarter_loop(name: str, group: str, ring) -> List[GeodesicSpec]:
    """Four geodesics joining ring vertices at quarter turns"""
    quarter = len(ring) // 4
    stops = [ring[i * quarter] for i in range(4)]
    return [GeodesicSpec(name=f"{name}_{i + 1}", group=group, a=stops[i], b=stops[(i + 1) % 4])
            for i in range(4)]


def body_profile(template: Template) -> MeasurementProfile:
    """14 lengths, hip/waist/chest/head girths and four-geodesic knee and arm loops"""
    if template.kind != "mannequin":
        raise InputFormatError("the body profile needs a mannequin template")
    marks = template.landmarks
    specs: List[MeasurementSpec] = [EuclideanSpec(name=name, a=marks[a], b=marks[b])
                                    for name, a, b in BODY_LENGTHS]
    front = len(template.rings["hip"]) // 4
    for name, region in BODY_GIRTHS:
        specs.append(CircumferenceSpec(name=f"{name}_girth", anchor=template.rings[name][front],
                                       normal=(0.0, 0.0, 1.0), region=template.regions[region]))
    specs += _quarter_loop("knee", "knee", template.rings["knee_right"])
    specs += _quarter_loop("arm", "arm", template.rings["elbow_right"])
    mesh = template.mesh
    return MeasurementProfile(specs=tuple(specs), vertex_count=mesh.vertex_count,
                              triangle_count=mesh.triangle_count)


def face_profile(template: Template) -> MeasurementProfile:
    """Seven geodesics between facial landmarks of the blob"""
    if template.kind != "blob":
        raise InputFormatError("the face profile needs a blob template")
    marks = template.landmarks
    specs = tuple(GeodesicSpec(name=name, a=marks[a], b=marks[b]) for name, a, b in FACE_DISTANCES)
    mesh = template.mesh
    return MeasurementProfile(specs=specs, vertex_count=mesh.vertex_count,
                              triangle_count=mesh.triangle_count)


def template_profile(template: Template) -> MeasurementProfile:
    return body_profile(template) if template.kind == "mannequin" else face_profile(template)
