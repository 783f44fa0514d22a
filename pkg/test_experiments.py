"""
Tests for the synthetic experiment protocols, evaluation reports and result bundles
"""
import json

import numpy as np
import pytest
import yaml
from pydantic import ValidationError

from src.errors import InputFormatError
from src.evaluation.experiments import (METHODS, ExperimentSettings, clamp_ratio,
                                        render_summary, run_experiment, write_bundle)
from src.evaluation.report import build_report, dump_report, evaluate_meshes
from src.measurements.engine import measure_all
from src.measurements.specs import MeasurementVector
from src.measurements.tables import read_measurement_table
from src.model.shape_model import normalization_divisors
from src.refinement.pipeline import RefinementConfig, initial_weights

SMALL = {"resolution": 16, "modes": 4, "training": 12}


@pytest.fixture(scope="module")
def heldout_runs():
    return [run_experiment(ExperimentSettings(protocol="heldout", seed=seed, subjects=3, **SMALL))
            for seed in (0, 1, 2)]


@pytest.fixture(scope="module")
def bump_run():
    return run_experiment(ExperimentSettings(protocol="small-training", seed=0, subjects=2,
                                             **SMALL))


# settings

def test_protocol_defaults():
    settings = ExperimentSettings(protocol="close", seed=0)
    assert (settings.training_count, settings.subject_count) == (50, 10)
    assert settings.refinement.recompute_s == 3
    small = ExperimentSettings(protocol="small-training", seed=0)
    assert (small.training_count, small.subject_count) == (35, 5)
    assert small.refinement.recompute_s == 10
    assert ExperimentSettings(protocol="close", seed=0, preset="noisy").refinement.smoothness_lambda == 1.0


@pytest.mark.parametrize("values", [
    {"protocol": "random"},
    {"protocol": "close", "kind": "cube"},
    {"protocol": "ellipsoid", "ks": [-1.0]},
    {"protocol": "ellipsoid", "ks": []},
    {"protocol": "close", "resolution": 8},
])
def test_invalid_settings(values):
    with pytest.raises(ValidationError):
        ExperimentSettings(seed=0, **values)


# protocols

def test_pipeline_beats_feature_analysis_on_held_out_shapes(heldout_runs):
    for report, _ in heldout_runs:
        assert report.sets == ["S_heldout"]
        assert report.average("full-pipeline", "S_heldout") < report.average(
            "feature-analysis", "S_heldout")


def test_report_layout(heldout_runs):
    report, sets = heldout_runs[0]
    assert [row.method for row in report.table] == list(METHODS)
    assert len(report.results) == 2
    assert len(report.subjects) == 3
    assert report.components == 4
    assert report.settings["refinement"]["clamp_l"] == 3.0
    assert "threads" not in report.settings
    assert len(sets["S_heldout"]) == 3
    for subject in report.subjects:
        assert set(subject.residuals) == {"initial", "stage1", "stage2"}
        assert len(subject.terminations) == 6


def test_bump_is_repaired_by_vertex_refinement(bump_run):
    report, sets = bump_run
    assert report.sets == ["S_bump"]
    waist = report.measurement_names.index("waist_girth")
    baseline = report.result("feature-analysis", "S_bump").report.dimensions[waist]
    pipeline = report.result("full-pipeline", "S_bump").report.dimensions[waist]
    assert pipeline.average < baseline.average
    for subject in report.subjects:
        assert subject.residuals["stage2"][waist] <= 0.5 * subject.residuals["stage1"][waist]
        assert subject.stage2_energy < subject.stage1_energy
        assert subject.clamp_ratio <= 3.0 + 1e-9
        assert subject.baseline_clamp_ratio <= 3.0 + 1e-9
        assert len(subject.terminations) == 20


def test_unclamped_baseline_can_leave_the_shape_space(small_model, small_training):
    start = measure_all(small_training[0], small_model.profile)
    matrix = small_model.feature_map.matrix
    divisors = normalization_divisors(small_model.pca, small_model.feature_map.normalization)
    # move the targets until the first weight sits at 10 standard deviations
    direction = matrix[0, :-1]
    goal = 10.0 * small_model.pca.stddevs[0] / divisors[0]
    step = (goal - matrix[0] @ np.append(start.values, 1.0)) / (direction @ direction)
    targets = MeasurementVector(start.values + step * direction, start.names)

    clamped = initial_weights(small_model, targets, RefinementConfig.preset("synthetic"))
    raw = initial_weights(small_model, targets, RefinementConfig.preset("synthetic", clamp=False))
    assert clamp_ratio(small_model, clamped) <= 3.0 + 1e-9
    assert clamp_ratio(small_model, raw) >= 10.0 * (1 - 1e-6)
    assert raw[0] == pytest.approx(10.0 * small_model.pca.stddevs[0], rel=1e-6)


def test_no_clamp_setting_reaches_the_baseline(heldout_runs):
    clamped, _ = heldout_runs[0]
    settings = ExperimentSettings(protocol="heldout", seed=0, subjects=3, clamp=False, **SMALL)
    report, _ = run_experiment(settings)
    assert report.settings["clamp"] is False
    assert report.settings["refinement"]["clamp"] is False
    assert "unclamped baseline" in render_summary(report)
    for free, bounded in zip(report.subjects, clamped.subjects):
        assert bounded.baseline_clamp_ratio <= 3.0 + 1e-9
        assert free.baseline_clamp_ratio >= bounded.baseline_clamp_ratio
        assert free.clamp_ratio <= 3.0 + 1e-9


def test_close_and_ellipsoid_sets():
    settings = ExperimentSettings(protocol="ellipsoid", seed=3, subjects=1, ks=[1.0], **SMALL)
    report, sets = run_experiment(settings)
    assert list(sets) == ["S_close", "S_1"]
    assert report.sets == ["S_close", "S_1"]
    assert all((v.values > 0).all() for vectors in sets.values() for v in vectors)


def test_progress_wrapper_sees_every_job():
    seen = []

    def progress(outcomes, total):
        seen.append(total)
        return outcomes

    settings = ExperimentSettings(protocol="heldout", seed=4, subjects=2, **SMALL)
    report, _ = run_experiment(settings, progress=progress)
    assert seen == [2]
    assert len(report.subjects) == 2


# bundles

def test_bundles_are_deterministic(tmp_path):
    written = []
    for run, threads in enumerate((1, 1, 2)):
        settings = ExperimentSettings(protocol="heldout", seed=5, subjects=2, threads=threads,
                                      resolution=16, modes=3, training=8)
        report, sets = run_experiment(settings)
        written.append(write_bundle(report, sets, tmp_path / str(run)))
    names = [[p.name for p in paths] for paths in written]
    assert names[0] == ["report.json", "targets.csv", "summary.md"]
    for first, other in zip(written[0], written[1]):
        assert first.read_bytes() == other.read_bytes()
    for first, other in zip(written[0], written[2]):
        assert first.read_bytes() == other.read_bytes()


def test_bundle_contents(tmp_path, heldout_runs):
    report, sets = heldout_runs[1]
    paths = write_bundle(report, sets, tmp_path, fmt="yaml")
    assert paths[0].name == "report.yaml"
    loaded = yaml.safe_load(paths[0].read_text())
    assert loaded["settings"]["protocol"] == "heldout"
    targets = read_measurement_table(paths[1])
    assert len(targets) == 3
    np.testing.assert_array_equal(targets[0].values, sets["S_heldout"][0].values)


def test_summary_lists_methods_and_sets(heldout_runs):
    report, _ = heldout_runs[2]
    summary = render_summary(report)
    assert summary.startswith("# Experiment: heldout (mannequin)")
    assert "| Method | S_heldout |" in summary
    for method in METHODS:
        assert f"| {method} |" in summary
        assert f"## {method} on S_heldout" in summary
    assert "| knee |" in summary
    assert summary.endswith("\n")


# evaluation reports

def test_build_report_averages(small_profile):
    q = len(small_profile)
    errors = np.ones((2, q))
    errors[1] *= 3.0
    errors[0, 0] = np.nan
    report = build_report(errors, small_profile)
    assert report.dimensions[0].average == 3.0
    assert report.dimensions[1].average == 2.0
    assert report.dimensions[1].maximum == 3.0
    assert report.errors[0][0] is None
    knee = next(g for g in report.groups if g.name == "knee")
    assert knee.average == pytest.approx(8.0)
    assert report.overall_average == pytest.approx(((q - 1) + 3 * q) / (2 * q - 1))


def test_evaluate_meshes_against_own_measurements(small_training, small_profile):
    targets = [measure_all(mesh, small_profile) for mesh in small_training[:3]]
    report = evaluate_meshes(small_training[:3], targets, small_profile)
    assert report.overall_average == 0.0
    with pytest.raises(InputFormatError):
        evaluate_meshes(small_training[:2], targets, small_profile)


def test_dump_report_formats(tmp_path, small_profile):
    report = build_report(np.zeros((1, len(small_profile))), small_profile)
    path = dump_report(report, tmp_path / "evaluation.txt", "json")
    assert path.suffix == ".json"
    assert json.loads(path.read_text())["overall_average"] == 0.0
    with pytest.raises(InputFormatError):
        dump_report(report, tmp_path / "evaluation", "xml")
