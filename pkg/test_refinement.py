"""
Tests for frozen constraints, refinement energies and the two-stage prediction
"""
import logging

import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import InputFormatError, MeasurementUndefinedError
from src.evaluation.gradcheck import DEFAULT_TERMS, run_gradcheck
from src.measurements.engine import measure_all, measure_residuals
from src.measurements.specs import (CircumferenceSpec, EuclideanSpec, GeodesicSpec,
                                    MeasurementProfile, MeasurementVector)
from src.model.shape_model import clamp_weights, project, synthesize
from src.refinement.constraints import freeze_constraints
from src.refinement.energies import (combined_energy, energy_circumference, energy_euclidean,
                                     energy_geodesic, energy_smoothness, measurement_energy)
from src.refinement.pipeline import (PRESETS, RefinementConfig, SolveSummary,
                                     feature_analysis_weights, optimize_vertices,
                                     optimize_weights, predict_shape)
from src.solver.lbfgs import SolveConfig
from src.synth.family import sample_family


def octahedron_profile(*specs):
    return MeasurementProfile(specs=specs, vertex_count=6, triangle_count=8)


EQUATOR = CircumferenceSpec(name="equator", anchor=0, normal=(0, 0, 1), region=tuple(range(8)))
APEX = CircumferenceSpec(name="apex", anchor=4, normal=(0, 0, 1), region=tuple(range(8)))


@pytest.fixture
def octahedron_setup(octahedron):
    profile = octahedron_profile(EuclideanSpec(name="span", a=0, b=2),
                                 GeodesicSpec(name="pole", a=4, b=5), EQUATOR)
    return octahedron, profile


# constraints

def test_freeze_splits_targets_by_relative_length(octahedron_setup):
    mesh, profile = octahedron_setup
    targets = MeasurementVector([3.0, 4.0, 8.0], tuple(profile.names))
    frozen = freeze_constraints(mesh, profile, targets)
    assert frozen.euclidean_pairs.tolist() == [[0, 2]]
    assert frozen.euclidean_targets.tolist() == [3.0]
    np.testing.assert_allclose(frozen.geodesic_targets, [2.0, 2.0])
    assert frozen.geodesic_edges[0, 0] == 4 and frozen.geodesic_edges[-1, 1] == 5
    np.testing.assert_allclose(frozen.circumference_targets, [2.0] * 4)
    assert frozen.circumference_index.shape == (4, 4)
    assert frozen.term_count == 7
    assert frozen.geodesic_targets.sum() == pytest.approx(4.0)


def test_freeze_at_measured_values_gives_zero_energy(octahedron_setup):
    mesh, profile = octahedron_setup
    frozen = freeze_constraints(mesh, profile, measure_all(mesh, profile))
    energy, gradient = measurement_energy(mesh, frozen)
    assert energy == pytest.approx(0.0, abs=1e-20)
    np.testing.assert_allclose(gradient, 0.0, atol=1e-12)


def test_undefined_circumference_is_dropped_or_raised(octahedron, caplog):
    profile = octahedron_profile(EuclideanSpec(name="span", a=0, b=2), APEX)
    targets = MeasurementVector([2.0, 1.0], ("span", "apex"))
    with pytest.raises(MeasurementUndefinedError):
        freeze_constraints(octahedron, profile, targets)
    with caplog.at_level(logging.WARNING):
        frozen = freeze_constraints(octahedron, profile, targets, drop_undefined=True)
    assert frozen.dropped == ("apex",)
    assert len(frozen.circumference_targets) == 0
    assert "apex" in caplog.text


def test_coincident_geodesic_adds_no_terms(octahedron, caplog):
    profile = octahedron_profile(GeodesicSpec(name="loop", a=3, b=3))
    with caplog.at_level(logging.WARNING):
        frozen = freeze_constraints(octahedron, profile, MeasurementVector([1.0], ("loop",)))
    assert frozen.term_count == 0
    assert "coincident" in caplog.text


# energies

def test_circumference_with_unit_weights_matches_euclidean(octahedron_setup):
    mesh, profile = octahedron_setup
    frozen = freeze_constraints(mesh, profile, MeasurementVector([3.0, 4.0, 8.0],
                                                                 tuple(profile.names)))
    pure = frozen.circumference_alpha == 1.0
    assert pure.all()
    as_pairs = type(frozen)(
        euclidean_pairs=frozen.circumference_index[:, [0, 2]],
        euclidean_targets=frozen.circumference_targets,
        geodesic_edges=np.zeros((0, 2), dtype=np.int64),
        geodesic_targets=np.zeros(0),
        circumference_index=np.zeros((0, 4), dtype=np.int64),
        circumference_alpha=np.zeros((0, 2)),
        circumference_targets=np.zeros(0),
    )
    e_c, g_c = energy_circumference(mesh, frozen)
    e_e, g_e = energy_euclidean(mesh, as_pairs)
    assert e_c == pytest.approx(e_e)
    np.testing.assert_allclose(g_c, g_e)


def test_euclidean_energy_value(octahedron):
    profile = octahedron_profile(EuclideanSpec(name="span", a=0, b=2))
    frozen = freeze_constraints(octahedron, profile, MeasurementVector([3.0], ("span",)))
    energy, gradient = energy_euclidean(octahedron, frozen)
    # (|p0 - p2|^2 - 9)^2 = (4 - 9)^2
    assert energy == pytest.approx(25.0)
    # 4 * (4 - 9) * (p0 - p2) on vertex 0
    np.testing.assert_allclose(gradient[0], [-40.0, 0.0, 0.0])
    np.testing.assert_allclose(gradient[2], [40.0, 0.0, 0.0])


def test_measurement_energy_is_the_sum_of_its_terms(octahedron_setup):
    mesh, profile = octahedron_setup
    frozen = freeze_constraints(mesh, profile, MeasurementVector([3.0, 4.0, 8.0],
                                                                 tuple(profile.names)))
    moved = mesh.vertices + np.random.default_rng(1).normal(0, 0.05, mesh.vertices.shape)
    parts = [energy_euclidean(moved, frozen), energy_geodesic(moved, frozen),
             energy_circumference(moved, frozen)]
    total, gradient = measurement_energy(moved, frozen)
    assert total == parts[0][0] + parts[1][0] + parts[2][0]
    assert np.array_equal(gradient, parts[0][1] + parts[1][1] + parts[2][1])


def test_smoothness_is_translation_invariant(octahedron):
    rng = np.random.default_rng(4)
    positions = octahedron.vertices + rng.normal(0, 0.1, (6, 3))
    e0, g0 = energy_smoothness(positions, octahedron)
    e1, g1 = energy_smoothness(positions + [5.0, -1.0, 2.0], octahedron)
    assert e1 == pytest.approx(e0, abs=1e-9)
    np.testing.assert_allclose(g1, g0, atol=1e-9)
    assert energy_smoothness(octahedron, octahedron)[0] == 0.0


def test_smoothness_of_a_single_moved_vertex(octahedron):
    positions = octahedron.vertices.copy()
    positions[4] += [0.0, 0.0, 1.0]
    energy, _ = energy_smoothness(positions, octahedron)
    # four edges around the apex, each counted from both ends
    assert energy == pytest.approx(8.0)


def test_combined_energy_interpolates(octahedron_setup):
    mesh, profile = octahedron_setup
    frozen = freeze_constraints(mesh, profile, MeasurementVector([3.0, 4.0, 8.0],
                                                                 tuple(profile.names)))
    moved = mesh.vertices * 1.1
    e_m, _ = measurement_energy(moved, frozen)
    e_s, _ = energy_smoothness(moved, mesh)
    assert combined_energy(moved, frozen, mesh, 0.0)[0] == pytest.approx(e_m)
    assert combined_energy(moved, frozen, mesh, 1.0)[0] == pytest.approx(e_s)
    assert combined_energy(moved, frozen, mesh, 0.25)[0] == pytest.approx(0.75 * e_m + 0.25 * e_s)
    with pytest.raises(InputFormatError):
        combined_energy(moved, frozen, mesh, 1.5)


# gradient checks

def test_gradcheck_passes():
    report = run_gradcheck(seed=0, configurations=20)
    assert report.passed, report.failed_terms
    assert [t.term for t in report.terms] == list(DEFAULT_TERMS)
    assert all(t.max_relative_error < 1e-6 for t in report.terms)


def test_gradcheck_catches_a_sign_flip():
    def flipped(positions, frozen, reference, lam):
        energy, gradient = energy_geodesic(positions, frozen)
        return energy, -gradient

    report = run_gradcheck(seed=0, configurations=2, terms={"geodesic": flipped})
    assert not report.passed
    assert report.failed_terms == ["geodesic"]


def test_gradcheck_is_deterministic():
    assert run_gradcheck(seed=5, configurations=2) == run_gradcheck(seed=5, configurations=2)


# refinement configuration

def test_default_parameters():
    settings = RefinementConfig()
    assert (settings.clamp_l, settings.smoothness_lambda, settings.recompute_s) == (3.0, 0.1, 3)
    assert settings.vertex_outer_steps == 3
    assert settings.clamp


def test_presets_and_overrides():
    assert RefinementConfig.preset("small-training").recompute_s == 10
    assert RefinementConfig.preset("real").clamp_l == 10.0
    noisy = RefinementConfig.preset("noisy", recompute_s=5, clamp_l=None)
    assert (noisy.smoothness_lambda, noisy.recompute_s, noisy.clamp_l) == (1.0, 5, 3.0)
    assert set(PRESETS) == {"synthetic", "real", "noisy", "small-training"}
    with pytest.raises(InputFormatError):
        RefinementConfig.preset("fast")


@pytest.mark.parametrize("values", [{"smoothness_lambda": 1.5}, {"recompute_s": 0},
                                    {"clamp_l": 0.0}, {"recompute_s_vertices": 0}])
def test_invalid_refinement_config(values):
    with pytest.raises(ValidationError):
        RefinementConfig(**values)


# stages

def test_stage_one_keeps_weights_clamped(small_model, small_family):
    pca = small_model.pca
    held_out = sample_family(small_family, 2, seed=99)[0]
    targets = measure_all(held_out, small_model.profile)
    start = feature_analysis_weights(small_model, targets, clamp_l=3.0)
    solves = []
    settings = RefinementConfig(recompute_s=1, clamp_l=100.0)
    weights = optimize_weights(pca, small_model.profile, targets, start, settings, solves)
    assert len(solves) == 1
    assert solves[0].energy <= solves[0].initial_energy
    assert solves[0].stage == 1
    tight = optimize_weights(pca, small_model.profile, targets, start,
                             RefinementConfig(recompute_s=2, clamp_l=0.5))
    assert (np.abs(tight) <= 0.5 * pca.stddevs * (1 + 1e-12)).all()
    assert np.array_equal(clamp_weights(pca, weights, 100.0), weights)


def test_vertex_stage_reduces_a_single_residual(unit_square):
    profile = MeasurementProfile(specs=(EuclideanSpec(name="diagonal", a=0, b=2),),
                                 vertex_count=4, triangle_count=2)
    targets = MeasurementVector([2.0], ("diagonal",))
    before = measure_residuals(unit_square, profile, targets)[0]
    solves = []
    result = optimize_vertices(unit_square, profile, targets,
                               RefinementConfig(smoothness_lambda=0.1, recompute_s=1), solves)
    after = measure_residuals(result, profile, targets)[0]
    assert after < before
    assert solves[0].stage == 2
    assert result.same_topology(unit_square)


def test_pure_smoothness_keeps_the_start(unit_square):
    profile = MeasurementProfile(specs=(EuclideanSpec(name="diagonal", a=0, b=2),),
                                 vertex_count=4, triangle_count=2)
    result = optimize_vertices(unit_square, profile, MeasurementVector([2.0], ("diagonal",)),
                               RefinementConfig(smoothness_lambda=1.0, recompute_s=1))
    np.testing.assert_allclose(result.vertices, unit_square.vertices, atol=1e-8)


def test_predict_shape_on_in_span_targets(small_model, small_family):
    held_out = sample_family(small_family, 2, seed=123)
    diagonal = small_model.pca.mean_mesh.bounding_box_diagonal
    euclidean = [i for i, s in enumerate(small_model.profile.specs)
                 if isinstance(s, EuclideanSpec)]
    for truth in held_out:
        targets = measure_all(truth, small_model.profile)
        mesh, report = predict_shape(small_model, targets, RefinementConfig())
        assert [s.name for s in report.stages] == ["initial", "stage1", "stage2"]
        assert mesh.same_topology(truth)
        final = report.stage("stage2").residuals
        initial = report.stage("initial").residuals
        assert max(final[i] for i in euclidean) < 1e-6 * diagonal
        assert sum(final[i] for i in euclidean) <= sum(initial[i] for i in euclidean)
        assert len(report.solves) == 6
        assert all(isinstance(s, SolveSummary) for s in report.solves)
        assert (np.abs(report.weights_stage1) <= 3.0 * small_model.pca.stddevs * (1 + 1e-12)).all()


def test_predict_shape_is_deterministic(small_model, small_family):
    targets = measure_all(sample_family(small_family, 2, seed=321)[0], small_model.profile)
    settings = RefinementConfig(solver=SolveConfig(max_iterations=20))
    first, report_a = predict_shape(small_model, targets, settings)
    second, report_b = predict_shape(small_model, targets, settings)
    assert np.array_equal(first.vertices, second.vertices)
    assert report_a == report_b


def test_predict_shape_rejects_bad_targets(small_model):
    names = tuple(small_model.profile.names)
    with pytest.raises(InputFormatError):
        predict_shape(small_model, MeasurementVector(np.full(len(names), -1.0), names))
    with pytest.raises(InputFormatError):
        predict_shape(small_model, MeasurementVector([1.0], (names[0],)))


def test_unclamped_start_is_the_raw_feature_map(small_model, small_family):
    targets = measure_all(sample_family(small_family, 2, seed=5)[0], small_model.profile)
    raw = feature_analysis_weights(small_model, targets)
    clamped = feature_analysis_weights(small_model, targets, clamp_l=0.1)
    assert np.array_equal(clamped, clamp_weights(small_model.pca, raw, 0.1))
    assert project(small_model.pca, synthesize(small_model.pca, raw)) == pytest.approx(raw)
