import math

import numpy as np
import pytest

from flowtopo import models
from flowtopo.patches import contrast_norm, normalize, dct_flow_basis, predominant_directions, projective_distance
from flowtopo.pipeline import StageError, bin_centers, run_pipeline, synthetic_flow_patches

B = dct_flow_basis()


def test_bin_centers():
    np.testing.assert_allclose(bin_centers(12), np.arange(12) * np.pi / 12)


def test_synthetic_patches_parameters():
    P, params = synthetic_flow_patches(1000, "horizontal", model_fraction=0.3, noise_sigma=0.0, seed=2, basis=B)
    assert P.shape == (1000, 18)
    model = ~np.isnan(params[:, 0])
    assert model.sum() == 300
    assert set(np.round(params[model, 1], 12)) <= {0.0, round(math.pi, 12)}
    # once the drift is removed, noise-free model patches flow exactly horizontally
    ang = predominant_directions(normalize(P[model]))
    assert np.all(projective_distance(ang, 0.0) < 1e-9)
    again, _ = synthetic_flow_patches(1000, "horizontal", model_fraction=0.3, noise_sigma=0.0, seed=2, basis=B)
    np.testing.assert_array_equal(P, again)


def test_explicit_directions():
    P, params = synthetic_flow_patches(200, [math.pi / 2], model_fraction=1.0, noise_sigma=0.0, seed=0)
    assert np.allclose(params[:, 1], math.pi / 2)


def test_pipeline_selects_model_patches():
    P, params = synthetic_flow_patches(5000, "all", seed=1, basis=B)
    res = run_pipeline(P, q=0.2, k=20, p=50, subsample=2000, seed=1, basis=B)
    assert len(res.selected) == 1000
    # background patches have far lower contrast than edge flows
    assert np.mean(~np.isnan(params[res.selected, 0])) > 0.99
    np.testing.assert_allclose(contrast_norm(res.normalized), 1)
    assert len(res.core) == 500 and np.all(np.diff(res.core) > 0)
    # core points sit near the flow torus: |c1u|^2+|c2u|^2+|c1v|^2+|c2v|^2 close to 1
    c = res.coefficients[res.core]
    energy = c[:, 0] ** 2 + c[:, 1] ** 2 + c[:, 8] ** 2 + c[:, 9] ** 2
    assert np.median(energy) > 0.95
    for b, theta in enumerate(res.thetas):
        ang = res.angles[res.bin_members[b]]
        assert np.all(projective_distance(ang, theta) <= math.pi / 12 + 1e-12)
        assert set(res.bin_cores[b]) <= set(res.bin_members[b])


def test_pipeline_is_deterministic():
    P, _ = synthetic_flow_patches(3000, seed=5)
    a = run_pipeline(P, k=10, subsample=400, seed=3)
    b = run_pipeline(P, k=10, subsample=400, seed=3)
    np.testing.assert_array_equal(a.core, b.core)
    for x, y in zip(a.bin_cores, b.bin_cores):
        np.testing.assert_array_equal(x, y)


def test_stage_errors_name_the_stage():
    P, _ = synthetic_flow_patches(500, seed=0)
    with pytest.raises(StageError) as exc:
        run_pipeline(P, k=200, binned=False)
    assert exc.value.stage == "core"
    with pytest.raises(StageError) as exc:
        run_pipeline(P, k=30, n_bins=12, halfwidth=0.01, global_core=False)
    assert exc.value.stage.startswith("bin")
    with pytest.raises(StageError):
        run_pipeline(np.ones((10, 18)), k=1)


def test_horizontal_core_on_the_circle():
    P, _ = synthetic_flow_patches(4000, "horizontal", noise_sigma=0.0, seed=0, basis=B)
    res = run_pipeline(P, k=50, binned=False, basis=B)
    c = res.coefficients[res.core]
    np.testing.assert_allclose(c[:, 0] ** 2 + c[:, 1] ** 2, 1, atol=1e-9)
    np.testing.assert_allclose(c[:, 2:], 0, atol=1e-9)
    # and each core point is one of f(alpha, 0) or f(alpha, pi)
    alpha = np.arctan2(c[:, 1], c[:, 0])
    np.testing.assert_allclose(res.core_points(), models.flow_torus_map(alpha, 0.0), atol=1e-9)
