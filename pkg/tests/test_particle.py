"""Particle model coefficients, initial ensemble, and the Gaussian filter oracle."""

import numpy as np
import pytest

from artifact.core import FeedbackContext
from artifact.ensemble import (
    EnsembleSettings,
    compute_context,
    run_experiment,
    weighted_average,
    weighted_variance,
)
from artifact.particle import (
    DEFAULT_X0,
    ParticleModel,
    ParticleParams,
    gaussian_filter_reference,
    steady_state_covariance,
)

# steady conditional covariance at gamma = 1, frozen from the Riccati fixed
# point solved independently: C = (sqrt(5) - 1)/4, V_x = sqrt(C/2),
# V_p = V_x (1 + 4C)
ANCHOR_G1 = (0.39307568887871164, 0.8789439606353574, 0.30901699437494745)
ANCHOR_G05 = (0.4550898605622274, 0.6435942529055827, 0.20710678118654757)


def test_default_parameters():
    params = ParticleParams()
    assert params.gamma == 1.0
    assert params.feedback_gain == -1.35
    assert params.x0 == pytest.approx(np.sqrt(5.0))
    assert DEFAULT_X0 == pytest.approx(np.sqrt(5.0))


def test_parameter_validation():
    with pytest.raises(ValueError):
        ParticleParams(gamma=-0.1)
    with pytest.raises(ValueError):
        ParticleParams(dt=0.0)


def test_drift_is_harmonic_motion_with_control_shift():
    model = ParticleModel(ParticleParams(gamma=1.0, dt=1e-3))
    states = np.array([[1.0, 0.0], [0.5, -2.0]], dtype=np.complex128)
    context = FeedbackContext(means={"x": 0.0, "p": 0.0}, control=0.0)
    drift = model.drift(states, 0.0, context)
    np.testing.assert_allclose(drift.real, [[0.0, -1.0], [-2.0, -0.5]], atol=1e-15)
    shifted = model.drift(states, 0.0, FeedbackContext(means={}, control=0.3))
    np.testing.assert_allclose(shifted.real, [[0.0, -0.7], [-2.0, -0.2]], atol=1e-15)


def test_noise_couplings_at_quarter_gamma():
    model = ParticleModel(ParticleParams(gamma=0.25, dt=1e-3))
    states = np.array([[1.0, 0.0], [-2.0, 1.0]], dtype=np.complex128)
    context = FeedbackContext(means={"x": 0.0, "p": 0.0}, control=0.0)
    assert model.real_coupling(states, 0.0, context) is None
    fict = model.fict_coupling(states, 0.0, context)
    np.testing.assert_allclose(np.asarray(fict).real.ravel(), [0.0, 0.5], atol=1e-15)
    np.testing.assert_allclose(np.asarray(fict).imag.ravel(), 0.0, atol=0.0)
    beta = model.weight_coupling(states, 0.0, context)
    np.testing.assert_allclose(beta.real, [[1.0], [-2.0]], atol=1e-15)


def test_weight_drift_vanishes_at_the_mean_and_is_never_positive():
    model = ParticleModel(ParticleParams(gamma=0.8, dt=1e-3))
    rng = np.random.Generator(np.random.PCG64(3))
    states = rng.standard_normal((64, 2)).astype(np.complex128)
    logw = np.zeros(64, dtype=np.complex128)
    context = compute_context(model, states, logw)
    alpha = model.weight_drift(states, 0.0, context)
    assert np.all(alpha.real <= 1e-15)
    centered = states.copy()
    centered[:, 0] = complex(context.means["x"])
    np.testing.assert_allclose(
        model.weight_drift(centered, 0.0, context).real, 0.0, atol=1e-15
    )


def test_initial_ensemble_moments():
    model = ParticleModel(ParticleParams(dt=1e-3))
    rng = np.random.Generator(np.random.PCG64(17))
    n = 200_000
    states = np.asarray(model.sample_initial(n, rng), dtype=np.complex128).real
    tol = 4.0 * np.sqrt(0.5 / n)
    assert abs(states[:, 0].mean() - np.sqrt(5.0)) < tol
    assert abs(states[:, 1].mean()) < tol
    var_tol = 4.0 * 0.5 * np.sqrt(2.0 / n)
    assert abs(states[:, 0].var() - 0.5) < var_tol
    assert abs(states[:, 1].var() - 0.5) < var_tol
    energy = 0.5 * np.mean(np.sum(states**2, axis=1))
    assert energy == pytest.approx(3.0, abs=0.02)
    centered = ParticleModel(ParticleParams(x0=0.0, dt=1e-3))
    states = np.asarray(centered.sample_initial(n, rng), dtype=np.complex128).real
    energy = 0.5 * np.mean(np.sum(states**2, axis=1))
    assert energy == pytest.approx(0.5, abs=0.02)


def test_steady_state_covariance_anchors():
    v_x, v_p, c = steady_state_covariance(1.0)
    assert c == pytest.approx((np.sqrt(5.0) - 1.0) / 4.0, rel=1e-14)
    assert (v_x, v_p, c) == pytest.approx(ANCHOR_G1, rel=1e-12)
    assert v_x * v_p - c * c == pytest.approx(0.25, rel=1e-12)
    assert steady_state_covariance(0.5) == pytest.approx(ANCHOR_G05, rel=1e-12)
    # purity is gamma independent
    for gamma in (0.1, 0.7, 2.0):
        v_x, v_p, c = steady_state_covariance(gamma)
        assert v_x * v_p - c * c == pytest.approx(0.25, rel=1e-10)


def test_filter_reaches_the_steady_covariance():
    params = ParticleParams(gamma=1.0, feedback_gain=-1.35, dt=1e-3)
    record = np.zeros(20_000)
    out = gaussian_filter_reference(params, record)
    v_x, v_p, c = steady_state_covariance(1.0)
    assert out["var_x"][-1] == pytest.approx(v_x, abs=1e-9)
    assert out["var_p"][-1] == pytest.approx(v_p, abs=1e-9)
    assert out["cov_xp"][-1] == pytest.approx(c, abs=1e-9)
    # variance part of the steady energy, frozen
    assert 0.5 * (v_x + v_p) == pytest.approx(0.6360098247570345, rel=1e-12)


def test_filter_free_limit_is_a_rotation():
    n = 1571
    dt = (np.pi / 2.0) / n
    params = ParticleParams(gamma=0.0, feedback_gain=0.0, dt=dt)
    out = gaussian_filter_reference(params, np.zeros(n))
    assert out["mean_x"][-1] == pytest.approx(0.0, abs=1e-4)
    assert out["mean_p"][-1] == pytest.approx(-np.sqrt(5.0), abs=1e-4)
    # isotropic covariance is rotation invariant
    np.testing.assert_allclose(out["var_x"], 0.5, atol=1e-10)
    np.testing.assert_allclose(out["var_p"], 0.5, atol=1e-10)
    np.testing.assert_allclose(out["energy"], out["energy"][0], atol=1e-8)


def test_filter_energy_definition():
    params = ParticleParams(gamma=0.5, dt=1e-3)
    rng = np.random.Generator(np.random.PCG64(2))
    record = rng.standard_normal(500) * np.sqrt(1e-3)
    out = gaussian_filter_reference(params, record)
    expected = 0.5 * (
        out["mean_x"] ** 2 + out["mean_p"] ** 2 + out["var_x"] + out["var_p"]
    )
    np.testing.assert_allclose(out["energy"], expected, rtol=1e-12)


def test_weighted_ensemble_tracks_the_filter():
    """Short pinned-seed run: conditional moments follow the exact filter."""
    params = ParticleParams(gamma=1.0, feedback_gain=-1.35, dt=1e-3)
    model = ParticleModel(params)
    settings = EnsembleSettings(
        n_paths=3000,
        t_final=2.0,
        sample_interval=0.25,
        seed_real=314,
        seed_fict=159,
        breed_tolerance=1e-4,
    )
    record = run_experiment(model, settings)
    assert not record.failed
    filt = gaussian_filter_reference(params, record.real_increments.ravel())
    stride = round(settings.sample_interval / params.dt)
    for i, t in enumerate(record.times):
        if t == 0.0:
            continue
        k = i * stride
        for wsde_key, filt_key in (
            ("x_mean", "mean_x"),
            ("p_mean", "mean_p"),
            ("var_x", "var_x"),
            ("var_p", "var_p"),
        ):
            got = record.columns[wsde_key][i]
            want = filt[filt_key][k]
            err = record.columns[wsde_key + "_stderr"][i]
            assert abs(got - want) < 4.0 * err + 1e-3, (t, wsde_key, got, want, err)
    assert record.columns["ess"][-1] > 100.0
