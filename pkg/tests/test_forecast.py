import numpy as np
import pytest

from sgot.errors import DimensionError, ParameterError
from sgot.estimation import eigendecompose, fit_rrr, windowed_pairs
from sgot.forecast import forecast_series, modal_forecast
from sgot.kernels import linear_kernel
from sgot.measures import SpectralMeasure, build_measure
from sgot.synth import HarmonicSpec, generate_trajectory


def _fit(series, context, dt, rank, tikhonov=1e-10):
    data = windowed_pairs(series, context, dt)
    op = fit_rrr(data, linear_kernel(), rank, tikhonov)
    return build_measure(eigendecompose(op), op), data


def test_constant_mode_constant_prediction():
    rng = np.random.default_rng(0)
    s = np.ones(400) + 1e-9 * rng.standard_normal(400)
    m, data = _fit(s, 20, 0.01, rank=1, tikhonov=1e-12)
    pred = forecast_series(m, data.x[0], 50)
    assert np.max(np.abs(pred - 1.0)) < 1e-6


def test_decaying_mode_geometric_envelope():
    fs = 100.0
    t = np.arange(800) / fs
    s = np.exp(-0.5 * t) * np.sin(2 * np.pi * 2.0 * t)
    m, data = _fit(s, 50, 1 / fs, rank=2, tikhonov=1e-12)
    pred = forecast_series(m, data.x[100], 200)
    true = s[150:350]
    assert np.sqrt(np.mean((pred - true) ** 2)) < 1e-6


def test_two_oscillator_round_trip():
    fs = 100.0
    specs = (HarmonicSpec(0.5), HarmonicSpec(1.3, decay=-0.05, amplitude=0.7))
    s = generate_trajectory(specs, fs, 2000, 0.0, 0)
    m, data = _fit(s, 100, 1 / fs, rank=4)
    horizon = 100  # one second
    pred = forecast_series(m, data.x[500], horizon)
    true = s[600:700]
    amp = np.max(np.abs(s))
    assert np.sqrt(np.mean((pred - true) ** 2)) <= 1e-3 * amp


def test_window_forecast_matches_future_windows():
    fs = 100.0
    s = generate_trajectory((HarmonicSpec(0.8),), fs, 1200, 0.0, 1)
    m, data = _fit(s, 60, 1 / fs, rank=2)
    pred = modal_forecast(m, data.x[300], 40)
    assert pred.shape == (40, 60)
    assert np.allclose(pred, data.x[301:341], atol=1e-7)


def test_bad_horizon_and_dimensions():
    s = generate_trajectory((HarmonicSpec(0.8),), 100.0, 600, 0.0, 2)
    m, data = _fit(s, 40, 0.01, rank=2)
    with pytest.raises(ParameterError):
        modal_forecast(m, data.x[0], 0)
    with pytest.raises(DimensionError):
        modal_forecast(m, data.x[0][:10], 5)


def test_nonlinear_kernel_rejected():
    from sgot.kernels import rbf_kernel

    s = generate_trajectory((HarmonicSpec(0.8),), 100.0, 600, 0.0, 3)
    m, data = _fit(s, 40, 0.01, rank=2)
    bad = SpectralMeasure(
        atoms=m.atoms, x_points=m.x_points, y_points=m.y_points,
        kernel=rbf_kernel(1.0), dt=m.dt,
    )
    with pytest.raises(ParameterError):
        modal_forecast(bad, data.x[0], 5)
