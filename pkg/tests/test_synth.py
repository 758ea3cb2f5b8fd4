import numpy as np
import pytest

from sgot.errors import ParameterError
from sgot.estimation import eigendecompose, fit_rrr, generator_eigenvalues
from sgot.kernels import linear_kernel
from sgot.synth import (
    BASE_HARMONICS,
    REFERENCE_CONTEXT_SECONDS,
    HarmonicSpec,
    ScenarioKind,
    decay_scenario,
    frequency_scenario,
    generate_trajectory,
    harmonic_signal,
    interpolation_pair,
    reference_dataset,
    sampling_scenario,
    scenario_grid,
    square_wave_fourier,
    subspace_scenario,
)


class TestSignals:
    def test_harmonic_closed_form(self):
        spec = HarmonicSpec(frequency=2.0, decay=-0.5, amplitude=1.5, phase=0.3)
        fs, n = 50.0, 100
        s = harmonic_signal((spec,), fs, n)
        t = np.arange(n) / fs
        expect = 1.5 * np.exp(-0.5 * t) * np.sin(2 * np.pi * 2.0 * t + 0.3)
        assert np.allclose(s, expect)

    def test_seeded_determinism(self):
        a = generate_trajectory(BASE_HARMONICS, 100.0, 500, 1e-2, seed=42)
        b = generate_trajectory(BASE_HARMONICS, 100.0, 500, 1e-2, seed=42)
        c = generate_trajectory(BASE_HARMONICS, 100.0, 500, 1e-2, seed=43)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_negative_decay_converges(self):
        s = harmonic_signal((HarmonicSpec(1.0, decay=-2.0),), 100.0, 400)
        assert np.max(np.abs(s[300:])) < np.max(np.abs(s[:100]))

    def test_negative_frequency_rejected(self):
        with pytest.raises(ParameterError):
            HarmonicSpec(-1.0)

    def test_square_wave_converges_to_square(self):
        s = square_wave_fourier(1.0, 200, 1000.0, 1000, 0.0, 0)
        # away from jumps, the truncated series is close to +-1
        mid = s[200:300]  # t in (0.2, 0.3): first half-period -> +1
        assert np.allclose(mid, 1.0, atol=0.05)

    def test_square_wave_nyquist_guard(self):
        with pytest.raises(ParameterError):
            square_wave_fourier(60.0, 3, 100.0, 100, 0.0, 0)

    def test_round_trip_mode_recovery(self):
        # estimated generator eigenvalues match the generating harmonics
        from sgot.estimation import windowed_pairs

        s = generate_trajectory(
            (HarmonicSpec(0.5), HarmonicSpec(1.2, decay=-0.3)), 100.0, 2000, 0.0, 0
        )
        data = windowed_pairs(s, 100, 0.01)
        eigs = eigendecompose(fit_rrr(data, linear_kernel(), 4, 1e-10))
        lam = generator_eigenvalues(eigs)
        freqs = np.sort(np.abs(lam.imag)) / (2 * np.pi)
        assert np.allclose(freqs, [0.5, 0.5, 1.2, 1.2], atol=1e-3)
        decays = np.sort(lam.real)
        assert np.allclose(decays[:2], -0.3, atol=1e-3)
        assert np.allclose(decays[2:], 0.0, atol=1e-3)


class TestScenarios:
    def test_grid_shapes(self):
        spec = frequency_scenario(n_points=5, length=600, replicates=2)
        grid = scenario_grid(spec)
        assert len(grid) == 5
        assert all(len(reps) == 2 for reps in grid)

    def test_default_grids(self):
        assert len(frequency_scenario().grid) == 39
        assert len(decay_scenario().grid) == 67
        assert len(subspace_scenario().grid) == 51
        assert len(sampling_scenario().grid) == 19

    def test_replicates_differ_only_in_noise(self):
        spec = frequency_scenario(n_points=2, length=500, replicates=2, noise_std=1e-2)
        grid = scenario_grid(spec)
        a, b = grid[0]
        assert a.x.shape == b.x.shape
        assert not np.array_equal(a.x, b.x)
        # noise-free versions coincide
        spec0 = frequency_scenario(n_points=2, length=500, replicates=2, noise_std=0.0)
        a0, b0 = scenario_grid(spec0)[0]
        assert np.array_equal(a0.x, b0.x)

    def test_decay_scenario_sign_convention(self):
        # positive grid value = damping -> envelope decays
        spec = decay_scenario(n_points=2, lo=3.0, hi=3.0, length=800, noise_std=0.0)
        data = scenario_grid(spec)[0][0]
        assert np.linalg.norm(data.x[-1]) < np.linalg.norm(data.x[0])

    def test_sampling_scenario_native_dt_and_common_features(self):
        spec = sampling_scenario(n_points=3, length=1000, replicates=1)
        grid = scenario_grid(spec)
        dts = [reps[0].dt for reps in grid]
        assert np.allclose(dts, [1 / 100, 1 / 200, 1 / 300])
        dims = {reps[0].dim for reps in grid}
        assert dims == {100}  # shared polynomial-coefficient space

    def test_sampling_scenario_balances_information(self):
        spec = sampling_scenario(n_points=3, length=1000, replicates=1)
        grid = scenario_grid(spec)
        # snapshot count x window length is held constant across rates, so
        # each estimate averages the same amount of noise
        products = [
            reps[0].n * int(round(fs * REFERENCE_CONTEXT_SECONDS))
            for reps, fs in zip(grid, spec.grid)
        ]
        assert max(products) - min(products) <= 2 * max(spec.grid)

    def test_reference_dataset_matches_grid_featurization(self):
        spec = sampling_scenario(n_points=2, length=900, replicates=1)
        ref = reference_dataset(spec)
        assert ref.dim == scenario_grid(spec)[0][0].dim
        assert ref.dt == 1.0 / spec.fs

    def test_empty_grid_rejected(self):
        from sgot.synth import ScenarioSpec

        with pytest.raises(ParameterError):
            ScenarioSpec(ScenarioKind.FREQUENCY_SHIFT, grid=())

    def test_nyquist_guard(self):
        with pytest.raises(ParameterError):
            frequency_scenario(fs=1.5)


class TestInterpolationPair:
    def test_shapes_and_determinism(self):
        d0, d1 = interpolation_pair(seed=0)
        assert d0.x.shape == (4600, 400)
        assert d1.x.shape == (4600, 400)
        d0b, _ = interpolation_pair(seed=0)
        assert np.array_equal(d0.x, d0b.x)

    def test_known_mode_content(self):
        d0, _ = interpolation_pair(seed=0)
        eigs = eigendecompose(fit_rrr(d0, linear_kernel(), 4, 1e-8))
        lam = generator_eigenvalues(eigs)
        freqs = np.sort(np.unique(np.round(np.abs(lam.imag) / (2 * np.pi), 1)))
        assert np.allclose(freqs, [1.7, 4.7], atol=0.1)
