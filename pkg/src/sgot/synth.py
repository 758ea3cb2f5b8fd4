"""Deterministic generators for synthetic oscillatory benchmark systems.

Signals are sums of exponentially-enveloped sinusoids
s(t) = sum_k a_k exp(rho_k t) sin(2 pi f_k t + phi_k) plus i.i.d. Gaussian
noise from a counter-based PRNG (Philox), so identical specs and seeds give
bitwise-identical series. The envelope exponent rho is signed directly:
negative rho converges (decays), positive rho diverges.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import ParameterError
from .estimation import TrajectoryDataset, windowed_pairs

REFERENCE_FS = 200.0  # Hz
REFERENCE_LENGTH = 4001  # samples
REFERENCE_NOISE_STD = 1e-2
REFERENCE_CONTEXT_SECONDS = 1.0


@dataclass(frozen=True)
class HarmonicSpec:
    """One enveloped sinusoid: a * exp(rho t) * sin(2 pi f t + phi)."""

    frequency: float  # Hz
    decay: float = 0.0  # envelope exponent rho in 1/s; negative = converging
    amplitude: float = 1.0
    phase: float = 0.0  # radians

    def __post_init__(self):
        if self.frequency < 0:
            raise ParameterError("frequency must be >= 0")


BASE_HARMONICS = (HarmonicSpec(0.5), HarmonicSpec(1.0))

# Two-oscillator systems for barycentric interpolation experiments: a pair of
# convergent/divergent modes whose frequency-decay content the barycenter path
# should interpolate linearly.
INTERP_SYSTEM0 = (
    HarmonicSpec(frequency=1.7, decay=-0.2, amplitude=1.0),
    HarmonicSpec(frequency=4.7, decay=0.2, amplitude=0.2),
)
INTERP_SYSTEM1 = (
    HarmonicSpec(frequency=0.7, decay=0.2, amplitude=1.0),
    HarmonicSpec(frequency=11.3, decay=-0.2, amplitude=1.0),
)
INTERP_FS = 800.0
INTERP_LENGTH = 5000
INTERP_NOISE_STD = 1e-2  # variance 1e-4
INTERP_CONTEXT = 400


class ScenarioKind(Enum):
    FREQUENCY_SHIFT = "frequency"
    DECAY_SHIFT = "decay"
    SUBSPACE_SHIFT = "subspace"
    SAMPLING_SHIFT = "sampling"


@dataclass(frozen=True)
class ScenarioSpec:
    kind: ScenarioKind
    grid: tuple = ()
    base: tuple = BASE_HARMONICS
    fs: float = REFERENCE_FS
    length: int = REFERENCE_LENGTH
    noise_std: float = REFERENCE_NOISE_STD
    seed: int = 0
    feature_size: int | None = field(default=None)
    replicates: int = 1

    def __post_init__(self):
        if len(self.grid) == 0:
            raise ParameterError("scenario grid must be nonempty")
        if self.replicates < 1:
            raise ParameterError("replicates must be >= 1")
        fmax = max(h.frequency for h in self.base)
        if not self.fs > 2.0 * fmax:
            raise ParameterError(
                f"sampling rate {self.fs} Hz under Nyquist for base frequency {fmax} Hz"
            )


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def harmonic_signal(specs, fs: float, length: int) -> np.ndarray:
    """Noise-free sum of enveloped sinusoids sampled at fs."""
    t = np.arange(length) / fs
    s = np.zeros(length)
    for h in specs:
        s += h.amplitude * np.exp(h.decay * t) * np.sin(2.0 * np.pi * h.frequency * t + h.phase)
    return s


def generate_trajectory(
    specs, fs: float, length: int, noise_std: float, seed: int
) -> np.ndarray:
    """Sampled harmonic sum plus i.i.d. Gaussian noise, seed-deterministic."""
    s = harmonic_signal(specs, fs, length)
    if noise_std > 0:
        s = s + noise_std * _rng(seed).standard_normal(length)
    return s


def square_wave_fourier(
    f: float, order: int, fs: float, length: int, noise_std: float, seed: int
) -> np.ndarray:
    """Truncated Fourier square wave (4/pi) sum sin((2n+1) 2 pi f t)/(2n+1)."""
    if not f < fs / 2.0:
        raise ParameterError(f"fundamental {f} Hz at or above Nyquist {fs / 2.0} Hz")
    if order < 0:
        raise ParameterError("order must be >= 0")
    t = np.arange(length) / fs
    s = np.zeros(length)
    for n in range(order + 1):
        s += np.sin((2 * n + 1) * 2.0 * np.pi * f * t) / (2 * n + 1)
    s *= 4.0 / np.pi
    if noise_std > 0:
        s = s + noise_std * _rng(seed).standard_normal(length)
    return s


def frequency_scenario(n_points: int = 39, lo: float = 0.6, hi: float = 2.5, **kw) -> ScenarioSpec:
    """The 1 Hz mode's frequency swept over an even grid."""
    return ScenarioSpec(ScenarioKind.FREQUENCY_SHIFT, tuple(np.linspace(lo, hi, n_points)), **kw)


def decay_scenario(n_points: int = 67, lo: float = -0.3, hi: float = 3.0, **kw) -> ScenarioSpec:
    """The 1 Hz mode's damping swept from diverging (-0.3) to converging (3.0).

    Grid values are damping coefficients: the signal envelope is
    exp(-damping * t), so positive damping converges.
    """
    return ScenarioSpec(ScenarioKind.DECAY_SHIFT, tuple(np.linspace(lo, hi, n_points)), **kw)


def subspace_scenario(max_order: int = 50, **kw) -> ScenarioSpec:
    """The 1 Hz sine replaced by square waves of increasing Fourier order."""
    return ScenarioSpec(ScenarioKind.SUBSPACE_SHIFT, tuple(range(max_order + 1)), **kw)


def sampling_scenario(
    n_points: int = 19, lo: float = 100.0, hi: float = 300.0, **kw
) -> ScenarioSpec:
    """The same continuous system sampled at a grid of rates.

    Windows are projected onto a common polynomial-coefficient space so all
    estimates share one linear-kernel feature space; the native dt of each
    rate is preserved. The coefficient count is capped by the smallest
    window length so no rate is forced to represent content above its own
    Nyquist frequency. Trajectory lengths are balanced so every rate yields
    the same estimator precision, and each grid point averages several noise
    realizations to suppress seed-to-seed scatter.
    """
    kw.setdefault("feature_size", int(round(lo * REFERENCE_CONTEXT_SECONDS)))
    kw.setdefault("replicates", 4)
    return ScenarioSpec(ScenarioKind.SAMPLING_SHIFT, tuple(np.linspace(lo, hi, n_points)), **kw)


def _scenario_series(spec: ScenarioSpec, value, seed: int) -> tuple[np.ndarray, float]:
    """Series and sampling rate for one grid point of a scenario."""
    base = list(spec.base)
    if spec.kind is ScenarioKind.FREQUENCY_SHIFT:
        base[-1] = replace(base[-1], frequency=float(value))
        return generate_trajectory(base, spec.fs, spec.length, spec.noise_std, seed), spec.fs
    if spec.kind is ScenarioKind.DECAY_SHIFT:
        base[-1] = replace(base[-1], decay=-float(value))
        return generate_trajectory(base, spec.fs, spec.length, spec.noise_std, seed), spec.fs
    if spec.kind is ScenarioKind.SUBSPACE_SHIFT:
        mod = base[-1]
        rest = generate_trajectory(base[:-1], spec.fs, spec.length, 0.0, seed)
        sq = square_wave_fourier(
            mod.frequency, int(value), spec.fs, spec.length, spec.noise_std, seed
        )
        return rest + mod.amplitude * sq, spec.fs
    if spec.kind is ScenarioKind.SAMPLING_SHIFT:
        # Projected-window noise variance scales with 1 / window length, so
        # balance trajectory lengths (snapshot counts proportional to the
        # window length ratio) to equalize estimator precision across rates.
        fs = float(value)
        w_ref = int(round(spec.fs * REFERENCE_CONTEXT_SECONDS))
        w = int(round(fs * REFERENCE_CONTEXT_SECONDS))
        length = int(round((spec.length - w_ref) * w_ref / w)) + w
        return generate_trajectory(base, fs, length, spec.noise_std, seed), fs
    raise ParameterError(f"unknown scenario kind {spec.kind}")


def scenario_grid(spec: ScenarioSpec) -> list[list[TrajectoryDataset]]:
    """Windowed datasets per grid point, varying only the scenario parameter.

    Each grid point yields ``spec.replicates`` datasets that differ only in
    their noise stream (seeds derived from the scenario seed); downstream
    distances are averaged over them. The context window always spans one
    second of signal at the point's own sampling rate.
    """
    out = []
    for i, value in enumerate(spec.grid):
        reps = []
        for j in range(spec.replicates):
            series, fs = _scenario_series(spec, value, spec.seed + i * spec.replicates + j)
            context = int(round(fs * REFERENCE_CONTEXT_SECONDS))
            reps.append(
                windowed_pairs(series, context, 1.0 / fs, feature_size=spec.feature_size)
            )
        out.append(reps)
    return out


def reference_dataset(
    spec: ScenarioSpec | None = None, seed_offset: int = 10_000
) -> TrajectoryDataset:
    """The unshifted base system, windowed like the scenario grid points."""
    if spec is None:
        spec = frequency_scenario()
    series = generate_trajectory(
        spec.base, spec.fs, spec.length, spec.noise_std, spec.seed + seed_offset
    )
    context = int(round(spec.fs * REFERENCE_CONTEXT_SECONDS))
    return windowed_pairs(series, context, 1.0 / spec.fs, feature_size=spec.feature_size)


def interpolation_pair(seed: int = 0) -> tuple[TrajectoryDataset, TrajectoryDataset]:
    """The two-system pair used by the barycentric interpolation experiment."""
    out = []
    for k, specs in enumerate((INTERP_SYSTEM0, INTERP_SYSTEM1)):
        series = generate_trajectory(specs, INTERP_FS, INTERP_LENGTH, INTERP_NOISE_STD, seed + k)
        out.append(windowed_pairs(series, INTERP_CONTEXT, 1.0 / INTERP_FS))
    return out[0], out[1]
