"""Modal forecasting: evolve an initial observable through the spectral form.

A rank-r operator with spectral decomposition acts on each mode as a scalar
oscillator: the initial state-window is expanded on the (right) eigenfunction
directions via the biorthogonal left family, each coefficient is advanced by
mu^k = exp(lambda dt k), and the window is re-synthesized.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NumericalError, ParameterError
from .measures import SpectralMeasure


def _mode_blocks(measure: SpectralMeasure) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Feature-space left/right mode matrices and transfer eigenvalues."""
    if not measure.kernel.is_linear:
        raise ParameterError("modal forecasting requires the linear kernel")
    P_cols, Q_cols, mu = [], [], []
    for a in measure.atoms:
        # x-side columns span the right eigenfunctions, y-side the left ones.
        P_cols.append(measure.x_points.T @ a.basis_alpha)
        Q_cols.append(measure.y_points.T @ a.basis_beta)
        mu.extend([np.exp(a.lam * measure.dt)] * a.m)
    return np.hstack(P_cols), np.hstack(Q_cols), np.array(mu)


def modal_forecast(
    measure: SpectralMeasure, init_window: np.ndarray, horizon: int
) -> np.ndarray:
    """Evolved state windows for 1..horizon steps ahead (real parts).

    ``init_window`` is one flattened context window in the same feature space
    the measure was estimated in. Returns an array (horizon, window_dim).
    """
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    w0 = np.asarray(init_window, dtype=float).ravel()
    P, Q, mu = _mode_blocks(measure)
    if len(w0) != P.shape[0]:
        raise DimensionError(
            f"window length {len(w0)} does not match feature dimension {P.shape[0]}"
        )
    # State windows decompose over the conjugated left-eigenfunction vectors
    # (the dynamic modes), with expansion coefficients read off obliquely by
    # the right eigenfunctions: c = (P^T conj(Q))^{-1} P^T w0.
    modes = Q.conj()
    G = P.T @ modes
    if np.linalg.cond(G) > 1e12:
        raise NumericalError("mode directions are numerically dependent")
    c = np.linalg.solve(G, P.T @ w0.astype(complex))
    out = np.empty((horizon, P.shape[0]))
    amps = c.copy()
    for k in range(horizon):
        amps = amps * mu
        out[k] = np.real(modes @ amps)
    return out


def forecast_series(
    measure: SpectralMeasure, init_window: np.ndarray, horizon: int, dim: int = 1
) -> np.ndarray:
    """Predicted future samples: the trailing frame of each evolved window."""
    windows = modal_forecast(measure, init_window, horizon)
    if windows.shape[1] % dim != 0:
        raise DimensionError(f"window length not divisible by dim={dim}")
    frames = windows[:, -dim:]
    return frames[:, 0] if dim == 1 else frames
