"""Kernel functions, Gram matrices and kernel gradients.

Two kernels ship: the linear kernel (identity feature map, the workhorse for
all desk-scale experiments) and the Gaussian RBF kernel. Gram matrices are
materialized densely; the point sets handled here are at most a few thousand
rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionError, ParameterError


class KernelKind(Enum):
    LINEAR = "linear"
    GAUSSIAN_RBF = "rbf"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice plus its hyperparameters.

    ``lengthscale`` is only meaningful for the RBF kernel and is measured in
    state-space distance units. It is ignored for the linear kernel.
    """

    kind: KernelKind = KernelKind.LINEAR
    lengthscale: float = 1.0

    def __post_init__(self):
        if self.kind is KernelKind.GAUSSIAN_RBF and not self.lengthscale > 0:
            raise ParameterError(f"RBF lengthscale must be > 0, got {self.lengthscale}")

    @property
    def is_linear(self) -> bool:
        return self.kind is KernelKind.LINEAR


def linear_kernel() -> KernelSpec:
    return KernelSpec(KernelKind.LINEAR)


def rbf_kernel(lengthscale: float) -> KernelSpec:
    return KernelSpec(KernelKind.GAUSSIAN_RBF, lengthscale)


def median_lengthscale(points: np.ndarray) -> float:
    """Median pairwise distance heuristic for the RBF lengthscale."""
    points = _as_points(points)
    if len(points) < 2:
        return 1.0
    d = cdist(points, points)
    med = float(np.median(d[np.triu_indices(len(points), k=1)]))
    return med if med > 0 else 1.0


def _as_points(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionError(f"point set must be 2-D, got shape {a.shape}")
    return a


def gram(kernel: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross-Gram matrix K[i, j] = kappa(a_i, b_j), shape (n, m)."""
    a = _as_points(a)
    b = _as_points(b)
    if a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"point dimension mismatch: {a.shape[1]} vs {b.shape[1]}"
        )
    if kernel.is_linear:
        return a @ b.T
    sq = cdist(a, b, metric="sqeuclidean")
    return np.exp(-sq / (2.0 * kernel.lengthscale**2))


def gram_gradient(
    kernel: KernelSpec, a: np.ndarray, b: np.ndarray, wrt: int
) -> np.ndarray:
    """Gradient of kappa(a[wrt], b_j) w.r.t. the point a[wrt].

    Returns an (m, d) array whose j-th row is d kappa(a[wrt], b_j) / d a[wrt].
    """
    a = _as_points(a)
    b = _as_points(b)
    if a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"point dimension mismatch: {a.shape[1]} vs {b.shape[1]}"
        )
    x = a[wrt]
    if kernel.is_linear:
        return b.copy()
    diff = x[None, :] - b  # (m, d)
    k = np.exp(-np.sum(diff**2, axis=1) / (2.0 * kernel.lengthscale**2))
    return -diff * (k / kernel.lengthscale**2)[:, None]
