"""Reduced-rank and ridge estimation of Koopman/transfer operators.

Snapshot pairs are built from trajectories via sliding context windows. Two
numerical routes produce the same factored operator `op = S* U V^T Z` over
the training representers:

* a feature-space route for the linear kernel (covariance matrices, d x d),
* a Gram-matrix route for any kernel (generalized eigenproblem, n x n).

The linear route doubles as the correctness oracle for the Gram route and
provides explicit matrices for norm-based baselines and forecasting.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DefectiveOperatorError,
    InsufficientDataError,
    ParameterError,
    ParseError,
    RankError,
    ZeroEigenvalueError,
)
from .kernels import KernelSpec, gram, linear_kernel

_DROP_TOL = 1e-12  # transfer eigenvalues below this modulus have no generator log


@dataclass(frozen=True)
class TrajectoryDataset:
    """Paired snapshots (x_i, y_i) separated by a fixed time lag dt (seconds).

    ``noise_shift`` optionally records the expected structure of the noise
    cross-covariance between paired snapshots, in units of the per-coordinate
    noise variance. Overlapping context windows share all but one measurement,
    so white sensor noise contributes a deterministic shift-correlated term to
    the empirical cross-covariance; estimators can subtract a plug-in estimate
    of it (an errors-in-variables style correction).
    """

    x: np.ndarray
    y: np.ndarray
    dt: float
    noise_shift: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.x.shape != self.y.shape:
            raise ParameterError("x and y must have identical shape")
        if len(self.x) < 2:
            raise InsufficientDataError("need at least 2 snapshot pairs")
        if not self.dt > 0:
            raise ParameterError("dt must be positive")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def dim(self) -> int:
        return self.x.shape[1]


def windowed_pairs(
    series: np.ndarray,
    context: int,
    dt_sample: float,
    feature_size: int | None = None,
) -> TrajectoryDataset:
    """Build one-step-lagged snapshot pairs of flattened context windows.

    ``series`` is (T,) or (T, dim). With window length w, x_i stacks samples
    i..i+w-1 and y_i stacks i+1..i+w, giving n = T - w pairs of dimension
    w*dim, with dt equal to the sampling interval.

    ``feature_size`` optionally re-expresses every window as ``feature_size``
    orthonormal-polynomial coefficients over the window span, so that systems
    recorded at different sampling rates share one feature space. Unlike
    pointwise interpolation, the orthonormal projection keeps white
    measurement noise exactly isotropic in the common space, which stabilizes
    cross-rate comparison of estimated eigenfunction subspaces.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    T, dim = series.shape
    if context < 1:
        raise ParameterError("context window must be >= 1")
    if T <= context:
        raise InsufficientDataError(f"series length {T} <= context {context}")
    n = T - context
    idx = np.arange(context)[None, :] + np.arange(n + 1)[:, None]  # (n+1, w)
    windows = series[idx]  # (n+1, w, dim)
    noise_shift = None
    if feature_size is not None:
        Q = _window_projection(context, feature_size)
        # (n+1, w, dim) -> coefficients (n+1, feature_size, dim)
        windows = np.einsum("wf,nwc->nfc", Q, windows)
        # Noise in the y window is the x-window noise advanced one step:
        # cov(n_x, n_y) = sigma^2 Q^T S Q with S the one-step shift, relative
        # to the isotropic per-coefficient variance.
        Qo = Q / np.sqrt(feature_size / context)
        R = Qo.T @ np.eye(context, k=-1) @ Qo
        noise_shift = R if dim == 1 else np.kron(R, np.eye(dim))
    flat = windows.reshape(len(windows), -1)
    return TrajectoryDataset(
        x=flat[:-1], y=flat[1:], dt=float(dt_sample), noise_shift=noise_shift
    )


def _window_projection(n_samples: int, n_coeffs: int) -> np.ndarray:
    """Orthonormal projection of length-w windows onto polynomial coefficients.

    Columns are the QR-orthonormalization of the Legendre basis evaluated on
    the window's normalized time grid, scaled by sqrt(n_coeffs / n_samples).
    Exact column orthogonality keeps white sample noise white; the low-order
    coefficients of a smooth band-limited signal are (up to O(1/w)
    discretization) independent of the native sampling rate, so the same
    continuous system recorded at different rates maps to nearly the same
    feature vectors.
    """
    if n_coeffs > n_samples:
        raise ParameterError(
            f"feature size {n_coeffs} exceeds window length {n_samples}"
        )
    tau = 2.0 * np.arange(n_samples) / n_samples - 1.0
    B = np.polynomial.legendre.legvander(tau, n_coeffs - 1)
    Q, R = np.linalg.qr(B)
    Q = Q * np.sign(np.diag(R))[None, :]
    return Q * np.sqrt(n_coeffs / n_samples)


@dataclass(frozen=True)
class EstimatedOperator:
    """Rank-r operator in factored form over the training representers."""

    kernel: KernelSpec
    rank: int
    tikhonov: float
    U: np.ndarray  # (n, r)
    V: np.ndarray  # (n, r)
    x_points: np.ndarray  # (n, d)
    y_points: np.ndarray  # (n, d)
    dt: float
    explicit: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.x_points)

    def explicit_matrix(self) -> np.ndarray:
        """Explicit d x d matrix on the feature space (linear kernel only)."""
        if not self.kernel.is_linear:
            raise ParameterError("explicit matrices exist only for the linear kernel")
        if self.explicit is not None:
            return self.explicit
        return (self.x_points.T @ self.U) @ (self.V.T @ self.y_points) / self.n

    def apply_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        """Action of the operator on x-representer coefficient vectors."""
        m_a = cross_gram_apply(self.kernel, self.y_points, self.x_points, coeffs)
        return self.U @ (self.V.T @ m_a) / self.n


def cross_gram_apply(
    kernel: KernelSpec, a: np.ndarray, b: np.ndarray, w: np.ndarray
) -> np.ndarray:
    """Compute gram(kernel, a, b) @ w without the n x n product when linear."""
    if kernel.is_linear:
        return a @ (b.T @ w)
    return gram(kernel, a, b) @ w


def _validate_fit(data: TrajectoryDataset, rank: int, tikhonov: float, kernel: KernelSpec):
    if rank < 1 or rank > data.n:
        raise RankError(f"rank must be in [1, n={data.n}], got {rank}")
    if tikhonov < 0 or (tikhonov == 0 and not kernel.is_linear):
        raise ParameterError(
            "tikhonov must be > 0 (gamma = 0 only on the unregularized linear path)"
        )


def _whiten_invsqrt(Cg: np.ndarray, gamma: float) -> np.ndarray:
    """Inverse square root of a PSD matrix via symmetric eigendecomposition."""
    s, E = np.linalg.eigh(Cg)
    floor = max(gamma * 1e-12, 0.0)
    s = np.maximum(s, floor)
    inv = np.where(s > 0, 1.0 / np.sqrt(np.where(s > 0, s, 1.0)), 0.0)
    return (E * inv) @ E.T


def _fit_linear_feature(
    data: TrajectoryDataset, rank: int, tikhonov: float, reduced: bool
) -> EstimatedOperator:
    X, Y, n = data.x, data.y, data.n
    Cx = X.T @ X / n
    Cxy = X.T @ Y / n
    if data.noise_shift is not None:
        # Subtract the expected noise contribution to the cross-covariance.
        # The per-coordinate noise variance is read off the trailing spectrum
        # of Cx, where signal energy is negligible. The isotropic noise term
        # in Cx itself is left in place: it only adds a harmless ridge.
        s = np.linalg.eigvalsh(Cx)
        sigma2 = float(np.median(s[: max(1, data.dim // 2)]))
        Cxy = Cxy - sigma2 * data.noise_shift
    Cg = Cx + tikhonov * np.eye(data.dim)
    if reduced:
        W = _whiten_invsqrt(Cg, tikhonov)
        B = W @ Cxy
        Ub, _, _ = np.linalg.svd(B)
        Ur = Ub[:, :rank]
        P = W @ Ur  # (d, r)
        Qt = Ur.T @ B  # (r, d)
    else:
        P = np.linalg.solve(Cg, Cxy)  # (d, d): E itself
        Qt = np.eye(data.dim)
        rank = data.dim
    E = P @ Qt
    # Factored representers: min-norm solutions of X^T U = sqrt(n) P etc.
    U = np.linalg.lstsq(X.T, np.sqrt(n) * P, rcond=None)[0]
    V = np.linalg.lstsq(Y.T, np.sqrt(n) * Qt.T, rcond=None)[0]
    return EstimatedOperator(
        kernel=linear_kernel(),
        rank=rank,
        tikhonov=tikhonov,
        U=U,
        V=V,
        x_points=X,
        y_points=Y,
        dt=data.dt,
        explicit=E,
    )


def _fit_gram(
    data: TrajectoryDataset, kernel: KernelSpec, rank: int, tikhonov: float, reduced: bool
) -> EstimatedOperator:
    n = data.n
    Kx = gram(kernel, data.x, data.x) / n
    if not reduced:
        U = np.linalg.solve(Kx + tikhonov * np.eye(n), np.eye(n))
        V = np.eye(n)
        return EstimatedOperator(kernel, n, tikhonov, U, V, data.x, data.y, data.dt)
    Ky = gram(kernel, data.y, data.y) / n
    A = Ky @ Kx
    Bmat = Kx + tikhonov * np.eye(n)
    vals, vecs = scipy.linalg.eig(A, Bmat)
    order = np.argsort(-vals.real)
    W = np.real(vecs[:, order[:rank]])
    norms = np.sqrt(np.maximum(np.einsum("ij,ij->j", W, Kx @ Bmat @ W), 1e-300))
    U = W / norms
    V = Kx @ U
    return EstimatedOperator(kernel, rank, tikhonov, U, V, data.x, data.y, data.dt)


def fit_rrr(
    data: TrajectoryDataset,
    kernel: KernelSpec,
    rank: int,
    tikhonov: float,
    method: str = "auto",
) -> EstimatedOperator:
    """Reduced-rank regression estimator of the transfer operator.

    ``method`` selects the numerical route: "feature" (linear kernel only),
    "gram" (any kernel), or "auto" (feature when linear, else gram).
    """
    _validate_fit(data, rank, tikhonov, kernel)
    if method == "auto":
        method = "feature" if kernel.is_linear else "gram"
    if method == "feature":
        if not kernel.is_linear:
            raise ParameterError("feature route requires the linear kernel")
        return _fit_linear_feature(data, rank, tikhonov, reduced=True)
    if method == "gram":
        if tikhonov <= 0:
            raise ParameterError("gram route requires tikhonov > 0")
        return _fit_gram(data, kernel, rank, tikhonov, reduced=True)
    raise ParameterError(f"unknown fit method {method!r}")


def fit_krr(
    data: TrajectoryDataset,
    kernel: KernelSpec,
    tikhonov: float,
    method: str = "auto",
) -> EstimatedOperator:
    """Kernel ridge regression estimator (RRR without rank truncation)."""
    _validate_fit(data, 1, tikhonov, kernel)
    if method == "auto":
        method = "feature" if kernel.is_linear else "gram"
    if method == "feature":
        return _fit_linear_feature(data, data.dim, tikhonov, reduced=False)
    if tikhonov <= 0:
        raise ParameterError("gram route requires tikhonov > 0")
    return _fit_gram(data, kernel, data.n, tikhonov, reduced=False)


@dataclass(frozen=True)
class EigenSystem:
    """Spectral decomposition of a factored operator.

    ``alpha`` holds coefficient columns on the x-representers (eigenfunctions
    S* U v_i), ``beta`` on the y-representers (Z* V u_i scaled by mu/|mu|).
    Eigenvalues are sorted by decreasing modulus with conjugate pairs
    adjacent (positive imaginary part first).
    """

    mu: np.ndarray  # (r,) complex transfer-operator eigenvalues
    alpha: np.ndarray  # (n, r) complex, x-representer coefficients
    beta: np.ndarray  # (n, r) complex, y-representer coefficients
    dt: float

    @property
    def r(self) -> int:
        return len(self.mu)


def _sort_spectrum(mu, alpha, beta):
    key = np.lexsort((-mu.imag, mu.real, -np.round(np.abs(mu), 12)))
    return mu[key], alpha[:, key], beta[:, key]


def eigendecompose(op: EstimatedOperator, cond_limit: float = 1e12) -> EigenSystem:
    """Eigenvalues and eigenfunction coefficients of the factored operator.

    Works on the r x r reduced matrix V^T M U with M = [k(y_i, x_j)] / n;
    raises if that matrix is near-singular or numerically defective.
    """
    n = op.n
    # V^T (K_yx / n) U without materializing K_yx when linear.
    MU = cross_gram_apply(op.kernel, op.y_points, op.x_points, op.U) / n
    Mr = op.V.T @ MU
    if np.linalg.cond(Mr) > cond_limit:
        raise DefectiveOperatorError("reduced matrix is near-singular")
    mu, Vr = np.linalg.eig(Mr)
    if np.linalg.cond(Vr) > cond_limit:
        raise DefectiveOperatorError("reduced matrix is numerically defective")
    # Biorthogonal left eigenvectors: rows of inv(Vr), so u_i^* v_i = 1.
    Ul = np.linalg.inv(Vr).conj().T
    keep = np.abs(mu) >= _DROP_TOL
    mu, Vr, Ul = mu[keep], Vr[:, keep], Ul[:, keep]
    if mu.size == 0:
        raise DefectiveOperatorError("all eigenvalues numerically zero")
    alpha = (op.U @ Vr) / np.sqrt(n)
    beta = (op.V @ Ul) / np.sqrt(n) * (mu / np.abs(mu))[None, :]
    mu, alpha, beta = _sort_spectrum(mu, alpha, beta)
    return EigenSystem(mu=mu, alpha=alpha, beta=beta, dt=op.dt)


def spectral_residuals(op: EstimatedOperator, eigs: EigenSystem) -> np.ndarray:
    """Relative RKHS residuals ||op psi_i - mu_i psi_i|| / ||psi_i||."""
    res = op.apply_coeffs(eigs.alpha) - eigs.alpha * eigs.mu[None, :]
    if op.kernel.is_linear:
        num = np.linalg.norm(op.x_points.T @ res, axis=0)
        den = np.linalg.norm(op.x_points.T @ eigs.alpha, axis=0)
    else:
        K = gram(op.kernel, op.x_points, op.x_points)
        num = np.sqrt(np.abs(np.einsum("ij,ik,kj->j", res.conj(), K, res)))
        den = np.sqrt(
            np.abs(np.einsum("ij,ik,kj->j", eigs.alpha.conj(), K, eigs.alpha))
        )
    return num / np.maximum(den, 1e-300)


def generator_eigenvalues(eigs: EigenSystem) -> np.ndarray:
    """Principal-branch generator eigenvalues Log(mu) / dt.

    Real parts are decay rates in 1/s; imaginary parts are angular
    frequencies, with Im/(2 pi) in Hz. Frequencies above Nyquist fold.
    """
    if np.any(np.abs(eigs.mu) < _DROP_TOL):
        raise ZeroEigenvalueError("zero transfer eigenvalue has no generator log")
    return np.log(eigs.mu.astype(complex)) / eigs.dt


# ---------------------------------------------------------------------------
# Trajectory CSV format: header line "# dt=<seconds>", one row per time step.

def write_trajectory_csv(path, series: np.ndarray, dt: float) -> None:
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    with open(path, "w") as fh:
        fh.write(f"# dt={dt!r}\n")
        for row in series:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_trajectory_csv(path) -> tuple[np.ndarray, float]:
    with open(path) as fh:
        header = fh.readline()
        m = re.match(r"#\s*dt\s*=\s*([0-9eE+.\-]+)\s*$", header)
        if not m:
            raise ParseError(f"{path}: missing '# dt=<seconds>' header")
        try:
            dt = float(m.group(1))
        except ValueError as exc:
            raise ParseError(f"{path}: bad dt value {m.group(1)!r}") from exc
        if not dt > 0:
            raise ParseError(f"{path}: dt must be positive")
        rows = []
        width = None
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            vals = line.split(",")
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ParseError(f"{path}:{ln}: expected {width} columns, got {len(vals)}")
            try:
                rows.append([float(v) for v in vals])
            except ValueError as exc:
                raise ParseError(f"{path}:{ln}: non-numeric value") from exc
    if not rows:
        raise InsufficientDataError(f"{path}: no samples")
    return np.asarray(rows), dt
