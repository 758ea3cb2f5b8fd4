import numpy as np
import pytest

from sgot.errors import (
    InsufficientDataError,
    ParameterError,
    ParseError,
    RankError,
    ZeroEigenvalueError,
)
from sgot.estimation import (
    _window_projection,
    eigendecompose,
    fit_krr,
    fit_rrr,
    generator_eigenvalues,
    read_trajectory_csv,
    spectral_residuals,
    windowed_pairs,
    write_trajectory_csv,
)
from sgot.kernels import linear_kernel, rbf_kernel


def _linear_system_data(A, n=400, seed=0, x0=None):
    """Noiseless trajectory snapshots of x_{t+1} = A x_t from random starts."""
    rng = np.random.default_rng(seed)
    d = A.shape[0]
    X = rng.standard_normal((n, d))
    Y = X @ A.T
    from sgot.estimation import TrajectoryDataset

    return TrajectoryDataset(x=X, y=Y, dt=0.1)


def _rotation(theta, decay=1.0):
    c, s = np.cos(theta), np.sin(theta)
    return decay * np.array([[c, -s], [s, c]])


class TestWindowedPairs:
    def test_shapes_and_lag(self):
        s = np.arange(10.0)
        data = windowed_pairs(s, 3, 0.5)
        assert data.x.shape == (7, 3)
        assert np.allclose(data.x[0], [0, 1, 2])
        assert np.allclose(data.y[0], [1, 2, 3])
        assert data.dt == 0.5

    def test_multivariate_windows(self):
        s = np.arange(16.0).reshape(8, 2)
        data = windowed_pairs(s, 2, 1.0)
        assert data.x.shape == (6, 4)
        assert np.allclose(data.x[0], [0, 1, 2, 3])

    def test_too_short_raises(self):
        with pytest.raises(InsufficientDataError):
            windowed_pairs(np.arange(3.0), 3, 1.0)

    def test_feature_projection_orthonormal(self):
        Q = _window_projection(50, 10)
        # columns orthogonal, norm sqrt(F/L) each
        G = Q.T @ Q
        assert np.allclose(G, np.eye(10) * (10 / 50), atol=1e-12)

    def test_feature_size_exceeding_window_raises(self):
        with pytest.raises(ParameterError):
            windowed_pairs(np.arange(30.0), 10, 1.0, feature_size=11)

    def test_projection_rate_invariance(self):
        # same smooth signal at two rates -> nearly equal coefficient vectors
        f = lambda t: np.sin(2 * np.pi * 1.3 * t) + 0.5 * np.cos(2 * np.pi * 0.4 * t)
        w1, w2 = 100, 300
        t1 = np.arange(w1) / w1
        t2 = np.arange(w2) / w2
        c1 = _window_projection(w1, 20).T @ f(t1) / np.sqrt(20 / w1)
        c2 = _window_projection(w2, 20).T @ f(t2) / np.sqrt(20 / w2)
        # unit-normalized coefficients agree across rates
        assert np.linalg.norm(c1 / np.sqrt(w1) - c2 / np.sqrt(w2)) < 2e-2

    def test_noise_shift_recorded_only_with_features(self):
        s = np.arange(40.0)
        assert windowed_pairs(s, 5, 1.0).noise_shift is None
        data = windowed_pairs(s, 5, 1.0, feature_size=3)
        assert data.noise_shift is not None
        assert data.noise_shift.shape == (3, 3)


class TestFitRRR:
    def test_eigenvalues_match_linear_oracle(self):
        thetas = [0.3, 1.1]
        A = np.zeros((4, 4))
        A[:2, :2] = _rotation(thetas[0], 0.97)
        A[2:, 2:] = _rotation(thetas[1], 0.9)
        data = _linear_system_data(A)
        op = fit_rrr(data, linear_kernel(), rank=4, tikhonov=1e-12)
        mu = np.sort_complex(eigendecompose(op).mu)
        true = np.sort_complex(np.linalg.eigvals(A))
        assert np.allclose(mu, true, atol=1e-6)

    def test_feature_and_gram_routes_agree(self):
        A = _rotation(0.7, 0.95)
        data = _linear_system_data(A, n=200, seed=1)
        op_f = fit_rrr(data, linear_kernel(), rank=2, tikhonov=1e-8, method="feature")
        op_g = fit_rrr(data, linear_kernel(), rank=2, tikhonov=1e-8, method="gram")
        mu_f = np.sort_complex(eigendecompose(op_f).mu)
        mu_g = np.sort_complex(eigendecompose(op_g).mu)
        assert np.allclose(mu_f, mu_g, atol=1e-8)

    def test_factored_matches_explicit(self):
        A = _rotation(0.5, 0.9)
        data = _linear_system_data(A, n=150, seed=2)
        op = fit_rrr(data, linear_kernel(), rank=2, tikhonov=1e-10)
        E = op.explicit_matrix()
        E_fact = (op.x_points.T @ op.U) @ (op.V.T @ op.y_points) / op.n
        assert np.allclose(E, E_fact, atol=1e-8)
        # full-rank estimate recovers A^T (operator acts on observables)
        assert np.allclose(E, A.T, atol=1e-6)

    def test_krr_full_rank_recovery(self):
        A = _rotation(0.9, 0.85)
        data = _linear_system_data(A, n=100, seed=3)
        op = fit_krr(data, linear_kernel(), tikhonov=0.0)
        assert np.allclose(op.explicit_matrix(), A.T, atol=1e-8)

    def test_rank_validation(self):
        data = _linear_system_data(np.eye(2), n=10)
        with pytest.raises(RankError):
            fit_rrr(data, linear_kernel(), rank=0, tikhonov=1e-8)
        with pytest.raises(RankError):
            fit_rrr(data, linear_kernel(), rank=11, tikhonov=1e-8)
        with pytest.raises(ParameterError):
            fit_rrr(data, linear_kernel(), rank=2, tikhonov=-1.0)
        with pytest.raises(ParameterError):
            fit_rrr(data, rbf_kernel(1.0), rank=2, tikhonov=0.0)

    def test_rbf_gram_route_runs(self):
        A = _rotation(0.4, 0.9)
        data = _linear_system_data(A, n=120, seed=4)
        op = fit_rrr(data, rbf_kernel(2.0), rank=3, tikhonov=1e-6)
        eigs = eigendecompose(op)
        assert eigs.r <= 3
        assert np.all(np.isfinite(eigs.mu))

    def test_characteristic_polynomial_oracle(self):
        # rank-3 system: eigenvalues solve det(mu I - A) = 0; check the
        # estimated spectrum satisfies the char poly of the true matrix.
        rng = np.random.default_rng(5)
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        A = Q @ np.diag([0.95, 0.8, -0.6]) @ Q.T
        data = _linear_system_data(A, n=300, seed=5)
        op = fit_rrr(data, linear_kernel(), rank=3, tikhonov=1e-12)
        coeffs = np.poly(A)
        for mu in eigendecompose(op).mu:
            assert abs(np.polyval(coeffs, mu)) < 1e-8

    def test_noise_shift_debias_reduces_cross_bias(self):
        # windowed noisy constant signal: Cxy of pure noise should shrink
        # toward zero once the shift-correlated term is subtracted.
        rng = np.random.default_rng(6)
        s = 1e-1 * rng.standard_normal(3000)
        data = windowed_pairs(s, 60, 0.01, feature_size=20)
        X, Y, n = data.x, data.y, data.n
        Cxy = X.T @ Y / n
        sigma2 = float(np.median(np.linalg.eigvalsh(X.T @ X / n)))
        resid = Cxy - sigma2 * data.noise_shift
        assert np.linalg.norm(resid) < 0.5 * np.linalg.norm(Cxy)


class TestEigenDecomposition:
    def test_conjugate_symmetry_and_sorting(self):
        A = _rotation(0.8, 0.93)
        data = _linear_system_data(A, n=100, seed=7)
        eigs = eigendecompose(fit_rrr(data, linear_kernel(), 2, 1e-12))
        assert np.isclose(eigs.mu[0], np.conj(eigs.mu[1]))
        assert eigs.mu[0].imag > 0  # positive-imag member first

    def test_residuals_near_zero_for_exact_system(self):
        A = _rotation(0.6, 0.9)
        data = _linear_system_data(A, n=100, seed=8)
        op = fit_rrr(data, linear_kernel(), 2, 1e-12)
        res = spectral_residuals(op, eigendecompose(op))
        assert np.all(res < 1e-6)

    def test_generator_round_trip(self):
        A = _rotation(0.25, 0.9)
        data = _linear_system_data(A, n=100, seed=9)
        eigs = eigendecompose(fit_rrr(data, linear_kernel(), 2, 1e-12))
        lam = generator_eigenvalues(eigs)
        assert np.allclose(np.exp(lam * eigs.dt), eigs.mu, atol=1e-10)
        # decay rate: |mu| = 0.9 per dt = 0.1 s
        assert np.allclose(lam.real, np.log(0.9) / 0.1, atol=1e-6)

    def test_zero_eigenvalue_rejected(self):
        from sgot.estimation import EigenSystem

        eigs = EigenSystem(
            mu=np.array([1e-15 + 0j]),
            alpha=np.ones((2, 1), complex),
            beta=np.ones((2, 1), complex),
            dt=0.1,
        )
        with pytest.raises(ZeroEigenvalueError):
            generator_eigenvalues(eigs)


class TestTrajectoryCSV:
    def test_round_trip(self, tmp_path):
        series = np.random.default_rng(0).standard_normal((17, 2))
        path = tmp_path / "t.csv"
        write_trajectory_csv(path, series, 0.02)
        back, dt = read_trajectory_csv(path)
        assert dt == 0.02
        assert np.array_equal(back, series)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0\n2.0\n")
        with pytest.raises(ParseError):
            read_trajectory_csv(path)

    def test_bad_dt(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# dt=-0.5\n1.0\n")
        with pytest.raises(ParseError):
            read_trajectory_csv(path)

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# dt=0.1\n1.0,2.0\n3.0\n")
        with pytest.raises(ParseError):
            read_trajectory_csv(path)

    def test_empty_body(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# dt=0.1\n")
        with pytest.raises(InsufficientDataError):
            read_trajectory_csv(path)
