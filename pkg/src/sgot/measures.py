"""Spectral measures: discrete distributions over (eigenvalue, eigenspace) atoms.

An estimated operator is summarized as a probability measure whose atoms carry
a generator eigenvalue, an orthonormalized pair of eigenfunction coefficient
blocks, and a mass proportional to multiplicity. Distances between atoms
combine a Euclidean eigenvalue term in the (decay-rate, Hz) plane with a
Grassmann-style term between the spanned rank-one operator subspaces.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import EmptyMeasureError, NumericalError, ParameterError, ParseError
from .estimation import EigenSystem, EstimatedOperator
from .kernels import KernelKind, KernelSpec, gram

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SpectralAtom:
    """One atom: generator eigenvalue, orthonormal coefficient bases, mass."""

    lam: complex  # generator eigenvalue (Re: 1/s decay, Im/2pi: Hz)
    basis_alpha: np.ndarray  # (n, m) complex, orthonormal w.r.t. K_x
    basis_beta: np.ndarray  # (n, m) complex, orthonormal w.r.t. K_y
    multiplicity: int
    mass: float

    @property
    def m(self) -> int:
        return self.multiplicity


@dataclass(frozen=True)
class SpectralMeasure:
    """The discrete spectral distribution of one estimated system."""

    atoms: tuple[SpectralAtom, ...]
    x_points: np.ndarray
    y_points: np.ndarray
    kernel: KernelSpec
    dt: float

    @property
    def masses(self) -> np.ndarray:
        return np.array([a.mass for a in self.atoms])

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([a.lam for a in self.atoms])

    @property
    def transfer_moduli(self) -> np.ndarray:
        """|mu| of each atom's transfer eigenvalue exp(lam * dt)."""
        return np.exp(np.real(self.lambdas) * self.dt)


def _canonical_phase(block: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-modulus entry is real positive."""
    out = block.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        z = out[i, j]
        if np.abs(z) > 0:
            out[:, j] *= np.conj(z) / np.abs(z)
    return out


def _gram_orthonormalize(block: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Orthonormalize columns in the RKHS inner product <f, g> = f* K g."""
    G = block.conj().T @ K.astype(complex) @ block
    G = 0.5 * (G + G.conj().T)
    try:
        L = scipy.linalg.cholesky(G, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError("eigenfunction block is RKHS-degenerate") from exc
    return _canonical_phase(block @ np.linalg.inv(L).conj().T)


def build_measure(
    eigs: EigenSystem, op: EstimatedOperator, group_tol: float = 1e-8
) -> SpectralMeasure:
    """Group eigenvalues into atoms and orthonormalize their bases.

    Transfer eigenvalues within ``group_tol`` (absolute) are merged into one
    atom whose multiplicity is the group size; complex conjugates are distinct
    points and never merged. Masses are multiplicity / total count.
    """
    r = eigs.r
    if r == 0:
        raise EmptyMeasureError("eigensystem has no eigenvalues")
    Kx = gram(op.kernel, op.x_points, op.x_points)
    Ky = gram(op.kernel, op.y_points, op.y_points)
    # Greedy grouping on the modulus-sorted spectrum.
    groups: list[list[int]] = []
    for i in range(r):
        for g in groups:
            if abs(eigs.mu[i] - eigs.mu[g[0]]) <= group_tol:
                g.append(i)
                break
        else:
            groups.append([i])
    atoms = []
    for g in groups:
        mu_bar = np.mean(eigs.mu[g])
        lam = complex(np.log(mu_bar) / eigs.dt)
        alpha = _gram_orthonormalize(eigs.alpha[:, g], Kx)
        beta = _gram_orthonormalize(eigs.beta[:, g], Ky)
        atoms.append(
            SpectralAtom(
                lam=lam,
                basis_alpha=alpha,
                basis_beta=beta,
                multiplicity=len(g),
                mass=len(g) / r,
            )
        )
    return SpectralMeasure(
        atoms=tuple(atoms),
        x_points=op.x_points,
        y_points=op.y_points,
        kernel=op.kernel,
        dt=eigs.dt,
    )


def eigenvalue_distance(lam_a: complex, lam_b: complex, form: str = "cartesian") -> float:
    """Distance between generator eigenvalues.

    "cartesian" (default): Euclidean distance between (decay rate, frequency)
    pairs, i.e. between (Re lam, Im lam / 2 pi) in (1/s, Hz). "polar": plain
    complex chord |lam_a - lam_b|.
    """
    if form == "cartesian":
        return float(
            np.hypot(
                np.real(lam_a) - np.real(lam_b),
                (np.imag(lam_a) - np.imag(lam_b)) / TWO_PI,
            )
        )
    if form == "polar":
        return float(abs(lam_a - lam_b))
    raise ParameterError(f"unknown eigenvalue-distance form {form!r}")


def grassmann_from_inner(A: np.ndarray, B: np.ndarray, m_a: int, m_b: int) -> float:
    """Grassmann term from the RKHS inner-product blocks of two atoms.

    ``A[i, j] = <psi_i^a, psi_j^b>`` and ``B[i, j] = <xi_i^a, xi_j^b>`` with
    orthonormal bases. Each atom spans the subspace of rank-one operators
    E_i = psi_i (x) xi_i; the distance is the Hilbert-Schmidt norm of the
    difference of the orthogonal projectors onto those subspaces,

        d^2 = m_a + m_b - 2 sum_ij |A_ij|^2 |B_ij|^2,

    using <E_i^a, E_j^b> = A_ij conj(B_ij). The squared moduli make the value
    invariant to the arbitrary phases of estimated eigenfunctions.
    """
    t = float(np.sum((np.abs(A) ** 2) * (np.abs(B) ** 2)))
    rad = m_a + m_b - 2.0 * t
    if rad < -1e-8:
        raise NumericalError(f"negative Grassmann radicand {rad}: broken orthonormality")
    return float(np.sqrt(max(rad, 0.0)))


def grassmann_distance(
    a: SpectralAtom, b: SpectralAtom, crossgrams: tuple[np.ndarray, np.ndarray]
) -> float:
    """Projector distance between the rank-one operator subspaces of two atoms.

    ``crossgrams`` are the cross-Gram matrices (M_x, M_y) between the two
    systems' x- and y-representer sets. Identical atoms give exactly zero.
    """
    if a is b or (
        np.array_equal(a.basis_alpha, b.basis_alpha)
        and np.array_equal(a.basis_beta, b.basis_beta)
    ):
        return 0.0
    Mx, My = crossgrams
    A = a.basis_alpha.conj().T @ Mx.astype(complex) @ b.basis_alpha
    B = a.basis_beta.conj().T @ My.astype(complex) @ b.basis_beta
    return grassmann_from_inner(A, B, a.m, b.m)


def feature_blocks(measure: SpectralMeasure) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-atom feature-space basis blocks (linear kernel only).

    Returns (X^T basis_alpha, Y^T basis_beta) per atom, so cross-system inner
    products reduce to d x d contractions instead of n x n Gram products.
    """
    if not measure.kernel.is_linear:
        raise ParameterError("feature blocks exist only for the linear kernel")
    return [
        (measure.x_points.T @ a.basis_alpha, measure.y_points.T @ a.basis_beta)
        for a in measure.atoms
    ]


# ---------------------------------------------------------------------------
# JSON serialization. Complex scalars become [re, im]; complex matrices become
# nested [re, im] leaves. Python floats round-trip exactly through json.

def _cplx(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _cplx_matrix(m: np.ndarray) -> list:
    return [[_cplx(v) for v in row] for row in m]


def _from_cplx_matrix(rows) -> np.ndarray:
    return np.array([[complex(v[0], v[1]) for v in row] for row in rows])


def measure_to_dict(measure: SpectralMeasure) -> dict:
    return {
        "kernel": {
            "kind": measure.kernel.kind.value,
            "lengthscale": measure.kernel.lengthscale,
        },
        "dt": measure.dt,
        "x_points": measure.x_points.tolist(),
        "y_points": measure.y_points.tolist(),
        "atoms": [
            {
                "lambda": _cplx(a.lam),
                "mass": a.mass,
                "multiplicity": a.multiplicity,
                "alpha": _cplx_matrix(a.basis_alpha),
                "beta": _cplx_matrix(a.basis_beta),
            }
            for a in measure.atoms
        ],
    }


def measure_from_dict(d: dict) -> SpectralMeasure:
    try:
        kernel = KernelSpec(KernelKind(d["kernel"]["kind"]), d["kernel"]["lengthscale"])
        atoms = tuple(
            SpectralAtom(
                lam=complex(a["lambda"][0], a["lambda"][1]),
                basis_alpha=_from_cplx_matrix(a["alpha"]),
                basis_beta=_from_cplx_matrix(a["beta"]),
                multiplicity=int(a["multiplicity"]),
                mass=float(a["mass"]),
            )
            for a in d["atoms"]
        )
        return SpectralMeasure(
            atoms=atoms,
            x_points=np.asarray(d["x_points"], dtype=float),
            y_points=np.asarray(d["y_points"], dtype=float),
            kernel=kernel,
            dt=float(d["dt"]),
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed spectral-measure record: {exc}") from exc


def save_measure(measure: SpectralMeasure, path) -> None:
    with open(path, "w") as fh:
        json.dump(measure_to_dict(measure), fh)


def load_measure(path) -> SpectralMeasure:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    return measure_from_dict(d)
