"""System-level distances: the spectral-Grassmann OT metric and baselines.

All OT-based metrics compare spectral measures; the Hilbert-Schmidt and
operator-norm baselines compare explicit linear-kernel matrices; the Martin
distance compares transfer-operator pole sets through truncated cepstra.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import IllDefinedError, IncompatibleSystemsError, ParameterError
from .estimation import EigenSystem, EstimatedOperator
from .kernels import gram
from .measures import (
    SpectralMeasure,
    eigenvalue_distance,
    feature_blocks,
    grassmann_distance,
    grassmann_from_inner,
)
from .transport import wasserstein


class MetricKind(Enum):
    SGOT = "sgot"
    SOT = "sot"
    GOT = "got"
    HILBERT_SCHMIDT = "hs"
    OPERATOR_NORM = "op"
    MARTIN = "martin"


@dataclass(frozen=True)
class MetricConfig:
    """Metric selection and hyperparameters.

    ``eta`` trades the eigenvalue term against the Grassmann term in the
    transport ground cost; ``p`` is the Wasserstein order. ``eig_form``
    selects the eigenvalue-distance convention and ``sot_units`` whether the
    eigenvalues-only baseline works in generator or transfer units.
    """

    metric_kind: MetricKind = MetricKind.SGOT
    eta: float = 0.5
    p: int = 1
    martin_truncation: int = 100
    eig_form: str = "cartesian"
    sot_units: str = "generator"

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ParameterError(f"eta must lie strictly in (0, 1), got {self.eta}")
        if self.p < 1:
            raise ParameterError(f"Wasserstein order must be >= 1, got {self.p}")
        if self.martin_truncation < 1:
            raise ParameterError("martin truncation must be >= 1")


def _check_compatible(P: SpectralMeasure, Q: SpectralMeasure) -> None:
    if P.kernel != Q.kernel:
        raise IncompatibleSystemsError("measures use different kernels")
    if P.x_points.shape[1] != Q.x_points.shape[1]:
        raise IncompatibleSystemsError(
            f"representer dimensions differ: {P.x_points.shape[1]} vs {Q.x_points.shape[1]}"
        )


def grassmann_matrix(P: SpectralMeasure, Q: SpectralMeasure) -> np.ndarray:
    """All pairwise Grassmann terms between the atoms of two measures.

    The linear kernel contracts through d-dimensional feature blocks; other
    kernels go through the full cross-Gram matrices.
    """
    _check_compatible(P, Q)
    G = np.empty((len(P.atoms), len(Q.atoms)))
    if P.kernel.is_linear:
        # Contract through d-dimensional feature blocks instead of n x n
        # cross-Gram matrices. Bitwise-identical atoms short-circuit to an
        # exact zero so self-distances are free of rounding noise.
        FP, FQ = feature_blocks(P), feature_blocks(Q)
        for i, (Fa, Fb) in enumerate(FP):
            a = P.atoms[i]
            for j, (Ga, Gb) in enumerate(FQ):
                b = Q.atoms[j]
                if a is b or (
                    np.array_equal(a.basis_alpha, b.basis_alpha)
                    and np.array_equal(a.basis_beta, b.basis_beta)
                ):
                    G[i, j] = 0.0
                    continue
                G[i, j] = grassmann_from_inner(
                    Fa.conj().T @ Ga, Fb.conj().T @ Gb, a.m, b.m
                )
    else:
        Mx = gram(P.kernel, P.x_points, Q.x_points)
        My = gram(P.kernel, P.y_points, Q.y_points)
        for i, a in enumerate(P.atoms):
            for j, b in enumerate(Q.atoms):
                G[i, j] = grassmann_distance(a, b, (Mx, My))
    return G


def cost_matrix(P: SpectralMeasure, Q: SpectralMeasure, cfg: MetricConfig) -> np.ndarray:
    """Ground-cost matrix eta * eigenvalue term + (1 - eta) * Grassmann term."""
    G = grassmann_matrix(P, Q)
    E = np.array(
        [
            [eigenvalue_distance(a.lam, b.lam, cfg.eig_form) for b in Q.atoms]
            for a in P.atoms
        ]
    )
    return cfg.eta * E + (1.0 - cfg.eta) * G


def sgot(P: SpectralMeasure, Q: SpectralMeasure, cfg: MetricConfig) -> float:
    """Wasserstein distance between spectral measures under the mixed cost."""
    C = cost_matrix(P, Q, cfg)
    return wasserstein(C, P.masses, Q.masses, cfg.p)


def sot(P: SpectralMeasure, Q: SpectralMeasure, cfg: MetricConfig) -> float:
    """Eigenvalues-only transport baseline with uniform atom masses."""
    if cfg.sot_units == "generator":
        la, lb = P.lambdas, Q.lambdas
    elif cfg.sot_units == "transfer":
        la = np.exp(P.lambdas * P.dt)
        lb = np.exp(Q.lambdas * Q.dt)
    else:
        raise ParameterError(f"unknown sot_units {cfg.sot_units!r}")
    C = np.array(
        [[eigenvalue_distance(x, y, cfg.eig_form) for y in lb] for x in la]
    )
    a = np.full(len(la), 1.0 / len(la))
    b = np.full(len(lb), 1.0 / len(lb))
    return wasserstein(C, a, b, cfg.p)


def got(P: SpectralMeasure, Q: SpectralMeasure, cfg: MetricConfig) -> float:
    """Eigenspaces-only transport baseline, masses proportional to |mu|."""
    C = grassmann_matrix(P, Q)

    def moduli_masses(M: SpectralMeasure) -> np.ndarray:
        w = M.transfer_moduli * np.array([a.multiplicity for a in M.atoms])
        return w / w.sum()

    return wasserstein(C, moduli_masses(P), moduli_masses(Q), cfg.p)


def hilbert_schmidt_distance(opA: EstimatedOperator, opB: EstimatedOperator) -> float:
    """Frobenius distance between explicit linear-kernel operator matrices."""
    EA, EB = _explicit_pair(opA, opB)
    return float(np.linalg.norm(EA - EB))


def operator_norm_distance(opA: EstimatedOperator, opB: EstimatedOperator) -> float:
    """Spectral-norm distance between explicit linear-kernel matrices."""
    EA, EB = _explicit_pair(opA, opB)
    return float(np.linalg.norm(EA - EB, ord=2))


def _explicit_pair(opA: EstimatedOperator, opB: EstimatedOperator):
    if not (opA.kernel.is_linear and opB.kernel.is_linear):
        raise IncompatibleSystemsError("norm baselines require the linear kernel")
    EA, EB = opA.explicit_matrix(), opB.explicit_matrix()
    if EA.shape != EB.shape:
        raise IncompatibleSystemsError(
            f"feature dimensions differ: {EA.shape} vs {EB.shape}"
        )
    return EA, EB


def _poles(obj) -> np.ndarray:
    if isinstance(obj, EigenSystem):
        return obj.mu
    if isinstance(obj, SpectralMeasure):
        return np.repeat(
            np.exp(obj.lambdas * obj.dt), [a.multiplicity for a in obj.atoms]
        )
    raise ParameterError(f"cannot extract poles from {type(obj).__name__}")


def martin_distance(eigsA, eigsB, N: int = 100) -> float:
    """Truncated cepstral distance between stable pole sets.

    With poles p_i strictly inside the unit disk, cepstra c_n = sum_i p_i^n/n
    and d^2 = sum_{n=1..N} n |c_n - c'_n|^2.
    """
    pa, pb = _poles(eigsA), _poles(eigsB)
    if np.any(np.abs(pa) >= 1.0) or np.any(np.abs(pb) >= 1.0):
        raise IllDefinedError("Martin distance needs all poles strictly inside the unit disk")
    d2 = 0.0
    for n in range(1, N + 1):
        cn = np.sum(pa**n) / n
        cpn = np.sum(pb**n) / n
        d2 += n * abs(cn - cpn) ** 2
    return float(np.sqrt(d2))


_PAIR_FUNCS = {
    MetricKind.SGOT: sgot,
    MetricKind.SOT: sot,
    MetricKind.GOT: got,
}


def pairwise_distance(sysA, sysB, cfg: MetricConfig) -> float:
    """Distance between two systems under the configured metric kind."""
    kind = cfg.metric_kind
    if kind in _PAIR_FUNCS:
        return _PAIR_FUNCS[kind](sysA, sysB, cfg)
    if kind is MetricKind.HILBERT_SCHMIDT:
        return hilbert_schmidt_distance(sysA, sysB)
    if kind is MetricKind.OPERATOR_NORM:
        return operator_norm_distance(sysA, sysB)
    if kind is MetricKind.MARTIN:
        return martin_distance(sysA, sysB, cfg.martin_truncation)
    raise ParameterError(f"unknown metric kind {kind}")


def distance_matrix(systems: list, cfg: MetricConfig) -> np.ndarray:
    """Symmetric pairwise distance matrix with zero diagonal."""
    k = len(systems)
    D = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            D[i, j] = D[j, i] = pairwise_distance(systems[i], systems[j], cfg)
    return D


def write_distance_csv(path, D: np.ndarray, ids: list[str]) -> None:
    with open(path, "w") as fh:
        fh.write("," + ",".join(ids) + "\n")
        for name, row in zip(ids, D):
            fh.write(name + "," + ",".join(repr(float(v)) for v in row) + "\n")


def config_for_metric(name: str, **overrides) -> MetricConfig:
    """Build a MetricConfig from a CLI-style metric name."""
    try:
        kind = MetricKind(name)
    except ValueError as exc:
        raise ParameterError(f"unknown metric {name!r}") from exc
    return replace(MetricConfig(metric_kind=kind), **overrides)
