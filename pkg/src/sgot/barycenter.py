"""Weighted Fréchet barycenters of systems under the spectral-Grassmann metric.

The barycenter is sought in a parametric family of rank-r operators
T_theta: h -> sum_j mu_j <kappa_x alpha_j, h> kappa_x beta_j determined by
theta = (lambda, alpha, beta, x): r generator eigenvalues, coefficient blocks
over n shared control points x, subject to the spectral-decomposition
constraints alpha* K beta = I and beta_j* K beta_j = 1. The squared-distance
objective (Wasserstein order 2) is minimized by inexact cyclic coordinate
descent: exact transport plans, then a few first-order steps per coordinate
block with closed-form constraint projections after every step.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from .errors import (
    DegenerateDirectionError,
    ParameterError,
    ProjectionError,
    StagnationWarning,
)
from .kernels import KernelSpec, gram
from .measures import (
    SpectralAtom,
    SpectralMeasure,
    _gram_orthonormalize,
    eigenvalue_distance,
)
from .metrics import MetricConfig, cost_matrix
from .transport import TransportPlan, solve_ot

TWO_PI = 2.0 * np.pi
_GRAD_EPS = 1e-9  # smoothing of square roots inside gradients only


@dataclass(frozen=True)
class BarycenterParams:
    """Parameters theta = (lambda, alpha, beta, x) of the barycenter operator."""

    lam: np.ndarray  # (r,) complex generator eigenvalues
    alpha: np.ndarray  # (n, r) complex left coefficients
    beta: np.ndarray  # (n, r) complex right coefficients
    x: np.ndarray  # (n, d) control points
    kernel: KernelSpec
    dt: float

    @property
    def r(self) -> int:
        return len(self.lam)

    @property
    def n(self) -> int:
        return len(self.x)

    def gram(self) -> np.ndarray:
        return gram(self.kernel, self.x, self.x)

    def constraint_residuals(self) -> tuple[float, float]:
        """(||alpha* K beta - I||_F, max_j |beta_j* K beta_j - 1|)."""
        K = self.gram().astype(complex)
        aff = self.alpha.conj().T @ K @ self.beta - np.eye(self.r)
        norms = np.real(np.einsum("ij,ik,kj->j", self.beta.conj(), K, self.beta))
        return float(np.linalg.norm(aff)), float(np.max(np.abs(norms - 1.0)))


@dataclass(frozen=True)
class BarycenterProblem:
    """Inputs, weights and optimizer settings of the Fréchet mean problem.

    The transport order is fixed at p = 2: the objective is the weighted sum
    of squared distances. ``objective`` selects the ground geometry: "sgot"
    (default) or "hs", a comparison mode replacing the transport objective
    with the Hilbert-Schmidt distance to explicit operator matrices
    (``hs_targets``) while keeping the same constraint projections.
    """

    inputs: tuple[SpectralMeasure, ...]
    weights: np.ndarray
    rank: int
    lr: float = 1e-2
    max_cycles: int = 200
    inner_steps: int = 10
    stop_tol: float = 1e-6
    optimize_control_points: bool = False
    n_control: int | None = None
    metric: MetricConfig = field(default_factory=MetricConfig)
    optimizer: str = "gd"
    objective_kind: str = "sgot"
    hs_targets: tuple | None = None

    def __post_init__(self):
        if len(self.inputs) == 0:
            raise ParameterError("need at least one input measure")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.inputs),) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ParameterError("weights must be a probability vector over inputs")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if self.rank < 1:
            raise ParameterError("rank must be >= 1")
        if self.lr <= 0 or self.max_cycles < 1 or self.inner_steps < 1:
            raise ParameterError("optimizer settings must be positive")
        kernels = {m.kernel for m in self.inputs}
        if len(kernels) > 1:
            raise ParameterError("all inputs must share one kernel")
        if self.optimizer not in ("gd", "adam"):
            raise ParameterError(f"unknown optimizer {self.optimizer!r}")
        if self.objective_kind not in ("sgot", "hs"):
            raise ParameterError(f"unknown objective {self.objective_kind!r}")
        if self.objective_kind == "hs" and self.hs_targets is None:
            raise ParameterError("hs objective needs explicit target matrices")

    @property
    def kernel(self) -> KernelSpec:
        return self.inputs[0].kernel


def _rank_one_units(measure: SpectralMeasure):
    """Split the atoms of a measure into (lambda, psi-column, xi-column) units."""
    units = []
    for a in measure.atoms:
        for j in range(a.m):
            units.append((a.lam, a.basis_alpha[:, j], a.basis_beta[:, j]))
    return units


def params_to_measure(params: BarycenterParams) -> SpectralMeasure:
    """View the parametric operator as a spectral measure with rank-1 atoms.

    By the biorthogonality constraint, kappa_x beta_j are the right
    eigenfunctions of T_theta and kappa_x alpha_j the left ones, so beta
    fills the atom slot that estimated measures populate with right
    eigenfunctions and alpha the left slot.
    """
    K = params.gram()
    atoms = []
    for j in range(params.r):
        atoms.append(
            SpectralAtom(
                lam=complex(params.lam[j]),
                basis_alpha=_gram_orthonormalize(params.beta[:, j : j + 1], K),
                basis_beta=_gram_orthonormalize(params.alpha[:, j : j + 1], K),
                multiplicity=1,
                mass=1.0 / params.r,
            )
        )
    return SpectralMeasure(
        atoms=tuple(atoms),
        x_points=params.x,
        y_points=params.x,
        kernel=params.kernel,
        dt=params.dt,
    )


def project_alpha(alpha_hat: np.ndarray, beta: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Closest (RKHS metric) left coefficients satisfying alpha* K beta = I.

    The affine projection alpha_hat - beta ((alpha_hat* K beta - I)(beta* K
    beta)^{-1})* solves the equality-constrained least-squares problem exactly
    (strong duality; see the KKT stationarity of the Lagrangian).
    """
    Kc = K.astype(complex)
    G = beta.conj().T @ Kc @ beta
    if np.linalg.cond(G) > 1e12:
        raise ProjectionError("beta* K beta is numerically singular")
    defect = alpha_hat.conj().T @ Kc @ beta - np.eye(beta.shape[1])
    return alpha_hat - beta @ np.linalg.solve(G.conj().T, defect.conj().T)


def normalize_beta(beta_hat: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Columnwise projection onto the RKHS unit sphere beta_j* K beta_j = 1."""
    norms2 = np.real(
        np.einsum("ij,ik,kj->j", beta_hat.conj(), K.astype(complex), beta_hat)
    )
    if np.any(norms2 <= 1e-14):
        raise DegenerateDirectionError("a right eigenfunction collapsed to zero norm")
    return beta_hat / np.sqrt(norms2)[None, :]


def init_barycenter(problem: BarycenterProblem, seed: int = 0) -> BarycenterParams:
    """Average-of-inputs initialization.

    Control points are pooled from the inputs' representers (subsampled to
    ``n_control``). Each input's rank-1 spectral units are matched to the
    units of the largest input by minimum-cost eigenvalue assignment, then
    eigenfunctions are weight-averaged over the matches and re-projected onto
    the constraint set.
    """
    units_per_input = [_rank_one_units(m) for m in problem.inputs]
    r = problem.rank
    if r > min(len(u) for u in units_per_input):
        raise ParameterError(
            f"rank {r} exceeds the atom count of some input"
        )
    # Template slots: the spectrally richest input, first r units
    # (modulus-sorted by construction); ties broken by input order.
    template = max(range(len(problem.inputs)), key=lambda i: len(units_per_input[i]))
    slots = units_per_input[template][:r]

    rng = np.random.Generator(np.random.Philox(seed))
    pooled = np.concatenate([m.x_points for m in problem.inputs], axis=0)
    n = len(pooled) if problem.n_control is None else min(problem.n_control, len(pooled))
    x = pooled[rng.choice(len(pooled), size=n, replace=False)]
    K = gram(problem.kernel, x, x)
    Kinv = np.linalg.pinv(K, hermitian=True)

    # beta hosts the averaged right eigenfunctions (inputs' x-side bases),
    # alpha the averaged left ones (inputs' y-side bases).
    lam = np.zeros(r, dtype=complex)
    va = np.zeros((n, r), dtype=complex)
    vb = np.zeros((n, r), dtype=complex)
    for i, measure in enumerate(problem.inputs):
        w = problem.weights[i]
        Mx = gram(problem.kernel, x, measure.x_points).astype(complex)
        My = gram(problem.kernel, x, measure.y_points).astype(complex)
        # Minimum-total-cost matching of this input's units to the template
        # slots under the eigenvalue distance.
        D = np.array(
            [
                [
                    eigenvalue_distance(lam_t, u[0], problem.metric.eig_form)
                    for u in units_per_input[i]
                ]
                for lam_t, _, _ in slots
            ]
        )
        rows, cols = scipy.optimize.linear_sum_assignment(D)
        for j, k in zip(rows, cols):
            lam_u, a_u, b_u = units_per_input[i][k]
            lam[j] += w * lam_u
            vb[:, j] += w * (Mx @ a_u)
            va[:, j] += w * (My @ b_u)
    beta = normalize_beta(Kinv @ vb, K)
    alpha = Kinv @ va
    # Rescale each left function onto its biorthogonal dual before the affine
    # projection, so genuinely biorthogonal inputs are reproduced exactly.
    diag = np.einsum("ij,ik,kj->j", alpha.conj(), K.astype(complex), beta)
    safe = np.abs(diag) > 1e-12
    alpha[:, safe] = alpha[:, safe] / np.conj(diag[safe])[None, :]
    alpha = project_alpha(alpha, beta, K)
    dt = float(np.dot(problem.weights, [m.dt for m in problem.inputs]))
    return BarycenterParams(
        lam=lam, alpha=alpha, beta=beta, x=x, kernel=problem.kernel, dt=dt
    )


# ---------------------------------------------------------------------------
# Objective. The exact value reuses the metric-module cost matrices; gradient
# computation goes through an automatic-differentiation twin with smoothed
# square roots.

def _squared_costs(params: BarycenterParams, problem: BarycenterProblem):
    """Squared ground-cost matrix against every input (exact, unsmoothed)."""
    mu = params_to_measure(params)
    return [cost_matrix(mu, m, problem.metric) ** 2 for m in problem.inputs]


def update_plans(
    params: BarycenterParams, problem: BarycenterProblem
) -> list[TransportPlan]:
    """Exact optimal transport plans between the barycenter and each input."""
    mu = params_to_measure(params)
    plans = []
    for C, m in zip(_squared_costs(params, problem), problem.inputs):
        plan, _ = solve_ot(C, mu.masses, m.masses)
        plans.append(plan)
    return plans


def objective(
    params: BarycenterParams,
    plans: list[TransportPlan],
    problem: BarycenterProblem,
) -> float:
    """Weighted sum of <C_i(theta), P_i> with fixed transport plans."""
    if problem.objective_kind == "hs":
        return _hs_objective(params, problem)
    total = 0.0
    for w, C, plan in zip(problem.weights, _squared_costs(params, problem), plans):
        total += w * plan.cost(C)
    return float(total)


def _hs_objective(params: BarycenterParams, problem: BarycenterProblem) -> float:
    E = _explicit_parametric(params)
    return float(
        sum(
            w * np.linalg.norm(E - T) ** 2
            for w, T in zip(problem.weights, problem.hs_targets)
        )
    )


def _explicit_parametric(params: BarycenterParams) -> np.ndarray:
    """Explicit feature-space matrix of T_theta (linear kernel only)."""
    if not params.kernel.is_linear:
        raise ParameterError("explicit matrices exist only for the linear kernel")
    mu = np.exp(params.lam * params.dt)
    Pa = params.x.T.astype(complex) @ params.alpha  # (d, r)
    Pb = params.x.T.astype(complex) @ params.beta
    return (Pb * mu[None, :]) @ Pa.conj().T


# ---------------------------------------------------------------------------
# Automatic-differentiation objective twin (torch, imported lazily).

def _torch():
    import torch

    return torch


def _torch_constants(problem: BarycenterProblem, device=None):
    """Per-input constants of the autodiff objective."""
    torch = _torch()
    consts = []
    for m in problem.inputs:
        atoms = []
        for a in m.atoms:
            if m.kernel.is_linear:
                # d-dimensional feature blocks: cross inner products reduce
                # to contractions with the control-point features.
                Fa = torch.tensor(m.x_points.T @ a.basis_alpha)
                Fb = torch.tensor(m.y_points.T @ a.basis_beta)
            else:
                Fa = torch.tensor(a.basis_alpha)
                Fb = torch.tensor(a.basis_beta)
            atoms.append((a.lam, a.m, Fa, Fb))
        consts.append(
            {
                "atoms": atoms,
                "x_points": torch.tensor(m.x_points),
                "y_points": torch.tensor(m.y_points),
            }
        )
    return consts


def _torch_gram(torch, kernel: KernelSpec, a, b):
    if kernel.is_linear:
        return a @ b.T
    d2 = torch.cdist(a, b) ** 2
    return torch.exp(-d2 / (2.0 * kernel.lengthscale**2))


def _torch_objective(torch, tensors, consts, plans, problem: BarycenterProblem, dt: float):
    """Smoothed objective on torch tensors; mirrors `objective` up to eps."""
    lam, alpha, beta, x = tensors["lam"], tensors["alpha"], tensors["beta"], tensors["x"]
    eps2 = _GRAD_EPS**2
    cfg = problem.metric
    if problem.objective_kind == "hs":
        mu = torch.exp(lam * dt)
        Pa = x.to(alpha.dtype).T @ alpha
        Pb = x.to(beta.dtype).T @ beta
        E = (Pb * mu[None, :]) @ Pa.conj().T
        total = torch.zeros((), dtype=torch.double)
        for w, T in zip(problem.weights, problem.hs_targets):
            Tt = torch.tensor(np.asarray(T, dtype=complex))
            total = total + w * torch.sum(torch.abs(E - Tt) ** 2)
        return total

    K = _torch_gram(torch, problem.kernel, x, x).to(alpha.dtype)
    na2 = torch.real(torch.einsum("ij,ik,kj->j", alpha.conj(), K, alpha))
    nb2 = torch.real(torch.einsum("ij,ik,kj->j", beta.conj(), K, beta))
    total = torch.zeros((), dtype=torch.double)
    for w, const, plan in zip(problem.weights, consts, plans):
        if w == 0.0:
            continue
        if problem.kernel.is_linear:
            Ga = x.to(alpha.dtype).T @ alpha  # (d, r) barycenter features
            Gb = x.to(beta.dtype).T @ beta
        else:
            Mx = _torch_gram(torch, problem.kernel, x, const["x_points"])
            My = _torch_gram(torch, problem.kernel, x, const["y_points"])
        cols = []
        for lam_b, m_b, Fa, Fb in const["atoms"]:
            # beta pairs with the inputs' x-side (right) bases, alpha with
            # the y-side (left) ones; see params_to_measure.
            if problem.kernel.is_linear:
                A = Gb.conj().T @ Fa  # (r, m)
                B = Ga.conj().T @ Fb
            else:
                A = beta.conj().T @ Mx.to(beta.dtype) @ Fa
                B = alpha.conj().T @ My.to(alpha.dtype) @ Fb
            t = torch.sum(
                (torch.abs(A) ** 2 / nb2[:, None]) * (torch.abs(B) ** 2 / na2[:, None]),
                dim=1,
            )
            gr = torch.sqrt(torch.clamp(1.0 + m_b - 2.0 * t, min=0.0) + eps2)
            if cfg.eig_form == "cartesian":
                ev = torch.sqrt(
                    (torch.real(lam) - lam_b.real) ** 2
                    + ((torch.imag(lam) - lam_b.imag) / TWO_PI) ** 2
                    + eps2
                )
            else:
                ev = torch.sqrt(torch.abs(lam - lam_b) ** 2 + eps2)
            cols.append(cfg.eta * ev + (1.0 - cfg.eta) * gr)
        C = torch.stack(cols, dim=1) ** 2  # (r, n_atoms_i)
        acc = torch.zeros((), dtype=torch.double)
        for i, j in np.argwhere(plan.entries > 0):
            acc = acc + plan.entries[i, j] * C[i, j]
        total = total + w * acc
    return total


_COORDS = ("lam", "alpha", "beta", "x")


def _descend(
    params: BarycenterParams,
    plans: list[TransportPlan],
    problem: BarycenterProblem,
    coord: str,
    consts=None,
) -> BarycenterParams:
    """Run `inner_steps` projected first-order steps on one coordinate block."""
    torch = _torch()
    if coord not in _COORDS:
        raise ParameterError(f"unknown coordinate block {coord!r}")
    if consts is None:
        consts = _torch_constants(problem)
    K0 = params.gram()
    if coord == "alpha":
        # Start from a feasible point: earlier updates may have moved beta.
        params = replace(params, alpha=project_alpha(params.alpha, params.beta, K0))

    def evaluate(fields: dict) -> float:
        tensors = {k: torch.tensor(v) for k, v in fields.items()}
        with torch.no_grad():
            return float(
                _torch_objective(torch, tensors, consts, plans, problem, params.dt)
            )

    def feasible(fields: dict, K: np.ndarray) -> dict:
        """Re-project the coefficient blocks after beta or x moved."""
        out = dict(fields)
        out["beta"] = normalize_beta(out["beta"], K)
        out["alpha"] = project_alpha(out["alpha"], out["beta"], K)
        return out

    def run(lr: float) -> tuple[dict, float]:
        tensors = {
            "lam": torch.tensor(params.lam),
            "alpha": torch.tensor(params.alpha),
            "beta": torch.tensor(params.beta),
            "x": torch.tensor(params.x),
        }
        leaf = tensors[coord].clone().requires_grad_(True)
        tensors[coord] = leaf
        opt = (
            torch.optim.Adam([leaf], lr=lr)
            if problem.optimizer == "adam"
            else torch.optim.SGD([leaf], lr=lr)
        )
        K = K0
        for _ in range(problem.inner_steps):
            opt.zero_grad()
            J = _torch_objective(torch, tensors, consts, plans, problem, params.dt)
            J.backward()
            opt.step()
            with torch.no_grad():
                cur = leaf.detach().numpy()
                if coord == "beta":
                    leaf.copy_(torch.tensor(normalize_beta(cur, K)))
                elif coord == "alpha":
                    leaf.copy_(torch.tensor(project_alpha(cur, params.beta, K)))
                elif coord == "x":
                    K = gram(problem.kernel, cur, cur)
        fields = {k: t.detach().numpy() for k, t in tensors.items()}
        if coord == "beta":
            fields = feasible(fields, K0)
        elif coord == "x":
            fields = feasible(fields, K)
        return fields, evaluate(fields)

    J_start = evaluate(
        {"lam": params.lam, "alpha": params.alpha, "beta": params.beta, "x": params.x}
    )
    # Backtrack on the step size so a coordinate sweep never increases the
    # objective (fixed-rate descent alone does not guarantee monotonicity).
    lr = problem.lr
    for _ in range(4):
        fields, J_end = run(lr)
        if J_end <= J_start + 1e-12:
            return replace(
                params,
                lam=fields["lam"],
                alpha=fields["alpha"],
                beta=fields["beta"],
                x=fields["x"],
            )
        lr /= 4.0
    return params


def update_eigenvalues(params, plans, problem, consts=None) -> BarycenterParams:
    """First-order descent on the generator eigenvalues."""
    return _descend(params, plans, problem, "lam", consts)


def update_control_points(params, plans, problem, consts=None) -> BarycenterParams:
    """Descent on the control points through the kernel (flag-guarded)."""
    if not problem.optimize_control_points:
        return params
    return _descend(params, plans, problem, "x", consts)


def update_right_eigenfunctions(params, plans, problem, consts=None) -> BarycenterParams:
    """Descent on beta with per-step projection onto the RKHS unit sphere."""
    return _descend(params, plans, problem, "beta", consts)


def update_left_eigenfunctions(params, plans, problem, consts=None) -> BarycenterParams:
    """Descent on alpha with per-step affine projection alpha* K beta = I."""
    return _descend(params, plans, problem, "alpha", consts)


def solve_barycenter(
    problem: BarycenterProblem, seed: int = 0
) -> tuple[BarycenterParams, list[TransportPlan], list[float]]:
    """Cyclic coordinate descent for the Fréchet mean problem.

    Returns the final parameters, the transport plans at those parameters,
    and the per-cycle objective trace (evaluated right after the exact plan
    update, so the trace is non-increasing up to inner-step tolerance).
    """
    params = init_barycenter(problem, seed=seed)
    consts = None if problem.optimize_control_points else _torch_constants(problem)
    trace: list[float] = []
    stagnant = 0
    for _ in range(problem.max_cycles):
        plans = update_plans(params, problem)
        J = objective(params, plans, problem)
        if trace:
            delta = trace[-1] - J
            stagnant = stagnant + 1 if delta <= 0 else 0
            trace.append(J)
            if stagnant >= 5:
                warnings.warn(
                    "barycenter objective stopped decreasing", StagnationWarning
                )
                break
            if abs(delta) < problem.stop_tol:
                break
        else:
            trace.append(J)
        params = update_eigenvalues(params, plans, problem, consts)
        params = update_control_points(params, plans, problem, consts)
        params = update_right_eigenfunctions(params, plans, problem, consts)
        params = update_left_eigenfunctions(params, plans, problem, consts)
    plans = update_plans(params, problem)
    return params, plans, trace
