"""Exact discrete optimal transport via the transportation simplex.

Problem sizes here are tiny (atom counts of spectral measures, r <= ~50), so
an exact network-simplex style solver with Bland's anti-cycling rule is both
fast and gives vertex solutions (at most k_S + k_T - 1 positive entries),
which downstream barycenter code relies on for sparsity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MarginalError, ParameterError

_RTOL = 1e-12


@dataclass
class TransportPlan:
    """A coupling matrix with its marginals."""

    entries: np.ndarray  # (k_S, k_T), nonnegative
    a: np.ndarray  # source marginal
    b: np.ndarray  # target marginal

    def cost(self, C: np.ndarray) -> float:
        return float(np.sum(self.entries * C))


def _check_marginal(p: np.ndarray, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < 0):
        raise MarginalError(f"{name} has negative mass")
    if abs(p.sum() - 1.0) > 1e-12:
        raise MarginalError(f"{name} must sum to 1, got {p.sum()!r}")
    return p


def solve_ot(C: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[TransportPlan, float]:
    """Exact optimum of the transportation LP min <C, P> s.t. P1=a, P^T 1=b.

    Returns the optimal plan (a vertex of the transportation polytope) and
    its cost.
    """
    C = np.asarray(C, dtype=float)
    a = _check_marginal(a, "source marginal")
    b = _check_marginal(b, "target marginal")
    if C.shape != (len(a), len(b)):
        raise MarginalError(f"cost shape {C.shape} does not match marginals ({len(a)}, {len(b)})")
    if not np.all(np.isfinite(C)) or np.any(C < 0):
        raise MarginalError("cost entries must be finite and nonnegative")

    # Zero-mass atoms are dropped and re-embedded afterwards.
    ri = np.flatnonzero(a > 0)
    ci = np.flatnonzero(b > 0)
    P_sub = _transportation_simplex(C[np.ix_(ri, ci)], a[ri], b[ci])
    P = np.zeros_like(C)
    P[np.ix_(ri, ci)] = P_sub
    plan = TransportPlan(P, a, b)
    return plan, plan.cost(C)


def wasserstein(C: np.ndarray, a: np.ndarray, b: np.ndarray, p: int = 1) -> float:
    """Wasserstein-p value for ground-distance costs C (not yet exponentiated)."""
    if p < 1:
        raise ParameterError(f"Wasserstein order must be >= 1, got {p}")
    C = np.asarray(C, dtype=float)
    _, value = solve_ot(C**p, a, b)
    # Clamp tiny negative rounding before the root.
    return float(max(value, 0.0) ** (1.0 / p))


def _transportation_simplex(C: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, n = C.shape
    if m == 0 or n == 0:
        raise MarginalError("empty marginals")
    scale = max(np.max(np.abs(C)), 1.0)
    tol = _RTOL * scale

    # Northwest-corner initial basic feasible solution. Exactly m + n - 1
    # basis cells are kept, including degenerate zero-flow cells.
    flow = np.zeros((m, n))
    basis: list[tuple[int, int]] = []
    ra, rb = a.copy(), b.copy()
    i = j = 0
    while True:
        basis.append((i, j))
        t = min(ra[i], rb[j])
        flow[i, j] = t
        ra[i] -= t
        rb[j] -= t
        if i == m - 1 and j == n - 1:
            break
        if ra[i] <= rb[j] and i < m - 1:
            i += 1
        else:
            j += 1

    in_basis = np.zeros((m, n), dtype=bool)
    for cell in basis:
        in_basis[cell] = True

    max_iter = 10000 * (m + n)
    for _ in range(max_iter):
        u, v = _duals(C, basis, m, n)
        reduced = C - u[:, None] - v[None, :]
        reduced[in_basis] = 0.0
        # Bland's rule: first (row-major) cell with negative reduced cost.
        neg = np.argwhere(reduced < -tol)
        if len(neg) == 0:
            break
        enter = (int(neg[0, 0]), int(neg[0, 1]))
        cycle = _find_cycle(basis, enter, m, n)
        # Odd positions of the cycle lose flow.
        losers = cycle[1::2]
        theta = min(flow[c] for c in losers)
        leave = min(
            (c for c in losers if flow[c] <= theta + 0.0), key=lambda c: (flow[c], c)
        )
        for k, cell in enumerate(cycle):
            flow[cell] += theta if k % 2 == 0 else -theta
        flow[leave] = 0.0
        basis[basis.index(leave)] = enter
        in_basis[leave] = False
        in_basis[enter] = True
    else:
        raise RuntimeError("transportation simplex failed to converge")

    np.clip(flow, 0.0, None, out=flow)
    return flow


def _duals(C: np.ndarray, basis: list[tuple[int, int]], m: int, n: int):
    """Dual potentials from the basis tree (u_i + v_j = C_ij on basis cells)."""
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    rows_adj: list[list[tuple[int, int]]] = [[] for _ in range(m)]
    cols_adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for (i, j) in basis:
        rows_adj[i].append((i, j))
        cols_adj[j].append((i, j))
    u[0] = 0.0
    stack = [("r", 0)]
    while stack:
        kind, idx = stack.pop()
        if kind == "r":
            for (i, j) in rows_adj[idx]:
                if np.isnan(v[j]):
                    v[j] = C[i, j] - u[i]
                    stack.append(("c", j))
        else:
            for (i, j) in cols_adj[idx]:
                if np.isnan(u[i]):
                    u[i] = C[i, j] - v[j]
                    stack.append(("r", i))
    return u, v


def _find_cycle(
    basis: list[tuple[int, int]], enter: tuple[int, int], m: int, n: int
) -> list[tuple[int, int]]:
    """Unique alternating cycle created by adding `enter` to the basis tree.

    Returned as a list of cells starting with `enter`, alternating +/-.
    """
    # Path in the bipartite basis tree from enter's column node back to its
    # row node; nodes are ("r", i) and ("c", j), edges are basis cells.
    adj: dict[tuple[str, int], list[tuple[tuple[str, int], tuple[int, int]]]] = {}
    for (i, j) in basis:
        adj.setdefault(("r", i), []).append((("c", j), (i, j)))
        adj.setdefault(("c", j), []).append((("r", i), (i, j)))
    start, goal = ("c", enter[1]), ("r", enter[0])
    prev: dict[tuple[str, int], tuple[tuple[str, int], tuple[int, int]]] = {start: (start, enter)}
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for nxt, cell in adj.get(node, []):
            if nxt not in prev:
                prev[nxt] = (node, cell)
                stack.append(nxt)
    path_cells = []
    node = goal
    while node != start:
        node, cell = prev[node]
        path_cells.append(cell)
    return [enter] + path_cells[::-1]
