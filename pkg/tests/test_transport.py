import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from sgot.errors import MarginalError
from sgot.transport import TransportPlan, solve_ot, wasserstein


def _linprog_value(C, a, b):
    m, n = C.shape
    A_eq = np.zeros((m + n, m * n))
    for i in range(m):
        A_eq[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        A_eq[m + j, j::n] = 1.0
    res = linprog(C.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]), method="highs")
    assert res.success
    return res.fun


def test_identity_cost_zero():
    C = 1.0 - np.eye(3)
    a = np.full(3, 1 / 3)
    plan, val = solve_ot(C, a, a)
    assert val == 0.0
    assert np.allclose(plan.entries, np.eye(3) / 3)


def test_uniform_matches_permutation_minimum():
    rng = np.random.default_rng(0)
    for _ in range(50):
        k = rng.integers(2, 5)
        C = rng.random((k, k))
        a = np.full(k, 1.0 / k)
        _, val = solve_ot(C, a, a)
        best = min(
            sum(C[i, p[i]] for i in range(k)) / k
            for p in itertools.permutations(range(k))
        )
        assert abs(val - best) <= 1e-12


def test_nonuniform_matches_linprog():
    rng = np.random.default_rng(1)
    for _ in range(25):
        m, n = rng.integers(2, 5, size=2)
        C = rng.random((m, n))
        a = rng.random(m) + 0.1
        b = rng.random(n) + 0.1
        a /= a.sum()
        b /= b.sum()
        _, val = solve_ot(C, a, b)
        assert abs(val - _linprog_value(C, a, b)) <= 1e-10


def test_plan_marginals():
    rng = np.random.default_rng(2)
    C = rng.random((4, 3))
    a = np.array([0.1, 0.2, 0.3, 0.4])
    b = np.array([0.5, 0.25, 0.25])
    plan, val = solve_ot(C, a, b)
    assert np.allclose(plan.entries.sum(axis=1), a, atol=1e-12)
    assert np.allclose(plan.entries.sum(axis=0), b, atol=1e-12)
    assert np.all(plan.entries >= -1e-15)
    assert np.isclose(plan.cost(C), val)


def test_zero_mass_atoms_handled():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    a = np.array([1.0, 0.0])
    b = np.array([0.0, 1.0])
    plan, val = solve_ot(C, a, b)
    assert np.isclose(val, 1.0)
    assert plan.entries.shape == (2, 2)
    assert np.isclose(plan.entries[0, 1], 1.0)


def test_bad_marginals_raise():
    C = np.ones((2, 2))
    with pytest.raises(MarginalError):
        solve_ot(C, np.array([0.7, 0.7]), np.array([0.5, 0.5]))
    with pytest.raises(MarginalError):
        solve_ot(C, np.array([1.5, -0.5]), np.array([0.5, 0.5]))


def test_wasserstein_orders():
    C = np.array([[0.0, 2.0], [2.0, 0.0]])
    a = np.array([1.0, 0.0])
    b = np.array([0.0, 1.0])
    assert np.isclose(wasserstein(C, a, b, p=1), 2.0)
    assert np.isclose(wasserstein(C, a, b, p=2), 2.0)  # (2^2)^(1/2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(2, 5))
def test_value_not_above_independent_coupling(seed, m, n):
    rng = np.random.default_rng(seed)
    C = rng.random((m, n))
    a = rng.random(m) + 1e-3
    b = rng.random(n) + 1e-3
    a /= a.sum()
    b /= b.sum()
    _, val = solve_ot(C, a, b)
    assert val <= float(a @ C @ b) + 1e-12
    assert val >= C.min() - 1e-12


def test_plan_cost_helper():
    entries = np.array([[0.25, 0.25], [0.0, 0.5]])
    plan = TransportPlan(entries, entries.sum(1), entries.sum(0))
    C = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.isclose(plan.cost(C), 0.25 + 0.5 + 2.0)
