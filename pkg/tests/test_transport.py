import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semilogconcave.transport import holder_interpolation, wasserstein, wasserstein_gaussian_oracle


def test_identical_samples_are_at_distance_zero():
    A = np.random.default_rng(0).normal(size=(30, 2))
    assert wasserstein(A, A[::-1]).value == pytest.approx(0.0, abs=1e-12)


def test_point_masses():
    A = np.zeros((5, 3))
    B = np.ones((5, 3))
    assert wasserstein(A, B, 2).value == pytest.approx(math.sqrt(3))
    assert wasserstein(A, B, 1).value == pytest.approx(math.sqrt(3))


def test_half_convention():
    A, B = np.zeros((4, 1)), np.full((4, 1), 2.0)
    assert wasserstein(A, B, 2, convention="half-squared").value == pytest.approx(2 / math.sqrt(2))
    with pytest.raises(ValueError):
        wasserstein(A, B, 1, convention="half-squared")


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
@pytest.mark.parametrize("n", [5, 64, 256])
def test_sorted_matches_assignment(p, n):
    rng = np.random.default_rng(n)
    A, B = rng.normal(size=n), rng.exponential(size=n)
    s = wasserstein(A, B, p, method="sorted-1d").value
    a = wasserstein(A, B, p, method="assignment").value
    assert abs(s - a) <= 1e-10 * max(1.0, s)


def test_errors():
    with pytest.raises(ValueError, match="equal shape"):
        wasserstein(np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError, match="budget"):
        wasserstein(np.zeros((10, 2)), np.zeros((10, 2)), budget=5)
    with pytest.raises(ValueError):
        wasserstein(np.zeros((3, 2)), np.zeros((3, 2)), method="sorted-1d")
    with pytest.raises(ValueError):
        wasserstein(np.zeros(3), np.zeros(3), p=0.5)


def test_gaussian_oracle_known_values():
    assert wasserstein_gaussian_oracle([0.0], [[1.0]], [3.0], [[1.0]]) == pytest.approx(3.0)
    assert wasserstein_gaussian_oracle([0.0], [[1.0]], [0.0], [[4.0]]) == pytest.approx(1.0)
    C1 = np.diag([1.0, 4.0])
    C2 = np.diag([9.0, 1.0])
    assert wasserstein_gaussian_oracle([0, 0], C1, [1, 1], C2) == pytest.approx(math.sqrt(2 + 4 + 1))
    with pytest.raises(ValueError):
        wasserstein_gaussian_oracle([0.0], [[-1.0]], [0.0], [[1.0]])


def test_empirical_close_to_gaussian_oracle():
    rng = np.random.default_rng(5)
    A = rng.normal(0.0, 1.0, size=20000)
    B = rng.normal(1.0, 2.0, size=20000)
    exact = wasserstein_gaussian_oracle([0.0], [[1.0]], [1.0], [[4.0]])
    assert wasserstein(A, B).value == pytest.approx(exact, rel=0.03)


@settings(max_examples=60, deadline=None)
@given(A=arrays(float, 12, elements=st.floats(-10, 10)), B=arrays(float, 12, elements=st.floats(-10, 10)),
       C=arrays(float, 12, elements=st.floats(-10, 10)))
def test_metric_axioms(A, B, C):
    ab, bc, ac = (wasserstein(u, v).value for u, v in ((A, B), (B, C), (A, C)))
    assert ab == pytest.approx(wasserstein(B, A).value, abs=1e-12)
    assert ac <= ab + bc + 1e-9


@settings(max_examples=60, deadline=None)
@given(A=arrays(float, 10, elements=st.floats(-5, 5)), B=arrays(float, 10, elements=st.floats(-5, 5)))
def test_w1_below_w2(A, B):
    assert wasserstein(A, B, 1).value <= wasserstein(A, B, 2).value + 1e-12


@settings(max_examples=100, deadline=None)
@given(q=st.floats(1.05, 6.0), seed=st.integers(0, 2**31))
def test_holder_interpolation_holds(q, seed):
    rng = np.random.default_rng(seed)
    A, B = rng.normal(size=40), rng.standard_t(3, size=40)
    lhs, rhs = holder_interpolation(A, B, q)
    assert lhs <= rhs * (1 + 1e-10) + 1e-14


def test_holder_rejects_q_at_most_one():
    with pytest.raises(ValueError):
        holder_interpolation([0.0], [1.0], 1.0)
