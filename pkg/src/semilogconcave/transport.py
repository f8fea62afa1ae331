"""Exact Wasserstein distances between equal-size empirical measures."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

CONVENTIONS = ("standard", "half-squared")
ASSIGNMENT_BUDGET = 4096


@dataclass(frozen=True)
class WassersteinEstimate:
    value: float
    p: float
    convention: str
    method: str
    n: int

    def __float__(self):
        return self.value


def _as_samples(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ValueError("samples must be a 1-d array or an (n, d) array")
    return A


def _matched_cost(A: np.ndarray, B: np.ndarray, p: float, method: str) -> tuple[float, str]:
    """Mean p-th power cost of an optimal matching."""
    n, d = A.shape
    if method == "auto":
        method = "sorted-1d" if d == 1 else "assignment"
    if method == "sorted-1d":
        if d != 1:
            raise ValueError("the sorted method needs one-dimensional samples")
        diff = np.sort(A[:, 0]) - np.sort(B[:, 0])
        return float(np.mean(np.abs(diff) ** p)), method
    if method != "assignment":
        raise ValueError(f"unknown method {method!r}")
    cost = cdist(A, B) ** p
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean()), method


def wasserstein(A, B, p: float = 2.0, convention: str = "standard", method: str = "auto",
                budget: int = ASSIGNMENT_BUDGET) -> WassersteinEstimate:
    """W_p between the uniform empirical measures on A and B.

    In one dimension sorted samples are paired; otherwise an exact assignment
    problem is solved on the cost |a - b|^p.  The ``half-squared`` convention
    puts a factor 1/2 inside the square of W_2, i.e. divides it by sqrt(2).
    """
    A, B = _as_samples(A), _as_samples(B)
    if A.shape != B.shape:
        raise ValueError(f"sample sets must have equal shape, got {A.shape} and {B.shape}")
    if not (p >= 1 and math.isfinite(p)):
        raise ValueError("order p must be finite and >= 1")
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    if convention == "half-squared" and p != 2:
        raise ValueError("the half-squared convention is defined for p = 2 only")
    n, d = A.shape
    if n == 0:
        raise ValueError("empty sample set")
    if (method == "assignment" or (method == "auto" and d > 1)) and n > budget:
        raise ValueError(f"N = {n} exceeds the assignment budget {budget}")
    cost, used = _matched_cost(A, B, p, method)
    value = cost ** (1.0 / p)
    if convention == "half-squared":
        value /= math.sqrt(2.0)
    return WassersteinEstimate(value=value, p=float(p), convention=convention, method=used, n=n)


def holder_interpolation(A, B, q: float) -> tuple[float, float]:
    """Both sides of W_2 <= W_1^{1/(2q)} W_{(2-1/q)p}^{1-1/(2q)} with p = q/(q-1), in one dimension."""
    if q <= 1:
        raise ValueError("q must be > 1")
    A, B = _as_samples(A), _as_samples(B)
    if A.shape[1] != 1 or B.shape[1] != 1:
        raise ValueError("holder_interpolation is one-dimensional")
    if A.shape != B.shape:
        raise ValueError("sample sets must have equal size")
    p = q / (q - 1.0)
    diff = np.abs(np.sort(A[:, 0]) - np.sort(B[:, 0]))
    w2 = math.sqrt(float(np.mean(diff**2)))
    w1 = float(np.mean(diff))
    r = (2.0 - 1.0 / q) * p
    wr = float(np.mean(diff**r)) ** (1.0 / r)
    return w2, w1 ** (1.0 / (2.0 * q)) * wr ** (1.0 - 1.0 / (2.0 * q))


def _psd(C, name: str) -> np.ndarray:
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape[0] != C.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(C, C.T, rtol=1e-12, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    w = np.linalg.eigvalsh(C)
    if w.min() < -1e-12 * max(1.0, abs(w).max()):
        raise ValueError(f"{name} is not positive semidefinite")
    return C


def _sym_sqrt(C: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(C)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def wasserstein_gaussian_oracle(mean1, cov1, mean2, cov2) -> float:
    """Standard W_2 between two Gaussians."""
    m1, m2 = np.atleast_1d(np.asarray(mean1, float)), np.atleast_1d(np.asarray(mean2, float))
    C1, C2 = _psd(cov1, "cov1"), _psd(cov2, "cov2")
    if not (m1.shape == m2.shape and C1.shape == C2.shape == (m1.size, m1.size)):
        raise ValueError("mean and covariance shapes do not match")
    s1 = _sym_sqrt(C1)
    cross = _sym_sqrt(s1 @ C2 @ s1)
    bures = float(np.trace(C1) + np.trace(C2) - 2.0 * np.trace(cross))
    return math.sqrt(max(float(np.sum((m1 - m2) ** 2)) + bures, 0.0))
