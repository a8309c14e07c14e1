"""Regularized low-rank approximation with a Gram penalty.

Solves, in closed form,

    minimize_Y  ||A - Y Y^T||_F^2 + 2 <B, Y^T Y>

over n x r factors Y, where A (n x n) and B (r x r) are PSD.  With
eigenvalues ``s`` of A sorted descending and ``d`` of B sorted ascending,
the optimal value is ``sum(s^2) - sum_{i<=r} ((s_i - d_i)_+)^2``, attained
by pairing the largest remaining ``s`` with the smallest remaining ``d``
and keeping the clipped weight ``(s_i - d_i)_+`` on that eigenvector pair.
Setting ``B = 0`` recovers classical best rank-r approximation.

A brute-force oracle over all generalized-permutation minimizers is
included, along with two scalar inequalities used when bounding the value
from below.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .matkernel import as_symmetric, sym_eig

__all__ = [
    "EYProblem",
    "EYSolution",
    "solve",
    "brute_force",
    "objective_value",
    "first_order_residual",
    "value_lower_bound",
    "ones_projection_inequality",
]

BRUTE_FORCE_MAX_N = 7
BRUTE_FORCE_MAX_R = 4


def _check_spectrum(values, name: str, ascending: bool) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if np.any(arr < 0):
        raise ValueError(f"{name} must be nonnegative, got {arr}")
    diffs = np.diff(arr)
    if ascending and np.any(diffs < 0):
        raise ValueError(f"{name} must be sorted ascending, got {arr}")
    if not ascending and np.any(diffs > 0):
        raise ValueError(f"{name} must be sorted descending, got {arr}")
    return arr


@dataclass(frozen=True)
class EYProblem:
    """Eigenvalue-space description of one penalized approximation problem.

    ``s`` holds the target's eigenvalues sorted descending, ``d`` the
    penalty's sorted ascending with ``len(d) <= len(s)``.  Sorting is
    enforced, never performed silently: the pairing argument behind the
    closed form is order-sensitive, so callers with raw matrices should use
    :meth:`from_matrices`, which sorts via eigendecomposition.
    """

    s: np.ndarray
    d: np.ndarray
    u: np.ndarray | None = None  # eigenbasis of A, columns matching s
    v: np.ndarray | None = None  # eigenbasis of B, columns matching d

    def __post_init__(self):
        s = _check_spectrum(self.s, "s", ascending=False)
        d = _check_spectrum(self.d, "d", ascending=True)
        if d.size > s.size:
            raise ValueError(
                f"penalty rank {d.size} exceeds target dimension {s.size}"
            )
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "d", d)
        for mat, size, name in ((self.u, s.size, "u"), (self.v, d.size, "v")):
            if mat is not None and mat.shape != (size, size):
                raise ValueError(f"{name} must be {size}x{size}, got {mat.shape}")

    @property
    def n(self) -> int:
        return self.s.size

    @property
    def r(self) -> int:
        return self.d.size

    def target_matrix(self) -> np.ndarray:
        if self.u is None:
            return np.diag(self.s)
        return self.u @ np.diag(self.s) @ self.u.T

    def penalty_matrix(self) -> np.ndarray:
        if self.v is None:
            return np.diag(self.d)
        return self.v @ np.diag(self.d) @ self.v.T

    @classmethod
    def from_matrices(cls, a, b) -> "EYProblem":
        """Build from PSD matrices, sorting through eigendecomposition."""
        a = as_symmetric(a)
        b = as_symmetric(b)
        if b.shape[0] > a.shape[0]:
            raise ValueError("penalty dimension exceeds target dimension")
        s, u = sym_eig(a)  # descending
        d, v = sym_eig(b)
        d, v = d[::-1].copy(), v[:, ::-1].copy()  # ascending
        for name, w in (("A", s), ("B", d)):
            if np.any(w < -1e-10 * max(1.0, abs(w).max())):
                raise ValueError(f"{name} must be PSD, got eigenvalue {w.min()}")
        return cls(s=np.maximum(s, 0.0), d=np.maximum(d, 0.0), u=u, v=v)


@dataclass(frozen=True)
class EYSolution:
    y: np.ndarray  # minimizer in the problem's original frame
    value: float
    weights: np.ndarray  # (s_i - d_i)_+ for i <= r


def _paired_value(s: np.ndarray, rows, weights) -> float:
    # Group the value per eigenvalue so that cancellations (e.g. B = 0,
    # where w_i == s_i) are exact rather than accurate to rounding.
    total = 0.0
    used = set()
    for i, w in zip(rows, weights):
        total += s[i] * s[i] - w * w
        used.add(i)
    for i in range(s.size):
        if i not in used:
            total += s[i] * s[i]
    return total


def solve(p: EYProblem) -> EYSolution:
    """Closed-form minimizer and value of the penalized approximation."""
    weights = np.maximum(p.s[: p.r] - p.d, 0.0)
    value = _paired_value(p.s, range(p.r), weights)
    y = np.zeros((p.n, p.r))
    y[np.arange(p.r), np.arange(p.r)] = np.sqrt(weights)
    if p.u is not None:
        y = p.u @ y
    if p.v is not None:
        y = y @ p.v.T
    return EYSolution(y=y, value=value, weights=weights)


def brute_force(p: EYProblem) -> float:
    """Exhaustive minimum of the objective over generalized permutations.

    Every column of the candidate minimizer is assigned to a distinct row of
    the diagonal frame and given its per-pair optimal weight; the smallest
    objective over all injective assignments is returned.  This enumerates
    the full minimizer family, so it equals :func:`solve`'s value — used as
    an independent oracle, hence kept deliberately free of the pairing
    shortcut.
    """
    if p.n > BRUTE_FORCE_MAX_N or p.r > BRUTE_FORCE_MAX_R:
        raise ValueError(
            f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, "
            f"r <= {BRUTE_FORCE_MAX_R}, got n={p.n}, r={p.r}"
        )
    best = math.inf
    for rows in itertools.permutations(range(p.n), p.r):
        weights = [max(p.s[i] - dj, 0.0) for i, dj in zip(rows, p.d)]
        best = min(best, _paired_value(p.s, rows, weights))
    return best


def objective_value(p: EYProblem, y) -> float:
    """||A - Y Y^T||_F^2 + 2 <B, Y^T Y> in the problem's original frame."""
    y = np.asarray(y, dtype=float)
    resid = p.target_matrix() - y @ y.T
    return float(np.vdot(resid, resid) + 2.0 * np.vdot(p.penalty_matrix(), y.T @ y))


def first_order_residual(p: EYProblem, y) -> float:
    """Norm of the stationarity defect (A - Y Y^T) Y - Y B."""
    y = np.asarray(y, dtype=float)
    defect = (p.target_matrix() - y @ y.T) @ y - y @ p.penalty_matrix()
    return float(np.linalg.norm(defect))


def value_lower_bound(s, d, s_lb: float) -> float:
    """Certified lower bound on ||s||^2 - ||(s - d)_+||^2.

    Requires every entry of ``s`` to be at least ``s_lb >= 0`` and ``d`` to
    be nonnegative.  Returns ``s_lb^2 (1^T d)^2 / ||d||^2`` when
    ``s_lb * 1^T d <= ||d||^2`` and ``||d||^2`` otherwise; an all-zero ``d``
    yields 0 (both case formulas degenerate and the true quantity vanishes).
    """
    s = np.asarray(s, dtype=float).reshape(-1)
    d = np.asarray(d, dtype=float).reshape(-1)
    if s.size != d.size:
        raise ValueError(f"s and d must have equal length, got {s.size}, {d.size}")
    if s_lb < 0:
        raise ValueError(f"s_lb must be nonnegative, got {s_lb}")
    if np.any(s < s_lb):
        raise ValueError("every entry of s must be at least s_lb")
    if np.any(d < 0):
        raise ValueError("d must be nonnegative")
    d_sq = float(d @ d)
    if d_sq == 0.0:
        return 0.0
    d_sum = float(d.sum())
    if s_lb * d_sum <= d_sq:
        return s_lb * s_lb * d_sum * d_sum / d_sq
    return d_sq


def ones_projection_inequality(x) -> tuple[float, float]:
    """Evaluate 1^T (I - x x^T / ||x||^2) 1  >=  ||(1 - x)_+||^2.

    Valid for nonnegative ``x`` with ``1^T x <= ||x||^2``; returns the two
    sides (lhs, rhs) so callers can inspect the slack.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size == 0 or np.all(x == 0):
        raise ValueError("x must be a nonzero vector")
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    x_sq = float(x @ x)
    x_sum = float(x.sum())
    if x_sum > x_sq + 1e-12:
        raise ValueError("hypothesis 1^T x <= ||x||^2 violated")
    lhs = x.size - x_sum * x_sum / x_sq
    rhs = float(np.sum(np.maximum(1.0 - x, 0.0) ** 2))
    return lhs, rhs
