"""Dense symmetric-matrix kernels used throughout the package.

Everything here operates on plain ``numpy`` arrays.  Dimensions in this
package stay small (a few hundred at most), so the eigensolver is a cyclic
Jacobi iteration — slow compared to LAPACK on large inputs but simple,
deterministic, and accurate to the off-diagonal mass threshold it is given.

Conventions:
    * ``vec`` is column-stacking; ``unvec`` is its inverse.
    * Eigenvalues are returned in descending order with orthonormal
      eigenvector columns.
    * The factorization Jacobian ``J_X`` maps ``vec(V) -> vec(X V^T + V X^T)``
      and is realized as a dense ``(n^2, n*r)`` matrix when needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "as_symmetric",
    "as_factor",
    "sym_eig",
    "psd_project",
    "pinv",
    "vec",
    "unvec",
    "jacobian_apply",
    "jacobian_matrix",
    "JacobianOperator",
    "residual_projector",
]

# Relative off-diagonal mass at which a Jacobi sweep is declared converged.
JACOBI_TOL = 1e-14
# Quadratic convergence makes this bound generous for any sane input.
JACOBI_MAX_SWEEPS = 64

# Singular values below PINV_TOL_SCALE * max(rows, cols) * sigma_max are
# treated as zero when forming a pseudo-inverse.
PINV_TOL_SCALE = 1e-10


def as_symmetric(s) -> np.ndarray:
    """Validate a square finite matrix and return its symmetric part."""
    a = np.asarray(s, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return 0.5 * (a + a.T)


def as_factor(x) -> np.ndarray:
    """Validate a rectangular finite factor matrix."""
    a = np.asarray(x, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d factor matrix, got ndim {a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("factor entries must be finite")
    return a


def sym_eig(s, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with ``w`` descending and ``v`` the matching
    orthonormal eigenvector columns.  Converged when the off-diagonal
    Frobenius mass drops below ``tol * ||S||_F``.
    """
    a = as_symmetric(s).copy()
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a[0, :1].copy(), v
    base = float(np.linalg.norm(a))
    if base == 0.0:
        return np.zeros(n), v

    for _ in range(max_sweeps):
        # Sum the off-diagonal entries directly: the ||A||^2 - ||diag||^2
        # shortcut cancels catastrophically and floors near sqrt(eps)*||A||.
        if np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2)) <= tol * base:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app, aqq = a[p, p], a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if abs(theta) > 1e150:  # theta**2 would overflow; use the limit
                    t = 0.5 / theta
                elif theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                sn = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - sn * col_q
                a[:, q] = sn * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - sn * row_q
                a[q, :] = sn * row_p + c * row_q
                # the (p,q) rotation annihilates the pivot by construction;
                # write the exact update to shed round-off
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - sn * vec_q
                v[:, q] = sn * vec_p + c * vec_q
    else:
        raise ArithmeticError(
            f"Jacobi iteration did not converge in {max_sweeps} sweeps"
        )

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")[::-1]
    return w[order], v[:, order]


def psd_project(s) -> np.ndarray:
    """Nearest (Frobenius) positive-semidefinite matrix to sym(S)."""
    w, v = sym_eig(s)
    w = np.clip(w, 0.0, None)
    proj = (v * w) @ v.T
    return 0.5 * (proj + proj.T)


def pinv(a, tol_scale: float = PINV_TOL_SCALE) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with an explicit rank cutoff.

    Singular values at or below ``tol_scale * max(rows, cols)`` times the
    largest singular value are treated as zero.  The zero matrix maps to the
    zero matrix.
    """
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise ValueError("pinv expects a 2-d array")
    if not np.all(np.isfinite(m)):
        raise ValueError("pinv input must be finite")
    if not m.any():
        return np.zeros((m.shape[1], m.shape[0]))
    return np.linalg.pinv(m, rcond=tol_scale * max(m.shape))


def vec(m) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(m, dtype=float).flatten(order="F")


def unvec(x, n: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec` for a square matrix."""
    x = np.asarray(x, dtype=float)
    if n is None:
        n = int(round(np.sqrt(x.size)))
    if n * n != x.size:
        raise ValueError(f"cannot reshape length-{x.size} vector to a square matrix")
    return x.reshape((n, n), order="F")


def jacobian_apply(x, v) -> np.ndarray:
    """Directional derivative of ``X -> X X^T``: returns ``X V^T + V X^T``."""
    x = as_factor(x)
    v = as_factor(v)
    if v.shape != x.shape:
        raise ValueError(f"direction shape {v.shape} != factor shape {x.shape}")
    return x @ v.T + v @ x.T


def jacobian_matrix(x) -> np.ndarray:
    """Dense ``(n^2, n*r)`` matrix of ``vec(V) -> vec(X V^T + V X^T)``."""
    x = as_factor(x)
    n, r = x.shape
    j = np.zeros((n * n, n * r))
    for col in range(r):
        xj = x[:, col]
        for row in range(n):
            m = np.zeros((n, n))
            m[:, row] += xj
            m[row, :] += xj
            j[:, col * n + row] = m.flatten(order="F")
    return j


@dataclass(frozen=True)
class JacobianOperator:
    """The factorization Jacobian at a fixed factor ``X``."""

    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", as_factor(self.x))

    @property
    def shape(self) -> tuple[int, int]:
        n, r = self.x.shape
        return (n * n, n * r)

    def apply(self, v) -> np.ndarray:
        return jacobian_apply(self.x, v)

    def matrix(self) -> np.ndarray:
        return jacobian_matrix(self.x)


def residual_projector(x) -> np.ndarray:
    """Orthogonal projector onto the complement of ``range(X)``.

    With ``P = I - X pinv(X)``, the Kronecker identity
    ``(I - J_X pinv(J_X)) vec(W) == kron(P, P) vec(W)`` holds for every
    *symmetric* ``W``.  It cannot hold unrestricted: ``range(J_X)`` contains
    only symmetric matrices, so ``I - J_X pinv(J_X)`` fixes every
    antisymmetric ``W`` while ``kron(P, P)`` does not.
    """
    x = as_factor(x)
    n = x.shape[0]
    p = np.eye(n) - x @ pinv(x)
    return 0.5 * (p + p.T)
