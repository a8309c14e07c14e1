"""Quadratic measurement objectives and their factored (low-rank) form.

An objective is built from a list of measurement matrices ``A_k`` and a
ground-truth factor ``Z``:

    phi(M) = 1/2 * sum_k <A_k, M - Z Z^T>^2

restricted to symmetric ``M``.  The factored form is ``f(X) = phi(X X^T)``
for an ``n x r`` factor ``X``.  Measurement matrices are stored exactly as
given (possibly unsymmetric); every formula applies them through their
symmetric part, and the raw stack stays available for certificate work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import serialize
from .matkernel import as_factor, as_symmetric, jacobian_matrix, sym_eig, vec

__all__ = ["QuadraticObjective", "SecondOrderReport", "symmetric_basis"]


def symmetric_basis(n: int) -> list[np.ndarray]:
    """Orthonormal basis of the symmetric n x n matrices.

    Ordered lexicographically over index pairs (i <= j): unit diagonal
    matrices ``e_i e_i^T`` and off-diagonal ``(e_i e_j^T + e_j e_i^T)/sqrt(2)``.
    """
    basis = []
    for i in range(n):
        for j in range(i, n):
            b = np.zeros((n, n))
            if i == j:
                b[i, i] = 1.0
            else:
                b[i, j] = b[j, i] = 1.0 / np.sqrt(2.0)
            basis.append(b)
    return basis


@dataclass(frozen=True)
class SecondOrderReport:
    """Stationarity diagnostics of the factored objective at one point."""

    grad_norm: float
    hess_min_eig: float
    objective_value: float
    gap: float
    grad_tol: float
    hess_tol: float

    @property
    def passed(self) -> bool:
        return self.grad_norm <= self.grad_tol and self.hess_min_eig >= -self.hess_tol

    def to_obj(self) -> dict:
        return {
            "grad_norm": self.grad_norm,
            "hess_min_eig": self.hess_min_eig,
            "objective_value": self.objective_value,
            "gap": self.gap,
            "grad_tol": self.grad_tol,
            "hess_tol": self.hess_tol,
            "passed": self.passed,
        }


class QuadraticObjective:
    """Least-squares objective over PSD matrices defined by linear measurements."""

    def __init__(self, measurements, ground_truth):
        z = as_factor(ground_truth)
        stack = np.asarray(measurements, dtype=float)
        if stack.ndim != 3:
            raise ValueError("measurements must stack to an (m, n, n) array")
        m, n1, n2 = stack.shape
        if n1 != n2:
            raise ValueError(f"measurement matrices must be square, got {n1}x{n2}")
        if m == 0:
            raise ValueError("at least one measurement matrix is required")
        if z.shape[0] != n1:
            raise ValueError(
                f"ground truth has {z.shape[0]} rows but measurements are {n1}x{n1}"
            )
        if not np.all(np.isfinite(stack)):
            raise ValueError("measurement entries must be finite")
        self.measurements = stack
        self.ground_truth = z
        self.n = n1
        self.r_star = z.shape[1]
        self.m_star = z @ z.T
        self._sym = 0.5 * (stack + stack.transpose(0, 2, 1))
        self._gram_sym = None
        self._bounds = None

    # -- curvature -----------------------------------------------------

    @property
    def gram_symmetric(self) -> np.ndarray:
        """n^2 x n^2 matrix G with G vec(E) = vec(hessian-of-phi applied to E)."""
        if self._gram_sym is None:
            flat = self._sym.reshape(len(self._sym), -1, order="C")
            # vec is column-stacking, but each A is symmetric so order is moot
            self._gram_sym = flat.T @ flat
        return self._gram_sym

    def measurement_gram(self) -> np.ndarray:
        """Gram matrix sum_k vec(A_k) vec(A_k)^T of the *raw* measurements."""
        flat = np.stack([vec(a) for a in self.measurements])
        return flat.T @ flat

    def smoothness_bounds(self) -> tuple[float, float]:
        """Extreme curvatures (mu, L) of phi over symmetric matrices."""
        if self._bounds is None:
            basis = symmetric_basis(self.n)
            coeff = np.array([[np.vdot(b, a) for a in self._sym] for b in basis])
            w, _ = sym_eig(coeff @ coeff.T)
            mu, big = float(w[-1]), float(w[0])
            if mu <= 1e-12:
                raise ValueError(
                    "measurement set does not induce positive-definite curvature"
                )
            self._bounds = (mu, big)
        return self._bounds

    # -- matrix-space evaluations ---------------------------------------

    def _residual(self, m_mat) -> np.ndarray:
        return as_symmetric(m_mat) - self.m_star

    def phi_eval(self, m_mat) -> float:
        e = self._residual(m_mat)
        coeffs = np.tensordot(self._sym, e, axes=([1, 2], [0, 1]))
        return 0.5 * float(coeffs @ coeffs)

    def phi_grad(self, m_mat) -> np.ndarray:
        e = self._residual(m_mat)
        coeffs = np.tensordot(self._sym, e, axes=([1, 2], [0, 1]))
        return np.tensordot(coeffs, self._sym, axes=1)

    def hess_apply(self, e_mat) -> np.ndarray:
        """Hessian of phi applied to a symmetric direction (constant in M)."""
        e = as_symmetric(e_mat)
        coeffs = np.tensordot(self._sym, e, axes=([1, 2], [0, 1]))
        return np.tensordot(coeffs, self._sym, axes=1)

    # -- factored-space evaluations --------------------------------------

    def _check_factor(self, x) -> np.ndarray:
        x = as_factor(x)
        if x.shape[0] != self.n:
            raise ValueError(f"factor has {x.shape[0]} rows, expected {self.n}")
        return x

    def f_eval(self, x) -> float:
        x = self._check_factor(x)
        return self.phi_eval(x @ x.T)

    def f_grad(self, x) -> np.ndarray:
        x = self._check_factor(x)
        return 2.0 * self.phi_grad(x @ x.T) @ x

    def f_hess_quadform(self, x, v) -> float:
        """Quadratic form <hess f(X)[V], V> along a direction V."""
        x = self._check_factor(x)
        v = self._check_factor(v)
        if v.shape != x.shape:
            raise ValueError(f"direction shape {v.shape} != factor shape {x.shape}")
        s = self.phi_grad(x @ x.T)
        w = x @ v.T + v @ x.T
        return 2.0 * float(np.vdot(s, v @ v.T)) + float(np.vdot(self.hess_apply(w), w))

    def f_hess_matrix(self, x) -> np.ndarray:
        """Dense (n*r) x (n*r) Hessian of f at X in vec coordinates."""
        x = self._check_factor(x)
        r = x.shape[1]
        j = jacobian_matrix(x)
        s = self.phi_grad(x @ x.T)
        h = j.T @ self.gram_symmetric @ j + 2.0 * np.kron(np.eye(r), s)
        return 0.5 * (h + h.T)

    def f_hess_min_eig(self, x) -> float:
        w, _ = sym_eig(self.f_hess_matrix(x))
        return float(w[-1])

    def check_second_order(
        self, x, grad_tol: float = 1e-9, hess_tol: float = 1e-9
    ) -> SecondOrderReport:
        """Evaluate first/second-order stationarity of f at X.

        The family's minimum value is zero (attained where X X^T equals the
        ground-truth Gram matrix), so the reported gap equals the objective
        value itself.
        """
        x = self._check_factor(x)
        value = self.f_eval(x)
        return SecondOrderReport(
            grad_norm=float(np.linalg.norm(self.f_grad(x))),
            hess_min_eig=self.f_hess_min_eig(x),
            objective_value=value,
            gap=value,
            grad_tol=grad_tol,
            hess_tol=hess_tol,
        )

    # -- serialization ----------------------------------------------------

    def to_obj(self) -> dict:
        return {
            "n": self.n,
            "r_star": self.r_star,
            "Z": serialize.matrix_to_lists(self.ground_truth),
            "measurements": [serialize.matrix_to_lists(a) for a in self.measurements],
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "QuadraticObjective":
        try:
            z = serialize.matrix_from_lists(obj["Z"])
            meas = [serialize.matrix_from_lists(a) for a in obj["measurements"]]
        except KeyError as exc:
            raise ValueError(f"objective record is missing field {exc}") from exc
        inst = cls(np.stack(meas), z)
        if inst.n != int(obj["n"]) or inst.r_star != int(obj["r_star"]):
            raise ValueError("objective record dimensions are inconsistent")
        return inst
