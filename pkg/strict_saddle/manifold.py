"""Equality constraints: projection, multipliers, tangent gradient and Hessian.

Conventions: the Lagrangian is L(w, lam) = f(w) - sum_i lam_i c_i(w) and the
constraint-gradient matrix C(w) holds grad c_i(w) as its columns.
"""

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

logger = logging.getLogger(__name__)

FEASIBLE_TOL = 1e-10
MIN_BLOCK_NORM = 1e-12
RLICQ_TOL = 1e-12


class DegenerateProjectionError(ValueError):
    """The closest feasible point is not unique (a block of norm ~0)."""


class RlicqError(np.linalg.LinAlgError):
    """Constraint gradients are (numerically) linearly dependent."""


class ConstraintSet:
    """m equality constraints c_i(w) = 0 given by value/gradient/Hessian callables."""

    # None: no closed-form curvature radius is known for this set.
    curvature_radius: float | None = None

    def __init__(
        self,
        dim: int,
        values: Sequence[Callable[[np.ndarray], float]],
        gradients: Sequence[Callable[[np.ndarray], np.ndarray]],
        hessians: Sequence[Callable[[np.ndarray], np.ndarray]],
    ):
        if not len(values) == len(gradients) == len(hessians):
            raise ValueError("each constraint needs a value, a gradient and a Hessian")
        self.dim = dim
        self._values = list(values)
        self._gradients = list(gradients)
        self._hessians = list(hessians)

    @property
    def m(self) -> int:
        return len(self._values)

    def values(self, w: np.ndarray) -> np.ndarray:
        return np.array([c(w) for c in self._values])

    def jacobian(self, w: np.ndarray) -> np.ndarray:
        """C(w), dim x m."""
        return np.column_stack([g(w) for g in self._gradients])

    def hessians(self, w: np.ndarray) -> np.ndarray:
        return np.stack([h(w) for h in self._hessians])

    def is_feasible(self, w: np.ndarray, tol: float = FEASIBLE_TOL) -> bool:
        return bool(np.all(np.abs(self.values(w)) <= tol))

    def project(self, v: np.ndarray) -> np.ndarray:
        """Closest feasible point, by SLSQP started from v."""
        v = np.asarray(v, dtype=float)
        result = scipy.optimize.minimize(
            lambda w: 0.5 * np.sum((w - v) ** 2),
            v,
            jac=lambda w: w - v,
            constraints=[{"type": "eq", "fun": self.values, "jac": lambda w: self.jacobian(w).T}],
            method="SLSQP",
            options={"ftol": 1e-15, "maxiter": 500},
        )
        if not result.success:
            logger.warning("projection did not converge: %s", result.message)
        return result.x

    def sigma_min(self, w: np.ndarray) -> float:
        return float(scipy.linalg.svdvals(self.jacobian(w)).min())


class SphereProduct(ConstraintSet):
    """n_blocks unit spheres in R^block_dim; w is the concatenation of the blocks."""

    curvature_radius = 1.0

    def __init__(self, n_blocks: int, block_dim: int):
        if n_blocks < 1 or block_dim < 1:
            raise ValueError(f"need at least one block of dimension >= 1, got {n_blocks} x {block_dim}")
        self.n_blocks = n_blocks
        self.block_dim = block_dim
        self.dim = n_blocks * block_dim

    @property
    def m(self) -> int:
        return self.n_blocks

    def blocks(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            raise ValueError(f"expected a point of dimension {self.dim}, got shape {w.shape}")
        return w.reshape(self.n_blocks, self.block_dim)

    def values(self, w: np.ndarray) -> np.ndarray:
        return np.sum(self.blocks(w) ** 2, axis=1) - 1.0

    def jacobian(self, w: np.ndarray) -> np.ndarray:
        u = self.blocks(w)
        C = np.zeros((self.dim, self.n_blocks))
        for i in range(self.n_blocks):
            C[i * self.block_dim : (i + 1) * self.block_dim, i] = 2.0 * u[i]
        return C

    def hessians(self, w: np.ndarray) -> np.ndarray:
        H = np.zeros((self.n_blocks, self.dim, self.dim))
        for i in range(self.n_blocks):
            s = slice(i * self.block_dim, (i + 1) * self.block_dim)
            H[i, s, s] = 2.0 * np.eye(self.block_dim)
        return H

    def is_feasible(self, w: np.ndarray, tol: float = FEASIBLE_TOL) -> bool:
        return bool(np.all(np.abs(np.linalg.norm(self.blocks(w), axis=1) - 1.0) <= tol))

    def project(self, v: np.ndarray) -> np.ndarray:
        u = self.blocks(v)
        norms = np.linalg.norm(u, axis=1, keepdims=True)
        if np.any(norms < MIN_BLOCK_NORM):
            bad = np.flatnonzero(norms[:, 0] < MIN_BLOCK_NORM).tolist()
            raise DegenerateProjectionError(f"cannot project blocks {bad}: norm below {MIN_BLOCK_NORM:g}")
        return (u / norms).reshape(-1)

    def sigma_min(self, w: np.ndarray) -> float:
        # Columns of C have disjoint supports, so the singular values are 2||u_i||.
        return float(2.0 * np.linalg.norm(self.blocks(w), axis=1).min())


def sphere_product(n_blocks: int, block_dim: int) -> SphereProduct:
    return SphereProduct(n_blocks, block_dim)


@dataclass(frozen=True, eq=False)
class SaddleParams:
    alpha: float
    gamma: float
    epsilon: float
    delta: float

    def __post_init__(self):
        for name in ("alpha", "gamma", "epsilon", "delta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)}")


@dataclass(frozen=True, eq=False)
class TangentFrame:
    point: np.ndarray
    tangent: np.ndarray  # dim x (dim - m), orthonormal columns
    normal: np.ndarray  # dim x m, orthonormal columns

    @property
    def P_tangent(self) -> np.ndarray:
        return self.tangent @ self.tangent.T

    @property
    def P_normal(self) -> np.ndarray:
        return self.normal @ self.normal.T

    def project_tangent(self, v: np.ndarray) -> np.ndarray:
        return self.tangent @ (self.tangent.T @ v)

    def project_normal(self, v: np.ndarray) -> np.ndarray:
        return self.normal @ (self.normal.T @ v)


class TangentEig(NamedTuple):
    value: float
    direction: np.ndarray


def project(constraints: ConstraintSet, v: np.ndarray) -> np.ndarray:
    return constraints.project(v)


def rlicq_sigma_min(constraints: ConstraintSet, w: np.ndarray, generic: bool = False) -> float:
    """sigma_min(C(w)); no feasibility gate, the caller decides what to do with it."""
    if generic:
        return ConstraintSet.sigma_min(constraints, w)
    return constraints.sigma_min(w)


def _checked_jacobian(constraints: ConstraintSet, w: np.ndarray, tol: float) -> np.ndarray:
    C = constraints.jacobian(w)
    sigma = float(scipy.linalg.svdvals(C).min())
    if sigma <= tol:
        raise RlicqError(f"constraint gradients are rank deficient at this point (sigma_min = {sigma:.3e})")
    return C


def lagrange_multipliers(problem, w: np.ndarray, tol: float = RLICQ_TOL) -> np.ndarray:
    """lam*(w) = argmin_lam ||grad f(w) - C(w) lam||, i.e. C^+ grad f."""
    C = _checked_jacobian(problem.constraints, w, tol)
    lam, *_ = np.linalg.lstsq(C, problem.gradient(w), rcond=None)
    return lam


def chi(problem, w: np.ndarray) -> np.ndarray:
    """Gradient of the Lagrangian at (w, lam*(w)); lies in the tangent space."""
    lam = lagrange_multipliers(problem, w)
    return problem.gradient(w) - problem.constraints.jacobian(w) @ lam


def lagrangian_hessian(problem, w: np.ndarray) -> np.ndarray:
    """M(w) = hess f(w) - sum_i lam*_i hess c_i(w)."""
    lam = lagrange_multipliers(problem, w)
    M = problem.hessian(w) - np.einsum("i,ijk->jk", lam, problem.constraints.hessians(w))
    return 0.5 * (M + M.T)


def tangent_frame(constraints: ConstraintSet, w: np.ndarray, tol: float = RLICQ_TOL) -> TangentFrame:
    """Orthonormal completion of the constraint gradients by a full QR."""
    w = np.asarray(w, dtype=float)
    C = _checked_jacobian(constraints, w, tol)
    Q, _ = scipy.linalg.qr(C, mode="full")
    m = C.shape[1]
    return TangentFrame(point=w.copy(), tangent=Q[:, m:], normal=Q[:, :m])


def min_tangent_eig(problem, w: np.ndarray) -> TangentEig:
    """Smallest eigenvalue of M(w) restricted to T(w), with a unit witness in T(w)."""
    frame = tangent_frame(problem.constraints, w)
    if frame.tangent.shape[1] == 0:
        return TangentEig(np.inf, np.zeros_like(frame.point))
    reduced = frame.tangent.T @ lagrangian_hessian(problem, w) @ frame.tangent
    values, vectors = scipy.linalg.eigh(reduced)
    direction = frame.tangent @ vectors[:, 0]
    return TangentEig(float(values[0]), direction / np.linalg.norm(direction))
