"""Tensor-decomposition objectives and the stochastic-objective contract.

Every objective implements

    dim, value(w), gradient(w), hessian(w), stochastic_gradient(w, sample), oracle_bound

where ``stochastic_gradient(w, None)`` is the exact gradient. The tensor problems
are constrained to products of unit spheres (one sphere per component) and carry
their ``constraints``; the quadratic model is unconstrained.

Points are flat vectors; for the d-component problems w is the row-major
flattening of U (U_ik = u^(i)_k).
"""

import copy
import logging
from dataclasses import dataclass
from itertools import permutations, product

import numpy as np
import scipy.optimize

from .manifold import SphereProduct
from .tensor4 import (
    Tensor4,
    contract_pair,
    form_bilinear,
    form_matrix,
    form_scalar,
    form_vector,
    rank_one_sum,
)

logger = logging.getLogger(__name__)

ORACLE_PROBES = 1000
ORACLE_MARGIN = 2.0


@dataclass(frozen=True)
class SmoothnessBudget:
    B: float
    beta: float
    rho: float

    def __post_init__(self):
        for name in ("B", "beta", "rho"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")


class ConstrainedProblem:
    """An objective on a product of n_blocks unit spheres in R^d."""

    kind = "problem"

    def __init__(self, tensor: Tensor4, n_blocks: int):
        self.tensor = tensor
        self.d = tensor.d
        self.n_blocks = n_blocks
        self.constraints = SphereProduct(n_blocks, tensor.d)
        self.oracle = None
        self.probe_sampler = None
        self._oracle_bound = None

    @property
    def name(self) -> str:
        """Label used in messages and output tables."""
        return self.kind

    @property
    def dim(self) -> int:
        """Length of the flat point w."""
        return self.n_blocks * self.d

    def rows(self, w: np.ndarray) -> np.ndarray:
        """View w as one row per sphere block."""
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            raise ValueError(f"{self.name}: expected a point of dimension {self.dim}, got shape {w.shape}")
        return w.reshape(self.n_blocks, self.d)

    def value(self, w: np.ndarray) -> float:
        """f(w)."""
        raise NotImplementedError

    def gradient(self, w: np.ndarray) -> np.ndarray:
        """Exact gradient of f."""
        raise NotImplementedError

    def hessian(self, w: np.ndarray) -> np.ndarray:
        """Exact Hessian of f."""
        raise NotImplementedError

    def sample_gradient(self, w: np.ndarray, xs: np.ndarray) -> np.ndarray:
        """Gradient with T replaced by the batch mean of x^{(x)4}."""
        raise NotImplementedError

    def stochastic_gradient(self, w: np.ndarray, sample=None) -> np.ndarray:
        """Unbiased gradient from one sample; the exact gradient when there is none."""
        if sample is None:
            return self.gradient(w)
        if self.oracle is not None:
            return self.oracle(self, w, sample)
        return self.sample_gradient(w, sample)

    def with_oracle(self, oracle, probe_sampler=None) -> "ConstrainedProblem":
        """Copy of the problem whose samples go through ``oracle(problem, w, sample)``."""
        other = copy.copy(self)
        other.oracle = oracle
        other.probe_sampler = probe_sampler
        other._oracle_bound = None
        return other

    def lagrangian(self, w: np.ndarray, lam: np.ndarray) -> float:
        """f(w) - sum_i lam_i c_i(w)."""
        return self.value(w) - float(np.dot(lam, self.constraints.values(w)))

    def lagrangian_gradient(self, w: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """Gradient of the Lagrangian at fixed multipliers."""
        return self.gradient(w) - self.constraints.jacobian(w) @ lam

    def random_feasible(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform point on the sphere product."""
        g = rng.standard_normal((self.n_blocks, self.d))
        return (g / np.linalg.norm(g, axis=1, keepdims=True)).reshape(-1)

    @property
    def oracle_bound(self) -> float:
        """Q with ||SG(w) - grad f(w)|| <= Q, estimated on first use."""
        if self._oracle_bound is None:
            sampler = self.probe_sampler
            if sampler is None:
                from .ica import SimpleSampler

                sampler = SimpleSampler(self._require_basis())
            self._oracle_bound = estimate_oracle_bound(self, sampler, np.random.default_rng(0))
        return self._oracle_bound

    def _require_basis(self):
        if self.tensor.basis is None:
            raise ValueError(f"{self.name}: this needs a tensor built from an orthonormal basis")
        return self.tensor.basis

    def _rotation(self) -> np.ndarray:
        """R with z = R w, z the rows expressed in the decomposition basis."""
        return np.kron(np.eye(self.n_blocks), self._require_basis().vectors)

    def basis_rows(self, w: np.ndarray) -> np.ndarray:
        """Rows expressed in the decomposition basis."""
        return self.rows(w) @ self._require_basis().vectors.T


class MaxEigProblem(ConstrainedProblem):
    """min -T(u,u,u,u) over the unit sphere."""

    kind = "maxeig"

    def __init__(self, tensor: Tensor4):
        super().__init__(tensor, n_blocks=1)

    def value(self, w):
        u = self.rows(w)[0]
        return -form_scalar(self.tensor, u, u, u, u)

    def gradient(self, w):
        return -4.0 * form_vector(self.tensor, self.rows(w)[0])

    def hessian(self, w):
        return -12.0 * form_matrix(self.tensor, self.rows(w)[0])

    def sample_gradient(self, w, xs):
        X = np.atleast_2d(xs)
        p = X @ self.rows(w)[0]
        return -4.0 * (p**3) @ X / X.shape[0]

    # Closed forms in basis coordinates x = A u, rotated back.

    def closed_form_value(self, w):
        x = self.basis_rows(w)[0]
        return -float(np.sum(x**4))

    def closed_form_multipliers(self, w):
        x = self.basis_rows(w)[0]
        return np.array([-2.0 * np.sum(x**4)])

    def closed_form_chi(self, w):
        x = self.basis_rows(w)[0]
        return self._rotation().T @ (4.0 * (np.sum(x**4) - x**2) * x)

    def closed_form_hessian(self, w):
        x = self.basis_rows(w)[0]
        M = -12.0 * np.diag(x**2) + 4.0 * np.sum(x**4) * np.eye(self.d)
        R = self._rotation()
        return R.T @ M @ R


class CorrelationProblem(ConstrainedProblem):
    """min sum_{i != j} T(u_i,u_i,u_j,u_j) over d unit spheres.

    ``halved=True`` gives the 1/2-scaled view used by the closed forms
    (f = 1/2 sum_{i != j} h(u_i, u_j) in basis coordinates).
    """

    kind = "correlation"

    def __init__(self, tensor: Tensor4, halved: bool = False):
        super().__init__(tensor, n_blocks=tensor.d)
        self.halved = halved
        self.scale = 0.5 if halved else 1.0

    @property
    def name(self) -> str:
        return "correlation-halved" if self.halved else "correlation"

    def _pair_matrix(self, U):
        return contract_pair(self.tensor, U.T @ U)

    def value(self, w):
        U = self.rows(w)
        M = self._pair_matrix(U)
        all_pairs = float(np.einsum("ia,ab,ib->", U, M, U))
        diagonal = sum(form_scalar(self.tensor, u, u, u, u) for u in U)
        return self.scale * (all_pairs - diagonal)

    def gradient(self, w):
        U = self.rows(w)
        V = np.array([form_vector(self.tensor, u) for u in U])
        return (4.0 * self.scale * (U @ self._pair_matrix(U) - V)).reshape(-1)

    def hessian(self, w):
        U = self.rows(w)
        d = self.d
        M = self._pair_matrix(U)
        H = np.zeros((d * d, d * d))
        for i in range(d):
            si = slice(i * d, (i + 1) * d)
            H[si, si] = 4.0 * self.scale * (M - form_matrix(self.tensor, U[i]))
            for k in range(i + 1, d):
                sk = slice(k * d, (k + 1) * d)
                H[si, sk] = 8.0 * self.scale * form_bilinear(self.tensor, U[i], U[k])
                H[sk, si] = H[si, sk].T
        return H

    def sample_gradient(self, w, xs):
        X = np.atleast_2d(xs)
        P = X @ self.rows(w).T
        coef = P * (np.sum(P**2, axis=1, keepdims=True) - P**2)
        return (4.0 * self.scale * coef.T @ X / X.shape[0]).reshape(-1)

    # Closed forms in basis coordinates Z = U A^T, rotated back.

    def _h_sums(self, Z):
        """sum_{j != i} h(z_j, z_i) for every i."""
        S = Z**2
        G = S @ S.T
        return G.sum(axis=1) - np.diag(G)

    def _psi(self, Z):
        S = Z**2
        return (S.sum(axis=0)[None, :] - S) - self._h_sums(Z)[:, None]

    def closed_form_value(self, w):
        Z = self.basis_rows(w)
        return self.scale * float(np.sum(self._h_sums(Z)))

    def closed_form_multipliers(self, w):
        return 2.0 * self.scale * self._h_sums(self.basis_rows(w))

    def closed_form_chi(self, w):
        Z = self.basis_rows(w)
        chi_z = 2.0 * self.scale * 2.0 * Z * self._psi(Z)
        return self._rotation().T @ chi_z.reshape(-1)

    def closed_form_hessian(self, w):
        Z = self.basis_rows(w)
        d = self.d
        psi = self._psi(Z)
        M = np.zeros((d, d, d, d))  # indexed [i, k, i', k']
        for k in range(d):
            cross = 4.0 * np.outer(Z[:, k], Z[:, k])
            np.fill_diagonal(cross, 2.0 * psi[:, k])
            M[:, k, :, k] = cross
        R = self._rotation()
        return R.T @ (2.0 * self.scale * M.reshape(d * d, d * d)) @ R


class ReconstructionProblem(ConstrainedProblem):
    """min ||T - sum_i u_i^{(x)4}||_F^2 over d unit spheres."""

    kind = "reconstruction"

    def __init__(self, tensor: Tensor4):
        super().__init__(tensor, n_blocks=tensor.d)

    def value(self, w):
        residual = self.tensor.entries - rank_one_sum(self.rows(w)).entries
        return float(np.sum(residual**2))

    def _gradient_rows(self, U, V):
        G = U @ U.T
        return -8.0 * V + 8.0 * (G**3) @ U

    def gradient(self, w):
        U = self.rows(w)
        V = np.array([form_vector(self.tensor, u) for u in U])
        return self._gradient_rows(U, V).reshape(-1)

    def hessian(self, w):
        U = self.rows(w)
        d = self.d
        G = U @ U.T
        H = np.zeros((d * d, d * d))
        for i in range(d):
            si = slice(i * d, (i + 1) * d)
            n2 = G[i, i]
            others = [j for j in range(d) if j != i]
            block = -24.0 * form_matrix(self.tensor, U[i])
            block += 24.0 * np.einsum("j,ja,jb->ab", G[i, others] ** 2, U[others], U[others])
            block += 8.0 * (n2**3 * np.eye(d) + 6.0 * n2**2 * np.outer(U[i], U[i]))
            H[si, si] = block
            for k in others:
                sk = slice(k * d, (k + 1) * d)
                H[si, sk] = 8.0 * (3.0 * G[i, k] ** 2 * np.outer(U[k], U[i]) + G[i, k] ** 3 * np.eye(d))
        return H

    def sample_gradient(self, w, xs):
        X = np.atleast_2d(xs)
        U = self.rows(w)
        P = X @ U.T
        V = (P**3).T @ X / X.shape[0]
        return self._gradient_rows(U, V).reshape(-1)


class QuadraticObjective:
    """f(w) = f0 + g^T (w - w0) + 1/2 (w - w0)^T H (w - w0), unconstrained.

    A sample is an additive perturbation of the exact gradient.
    """

    constraints = None
    name = "quadratic"

    def __init__(self, w0, g, H, f0: float = 0.0, oracle_bound: float = 0.0, tol: float = 1e-12):
        self.w0 = np.asarray(w0, dtype=float)
        self.g = np.asarray(g, dtype=float)
        self.H = np.atleast_2d(np.asarray(H, dtype=float))
        n = self.w0.shape[0]
        if self.g.shape != (n,) or self.H.shape != (n, n):
            raise ValueError(f"shapes do not agree: w0 {self.w0.shape}, g {self.g.shape}, H {self.H.shape}")
        if np.max(np.abs(self.H - self.H.T), initial=0.0) > tol:
            raise ValueError("H must be symmetric")
        self.f0 = f0
        self.oracle_bound = oracle_bound

    @property
    def dim(self) -> int:
        return self.w0.shape[0]

    def value(self, w):
        s = np.asarray(w, dtype=float) - self.w0
        return float(self.f0 + self.g @ s + 0.5 * s @ self.H @ s)

    def gradient(self, w):
        return self.g + self.H @ (np.asarray(w, dtype=float) - self.w0)

    def hessian(self, w):
        return self.H.copy()

    def stochastic_gradient(self, w, sample=None):
        grad = self.gradient(w)
        return grad if sample is None else grad + np.asarray(sample, dtype=float)


def maxeig_objective(T: Tensor4) -> MaxEigProblem:
    return MaxEigProblem(T)


def reconstruction_objective(T: Tensor4) -> ReconstructionProblem:
    return ReconstructionProblem(T)


def correlation_objective(T: Tensor4, halved: bool = False) -> CorrelationProblem:
    return CorrelationProblem(T, halved=halved)


def quadratic_objective(w0, g, H, f0: float = 0.0) -> QuadraticObjective:
    return QuadraticObjective(w0, g, H, f0=f0)


OBJECTIVES = {
    "maxeig": maxeig_objective,
    "correlation": correlation_objective,
    "reconstruction": reconstruction_objective,
}


def make_objective(name: str, T: Tensor4) -> ConstrainedProblem:
    try:
        return OBJECTIVES[name](T)
    except KeyError:
        raise ValueError(f"unknown objective {name!r}; choose one of {sorted(OBJECTIVES)}") from None


def estimate_oracle_bound(
    problem,
    sampler,
    rng: np.random.Generator,
    n_probes: int = ORACLE_PROBES,
    margin: float = ORACLE_MARGIN,
) -> float:
    """margin x the largest ||SG(w) - grad f(w)|| seen at random feasible points."""
    worst = 0.0
    for _ in range(n_probes):
        w = problem.random_feasible(rng)
        deviation = problem.stochastic_gradient(w, sampler(rng)) - problem.gradient(w)
        worst = max(worst, float(np.linalg.norm(deviation)))
    logger.debug("%s: oracle bound %.4g from %d probes", problem.name, margin * worst, n_probes)
    return margin * worst


def estimate_smoothness(problem, rng: np.random.Generator, n_probes: int = 200, step: float = 1e-3) -> SmoothnessBudget:
    """B, beta and rho observed over random feasible points and nearby pairs."""
    B = beta = rho = 0.0
    for _ in range(n_probes):
        w = problem.random_feasible(rng)
        H = problem.hessian(w)
        B = max(B, abs(problem.value(w)))
        beta = max(beta, float(np.linalg.norm(H, 2)))
        w2 = problem.constraints.project(w + step * rng.standard_normal(w.shape))
        rho = max(rho, float(np.linalg.norm(problem.hessian(w2) - H, 2) / np.linalg.norm(w2 - w)))
    return SmoothnessBudget(B=B, beta=beta, rho=rho)


def nearest_known_minimum(problem: ConstrainedProblem, w: np.ndarray) -> tuple[np.ndarray, float]:
    """Closest analytic local minimum: +-a_i for maxeig, a signed permutation otherwise."""
    A = problem._require_basis().vectors
    Z = problem.basis_rows(w)
    if problem.kind == "maxeig":
        k = int(np.argmax(np.abs(Z[0])))
        point = np.sign(Z[0, k]) * A[k]
    else:
        _, cols = scipy.optimize.linear_sum_assignment(-np.abs(Z))
        signs = np.sign(Z[np.arange(problem.n_blocks), cols])
        signs[signs == 0] = 1.0
        point = (signs[:, None] * A[cols]).reshape(-1)
    return point, float(np.linalg.norm(np.asarray(w) - point))


def known_minima(problem: ConstrainedProblem, max_d: int = 6) -> list[np.ndarray]:
    """All analytic local minima (2d of them for maxeig, d! 2^d otherwise)."""
    A = problem._require_basis().vectors
    d = problem.d
    if problem.kind == "maxeig":
        return [s * A[k] for k in range(d) for s in (1.0, -1.0)]
    if d > max_d:
        raise ValueError(f"refusing to enumerate d! 2^d minima for d={d} > {max_d}")
    return [
        (np.array(signs)[:, None] * A[list(perm)]).reshape(-1)
        for perm in permutations(range(d))
        for signs in product((1.0, -1.0), repeat=d)
    ]
