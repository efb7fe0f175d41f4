"""Samples and stochastic gradient oracles for the ICA model y = A x.

x is uniform over {+-1}^d and A is orthonormal. The auxiliary tensor Z is
never materialised outside of tests: it acts through the closed form

    Z(a, b, c, e) = <a,b><c,e> + <a,c><b,e> + <a,e><b,c>,

and E[1/2 (Z - y^{(x)4})] = sum_i a_i^{(x)4} where a_i are the columns of A.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np
import pandas as pd

from .tensor4 import OrthoBasis, Tensor4


@dataclass(frozen=True, eq=False)
class IcaModel:
    A: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        err = np.max(np.abs(A @ A.T - np.eye(A.shape[0])))
        if A.shape[0] != A.shape[1] or err > 1e-12:
            raise ValueError(f"mixing matrix must be square orthonormal (max |AA^T - I| = {err:.3e})")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def basis(self) -> OrthoBasis:
        """The components a_i are the columns of A."""
        return OrthoBasis(self.A.T)

    @classmethod
    def from_basis(cls, basis: OrthoBasis) -> "IcaModel":
        return cls(basis.vectors.T)


@dataclass(frozen=True)
class ZTensor:
    d: int

    def entry(self, i: int, j: int, k: int, l: int) -> float:
        if i == j == k == l:
            return 3.0
        if (i == j and k == l) or (i == k and j == l) or (i == l and j == k):
            return 1.0
        return 0.0

    def form(self, a, b, c, e) -> float:
        return float(np.dot(a, b) * np.dot(c, e) + np.dot(a, c) * np.dot(b, e) + np.dot(a, e) * np.dot(b, c))

    def dense(self) -> Tensor4:
        """All d^4 entries; for small-d test oracles only."""
        eye = np.eye(self.d)
        return Tensor4(
            np.einsum("ij,kl->ijkl", eye, eye) + np.einsum("ik,jl->ijkl", eye, eye) + np.einsum("il,jk->ijkl", eye, eye)
        )


def gen_ica_sample(model: IcaModel, rng: np.random.Generator) -> np.ndarray:
    x = rng.choice((-1.0, 1.0), size=model.d)
    return model.A @ x


def gen_ica_batch(model: IcaModel, rng: np.random.Generator, k: int) -> np.ndarray:
    """k samples as the rows of a k x d array."""
    x = rng.choice((-1.0, 1.0), size=(k, model.d))
    return x @ model.A.T


def gen_simple_sample(basis: OrthoBasis, rng: np.random.Generator) -> np.ndarray:
    """d^{1/4} a_i with i uniform, so that E[x^{(x)4}] = sum_i a_i^{(x)4}."""
    i = rng.integers(basis.d)
    return basis.d**0.25 * basis.vectors[i]


class SimpleSampler:
    """Batches of gen_simple_sample draws (rows)."""

    def __init__(self, basis: OrthoBasis, batch_size: int = 1):
        if batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {batch_size}")
        self.basis = basis
        self.batch_size = batch_size

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(self.basis.d, size=self.batch_size)
        return self.basis.d**0.25 * self.basis.vectors[idx]


class IcaSampler:
    def __init__(self, model: IcaModel, batch_size: int = 100):
        if batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {batch_size}")
        self.model = model
        self.batch_size = batch_size

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        return gen_ica_batch(self.model, rng, self.batch_size)


def z_minus_y4_form(y, u_i, u_j) -> float:
    """1/2 (Z - y^{(x)4})(u_i, u_i, u_j, u_j)."""
    y, u_i, u_j = (np.asarray(v, dtype=float) for v in (y, u_i, u_j))
    if not y.shape == u_i.shape == u_j.shape:
        raise ValueError(f"dimension mismatch: {y.shape}, {u_i.shape}, {u_j.shape}")
    z = np.dot(u_i, u_i) * np.dot(u_j, u_j) + 2.0 * np.dot(u_i, u_j) ** 2
    return 0.5 * (z - np.dot(u_i, y) ** 2 * np.dot(u_j, y) ** 2)


def _as_rows(U, d: int | None = None) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        n = round(np.sqrt(U.size)) if d is None else d
        U = U.reshape(-1, n)
    return U


def _shared_term(U: np.ndarray) -> np.ndarray:
    """sum_{j != i} (<u_j,u_j> u_i + 2 <u_i,u_j> u_j) for every i; O(d^3)."""
    G = U @ U.T
    n = np.diag(G)
    return (n.sum() - n)[:, None] * U + 2.0 * (G @ U) - 2.0 * n[:, None] * U


def ica_stochastic_gradient(U, y) -> np.ndarray:
    """ICA gradient for one sample, as a flat d^2 vector (block i = gradient in u_i).

    Block i is sum_{j != i} ||u_j||^2 u_i + 2 <u_i,u_j> u_j - <u_j,y>^2 <u_i,y> y,
    the unbiased gradient of the halved correlation objective.
    """
    U = _as_rows(U)
    y = np.asarray(y, dtype=float)
    if y.shape != (U.shape[1],):
        raise ValueError(f"sample has shape {y.shape}, components have dimension {U.shape[1]}")
    p = U @ y
    third = (p * (np.sum(p**2) - p**2))[:, None] * y[None, :]
    return (_shared_term(U) - third).reshape(-1)


def minibatch_gradient(U, samples) -> np.ndarray:
    """Mean of ica_stochastic_gradient over the rows of ``samples``; O(d^3 + k d^2)."""
    U = _as_rows(U)
    Y = np.atleast_2d(np.asarray(samples, dtype=float))
    if Y.size == 0:
        raise ValueError("mini-batch is empty")
    if Y.shape[1] != U.shape[1]:
        raise ValueError(f"samples have dimension {Y.shape[1]}, components have dimension {U.shape[1]}")
    P = Y @ U.T
    coef = P * (np.sum(P**2, axis=1, keepdims=True) - P**2)
    return (_shared_term(U) - coef.T @ Y / Y.shape[0]).reshape(-1)


class IcaOracle:
    """Stochastic gradient of any tensor objective with T estimated by 1/2 (Z - y^{(x)4}).

    For the correlation objective this is ica_stochastic_gradient (doubled
    for the unhalved view). ``batch_gradient`` can be swapped for tests.
    """

    def __init__(self, batch_gradient=minibatch_gradient):
        self.batch_gradient = batch_gradient

    def __call__(self, problem, w, samples) -> np.ndarray:
        Y = np.atleast_2d(samples)
        U = problem.rows(w)
        if problem.kind == "correlation":
            return 2.0 * problem.scale * self.batch_gradient(U, Y)
        # T(I,u,u,u) -> 1/2 (3 ||u||^2 u - mean <u,y>^3 y)
        P = Y @ U.T
        V = 0.5 * (3.0 * np.sum(U**2, axis=1, keepdims=True) * U - (P**3).T @ Y / Y.shape[0])
        if problem.kind == "maxeig":
            return -4.0 * V.reshape(-1)
        if problem.kind == "reconstruction":
            return problem._gradient_rows(U, V).reshape(-1)
        raise ValueError(f"no ICA oracle for objective {problem.kind!r}")


def ica_oracle_for(problem, model: IcaModel, batch_size: int = 100, batch_gradient=minibatch_gradient):
    """Copy of ``problem`` fed by mini-batches from the ICA model."""
    return problem.with_oracle(IcaOracle(batch_gradient), probe_sampler=IcaSampler(model, batch_size))


def all_sign_vectors(d: int) -> np.ndarray:
    """The 2^d points of {+-1}^d as rows."""
    return np.array(list(product((-1.0, 1.0), repeat=d)))


def exhaustive_mean(fn, model: IcaModel):
    """Exact E[fn(y)] over the 2^d equally likely sources."""
    values = [fn(model.A @ x) for x in all_sign_vectors(model.d)]
    return np.mean(values, axis=0)


def dump_samples(samples: np.ndarray, path) -> None:
    """One sample per row, columns y0..y{d-1}."""
    samples = np.atleast_2d(samples)
    df = pd.DataFrame(samples, columns=[f"y{k}" for k in range(samples.shape[1])])
    df.to_csv(path, index=False, float_format="%.17g")
