"""Dense symmetric 4th-order tensors and their multilinear forms.

A Tensor4 stores all d^4 entries. When it was built from an orthonormal basis
the basis is kept alongside, and the contractions use it (O(d^2) work) unless
``dense=True`` is requested; the dense einsum path is the reference.
"""

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

ORTHO_TOL = 1e-10
FEASIBLE_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OrthoBasis:
    """Orthonormal vectors a_1..a_d, stored as the rows of a d x d array."""

    vectors: np.ndarray
    tol: float = ORTHO_TOL

    def __post_init__(self):
        vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        d = vectors.shape[0]
        if vectors.shape != (d, d):
            raise ValueError(f"basis must be d x d, got shape {vectors.shape}")
        gram_err = np.max(np.abs(vectors @ vectors.T - np.eye(d)))
        if gram_err > self.tol:
            raise ValueError(f"basis is not orthonormal (max |A A^T - I| = {gram_err:.3e} > {self.tol:.1e})")
        object.__setattr__(self, "vectors", _frozen(vectors))

    @property
    def d(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def standard(cls, d: int) -> "OrthoBasis":
        return cls(np.eye(d))

    @classmethod
    def random(cls, d: int, rng: np.random.Generator) -> "OrthoBasis":
        """Haar-random basis from the QR factorisation of a Gaussian matrix."""
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        signs = np.sign(np.diag(r))
        signs[signs == 0] = 1.0
        return cls((q * signs).T)


@dataclass(frozen=True, eq=False)
class ComponentMatrix:
    """d components u^(1)..u^(d), one per row; ``flat`` is U with U_ij = u^(i)_j."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        object.__setattr__(self, "rows", _frozen(rows))

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    @property
    def flat(self) -> np.ndarray:
        return self.rows.reshape(-1).copy()

    @classmethod
    def from_flat(cls, w: np.ndarray, d: int) -> "ComponentMatrix":
        return cls(np.asarray(w, dtype=float).reshape(-1, d))

    @classmethod
    def random(cls, d: int, rng: np.random.Generator, n_rows: int | None = None) -> "ComponentMatrix":
        g = rng.standard_normal((n_rows or d, d))
        return cls(g / np.linalg.norm(g, axis=1, keepdims=True))

    def is_feasible(self, tol: float = FEASIBLE_TOL) -> bool:
        return bool(np.all(np.abs(np.linalg.norm(self.rows, axis=1) - 1.0) <= tol))


@dataclass(frozen=True, eq=False)
class Tensor4:
    entries: np.ndarray
    basis: OrthoBasis | None = field(default=None)

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        d = round(entries.size ** 0.25)
        if d < 1 or d**4 != entries.size:
            raise ValueError(f"a 4th-order tensor needs d^4 entries, got {entries.size}")
        object.__setattr__(self, "entries", _frozen(entries.reshape(d, d, d, d)))
        if self.basis is not None and self.basis.d != d:
            raise ValueError(f"basis dimension {self.basis.d} does not match tensor dimension {d}")

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return self.entries.reshape(-1)

    def norm_sq(self) -> float:
        return float(np.sum(self.entries**2))

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        """Compare the entries under all 24 index permutations."""
        return all(
            np.max(np.abs(self.entries - self.entries.transpose(p))) <= tol
            for p in permutations(range(4))
        )


def make_orthogonal_tensor(basis: OrthoBasis | np.ndarray, tol: float = ORTHO_TOL) -> Tensor4:
    """T = sum_i a_i^{(x)4} for orthonormal a_i."""
    if not isinstance(basis, OrthoBasis):
        basis = OrthoBasis(basis, tol=tol)
    a = basis.vectors
    return Tensor4(np.einsum("ia,ib,ic,id->abcd", a, a, a, a), basis=basis)


def rank_one_sum(rows: np.ndarray | ComponentMatrix) -> Tensor4:
    """sum_i u_i^{(x)4} over the rows u_i."""
    u = rows.rows if isinstance(rows, ComponentMatrix) else np.atleast_2d(rows)
    return Tensor4(np.einsum("ia,ib,ic,id->abcd", u, u, u, u))


def _check_dims(T: Tensor4, *vectors: np.ndarray) -> None:
    for v in vectors:
        if np.shape(v) != (T.d,):
            raise ValueError(f"expected a vector of dimension {T.d}, got shape {np.shape(v)}")


def form_scalar(T: Tensor4, u, v, w, z, dense: bool = False) -> float:
    """T(u, v, w, z) = sum T_{j1 j2 j3 j4} u_j1 v_j2 w_j3 z_j4."""
    u, v, w, z = (np.asarray(x, dtype=float) for x in (u, v, w, z))
    _check_dims(T, u, v, w, z)
    if T.basis is not None and not dense:
        a = T.basis.vectors
        return float(np.sum((a @ u) * (a @ v) * (a @ w) * (a @ z)))
    return float(np.einsum("abcd,a,b,c,d->", T.entries, u, v, w, z))


def form_vector(T: Tensor4, u, v=None, w=None, dense: bool = False) -> np.ndarray:
    """T(I, u, v, w); with v and w omitted this is T(I, u, u, u)."""
    u = np.asarray(u, dtype=float)
    v = u if v is None else np.asarray(v, dtype=float)
    w = u if w is None else np.asarray(w, dtype=float)
    _check_dims(T, u, v, w)
    if T.basis is not None and not dense:
        a = T.basis.vectors
        return a.T @ ((a @ u) * (a @ v) * (a @ w))
    return np.einsum("abcd,b,c,d->a", T.entries, u, v, w)


def form_bilinear(T: Tensor4, v, w, dense: bool = False) -> np.ndarray:
    """T(I, I, v, w) as a d x d matrix."""
    v, w = np.asarray(v, dtype=float), np.asarray(w, dtype=float)
    _check_dims(T, v, w)
    if T.basis is not None and not dense:
        a = T.basis.vectors
        return (a.T * ((a @ v) * (a @ w))) @ a
    return np.einsum("abcd,c,d->ab", T.entries, v, w)


def form_matrix(T: Tensor4, u, dense: bool = False) -> np.ndarray:
    """T(I, I, u, u) = sum_i (u^T a_i)^2 a_i a_i^T."""
    return form_bilinear(T, u, u, dense=dense)


def contract_pair(T: Tensor4, P: np.ndarray, dense: bool = False) -> np.ndarray:
    """T(I, I, P) = sum_{cd} T_{abcd} P_cd for a d x d matrix P."""
    if T.basis is not None and not dense:
        a = T.basis.vectors
        return (a.T * np.einsum("ic,cd,id->i", a, P, a)) @ a
    return np.einsum("abcd,cd->ab", T.entries, P)


def to_basis_coordinates(basis: OrthoBasis, rows: np.ndarray) -> np.ndarray:
    """Rows expressed in the basis: z_i(k) = <a_k, u_i>."""
    return np.atleast_2d(rows) @ basis.vectors.T


def reconstruction_error(T: Tensor4, U: ComponentMatrix | np.ndarray) -> float:
    """||T - sum_i u_i^{(x)4}||_F^2 / ||T||_F^2."""
    norm_sq = T.norm_sq()
    if norm_sq == 0.0:
        raise ValueError("reconstruction error is undefined for a zero tensor")
    rows = U.rows if isinstance(U, ComponentMatrix) else np.asarray(U, dtype=float).reshape(-1, T.d)
    residual = T.entries - rank_one_sum(rows).entries
    return float(np.sum(residual**2) / norm_sq)


def save_tensor(T: Tensor4, path) -> None:
    """Plain text: a ``d=<n>`` header line then the d^4 entries row-major."""
    np.savetxt(path, T.flat, header=f"d={T.d}", comments="", fmt="%.17g")


def load_tensor(path) -> Tensor4:
    with open(path) as fh:
        header = fh.readline().strip()
    if not header.startswith("d="):
        raise ValueError(f"{path}: expected a 'd=<n>' header, got {header!r}")
    d = int(header[2:])
    flat = np.loadtxt(path, skiprows=1, ndmin=1)
    if flat.size != d**4:
        raise ValueError(f"{path}: header says d={d} but found {flat.size} entries")
    return Tensor4(flat)
