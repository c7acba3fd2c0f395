"""Dense linear-algebra kernels with fixed tolerances and sign conventions.

Every routine here is deterministic: the same input yields the same output
bit for bit on a given platform. Solvers and Monte Carlo sweeps rely on this
for reproducibility, so keep anything stochastic out of this module.

Vectorization is column-major throughout: vec stacks columns, mat undoes it.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "EPS",
    "TruncatedSvd",
    "vec",
    "mat",
    "svd_trunc",
    "pinv",
    "sym_eig_trunc",
    "commutation_matrix",
]

EPS = float(np.finfo(np.float64).eps)


def vec(m):
    """Stack the columns of a matrix into a single vector."""
    return np.asarray(m, dtype=float).reshape(-1, order="F")


def mat(v, rows, cols):
    """Rebuild a rows-by-cols matrix from a column-stacked vector."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size != rows * cols:
        raise DomainError(
            f"cannot reshape a vector of length {v.size} into {rows}x{cols}"
        )
    return v.reshape((rows, cols), order="F")


def _fix_signs(u, v=None):
    """Flip column signs so each column's largest-magnitude entry is >= 0.

    Ties go to the lowest index. The paired matrix v, when given, flips with
    u so any product u @ diag(s) @ v.T is unchanged.
    """
    for k in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, k])))
        if u[i, k] < 0:
            u[:, k] = -u[:, k]
            if v is not None:
                v[:, k] = -v[:, k]
    return u, v


@dataclass(frozen=True)
class TruncatedSvd:
    """Leading singular triplets: u (n, r), sigma (r,), v (p, r)."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self):
        """Best rank-r approximation u @ diag(sigma) @ v.T."""
        return (self.u * self.sigma) @ self.v.T


def svd_trunc(z, r):
    """Top-r singular triplets of z under a fixed sign convention.

    The sign convention (largest-magnitude entry of each left singular
    vector made nonnegative, right vector flipped in tandem) removes the
    sign ambiguity of the SVD so repeated runs agree exactly.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise DomainError("svd_trunc expects a matrix")
    if not 1 <= r <= min(z.shape):
        raise DomainError(f"rank r={r} out of range for shape {z.shape}")
    u, s, vt = np.linalg.svd(z, full_matrices=False)
    u, v = _fix_signs(u[:, :r].copy(), vt[:r].T.copy())
    return TruncatedSvd(u, s[:r].copy(), v)


def pinv(a):
    """Moore-Penrose pseudoinverse.

    Singular values at or below max(a.shape) * eps relative to the largest
    are treated as zero, so rank-deficient inputs are handled without
    blowing up.
    """
    a = np.asarray(a, dtype=float)
    return np.linalg.pinv(a, rcond=max(a.shape) * EPS)


def sym_eig_trunc(h, r):
    """Top-r eigenpairs of a symmetric matrix, eigenvalues descending.

    The input is symmetrized as (h + h.T) / 2 before factorization to guard
    against rounding asymmetry. Returns (q, w) with q (n, r) orthonormal and
    w (r,) sorted in descending order; eigenvalues may be negative.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DomainError("sym_eig_trunc expects a square matrix")
    n = h.shape[0]
    if not 1 <= r <= n:
        raise DomainError(f"rank r={r} out of range for order {n}")
    w, q = np.linalg.eigh(0.5 * (h + h.T))
    q = q[:, ::-1][:, :r].copy()
    w = w[::-1][:r].copy()
    _fix_signs(q)
    return q, w


def commutation_matrix(n, r):
    """Permutation t of order n*r with t @ vec(m) == vec(m.T) for n-by-r m."""
    if n < 1 or r < 1:
        raise DomainError("commutation_matrix needs positive dimensions")
    size = n * r
    cols = np.arange(size)
    i, j = cols % n, cols // n
    t = np.zeros((size, size))
    t[j + i * r, cols] = 1.0
    return t
