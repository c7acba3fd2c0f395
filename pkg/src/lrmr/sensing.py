"""Linear measurement operators and Gaussian noise models.

A sensing operator maps an n-by-p matrix X to m <= n*p real measurements
y = a @ vec(X). The dense matrix `a` is the ground truth for every code
path; selection operators additionally carry their sampled positions so
application stays cheap and exactly consistent with the dense form.

Factored forms of the operator are what the alternating solver works with:
with X = L @ R, the same measurements can be written as a linear map acting
on vec(R) (L held fixed) or on vec(L) (R held fixed).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .numerics import vec

__all__ = [
    "SensingOperator",
    "IidGaussian",
    "CorrelatedGaussian",
    "make_gaussian_operator",
    "make_selection_operator",
    "apply",
    "right_factor_operator",
    "left_factor_operator",
    "sample_noise",
    "measure",
    "apply_inverse_covariance",
    "prewhiten",
]


@dataclass(frozen=True)
class SensingOperator:
    """Dense measurement map together with the matrix shape it acts on.

    a         -- (m, n*p) sensing matrix, rows applied against vec(X)
    n, p      -- shape of the matrices being measured
    selection -- flat column-major sample positions when the operator is a
                 pure entry selector, else None
    """

    a: np.ndarray
    n: int
    p: int
    selection: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        object.__setattr__(self, "a", a)
        if a.ndim != 2:
            raise DomainError("sensing matrix must be 2-d")
        if self.n < 1 or self.p < 1:
            raise DomainError("matrix dimensions must be positive")
        if a.shape[1] != self.n * self.p:
            raise DomainError(
                f"sensing matrix has {a.shape[1]} columns, expected n*p = {self.n * self.p}"
            )
        if a.shape[0] < 1:
            raise DomainError("sensing matrix must have at least one row")
        if not np.all(np.isfinite(a)):
            raise DomainError("sensing matrix contains non-finite entries")

    @property
    def m(self):
        return self.a.shape[0]


@dataclass(frozen=True)
class IidGaussian:
    """White Gaussian noise with per-measurement variance sigma2 (0 = noiseless)."""

    sigma2: float

    def __post_init__(self):
        if not np.isfinite(self.sigma2) or self.sigma2 < 0:
            raise DomainError("noise variance must be finite and nonnegative")


@dataclass(frozen=True)
class CorrelatedGaussian:
    """Zero-mean Gaussian noise with a full covariance matrix (must be s.p.d.)."""

    cov: np.ndarray
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise DomainError("covariance must be square")
        if not np.allclose(cov, cov.T, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise DomainError("covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise DomainError("covariance must be positive definite") from exc
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", chol)


def make_gaussian_operator(n, p, m, rng):
    """Dense operator with i.i.d. N(0, 1/m) entries."""
    if m < 1:
        raise DomainError("number of measurements must be positive")
    a = rng.normal(0.0, 1.0 / np.sqrt(m), size=(m, n * p))
    return SensingOperator(a, n, p)


def make_selection_operator(n, p, omega):
    """Entry-sampling operator for positions omega = [(i, j), ...] (0-based).

    Row k of the dense matrix is the indicator of vec position i + j*n, so
    applying the operator returns the sampled entries in the order given.
    """
    omega = list(omega)
    if not omega:
        raise DomainError("selection set must be nonempty")
    flat = np.empty(len(omega), dtype=np.intp)
    seen = set()
    for k, (i, j) in enumerate(omega):
        if not (0 <= i < n and 0 <= j < p):
            raise DomainError(f"selection position ({i}, {j}) outside a {n}x{p} matrix")
        if (i, j) in seen:
            raise DomainError(f"selection position ({i}, {j}) repeated")
        seen.add((i, j))
        flat[k] = i + j * n
    a = np.zeros((len(omega), n * p))
    a[np.arange(len(omega)), flat] = 1.0
    return SensingOperator(a, n, p, selection=flat)


def apply(op, x):
    """Measure a matrix: a @ vec(x), with a fast gather for selection operators."""
    x = np.asarray(x, dtype=float)
    if x.shape != (op.n, op.p):
        raise DomainError(f"operand shape {x.shape} does not match operator ({op.n}, {op.p})")
    v = vec(x)
    if op.selection is not None:
        return v[op.selection].copy()
    return op.a @ v


def right_factor_operator(op, left):
    """Matrix f with f @ vec(R) == apply(op, left @ R); shape (m, r*p).

    Column l + j*r of f is the response to R having a one at (l, j), i.e.
    the operator a composed with kron(I_p, left).
    """
    left = np.asarray(left, dtype=float)
    if left.shape[0] != op.n:
        raise DomainError(f"left factor has {left.shape[0]} rows, expected {op.n}")
    m, r = op.m, left.shape[1]
    a3 = op.a.reshape(m * op.p, op.n)
    return (a3 @ left).reshape(m, op.p * r)


def left_factor_operator(op, right):
    """Matrix f with f @ vec(L) == apply(op, L @ right); shape (m, n*r).

    Column i + l*n of f is the response to L having a one at (i, l), i.e.
    the operator a composed with kron(right.T, I_n).
    """
    right = np.asarray(right, dtype=float)
    if right.shape[1] != op.p:
        raise DomainError(f"right factor has {right.shape[1]} columns, expected {op.p}")
    m, r = op.m, right.shape[0]
    a3 = op.a.reshape(m, op.p, op.n)
    f = np.einsum("kji,lj->kli", a3, right, optimize=True)
    return f.reshape(m, r * op.n)


def sample_noise(noise, m, rng):
    """Draw one noise vector of length m."""
    if isinstance(noise, IidGaussian):
        if noise.sigma2 == 0.0:
            return np.zeros(m)
        return np.sqrt(noise.sigma2) * rng.standard_normal(m)
    if isinstance(noise, CorrelatedGaussian):
        if noise.cov.shape[0] != m:
            raise DomainError(f"covariance order {noise.cov.shape[0]} does not match m={m}")
        return noise.chol @ rng.standard_normal(m)
    raise DomainError(f"unknown noise model {type(noise).__name__}")


def measure(op, x, noise, rng):
    """Noisy measurements apply(op, x) + noise draw."""
    return apply(op, x) + sample_noise(noise, op.m, rng)


def apply_inverse_covariance(noise, b, m):
    """Compute C^{-1} @ b for the noise covariance C of order m."""
    b = np.asarray(b, dtype=float)
    if isinstance(noise, IidGaussian):
        if noise.sigma2 <= 0.0:
            raise DomainError("noise variance must be positive to weight by the inverse covariance")
        return b / noise.sigma2
    if isinstance(noise, CorrelatedGaussian):
        if noise.cov.shape[0] != m:
            raise DomainError(f"covariance order {noise.cov.shape[0]} does not match m={m}")
        return np.linalg.solve(noise.cov, b)
    raise DomainError(f"unknown noise model {type(noise).__name__}")


def prewhiten(op, y, cov):
    """Turn correlated-noise measurements into white ones.

    Multiplies both the operator and the measurements by the symmetric
    inverse square root of cov, so ordinary least squares on the result is
    the covariance-weighted least squares on the original.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (op.m, op.m):
        raise DomainError(f"covariance shape {cov.shape} does not match m={op.m}")
    w, q = np.linalg.eigh(0.5 * (cov + cov.T))
    if w[0] <= op.m * np.finfo(float).eps * max(w[-1], 0.0) or w[0] <= 0.0:
        raise DomainError("covariance is not positive definite")
    isqrt = (q / np.sqrt(w)) @ q.T
    y = np.asarray(y, dtype=float).ravel()
    if y.size != op.m:
        raise DomainError(f"measurement vector length {y.size} does not match m={op.m}")
    return SensingOperator(isqrt @ op.a, op.n, op.p), isqrt @ y
