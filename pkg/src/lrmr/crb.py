"""Cramer-Rao bounds on the reconstruction error of low-rank matrices.

All bounds are on E ||X - Xhat||_F^2 for unbiased estimators under Gaussian
measurement noise. The unstructured bound constrains only the rank, through
an orthonormal basis P of the rank-preserving perturbations at X; it exists
only when the sensing operator restricted to that tangent space has full
column rank, and the result carries that validity verdict instead of a
silently meaningless number. Structured bounds (Hankel recurrence
parameters, p.s.d. factor) chain the measurement Fisher information through
the Jacobian of the parametrization.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import numerics, sensing, structures
from .errors import DomainError

__all__ = [
    "CrbResult",
    "TangentBasis",
    "tangent_basis",
    "fim",
    "crb_unstructured",
    "crb_hankel",
    "crb_psd",
    "crb_to_srer_bound",
]

# Numerical rank threshold for the truth matrix: sigma_r / sigma_1 must
# exceed this for the tangent space at rank r to be well defined.
_RANK_TOL = 1e-10

# Condition-number ceiling for inverting the structured Fisher information.
_COND_LIMIT = 1e12

# Allowed relative leakage of the Jacobian outside the information range.
_RANGE_LEAK_TOL = 1e-6


@dataclass(frozen=True)
class CrbResult:
    """A bound value plus the verdict on whether it exists.

    When valid is False the value is NaN and diagnostic says which condition
    failed; an invalid bound is a finding about the measurement regime, not
    an error.
    """

    value: float
    valid: bool
    diagnostic: str = ""


@dataclass(frozen=True)
class TangentBasis:
    """Orthonormal basis of rank-preserving perturbation directions at X.

    basis has r(n+p) - r^2 columns: spans of U0 B V1', U0 A V0' and
    U1 C V0' in vectorized form, built from a full SVD X = U S V'.
    """

    basis: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    v0: np.ndarray
    v1: np.ndarray


def tangent_basis(x, r):
    """Tangent-space basis of the rank-r matrices at x.

    Requires x to have numerical rank at least r (sigma_r / sigma_1 above
    1e-10); otherwise the tangent space is not defined and a DomainError
    reports the offending singular values.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DomainError("tangent_basis expects a matrix")
    n, p = x.shape
    if not 1 <= r <= min(n, p):
        raise DomainError(f"rank r={r} out of range for shape {x.shape}")
    u, s, vt = np.linalg.svd(x)
    if s[0] <= 0.0 or s[r - 1] <= _RANK_TOL * s[0]:
        raise DomainError(
            f"matrix has numerical rank below {r}: sigma_{r}/sigma_1 = "
            f"{(s[r - 1] / s[0]) if s[0] > 0 else 0.0:.3e}"
        )
    v = vt.T
    u0, u1 = u[:, :r], u[:, r:]
    v0, v1 = v[:, :r], v[:, r:]
    basis = np.hstack([np.kron(v1, u0), np.kron(v0, u0), np.kron(v0, u1)])
    return TangentBasis(basis, u0, u1, v0, v1)


def fim(op, noise, delta):
    """Fisher information of parameters with measurement Jacobian delta.

    delta has one row per parameter and n*p columns (the derivative of
    vec(X) with respect to that parameter); the measurement map Jacobian is
    then a @ delta.T and the information matrix is its covariance-weighted
    Gram matrix, symmetrized against rounding.
    """
    delta = np.asarray(delta, dtype=float)
    if delta.ndim != 2 or delta.shape[1] != op.n * op.p:
        raise DomainError(f"jacobian must have n*p = {op.n * op.p} columns")
    b = op.a @ delta.T
    j = b.T @ sensing.apply_inverse_covariance(noise, b, op.m)
    return 0.5 * (j + j.T)


def crb_unstructured(op, noise, x, r):
    """Rank-constrained bound tr((P' A' C^{-1} A P)^{-1}).

    Valid only when a @ P has full column rank r(n+p) - r^2, i.e. the
    operator separates all tangent directions; otherwise returns an invalid
    result whose diagnostic reports the rank found and the rank required.
    """
    tb = tangent_basis(x, r)
    t_dim = tb.basis.shape[1]
    ap = op.a @ tb.basis
    sv = np.linalg.svd(ap, compute_uv=False)
    cutoff = max(ap.shape) * numerics.EPS * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > cutoff))
    if rank < t_dim:
        return CrbResult(
            math.nan,
            False,
            f"operator rank {rank} on the tangent space, need {t_dim}",
        )
    gram = ap.T @ sensing.apply_inverse_covariance(noise, ap, op.m)
    gram = 0.5 * (gram + gram.T)
    value = float(np.trace(np.linalg.inv(gram)))
    return CrbResult(value, True, f"operator rank {rank} on the tangent space, need {t_dim}")


def crb_hankel(op, noise, params, n, p):
    """Bound for Hankel matrices generated by an order-r recurrence.

    Chains the sequence Jacobian through the Hankel basis: with
    vec(X) = S g(a, b), the bound is tr(D' J^{-1} D) for D = (S dg)' and
    J the Fisher information of (a, b). Invalid when J is singular or its
    condition number reaches 1e12.
    """
    if (n, p) != (op.n, op.p):
        raise DomainError(f"matrix shape ({n}, {p}) does not match operator ({op.n}, {op.p})")
    dg = structures.hankel_gradient(params, n, p)
    s = structures.linear_basis("hankel", n, p)
    delta = (s @ dg).T
    j = fim(op, noise, delta)
    w = np.linalg.eigvalsh(j)
    if w[0] <= 0.0 or w[-1] >= _COND_LIMIT * w[0]:
        return CrbResult(
            math.nan,
            False,
            f"information matrix ill conditioned: eigenvalues span [{w[0]:.3e}, {w[-1]:.3e}]",
        )
    value = float(np.sum(delta * np.linalg.solve(j, delta)))
    return CrbResult(value, True, f"information matrix condition {w[-1] / w[0]:.3e}")


def crb_psd(op, noise, m_factor):
    """Bound for p.s.d. matrices X = M M' parametrized by their factor.

    The factor parametrization is overcomplete (M Q gives the same X for
    any orthogonal Q), so the information matrix is rank deficient by
    construction and a pseudoinverse is used. The bound exists only when
    the Jacobian lies in the range of the information matrix; the leakage
    ||(I - J J^+) D||_F is checked against 1e-6 ||D||_F.
    """
    m_factor = np.asarray(m_factor, dtype=float)
    if m_factor.ndim != 2:
        raise DomainError("factor must be a matrix")
    if op.n != op.p or m_factor.shape[0] != op.n:
        raise DomainError(
            f"factor rows {m_factor.shape[0]} must match a square operator, got ({op.n}, {op.p})"
        )
    delta = structures.psd_gradient(m_factor).T
    j = fim(op, noise, delta)
    j_pinv = numerics.pinv(j)
    leak = np.linalg.norm(delta - j @ (j_pinv @ delta))
    scale = np.linalg.norm(delta)
    if scale == 0.0 or leak > _RANGE_LEAK_TOL * scale:
        return CrbResult(
            math.nan,
            False,
            f"jacobian leaks outside the information range: {leak:.3e} vs {scale:.3e}",
        )
    value = float(np.sum(delta * (j_pinv @ delta)))
    return CrbResult(value, True, f"range leakage {leak / scale:.3e}")


def crb_to_srer_bound(crb_values, signal_energies):
    """Bound on the signal-to-reconstruction-error ratio, in dB.

    Pairs mean signal energy against mean bound value:
    10 log10(mean(energy) / mean(crb)). Pass valid bound values only.
    """
    crb_values = np.asarray(crb_values, dtype=float).ravel()
    signal_energies = np.asarray(signal_energies, dtype=float).ravel()
    if crb_values.size == 0 or crb_values.size != signal_energies.size:
        raise DomainError("need matching, nonempty bound and energy lists")
    if np.any(~np.isfinite(crb_values)) or np.any(crb_values <= 0):
        raise DomainError("bound values must be finite and positive")
    if np.any(signal_energies <= 0):
        raise DomainError("signal energies must be positive")
    return 10.0 * math.log10(float(np.mean(signal_energies)) / float(np.mean(crb_values)))
