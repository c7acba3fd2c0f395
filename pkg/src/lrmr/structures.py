"""Matrix structure: tags, projections, and exact low-rank parametrizations.

Linearly structured families (Hankel, Toeplitz, arbitrary subspaces) are
described by a basis S with vec(X) = S @ theta; projecting onto the family
is least squares in theta. The p.s.d. cone intersected with a rank budget is
handled through a truncated eigendecomposition.

A rank-r Hankel matrix is generated exactly by an order-r linear recurrence:
its defining sequence is h_k = b' phi^k e1 with phi the companion matrix of
the coefficient vector a. The parameter vector (a, b) is what the structured
Cramer-Rao bound differentiates through, so the gradient here must match the
generator to machine precision.
"""

from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import DomainError, UnstableRecurrenceError
from .numerics import mat, vec

__all__ = [
    "StructureSpec",
    "UNSTRUCTURED",
    "HANKEL",
    "TOEPLITZ",
    "PSD",
    "linear_subspace",
    "HankelParams",
    "linear_basis",
    "project_linear",
    "project_psd",
    "impulse_response",
    "hankel_from_params",
    "hankel_gradient",
    "psd_gradient",
    "prony_fit",
    "PRONY_ON_NOISE",
    "UNIT_CIRCLE_POLES",
    "generate_hankel_lowrank",
    "generate_psd_lowrank",
]

# Impulse sequences beyond this magnitude are treated as overflow.
_OVERFLOW_LIMIT = 1e12


@dataclass(frozen=True)
class StructureSpec:
    """Tag selecting the constraint set a solve or bound works against.

    kind is one of "unstructured", "hankel", "toeplitz", "psd", "linear";
    basis carries the subspace matrix for kind == "linear" only.
    """

    kind: str
    basis: np.ndarray | None = None


UNSTRUCTURED = StructureSpec("unstructured")
HANKEL = StructureSpec("hankel")
TOEPLITZ = StructureSpec("toeplitz")
PSD = StructureSpec("psd")


def linear_subspace(s):
    """Structure spec for an arbitrary linear family vec(X) = s @ theta."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 2:
        raise DomainError("subspace basis must be a matrix")
    if np.linalg.matrix_rank(s) < s.shape[1]:
        raise DomainError("subspace basis must have full column rank")
    return StructureSpec("linear", s)


@dataclass(frozen=True)
class HankelParams:
    """Recurrence coefficients a and output weights b, both length r.

    The generated sequence is h_k = b' phi^k e1 where phi is the companion
    matrix with first row -a and ones on the subdiagonal.
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.ndim != 1 or b.ndim != 1 or len(a) != len(b):
            raise DomainError("coefficients a and weights b must be vectors of equal length")
        if len(a) < 1:
            raise DomainError("recurrence order must be at least 1")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise DomainError("parameters must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def order(self):
        return len(self.a)


def linear_basis(kind, n, p):
    """0/1 basis S with vec(X) = S @ theta for Hankel or Toeplitz matrices.

    Hankel: theta indexed by anti-diagonal, X[i, j] = theta[i + j].
    Toeplitz: theta indexed by diagonal offset, X[i, j] = theta[i - j + p - 1].
    Each column of S is the indicator of one anti-diagonal (or diagonal), so
    the columns are orthogonal and S has full column rank n + p - 1.
    """
    kind = getattr(kind, "kind", kind)
    if n < 1 or p < 1:
        raise DomainError("matrix dimensions must be positive")
    flat = np.arange(n * p)
    i, j = flat % n, flat // n
    if kind == "hankel":
        cols = i + j
    elif kind == "toeplitz":
        cols = i - j + p - 1
    else:
        raise DomainError(f"no banded basis for structure kind {kind!r}")
    s = np.zeros((n * p, n + p - 1))
    s[flat, cols] = 1.0
    return s


def project_linear(s, z):
    """Orthogonal projection of z onto the family vec(X) = s @ theta."""
    z = np.asarray(z, dtype=float)
    s = np.asarray(s, dtype=float)
    if s.shape[0] != z.size:
        raise DomainError(f"basis has {s.shape[0]} rows, expected {z.size}")
    if np.linalg.matrix_rank(s) < s.shape[1]:
        raise DomainError("subspace basis must have full column rank")
    theta = numerics.pinv(s) @ vec(z)
    return mat(s @ theta, z.shape[0], z.shape[1])


def project_psd(z, r):
    """Nearest (Frobenius) p.s.d. matrix of rank at most r.

    Symmetrizes, keeps the top-r eigenpairs, and clips negative eigenvalues
    to zero.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[0] != z.shape[1]:
        raise DomainError("p.s.d. projection needs a square matrix")
    q, w = numerics.sym_eig_trunc(z, r)
    w = np.maximum(w, 0.0)
    return (q * w) @ q.T


def _impulse_states(a, length):
    """States phi^k e1 for k = 0 .. length-1, via the companion recurrence."""
    r = len(a)
    states = np.zeros((length, r))
    v = np.zeros(r)
    v[0] = 1.0
    for k in range(length):
        states[k] = v
        v = np.concatenate(([-(a @ v)], v[:-1]))
    return states


def impulse_response(params, length):
    """First `length` terms of h_k = b' phi^k e1.

    The first r terms come from the companion states directly; from k = r on
    the sequence obeys h_k = -(a_1 h_{k-1} + ... + a_r h_{k-r}), which is
    cheaper and numerically identical. Raises UnstableRecurrenceError once
    any term exceeds the overflow guard.
    """
    a, b, r = params.a, params.b, params.order
    h = np.zeros(length)
    head = min(r, length)
    h[:head] = _impulse_states(a, head) @ b
    if np.any(np.abs(h[:head]) > _OVERFLOW_LIMIT):
        raise UnstableRecurrenceError(
            f"impulse sequence overflowed within the first {head} terms for a={a}"
        )
    for k in range(r, length):
        h[k] = -(a @ h[k - r : k][::-1])
        if abs(h[k]) > _OVERFLOW_LIMIT:
            raise UnstableRecurrenceError(
                f"impulse sequence overflowed at term {k} (|h| > {_OVERFLOW_LIMIT:g}) for a={a}"
            )
    return h


def hankel_from_params(params, n, p):
    """The n-by-p Hankel matrix X[i, j] = h_{i+j} of the parametrized sequence."""
    h = impulse_response(params, n + p - 1)
    return h[np.add.outer(np.arange(n), np.arange(p))]


def hankel_gradient(params, n, p):
    """Jacobian of the length n+p-1 sequence with respect to (a, b).

    Returns an (n+p-1, 2r) matrix, a-columns first. The b-block is just the
    companion states (h is linear in b). The a-block propagates the state
    sensitivity d(phi^k e1)/da alongside the state itself; the head terms
    h_0 .. h_{r-1} depend on a too (through phi), so seeding the recurrence
    derivative with zeros would be wrong for order >= 2.
    """
    a, b, r = params.a, params.b, params.order
    length = n + p - 1
    states = _impulse_states(a, length)
    grad_a = np.zeros((length, r))
    d = np.zeros((r, r))
    for k in range(length):
        grad_a[k] = b @ d
        top = -(a @ d) - states[k]
        d = np.vstack((top, d[:-1]))
    return np.hstack((grad_a, states))


def psd_gradient(m_factor):
    """Jacobian of vec(M M') with respect to vec(M); shape (n^2, n*r)."""
    m_factor = np.asarray(m_factor, dtype=float)
    if m_factor.ndim != 2:
        raise DomainError("factor must be a matrix")
    n, r = m_factor.shape
    t = numerics.commutation_matrix(n, r)
    return np.kron(np.eye(n), m_factor) @ t + np.kron(m_factor, np.eye(n))


def prony_fit(h, r):
    """Fit an order-r recurrence to a sequence by linear prediction.

    Solves the least-squares prediction system for a, clamps any root of
    z^r + a_1 z^{r-1} + ... + a_r outside the unit circle back to modulus
    one (keeping its phase) so the fitted model cannot diverge, then fits b
    to the sequence by least squares on the companion states.
    """
    h = np.asarray(h, dtype=float).ravel()
    if r < 1:
        raise DomainError("recurrence order must be at least 1")
    if len(h) < 2 * r:
        raise DomainError(f"need at least 2r = {2 * r} samples, got {len(h)}")
    pred = np.column_stack([h[r - 1 - l : len(h) - 1 - l] for l in range(r)])
    if np.linalg.matrix_rank(pred) < r:
        raise DomainError("degenerate prediction system: effective order below r")
    a_fit = np.linalg.lstsq(pred, -h[r:], rcond=None)[0]
    roots = np.roots(np.concatenate(([1.0], a_fit)))
    mod = np.abs(roots)
    outside = mod > 1.0
    if np.any(outside):
        roots = np.where(outside, roots / np.where(mod > 0, mod, 1.0), roots)
        a_fit = np.real(np.poly(roots))[1:]
    states = _impulse_states(a_fit, len(h))
    b_fit = np.linalg.lstsq(states, h, rcond=None)[0]
    return HankelParams(a_fit, b_fit)


PRONY_ON_NOISE = "prony_on_noise"
UNIT_CIRCLE_POLES = "unit_circle_poles"


def _unit_circle_params(n, p, r, rng):
    """Parameters whose poles sit exactly on the unit circle.

    Complex poles come in conjugate pairs at uniform random angles with
    standard normal amplitudes (real and imaginary parts); an odd order adds
    one real pole at +1 or -1. The resulting sequence neither decays nor
    blows up, so every anti-diagonal carries comparable energy.
    """
    pairs, odd = divmod(r, 2)
    k = np.arange(n + p - 1)
    h = np.zeros(n + p - 1)
    poles = np.exp(1j * rng.uniform(0.0, np.pi, size=pairs))
    for z in poles:
        c = rng.standard_normal() + 1j * rng.standard_normal()
        h += 2.0 * np.real(c * z**k)
    roots = np.concatenate([poles, np.conj(poles)])
    if odd:
        z0 = -1.0 if rng.standard_normal() < 0 else 1.0
        h += rng.standard_normal() * np.real(z0**k)
        roots = np.append(roots, z0)
    a = np.real(np.poly(roots))[1:]
    states = _impulse_states(a, len(h))
    b = np.linalg.lstsq(states, h, rcond=None)[0]
    return HankelParams(a, b)


def generate_hankel_lowrank(n, p, r, method=PRONY_ON_NOISE, rng=None, max_attempts=10):
    """Random n-by-p Hankel matrix of rank at most r with its exact parameters.

    "prony_on_noise" fits the recurrence to an i.i.d. standard normal
    sequence; "unit_circle_poles" draws poles on the unit circle directly.
    Either way the returned matrix is rebuilt from the fitted parameters, so
    (x, params) satisfy x == hankel_from_params(params, n, p) exactly.

    Draws whose fit degenerates or whose r-th singular value falls below
    1e-8 of the largest are retried (fresh randomness) up to max_attempts
    times, keeping downstream rank-r bounds well posed.
    """
    if method not in (PRONY_ON_NOISE, UNIT_CIRCLE_POLES):
        raise DomainError(f"unknown generator method {method!r}")
    if rng is None:
        rng = np.random.default_rng()
    if not 1 <= r <= min(n, p):
        raise DomainError(f"rank r={r} out of range for a {n}x{p} matrix")
    last = "no attempts made"
    for _ in range(max_attempts):
        try:
            if method == PRONY_ON_NOISE:
                params = prony_fit(rng.standard_normal(n + p - 1), r)
            else:
                params = _unit_circle_params(n, p, r, rng)
            x = hankel_from_params(params, n, p)
        except DomainError as exc:
            last = str(exc)
            continue
        sv = np.linalg.svd(x, compute_uv=False)
        if sv[0] <= 0.0 or sv[r - 1] <= 1e-8 * sv[0]:
            last = "degenerate draw: numerical rank below r"
            continue
        return x, params
    raise DomainError(f"hankel generator failed after {max_attempts} attempts: {last}")


def generate_psd_lowrank(n, r, rng=None):
    """Random p.s.d. matrix M @ M' with M an n-by-r standard normal factor."""
    if rng is None:
        rng = np.random.default_rng()
    if not 1 <= r <= n:
        raise DomainError(f"rank r={r} out of range for order {n}")
    m_factor = rng.standard_normal((n, r))
    return m_factor @ m_factor.T, m_factor
