"""Alternating least squares for low-rank reconstruction.

The unknown matrix is factored as X = L @ R and the measurement residual
J(L, R) = ||y - A vec(L R)||^2 is minimized one factor at a time; each half
step is an exact linear least-squares solve, so J never increases in the
unstructured case. Structure is enforced by lift-and-project: after each
half step the current product is projected onto the structured set and the
factor is refit to the projection. Projection can raise J, so the loop keeps
the best iterate seen and stops as soon as J fails to decrease.
"""

from dataclasses import dataclass

import numpy as np

from . import numerics, sensing, structures
from .errors import DomainError

__all__ = [
    "SolverOptions",
    "FactorPair",
    "SolverReport",
    "TERMINATION_CONVERGED",
    "TERMINATION_MAX_ITERS",
    "TERMINATION_RESIDUAL_INCREASE",
    "init_factors",
    "residual",
    "solve_r_step",
    "solve_l_step",
    "als_unstructured",
    "als_structured",
]

TERMINATION_CONVERGED = "converged"
TERMINATION_MAX_ITERS = "max_iters"
TERMINATION_RESIDUAL_INCREASE = "residual_increase"

# Relative slack distinguishing a real residual increase from rounding noise.
_INCREASE_SLACK = 1e-12


@dataclass(frozen=True)
class SolverOptions:
    """Iteration budget and stopping rule.

    The solver stops once the relative decrease of J over one full iteration
    falls to rel_tol or below. final_project additionally reports the
    structure projection of the final estimate (structured solves only).
    """

    max_iters: int = 500
    rel_tol: float = 1e-8
    final_project: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")
        if not 0.0 < self.rel_tol < 1.0:
            raise DomainError("rel_tol must lie in (0, 1)")


@dataclass(frozen=True)
class FactorPair:
    """Left (n, r) and right (r, p) factors of a candidate estimate."""

    left: np.ndarray
    right: np.ndarray

    @property
    def product(self):
        return self.left @ self.right


@dataclass(frozen=True)
class SolverReport:
    """Outcome of one solve.

    residual_history starts at J of the zero estimate (= ||y||^2) and gains
    one entry per iteration; for unstructured solves half_step_residuals
    records J after every half step (two per iteration). The estimate is the
    best-J iterate encountered, which for a monotone run is simply the last.
    """

    estimate: np.ndarray
    factors: FactorPair
    residual_history: list[float]
    half_step_residuals: list[float]
    iterations: int
    termination: str
    projected_estimate: np.ndarray | None = None


def _spectral_init(op, y, r):
    """Truncated SVD of the back-projected measurements mat(a' @ y)."""
    z = numerics.mat(op.a.T @ np.asarray(y, dtype=float).ravel(), op.n, op.p)
    return numerics.svd_trunc(z, r)


def init_factors(op, y, r):
    """Spectral initialization: L = U0 diag(sigma0), R = 0."""
    t = _spectral_init(op, y, r)
    return FactorPair(t.u * t.sigma, np.zeros((r, op.p)))


def residual(op, y, factors):
    """Measurement residual J = ||y - A vec(L R)||^2."""
    d = np.asarray(y, dtype=float).ravel() - sensing.apply(op, factors.product)
    return float(d @ d)


def _lstsq(f, y):
    """Minimum-norm least-squares solve, same cutoff convention as pinv."""
    return np.linalg.lstsq(f, y, rcond=max(f.shape) * numerics.EPS)[0]


def solve_r_step(op, y, left):
    """Exact minimizer of J over R with L fixed (minimum-norm solution)."""
    f = sensing.right_factor_operator(op, left)
    return numerics.mat(_lstsq(f, np.asarray(y, dtype=float).ravel()), left.shape[1], op.p)


def solve_l_step(op, y, right):
    """Exact minimizer of J over L with R fixed (minimum-norm solution)."""
    f = sensing.left_factor_operator(op, right)
    return numerics.mat(_lstsq(f, np.asarray(y, dtype=float).ravel()), op.n, right.shape[0])


def _make_projector(structure, n, p, r):
    """Projection closure for a structure spec, or None when unstructured."""
    kind = structure.kind
    if kind == "unstructured":
        return None
    if kind == "psd":
        if n != p:
            raise DomainError("p.s.d. structure requires a square matrix")
        return lambda z: structures.project_psd(z, r)
    if kind in ("hankel", "toeplitz"):
        s = structures.linear_basis(kind, n, p)
    elif kind == "linear":
        s = structure.basis
        if s is None:
            raise DomainError("linear structure spec carries no basis")
        if s.shape[0] != n * p:
            raise DomainError(f"basis has {s.shape[0]} rows, expected {n * p}")
        if np.linalg.matrix_rank(s) < s.shape[1]:
            raise DomainError("subspace basis must have full column rank")
    else:
        raise DomainError(f"unknown structure kind {kind!r}")
    s_pinv = numerics.pinv(s)
    return lambda z: numerics.mat(s @ (s_pinv @ numerics.vec(z)), n, p)


def _als_loop(op, y, r, opts, projector):
    y = np.asarray(y, dtype=float).ravel()
    if y.size != op.m:
        raise DomainError(f"measurement vector length {y.size} does not match m={op.m}")
    if not 1 <= r <= min(op.n, op.p):
        raise DomainError(f"rank r={r} out of range for a {op.n}x{op.p} matrix")

    init = _spectral_init(op, y, r)
    left = init.u * init.sigma
    right = np.zeros((r, op.p))
    # Fallbacks for the (pathological) event that a half step returns an
    # exactly zero factor, which would stall every later step.
    fallback_left = left.copy()
    fallback_right = init.v.T.copy()

    j_prev = float(y @ y)
    history = [j_prev]
    halves = []
    best_j = j_prev
    best = (left.copy(), right.copy())
    termination = TERMINATION_MAX_ITERS
    iterations = 0

    for _ in range(opts.max_iters):
        right = solve_r_step(op, y, left)
        if not right.any() and fallback_right.any():
            right = fallback_right.copy()
        if projector is None:
            halves.append(residual(op, y, FactorPair(left, right)))
        else:
            xbar = projector(left @ right)
            right = numerics.pinv(left) @ xbar

        left = solve_l_step(op, y, right)
        if not left.any() and fallback_left.any():
            left = fallback_left.copy()
        if projector is not None:
            xbar = projector(left @ right)
            left = xbar @ numerics.pinv(right)

        j_full = residual(op, y, FactorPair(left, right))
        if projector is None:
            halves.append(j_full)
        history.append(j_full)
        iterations += 1
        if j_full < best_j:
            best_j = j_full
            best = (left.copy(), right.copy())
        if j_full > j_prev + _INCREASE_SLACK * max(j_prev, history[0]):
            termination = TERMINATION_RESIDUAL_INCREASE
            break
        if j_prev <= 0.0 or (j_prev - j_full) <= opts.rel_tol * j_prev:
            termination = TERMINATION_CONVERGED
            break
        j_prev = j_full

    factors = FactorPair(*best)
    estimate = factors.product
    projected = None
    if opts.final_project and projector is not None:
        projected = projector(estimate)
    return SolverReport(
        estimate=estimate,
        factors=factors,
        residual_history=history,
        half_step_residuals=halves,
        iterations=iterations,
        termination=termination,
        projected_estimate=projected,
    )


def als_unstructured(op, y, r, opts=None):
    """Plain alternating least squares; J is non-increasing across half steps."""
    return _als_loop(op, y, r, opts or SolverOptions(), None)


def als_structured(op, y, r, structure, opts=None):
    """Lift-and-project alternating least squares.

    With structure == UNSTRUCTURED this runs the identical code path as
    als_unstructured (no projections, no refits).
    """
    opts = opts or SolverOptions()
    projector = _make_projector(structure, op.n, op.p, r)
    return _als_loop(op, y, r, opts, projector)
