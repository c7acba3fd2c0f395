"""Bound computations against closed forms and brute-force oracles."""

import math

import numpy as np
import pytest

from lrmr import crb, sensing, structures
from lrmr.errors import DomainError
from lrmr.numerics import vec
from lrmr.structures import HankelParams


def _identity_op(n, p):
    return sensing.SensingOperator(np.eye(n * p), n, p)


def _lowrank(rng, n, p, r):
    return rng.standard_normal((n, r)) @ rng.standard_normal((r, p))


def test_tangent_basis_small_case():
    tb = crb.tangent_basis(np.diag([1.0, 0.0]), 1)
    # r(n+p) - r^2 = 3 orthonormal columns
    assert tb.basis.shape == (4, 3)
    assert np.allclose(tb.basis.T @ tb.basis, np.eye(3), atol=1e-12)


def test_tangent_basis_orthonormal(rng):
    x = _lowrank(rng, 7, 5, 2)
    tb = crb.tangent_basis(x, 2)
    t_dim = 2 * (7 + 5) - 4
    assert tb.basis.shape == (35, t_dim)
    assert np.allclose(tb.basis.T @ tb.basis, np.eye(t_dim), atol=1e-10)


def test_tangent_basis_spans_rank_preserving_directions(rng):
    # oracle: directions U0 B V1' + U0 A V0' + U1 C V0' must lie in the span
    n, p, r = 6, 5, 2
    x = _lowrank(rng, n, p, r)
    tb = crb.tangent_basis(x, r)
    for _ in range(5):
        d = (
            tb.u0 @ rng.standard_normal((r, p - r)) @ tb.v1.T
            + tb.u0 @ rng.standard_normal((r, r)) @ tb.v0.T
            + tb.u1 @ rng.standard_normal((n - r, r)) @ tb.v0.T
        )
        coeffs = tb.basis.T @ vec(d)
        assert np.linalg.norm(tb.basis @ coeffs - vec(d)) <= 1e-10 * np.linalg.norm(d)


def test_tangent_basis_rejects_rank_deficient():
    with pytest.raises(DomainError):
        crb.tangent_basis(np.diag([1.0, 0.0]), 2)


def test_crb_unstructured_identity_closed_form(rng):
    # with A = I and C = sigma^2 I the bound is sigma^2 (r(n+p) - r^2)
    for n, p, r in [(6, 6, 1), (8, 5, 2)]:
        x = _lowrank(rng, n, p, r)
        sigma2 = 0.3
        res = crb.crb_unstructured(_identity_op(n, p), sensing.IidGaussian(sigma2), x, r)
        assert res.valid
        expected = sigma2 * (r * (n + p) - r * r)
        assert res.value == pytest.approx(expected, rel=1e-8)


def test_crb_unstructured_invalid_below_tangent_dimension(rng):
    n, p, r = 6, 6, 1
    t_dim = r * (n + p) - r * r  # 11
    x = _lowrank(rng, n, p, r)
    op = sensing.make_gaussian_operator(n, p, t_dim - 1, rng)
    res = crb.crb_unstructured(op, sensing.IidGaussian(0.1), x, r)
    assert not res.valid
    assert math.isnan(res.value)
    assert str(t_dim) in res.diagnostic


def test_crb_unstructured_matches_factor_fim_oracle(rng):
    # oracle: parametrize X = L R directly; the bound on vec(X) is
    # tr(D J^+ D') with D = [kron(R', I_n), kron(I_p, L)] and J = D'A'C^{-1}AD
    n, p, r, m = 9, 8, 2, 60
    left = rng.standard_normal((n, r))
    right = rng.standard_normal((r, p))
    x = left @ right
    op = sensing.make_gaussian_operator(n, p, m, rng)
    sigma2 = 0.2
    d = np.hstack([np.kron(right.T, np.eye(n)), np.kron(np.eye(p), left)])
    ad = op.a @ d
    j = ad.T @ ad / sigma2
    oracle = float(np.trace(d @ np.linalg.pinv(j) @ d.T))
    res = crb.crb_unstructured(op, sensing.IidGaussian(sigma2), x, r)
    assert res.valid
    assert res.value == pytest.approx(oracle, rel=1e-6)


def test_crb_unstructured_linear_in_noise_power(rng):
    n, p, r = 7, 6, 1
    x = _lowrank(rng, n, p, r)
    op = sensing.make_gaussian_operator(n, p, 20, rng)
    v1 = crb.crb_unstructured(op, sensing.IidGaussian(0.1), x, r).value
    v2 = crb.crb_unstructured(op, sensing.IidGaussian(0.2), x, r).value
    assert v2 == pytest.approx(2.0 * v1, rel=1e-10)


def test_crb_unstructured_correlated_matches_iid(rng):
    n, p, r, m = 6, 5, 1, 18
    x = _lowrank(rng, n, p, r)
    op = sensing.make_gaussian_operator(n, p, m, rng)
    sigma2 = 0.4
    v_iid = crb.crb_unstructured(op, sensing.IidGaussian(sigma2), x, r).value
    v_cov = crb.crb_unstructured(op, sensing.CorrelatedGaussian(sigma2 * np.eye(m)), x, r).value
    assert v_cov == pytest.approx(v_iid, rel=1e-10)


def test_fim_identity_operator(rng):
    n, p = 3, 2
    op = _identity_op(n, p)
    delta = rng.standard_normal((4, n * p))
    sigma2 = 0.5
    j = crb.fim(op, sensing.IidGaussian(sigma2), delta)
    assert np.allclose(j, delta @ delta.T / sigma2, atol=1e-12)
    assert np.allclose(j, j.T)
    assert np.linalg.eigvalsh(j).min() >= -1e-12


def _fd_hankel_jacobian(params, n, p, eps=1e-6):
    r = params.order
    alpha = np.concatenate([params.a, params.b])
    rows = []
    for j in range(2 * r):
        hi, lo = alpha.copy(), alpha.copy()
        hi[j] += eps
        lo[j] -= eps
        x_hi = structures.hankel_from_params(HankelParams(hi[:r], hi[r:]), n, p)
        x_lo = structures.hankel_from_params(HankelParams(lo[:r], lo[r:]), n, p)
        rows.append(vec(x_hi - x_lo) / (2 * eps))
    return np.array(rows)


def test_crb_hankel_matches_finite_difference_oracle(rng):
    # oracle: brute-force bound from a finite-difference Jacobian of the
    # parameter-to-matrix map
    n, p, r, m = 5, 5, 2, 20
    params = HankelParams([-1.2, 0.4], [0.7, -0.3])
    op = sensing.make_gaussian_operator(n, p, m, rng)
    sigma2 = 0.15
    delta_fd = _fd_hankel_jacobian(params, n, p)
    j_fd = delta_fd @ op.a.T @ op.a @ delta_fd.T / sigma2
    oracle = float(np.sum(delta_fd * np.linalg.solve(j_fd, delta_fd)))
    res = crb.crb_hankel(op, sensing.IidGaussian(sigma2), params, n, p)
    assert res.valid
    assert res.value == pytest.approx(oracle, rel=1e-5)


def test_crb_hankel_scales_with_noise(rng):
    params = HankelParams([-0.9], [1.1])
    op = sensing.make_gaussian_operator(4, 4, 10, rng)
    v1 = crb.crb_hankel(op, sensing.IidGaussian(0.05), params, 4, 4).value
    v2 = crb.crb_hankel(op, sensing.IidGaussian(0.15), params, 4, 4).value
    assert v2 == pytest.approx(3.0 * v1, rel=1e-10)


def test_crb_hankel_invalid_when_information_singular(rng):
    # fewer measurements than parameters: the information matrix is singular
    params = HankelParams([-1.2, 0.4], [0.7, -0.3])
    op = sensing.make_gaussian_operator(4, 4, 3, rng)
    res = crb.crb_hankel(op, sensing.IidGaussian(0.1), params, 4, 4)
    assert not res.valid
    assert math.isnan(res.value)


def test_crb_psd_scalar_case():
    op = sensing.SensingOperator(np.eye(1), 1, 1)
    sigma2 = 0.7
    res = crb.crb_psd(op, sensing.IidGaussian(sigma2), np.array([[2.0]]))
    assert res.valid
    # dX/dM = 2M, information (2M)^2/sigma^2, bound (2M)^2 sigma^2/(2M)^2
    assert res.value == pytest.approx(sigma2, rel=1e-10)


def test_crb_psd_gauge_invariance(rng):
    # M and M Q parametrize the same matrix; the bound must agree
    n, r, m = 6, 2, 25
    m_factor = rng.standard_normal((n, r))
    theta = 0.83
    q = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    op = sensing.make_gaussian_operator(n, n, m, rng)
    noise = sensing.IidGaussian(0.3)
    v1 = crb.crb_psd(op, noise, m_factor)
    v2 = crb.crb_psd(op, noise, m_factor @ q)
    assert v1.valid and v2.valid
    assert v2.value == pytest.approx(v1.value, rel=1e-8)


def test_crb_psd_matches_independent_pseudoinverse(rng):
    # cross-check the pseudoinverse route with an svd built in the test
    n, r, m = 5, 2, 20
    m_factor = rng.standard_normal((n, r))
    op = sensing.make_gaussian_operator(n, n, m, rng)
    sigma2 = 0.25
    delta = structures.psd_gradient(m_factor).T
    b = op.a @ delta.T
    j = b.T @ b / sigma2
    u, s, vt = np.linalg.svd(j)
    keep = s > s[0] * 1e-12
    j_pinv = (vt.T[:, keep] / s[keep]) @ u.T[keep]
    oracle = float(np.sum(delta * (j_pinv @ delta)))
    res = crb.crb_psd(op, sensing.IidGaussian(sigma2), m_factor)
    assert res.valid
    assert res.value == pytest.approx(oracle, rel=1e-8)


def test_crb_psd_validity_threshold():
    # the p.s.d. factor model has nr - r(r-1)/2 identifiable parameters;
    # Gaussian operators right at that count keep the bound valid, one
    # measurement less breaks it
    n, r = 6, 2
    need = n * r - r * (r - 1) // 2  # 11
    for seed in range(3):
        rng = np.random.default_rng(100 + seed)
        m_factor = rng.standard_normal((n, r))
        noise = sensing.IidGaussian(0.2)
        op_ok = sensing.make_gaussian_operator(n, n, need, rng)
        op_bad = sensing.make_gaussian_operator(n, n, need - 1, rng)
        assert crb.crb_psd(op_ok, noise, m_factor).valid
        assert not crb.crb_psd(op_bad, noise, m_factor).valid


def test_structured_bounds_never_exceed_unstructured(rng):
    # tighter model, tighter bound: check on matched instances
    for _ in range(3):
        n, p, r, m = 8, 8, 2, 40
        noise = sensing.IidGaussian(0.1)
        x, params = structures.generate_hankel_lowrank(n, p, r, rng=rng)
        op = sensing.make_gaussian_operator(n, p, m, rng)
        u = crb.crb_unstructured(op, noise, x, r)
        h = crb.crb_hankel(op, noise, params, n, p)
        if u.valid and h.valid:
            assert h.value <= u.value * (1 + 1e-8)

        x, m_factor = structures.generate_psd_lowrank(n, r, rng=rng)
        op = sensing.make_gaussian_operator(n, n, m, rng)
        u = crb.crb_unstructured(op, noise, x, r)
        s = crb.crb_psd(op, noise, m_factor)
        if u.valid and s.valid:
            assert s.value <= u.value * (1 + 1e-8)


def test_crb_to_srer_bound_arithmetic():
    assert crb.crb_to_srer_bound([1.0], [1.0]) == 0.0
    assert crb.crb_to_srer_bound([1.0, 1.0], [10.0, 10.0]) == pytest.approx(10.0)
    assert crb.crb_to_srer_bound([1.0, 3.0], [2.0, 2.0]) == pytest.approx(
        10.0 * math.log10(2.0 / 2.0)
    )


def test_crb_to_srer_bound_validation():
    with pytest.raises(DomainError):
        crb.crb_to_srer_bound([], [])
    with pytest.raises(DomainError):
        crb.crb_to_srer_bound([1.0, math.nan], [1.0, 1.0])
    with pytest.raises(DomainError):
        crb.crb_to_srer_bound([1.0], [1.0, 2.0])
