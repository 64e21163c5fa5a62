"""Elementary symmetric function tests."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from cmkit.errors import AdmissibilityError
from cmkit.symfunc import (
    in_gamma_k,
    matrix_sigma_grad,
    newton_maclaurin_gap,
    sigma_k,
    sigma_k_derivs,
    sigma_k_hessian,
)


def sigma_by_enumeration(lam, k):
    # independent oracle: literal sum over k-subsets
    return math.fsum(math.prod(c) for c in itertools.combinations(lam, k))


# ---------------------------------------------------------------------------
# values
# ---------------------------------------------------------------------------

def test_sigma_basic_values():
    assert sigma_k([1, 1, 1], 2) == 3
    assert sigma_k([1, 2, 3], 2) == 11
    assert sigma_k([1, 2, 3], 0) == 1.0
    # identical entries: binom(n,k) r^k
    for n in (2, 3, 5):
        for k in range(n + 1):
            assert_allclose(sigma_k([0.7] * n, k),
                            math.comb(n, k) * 0.7 ** k, rtol=1e-14)


def test_sigma_matches_enumeration():
    rng = np.random.default_rng(5)
    for n in (2, 3, 4, 5):
        for _ in range(20):
            lam = rng.standard_normal(n) * 3
            for k in range(n + 1):
                assert_allclose(sigma_k(lam, k), sigma_by_enumeration(lam, k),
                                rtol=1e-12, atol=1e-12)


def test_sigma_order_out_of_range():
    with pytest.raises(ValueError):
        sigma_k([1, 2], 3)
    with pytest.raises(ValueError):
        sigma_k([1, 2], -1)


def test_sigma_batched():
    rng = np.random.default_rng(6)
    lam = rng.standard_normal((7, 4, 3))
    out = sigma_k(lam, 2)
    assert out.shape == (7, 4)
    assert_allclose(out[3, 1], sigma_by_enumeration(lam[3, 1], 2), rtol=1e-12)


# ---------------------------------------------------------------------------
# derivatives
# ---------------------------------------------------------------------------

def test_grad_examples():
    d = sigma_k_derivs(np.array([1.0, 1, 1]), 2)
    assert_allclose(d.grad, [2, 2, 2], rtol=1e-14)
    d = sigma_k_derivs(np.array([1.0, 2, 3]), 2)
    assert d.value == 11
    assert_allclose(d.grad, [5, 4, 3], rtol=1e-14)
    d = sigma_k_derivs(np.array([0.0, 2, 3]), 3)
    assert d.value == 0
    assert_allclose(d.grad, [6, 0, 0], atol=1e-14)


def test_grad_is_deleted_sigma():
    rng = np.random.default_rng(7)
    lam = rng.standard_normal(4)
    d = sigma_k_derivs(lam, 3)
    for i in range(4):
        assert_allclose(d.grad[i],
                        sigma_by_enumeration(np.delete(lam, i), 2), rtol=1e-12)


def test_grad_matches_finite_differences():
    rng = np.random.default_rng(8)
    eps = 1e-5
    for n, k in [(2, 1), (2, 2), (3, 2), (4, 3)]:
        lam = 1.0 + rng.standard_normal(n)
        d = sigma_k_derivs(lam, k)
        for i in range(n):
            lp, lm = lam.copy(), lam.copy()
            lp[i] += eps
            lm[i] -= eps
            fd = (sigma_k(lp, k) - sigma_k(lm, k)) / (2 * eps)
            assert_allclose(d.grad[i], fd, rtol=1e-6, atol=1e-8)


def test_matrix_grad_diagonal_case():
    lam = np.array([1.0, 2, 3])
    d = sigma_k_derivs(lam, 2)
    assert_allclose(d.matrix_grad, np.diag(d.grad), rtol=1e-14)


def test_matrix_grad_closed_forms():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((2, 2))
    b = 0.5 * (a + a.T) + 2 * np.eye(2)
    # k=1: identity
    assert_allclose(matrix_sigma_grad(b, 1), np.eye(2), rtol=1e-14)
    # k=2: the adjugate; check against finite differences of det
    g = matrix_sigma_grad(b, 2)
    eps = 1e-6
    for i in range(2):
        for j in range(2):
            bp, bm = b.copy(), b.copy()
            bp[i, j] += eps
            bm[i, j] -= eps
            fd = (np.linalg.det(bp) - np.linalg.det(bm)) / (2 * eps)
            assert_allclose(g[i, j], fd, rtol=1e-6)


def test_matrix_grad_eigh_path_agrees():
    # 3x3 exercises the eigendecomposition branch; compare with FD
    rng = np.random.default_rng(10)
    a = rng.standard_normal((3, 3))
    b = 0.5 * (a + a.T) + 3 * np.eye(3)
    g = matrix_sigma_grad(b, 2)
    eps = 1e-6

    def s2(m):
        lam = np.linalg.eigvalsh(m)
        return sigma_by_enumeration(lam, 2)

    for i in range(3):
        for j in range(3):
            bp, bm = b.copy(), b.copy()
            # symmetric perturbation: d sigma/d b_ij + d sigma/d b_ji
            bp[i, j] += eps
            bp[j, i] += eps
            bm[i, j] -= eps
            bm[j, i] -= eps
            fd = (s2(bp) - s2(bm)) / (2 * eps)
            expect = g[i, j] + g[j, i]
            assert_allclose(expect, fd, rtol=1e-5, atol=1e-8)


def test_hessian_structure():
    lam = np.array([1.0, 2, 3])
    H = sigma_k_hessian(lam, 2)
    # d2 sigma_2 / dl_i dl_j = 1 off diagonal, 0 on it
    assert_allclose(H, np.ones((3, 3)) - np.eye(3), rtol=1e-14)
    assert np.all(sigma_k_hessian(lam, 1) == 0.0)


# ---------------------------------------------------------------------------
# cone membership
# ---------------------------------------------------------------------------

def test_gamma_k_examples():
    ok, m = in_gamma_k([1.0, 1, 1], 3)
    assert ok and m == 1
    ok, _ = in_gamma_k([-1.0, 5, 5], 1)
    assert ok
    ok, _ = in_gamma_k([-1.0, 5, 5], 2)
    assert ok  # sigma_2 = 15 > 0
    ok, m = in_gamma_k([-1.0, 5, 5], 3)
    assert not ok and m == -25
    ok, m = in_gamma_k([0.0, 1, 1], 2)
    assert ok and m == 1
    ok, _ = in_gamma_k([0.0, 1, 1], 3)
    assert not ok


def test_gamma_nested():
    rng = np.random.default_rng(11)
    for _ in range(200):
        lam = rng.standard_normal(4) * 2
        prev = True
        for k in range(1, 5):
            ok, _ = in_gamma_k(lam, k)
            # membership can only be lost as k grows
            assert prev or not ok
            prev = ok


# ---------------------------------------------------------------------------
# identity suite (the same relations the acceptance run samples at volume)
# ---------------------------------------------------------------------------

@given(st.integers(2, 5), st.integers(0, 10 ** 9))
@settings(max_examples=50, deadline=None)
def test_identity_suite(n, seed):
    rng = np.random.default_rng(seed)
    lam = rng.standard_normal(n) * 2
    s1 = sigma_k(lam, 1)
    for k in range(1, n):
        d = sigma_k_derivs(lam, k)
        sk1 = sigma_k(lam, k + 1)
        scale = 1 + abs(sk1) + np.abs(lam).max() ** (k + 1)
        # sum_i lam_i sigma_k(lam|i) = (k+1) sigma_{k+1}
        lhs = float(np.dot(lam, sigma_k_derivs(lam, k + 1).grad))
        assert abs(lhs - (k + 1) * sk1) < 1e-10 * scale
        # sum_i sigma_k(lam|i) over the deleted vectors = (n-k) sigma_k
        tot = math.fsum(sigma_k(np.delete(lam, i), k) for i in range(n))
        assert abs(tot - (n - k) * sigma_k(lam, k)) < 1e-10 * scale
        # sum_i lam_i^2 sigma_{k-1}(lam|i) = sigma_1 sigma_k - (k+1) sigma_{k+1}
        lhs = float(np.dot(lam ** 2, d.grad))
        rhs = s1 * d.value - (k + 1) * sk1
        assert abs(lhs - rhs) < 1e-10 * scale


# ---------------------------------------------------------------------------
# Newton-Maclaurin
# ---------------------------------------------------------------------------

def test_nm_gap_values():
    assert newton_maclaurin_gap([0.7, 0.7, 0.7], 1, 3) == pytest.approx(0, abs=1e-14)
    gap = newton_maclaurin_gap([1.0, 2, 3], 1, 2)
    assert_allclose(gap, 2 - math.sqrt(11 / 3), rtol=1e-12)


def test_nm_gap_requires_admissible():
    with pytest.raises(AdmissibilityError):
        newton_maclaurin_gap([-1.0, 5, 5], 1, 3)


@given(st.integers(0, 10 ** 9))
@settings(max_examples=50, deadline=None)
def test_nm_gap_nonnegative(seed):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        lam = rng.standard_normal(n) + 1.5
        k = int(rng.integers(1, n + 1))
        ok, _ = in_gamma_k(lam, k)
        if not ok:
            continue
        for l in range(1, k + 1):
            assert newton_maclaurin_gap(lam, l, k) >= -1e-12
