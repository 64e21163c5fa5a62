"""
Elementary symmetric functions of eigenvalue vectors.

sigma_k and its derivatives are evaluated by the prefix-polynomial
recurrence (expanding prod(x + lam_i) one factor at a time), which is
O(n k), cancellation-free beyond the data's own, and exact for constant
vectors.  Gradients recompute the recurrence with one entry deleted, so
grad_i = sigma_{k-1}(lam | i) holds by construction rather than by
algebraic rearrangement.

All functions accept an arbitrary leading batch shape: lam may be (n,) or
(..., n), and results broadcast accordingly.
"""

import math

import numpy as np

from .errors import AdmissibilityError


def _check_order(n, k, lo=0):
    if not (lo <= k <= n):
        raise ValueError(f"order k={k} out of range [{lo}, {n}]")


def _prefix_sigmas(lam, k):
    """All sigma_j(lam) for j = 0..k; lam (..., n) -> array (..., k+1)."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    batch = lam.shape[:-1]
    e = np.zeros(batch + (k + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        li = lam[..., i]
        for j in range(min(i + 1, k), 0, -1):
            e[..., j] += li * e[..., j - 1]
    return e


def sigma_k(lam, k):
    """sigma_k(lam): the sum over all k-element products; sigma_0 = 1."""
    lam = np.asarray(lam, dtype=float)
    _check_order(lam.shape[-1], k)
    out = _prefix_sigmas(lam, k)[..., k]
    return float(out) if out.ndim == 0 else out


def _deleted(lam, i):
    return np.delete(lam, i, axis=-1)


class SymDerivatives:
    """Value and derivatives of sigma_k at an eigenvalue vector.

    value: sigma_k(lam)
    grad: partials d sigma_k / d lam_i = sigma_{k-1}(lam | i), shape (..., n)
    matrix_grad: d sigma_k / d b_ij for the symmetric matrix with these
        eigenvalues, expressed in the frame of b itself.  When built from an
        eigenvalue vector the frame is the eigenframe, so matrix_grad is
        diagonal with the grad entries.
    """

    def __init__(self, value, grad, matrix_grad):
        self.value = value
        self.grad = grad
        self.matrix_grad = matrix_grad


def sigma_k_derivs(lam, k):
    """SymDerivatives of sigma_k at lam (diagonal case)."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    _check_order(n, k, lo=1)
    value = sigma_k(lam, k)
    cols = [sigma_k(_deleted(lam, i), k - 1) for i in range(n)]
    grad = np.stack([np.asarray(c, dtype=float) for c in cols], axis=-1)
    mg = np.zeros(lam.shape + (n,))
    idx = np.arange(n)
    mg[..., idx, idx] = grad
    if lam.ndim == 1:
        return SymDerivatives(float(value), grad, mg)
    return SymDerivatives(value, grad, mg)


def sigma_k_hessian(lam, k):
    """Second derivatives: d2 sigma_k / d lam_i d lam_j = sigma_{k-2}(lam|ij)
    for i != j, zero on the diagonal.  Shape (..., n, n)."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    _check_order(n, k, lo=1)
    H = np.zeros(lam.shape + (n,))
    if k < 2:
        return H
    for i in range(n):
        rest = _deleted(lam, i)
        for jr in range(n - 1):
            j = jr if jr < i else jr + 1
            H[..., i, j] = sigma_k(_deleted(rest, jr), k - 2)
    return H


def matrix_sigma_grad(b, k):
    """sigma_k^{ij} = d sigma_k / d b_ij for symmetric b, shape (..., n, n).

    Closed forms for n <= 2 (identity for k=1; the adjugate for n=2, k=2);
    larger matrices go through the eigendecomposition, where the gradient is
    the eigenframe diagonal of sigma_{k-1}(lam | i) rotated back.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[-1]
    _check_order(n, k, lo=1)
    if k == 1:
        return np.broadcast_to(np.eye(n), b.shape).copy()
    if n == 2 and k == 2:
        g = np.empty_like(b)
        g[..., 0, 0] = b[..., 1, 1]
        g[..., 1, 1] = b[..., 0, 0]
        g[..., 0, 1] = -b[..., 0, 1]
        g[..., 1, 0] = -b[..., 1, 0]
        return g
    lam, Q = np.linalg.eigh(b)
    d = sigma_k_derivs(lam, k).grad
    return np.einsum("...ip,...p,...jp->...ij", Q, d, Q)


def in_gamma_k(lam, k):
    """Membership of lam in the cone Gamma_k = {sigma_i > 0 for i <= k}.

    Returns (ok, margin) with margin = min over i <= k of sigma_i(lam);
    batched input gives boolean and margin arrays.
    """
    lam = np.asarray(lam, dtype=float)
    _check_order(lam.shape[-1], k, lo=1)
    e = _prefix_sigmas(lam, k)
    margin = e[..., 1:k + 1].min(axis=-1)
    ok = margin > 0.0
    if lam.ndim == 1:
        return bool(ok), float(margin)
    return ok, margin


def newton_maclaurin_gap(lam, l, k):
    """[sigma_l/binom(n,l)]^(1/l) - [sigma_k/binom(n,k)]^(1/k), for lam in
    Gamma_k and 1 <= l <= k.  Nonnegative up to rounding for admissible lam."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    if not (1 <= l <= k <= n):
        raise ValueError(f"need 1 <= l <= k <= n, got l={l}, k={k}, n={n}")
    ok, margin = in_gamma_k(lam, k)
    if not np.all(ok):
        raise AdmissibilityError("eigenvalue vector is not in Gamma_k",
                                 margin=np.min(margin))
    e = _prefix_sigmas(lam, k)
    a = (e[..., l] / math.comb(n, l)) ** (1.0 / l)
    b = (e[..., k] / math.comb(n, k)) ** (1.0 / k)
    out = a - b
    return float(out) if out.ndim == 0 else out
