"""Stable spline prior covariance for exponentially decaying impulse responses.

The kernel matrix is ``K[i, j] = alpha ** max(i, j)`` in 1-based index terms
(``K[a, b] = alpha ** (max(a, b) + 1)`` for 0-based storage).  A vector drawn
from ``N(0, K)`` is, read back-to-front, a Gaussian random walk whose step
variances shrink geometrically -- which is why the inverse of ``K`` is exactly
tridiagonal and can be written down in closed form:

    q_i        = alpha**i * (1 - alpha),           i = 1 .. p-1
    Kinv[i,i]  = 1/q_{i-1} + 1/q_i                 (1/q_0 := 0)
    Kinv[p,p]  = 1/q_{p-1} + alpha**(-p)
    Kinv[i,i+1] = Kinv[i+1,i] = -1/q_i

The closed form is O(p) to build and stays accurate for alpha near 1 and
large p, where dense inversion of ``K`` starts to lose digits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class StableSplineKernel:
    """Prior covariance, its tridiagonal inverse and Cholesky factor.

    All arrays are marked read-only after construction; instances can be
    shared freely across concurrent chains.
    """

    alpha: float
    p: int
    K: np.ndarray
    Kinv: np.ndarray
    chol: np.ndarray
    inv_diag: np.ndarray = field(repr=False)
    inv_offdiag: np.ndarray = field(repr=False)


def build_kernel(alpha: float, p: int) -> StableSplineKernel:
    """Construct the stable spline kernel of decay ``alpha`` and order ``p``.

    Raises
    ------
    ValueError
        If ``alpha`` is outside (0, 1) or ``p < 1``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"decay rate must lie in (0, 1), got {alpha}")
    if p < 1:
        raise ValueError(f"FIR order must be a positive integer, got {p}")
    p = int(p)

    idx = np.arange(1, p + 1)
    K = alpha ** np.maximum.outer(idx, idx)

    inv_diag, inv_offdiag = _closed_form_inverse_bands(alpha, p)
    Kinv = np.diag(inv_diag)
    if p > 1:
        Kinv += np.diag(inv_offdiag, 1) + np.diag(inv_offdiag, -1)

    chol = np.linalg.cholesky(K)

    for arr in (K, Kinv, chol, inv_diag, inv_offdiag):
        arr.setflags(write=False)
    return StableSplineKernel(
        alpha=float(alpha), p=p, K=K, Kinv=Kinv, chol=chol,
        inv_diag=inv_diag, inv_offdiag=inv_offdiag,
    )


def _closed_form_inverse_bands(alpha: float, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and first off-diagonal of the tridiagonal inverse."""
    if p == 1:
        return np.array([1.0 / alpha]), np.empty(0)
    # q_i = alpha**i * (1 - alpha): step variances of the underlying walk
    q = alpha ** np.arange(1, p) * (1.0 - alpha)
    diag = np.empty(p)
    diag[0] = 1.0 / q[0]
    diag[1:-1] = 1.0 / q[:-1] + 1.0 / q[1:]
    diag[-1] = 1.0 / q[-1] + alpha ** (-p)
    offdiag = -1.0 / q
    return diag, offdiag


def quad_form(kernel: StableSplineKernel, v: np.ndarray) -> float:
    """Quadratic form v' Kinv v, evaluated in O(p) via the tridiagonal bands.

    Returns a nonnegative float; exactly zero only for the zero vector.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (kernel.p,):
        raise ValueError(
            f"vector of length {kernel.p} expected, got shape {v.shape}"
        )
    out = float(np.dot(v * kernel.inv_diag, v))
    if kernel.p > 1:
        out += 2.0 * float(np.dot(v[:-1] * kernel.inv_offdiag, v[1:]))
    # analytically >= 0; guard against roundoff for near-null vectors
    return max(out, 0.0)
