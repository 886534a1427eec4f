"""Dense complex linear-algebra kernels.

Matrices are plain ``numpy`` complex arrays throughout the package; the
functions here add the validation, rank handling and the truncated Neumann
series used as a cheap stand-in for a Gram-matrix inverse.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.special

from .errors import (AlphaTooSmall, DimensionMismatch, DivergenceDetected,
                     NonFinite, NotHermitian, RankDeficient)

__all__ = ['pseudo_inverse', 'eigvals_hermitian', 'NeumannConfig',
           'default_neumann_delta', 'neumann_inverse', 'bessel_j0',
           'hermitian_sqrt', 'crandn']


def crandn(rng, *shape):
    """IID CN(0, 1) samples of the given shape."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _check_finite(A, what="matrix"):
    A = np.asarray(A)
    if not np.all(np.isfinite(A)):
        raise NonFinite(f"{what} has non-finite entries")
    return A


def pseudo_inverse(A, rtol=1e-12, strict=False):
    """Moore-Penrose pseudo-inverse.

    Full-rank inputs go through the one-sided Gram matrix and a Cholesky
    solve: ``A^H (A A^H)^-1`` for wide matrices and ``(A^H A)^-1 A^H`` for
    tall ones. When the Gram factor looks ill conditioned the routine falls
    back to an SVD and truncates singular values below ``rtol * s_max``.

    Parameters
    ----------
    A : array_like, shape (m, n)
    rtol : float
        Relative singular-value threshold for numerical rank.
    strict : bool
        If True, a numerically rank-deficient input raises
        :class:`RankDeficient` instead of returning the truncated inverse.
    """
    A = _check_finite(np.atleast_2d(np.asarray(A, dtype=complex)))
    m, n = A.shape
    wide = m <= n
    gram = A @ A.conj().T if wide else A.conj().T @ A
    try:
        c, low = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
        d = np.abs(np.diag(c))
        # diag of the Cholesky factor brackets the singular values of A
        well_conditioned = d.min() > 1e3 * np.sqrt(rtol) * d.max()
    except np.linalg.LinAlgError:
        well_conditioned = False
    if well_conditioned:
        if wide:
            return scipy.linalg.cho_solve((c, low), A, check_finite=False).conj().T
        return scipy.linalg.cho_solve((c, low), A.conj().T, check_finite=False)

    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    smax = s[0] if s.size else 0.0
    keep = s > rtol * smax
    if strict and not np.all(keep):
        smin = s[-1] if s.size else 0.0
        raise RankDeficient(f"smallest singular value {smin:.3e} < {rtol:g} * {smax:.3e}")
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (Vh.conj().T * s_inv) @ U.conj().T


def _check_hermitian(Z, tol):
    Z = _check_finite(np.atleast_2d(np.asarray(Z, dtype=complex)))
    if Z.shape[0] != Z.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {Z.shape}")
    scale = np.linalg.norm(Z)
    if np.linalg.norm(Z - Z.conj().T) > tol * max(scale, np.finfo(float).tiny):
        raise NotHermitian("matrix is not Hermitian within tolerance")
    return Z


def _jacobi_eigvals(Z, tol=1e-12, max_sweeps=100):
    A = np.array(Z, dtype=complex)
    n = A.shape[0]
    target = tol * np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = A[p, q]
                if abs(b) <= 1e-300:
                    A[p, q] = A[q, p] = 0.0
                    continue
                a, d = A[p, p].real, A[q, q].real
                phase = b / abs(b)
                theta = 0.5 * np.arctan2(2 * abs(b), a - d)
                c, s = np.cos(theta), np.sin(theta)
                # U = diag(1, conj(phase)) @ [[c, -s], [s, c]]
                U = np.array([[c, -s], [s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                A[:, idx] = A[:, idx] @ U
                A[idx, :] = U.conj().T @ A[idx, :]
                A[q, p] = 0.0
                A[p, q] = 0.0
    return np.sort(np.diag(A).real)


def eigvals_hermitian(Z, method="lapack", tol=1e-10):
    """Ascending real eigenvalues of a Hermitian matrix.

    ``method="jacobi"`` runs a cyclic Jacobi sweep in fixed (p, q) order,
    which is slow but gives the same answer everywhere; the default uses
    LAPACK's ``heevd`` through numpy.
    """
    Z = _check_hermitian(Z, tol)
    Z = 0.5 * (Z + Z.conj().T)
    if method == "lapack":
        return np.linalg.eigvalsh(Z)
    if method == "jacobi":
        return _jacobi_eigvals(Z)
    raise ValueError(f"unknown eigensolver {method!r}")


def hermitian_sqrt(Psi, neg_tol=1e-8, inverse=False):
    """Principal square root (or inverse root) of a Hermitian PSD matrix.

    Eigenvalues in ``[-neg_tol, 0)`` are clipped to zero; anything more
    negative raises ``ValueError`` (callers translate this to a domain error).
    """
    Psi = 0.5 * (Psi + np.conj(Psi).T)
    w, V = np.linalg.eigh(Psi)
    if w.min() < -neg_tol * max(1.0, abs(w).max()):
        raise ValueError(f"matrix has eigenvalue {w.min():.3e} < 0")
    w = np.clip(w, 0.0, None)
    if inverse:
        if w.min() <= 0:
            raise np.linalg.LinAlgError("singular matrix has no inverse square root")
        w = 1.0 / w
    return (V * np.sqrt(w)) @ V.conj().T


def default_neumann_delta(alpha):
    return 1.0 if alpha >= 4 else 0.9


@dataclass(frozen=True)
class NeumannConfig:
    """Truncation and weighting of the Neumann-series inverse.

    Attributes
    ----------
    terms : int
        Highest power ``L`` kept in the series.
    delta : float or None
        Attenuation in (0, 1]; None picks 1 for ``M/K >= 4`` and 0.9 below.
    weighting : {'fixed', 'trace'}
        ``'fixed'`` scales by ``1/(M+K)``; ``'trace'`` by ``c/Tr(Z)``.
    c : float or None
        Constant of the trace weighting. None uses ``K*M/(M+K)``, which
        coincides with the fixed weighting when the channel entries have unit
        variance.
    max_terms : int
        Hard cap on ``terms``.
    """

    terms: int = 4
    delta: Optional[float] = None
    weighting: str = "fixed"
    c: Optional[float] = None
    max_terms: int = 200

    def __post_init__(self):
        if self.terms < 0 or self.terms > self.max_terms:
            raise ValueError(f"terms must lie in [0, {self.max_terms}]")
        if self.delta is not None and not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if self.weighting not in ("fixed", "trace"):
            raise ValueError(f"unknown weighting {self.weighting!r}")


def neumann_inverse(Z, cfg, M, K):
    """Approximate ``Z^-1`` for a K x K Gram matrix of an M x K channel.

    Returns ``(delta/w) * sum_{n=0}^{L} (I - (delta/w) Z)^n`` with
    ``w = M + K`` or ``w = Tr(Z)/c``.
    """
    Z = _check_hermitian(Z, 1e-10)
    if Z.shape != (K, K):
        raise DimensionMismatch(f"Z has shape {Z.shape}, expected ({K}, {K})")
    alpha = M / K
    if alpha <= 1:
        raise AlphaTooSmall(f"M/K = {alpha:g} <= 1")
    delta = cfg.delta if cfg.delta is not None else default_neumann_delta(alpha)
    if cfg.weighting == "fixed":
        w = float(M + K)
    else:
        c = cfg.c if cfg.c is not None else K * M / (M + K)
        w = np.trace(Z).real / c
    scale = delta / w
    B = np.eye(K) - scale * Z
    term = np.eye(K, dtype=complex)
    acc = term.copy()
    last_norm = np.linalg.norm(term)
    growth = 0
    for _ in range(cfg.terms):
        term = term @ B
        acc += term
        norm = np.linalg.norm(term)
        growth = growth + 1 if norm > last_norm else 0
        if growth >= 3:
            raise DivergenceDetected("Neumann terms grew for 3 consecutive powers")
        last_norm = norm
    out = scale * acc
    return 0.5 * (out + out.conj().T)


def bessel_j0(x):
    """Bessel function of the first kind, order zero."""
    return scipy.special.j0(x)
