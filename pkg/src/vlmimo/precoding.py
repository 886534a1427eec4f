"""Single-cell forward-link precoders and their Monte-Carlo SINR.

Conventions: data symbols ``q_f`` have unit energy, the channel acts as
``x_f = G^T s_f + w_f`` with CN(0, 1) noise, and every precoder is scaled so
that ``E||s_f||^2 = rho_f``. The scale uses ``gamma = ||W||_F^2 / K`` for the
unnormalised precoding matrix W, which averages over the channel but not over
the symbols.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from ._parallel import pmap
from .channel import as_matrix, imperfect_csi
from .errors import RankDeficient, SingularGram, SingularRegularizedGram
from .numerics import crandn, pseudo_inverse

log = logging.getLogger(__name__)

__all__ = ['PrecodedVector', 'precoding_matrix', 'zf_precode', 'mf_precode',
           'rzf_precode', 'ForwardSinrStats', 'measure_forward_sinr',
           'effective_forward_matrix']


@dataclass(frozen=True)
class PrecodedVector:
    s_f: np.ndarray
    gamma: float
    technique: str
    scale: float

    @property
    def power(self):
        return float(np.sum(np.abs(self.s_f) ** 2))


def _unnormalised(technique, G, delta=None):
    Gc = np.conj(G)
    K = G.shape[1]
    if technique == "MF":
        return Gc
    if technique == "ZF":
        try:
            return pseudo_inverse(G.T, strict=True)
        except RankDeficient as e:
            raise SingularGram(str(e)) from None
    if technique == "RZF":
        if delta is None or delta < 0:
            raise ValueError("RZF needs a regularisation delta >= 0")
        gram = G.T @ Gc + delta * np.eye(K)
        if delta == 0 and np.linalg.cond(gram) > 1e12:
            raise SingularRegularizedGram("G^T G* is singular")
        return Gc @ np.linalg.inv(gram)
    raise ValueError(f"unknown precoder {technique!r}")


def precoding_matrix(technique, G, rho_f=1.0, delta=None):
    """Return ``(P, gamma)`` with ``s_f = P q_f`` and ``E||s_f||^2 = rho_f``."""
    G = as_matrix(G)
    K = G.shape[1]
    W = _unnormalised(technique.upper(), G, delta)
    gamma = float(np.sum(np.abs(W) ** 2)) / K
    return np.sqrt(rho_f / K / gamma) * W, gamma


def _precode(technique, G, q_f, rho_f, delta=None):
    G = as_matrix(G)
    q_f = np.asarray(q_f, dtype=complex)
    P, gamma = precoding_matrix(technique, G, rho_f, delta)
    scale = np.sqrt(rho_f / G.shape[1] / gamma)
    return PrecodedVector(P @ q_f, gamma, technique, scale)


def zf_precode(G, q_f, rho_f=1.0):
    """Zero-forcing: ``s_f = sqrt(rho_f/K) G^* (G^T G^*)^{-1} q_f / sqrt(gamma)``.

    The noiseless received vector is ``scale * q_f`` with no cross terms.
    """
    return _precode("ZF", G, q_f, rho_f)


def mf_precode(G, q_f, rho_f=1.0):
    """Matched filter (maximum-ratio transmission): ``s_f ∝ G^* q_f``."""
    return _precode("MF", G, q_f, rho_f)


def rzf_precode(G, q_f, delta, rho_f=1.0):
    """Regularised ZF: ``G^* (G^T G^* + delta I)^{-1} q_f``, normalised.

    ``delta = 0`` is ZF; large ``delta`` approaches MF.
    """
    log.info("regularised ZF with delta=%g (M=%d)", delta, as_matrix(G).shape[0])
    return _precode("RZF", G, q_f, rho_f, delta)


def effective_forward_matrix(technique, G, rho_f, G_est=None, delta=None):
    """``T = G^T P``; entry (k, j) is the gain of symbol j at terminal k."""
    G = as_matrix(G)
    P, _ = precoding_matrix(technique, G if G_est is None else as_matrix(G_est),
                            rho_f, delta)
    return G.T @ P


@dataclass(frozen=True)
class ForwardSinrStats:
    """Monte-Carlo SINR of one precoder.

    ``sinr`` holds one row of per-terminal values per trial; ``power_ratio``
    is mean signal power over mean interference-plus-noise power.
    """

    technique: str
    M: int
    K: int
    rho_f: float
    xi: float
    sinr: np.ndarray
    signal: np.ndarray
    interference: np.ndarray
    sum_rate: np.ndarray

    @property
    def mean_sinr(self):
        return float(self.sinr.mean())

    @property
    def var_sinr(self):
        return float(self.sinr.var())

    @property
    def power_ratio(self):
        return float(self.signal.mean() / self.interference.mean())

    @property
    def power_ratio_db(self):
        return 10 * np.log10(self.power_ratio)

    @property
    def mean_sum_rate(self):
        return float(self.sum_rate.mean())


def _forward_trial(args):
    technique, M, K, rho_f, xi, delta, base, t = args
    r = rngmod.trial_stream(base, t)
    G = crandn(r, M, K)
    if technique == "IF":
        sig = rho_f / K * np.sum(np.abs(G) ** 2, axis=0)
        return sig, np.ones(K)
    G_est = imperfect_csi(G, xi, r).G if xi < 1 else None
    T = effective_forward_matrix(technique, G, rho_f, G_est, delta)
    p = np.abs(T) ** 2
    sig = np.diag(p).copy()
    return sig, p.sum(axis=1) - sig + 1.0


def measure_forward_sinr(technique, M, K, rho_f, xi=1.0, trials=1000, rng=None,
                         delta=None, workers=1):
    """Per-terminal SINR of a precoder over fresh IID channel draws.

    Imperfect CSI (``xi < 1``) corrupts only the matrix the precoder is built
    from; the signal still propagates through the true channel. The IF
    technique is the interference-free genie receiving ``||g_k||^2 rho_f/K``.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials")
    technique = technique.upper()
    rng = rng if rng is not None else np.random.default_rng()
    base = rngmod.substream_seed(rng)
    out = pmap(_forward_trial,
               [(technique, M, K, rho_f, xi, delta, base, t) for t in range(trials)],
               workers)
    sig = np.array([o[0] for o in out])
    inter = np.array([o[1] for o in out])
    sinr = sig / inter
    return ForwardSinrStats(technique, M, K, rho_f, xi, sinr, sig, inter,
                            np.log2(1 + sinr).sum(axis=1))
