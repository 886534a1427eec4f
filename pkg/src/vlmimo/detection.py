"""Uplink hard-decision detectors for QPSK.

Signal model: ``x = sqrt(p) G q + w`` with unit-energy QPSK symbols ``q``,
CN(0, 1) noise and per-terminal power ``p = rho / K`` (total transmit power
``rho``). Every detector returns a :class:`DetectionResult` whose ``metric``
is ``||x - sqrt(p) G q_hat||^2``.
"""

import functools
import itertools
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.stats

from . import rng as rngmod
from ._parallel import pmap
from .errors import BudgetExceeded, OddBitCount, TooLarge, UnknownTechnique
from .numerics import crandn

__all__ = ['QPSK', 'qpsk_map', 'qpsk_demap', 'slice_qpsk', 'DetectionResult',
           'DetectorConfig', 'detect_linear_mmse', 'detect_mmse_sic',
           'bigdfe_filters', 'detect_bigdfe', 'detect_random_step', 'detect_fcsd',
           'detect_ml_oracle', 'detect_zf_df', 'table2_complexity', 'detect',
           'BerPoint', 'ber_experiment', 'qpsk_ber_awgn', 'TECHNIQUES']

_A = 1 / np.sqrt(2)
# Gray map: bit pair (b0, b1) -> ((1 - 2 b0) + 1j (1 - 2 b1)) / sqrt(2)
QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) * _A

TECHNIQUES = ("MMSE", "MMSE-SIC", "BI-GDFE", "LAS", "TS", "FCSD", "ML")


def qpsk_map(bits):
    """Gray-mapped unit-energy QPSK; bit pairs map to (real, imag) signs."""
    b = np.asarray(bits, dtype=np.int8).ravel()
    if b.size % 2:
        raise OddBitCount(f"{b.size} bits cannot be split into QPSK pairs")
    b = b.reshape(-1, 2)
    return ((1 - 2 * b[:, 0]) + 1j * (1 - 2 * b[:, 1])) * _A


def qpsk_demap(q):
    q = np.asarray(q).ravel()
    return np.column_stack([q.real < 0, q.imag < 0]).astype(np.int8).ravel()


def slice_qpsk(z):
    """Nearest QPSK point, component-wise (ties go to +)."""
    z = np.asarray(z)
    return (np.where(z.real >= 0, _A, -_A) + 1j * np.where(z.imag >= 0, _A, -_A))


@dataclass
class DetectionResult:
    q_hat: np.ndarray
    metric: float
    visited: int = 0
    flops: float = 0.0
    wall_ns: int = 0
    trace: Optional[list] = None


@dataclass(frozen=True)
class DetectorConfig:
    """Detector choice and its knobs, with the published parameter choices
    as defaults (6 MMSE-SIC and 4 BI-GDFE iterations, 60 tabu moves and a
    60-entry tabu list, 8 fully enumerated FCSD levels)."""

    technique: str = "MMSE"
    sic_iters: int = 6
    bigdfe_iters: int = 4
    idc_schedule: Optional[tuple] = None
    ts_iters: int = 60
    tabu: int = 60
    las_iters: int = 1000
    r: int = 8
    fcsd_budget: int = 4 ** 10

    def __post_init__(self):
        if self.technique not in TECHNIQUES:
            raise UnknownTechnique(self.technique)


def _metric(x, Gs, q):
    return float(np.sum(np.abs(x - Gs @ q) ** 2))


def _result(q, x, Gs, visited, flops, t0, trace=None):
    return DetectionResult(q, _metric(x, Gs, q), visited, flops,
                           time.perf_counter_ns() - t0, trace)


def _mmse_estimate(Gs, x):
    K = Gs.shape[1]
    A = Gs.conj().T @ Gs + np.eye(K)
    return scipy.linalg.solve(A, Gs.conj().T @ x, assume_a="pos")


def detect_linear_mmse(G, x, rho):
    """Slice ``(G^H G + I/p)^{-1} G^H x / sqrt(p)``."""
    t0 = time.perf_counter_ns()
    M, K = G.shape
    Gs = np.sqrt(rho / K) * G
    q = slice_qpsk(_mmse_estimate(Gs, x))
    return _result(q, x, Gs, 1, table2_complexity("MMSE", M, K)["total"], t0)


def _soft_qpsk(z, var):
    """Posterior mean of a QPSK symbol observed as ``z = q + n``, n ~ CN(0, var)."""
    s = np.sqrt(2) / np.maximum(var, 1e-300)
    return _A * (np.tanh(s * z.real) + 1j * np.tanh(s * z.imag))


def detect_mmse_sic(G, x, rho, n_iter=6):
    """Conditional MMSE with soft interference cancellation.

    Each iteration cancels the current soft estimates of the other terminals,
    filters with an MMSE filter that accounts for their residual variance,
    removes the filter bias and refreshes the soft symbol. One M x M inverse
    per iteration; per-terminal filters follow by a rank-one update.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be at least 1")
    t0 = time.perf_counter_ns()
    M, K = G.shape
    Gs = np.sqrt(rho / K) * G
    q_soft = np.zeros(K, dtype=complex)
    v = np.ones(K)
    for _ in range(n_iter):
        Ainv = np.linalg.inv((Gs * v) @ Gs.conj().T + np.eye(M))
        AG = Ainv @ Gs                                    # A^{-1} g_k
        s0 = np.real(np.sum(Gs.conj() * AG, axis=0))      # g_k^H A^{-1} g_k
        # Sherman-Morrison for A + (1 - v_k) g_k g_k^H
        F = AG / (1 + (1 - v) * s0)
        s = s0 / (1 + (1 - v) * s0)                       # f_k^H g_k
        resid = x - Gs @ q_soft
        z = (F.conj() * (resid[:, None] + Gs * q_soft)).sum(axis=0) / s
        var = np.maximum((1 - s) / s, 1e-12)
        q_soft = _soft_qpsk(z, var)
        v = np.clip(1 - np.abs(q_soft) ** 2, 0.0, 1.0)
    q = slice_qpsk(z)
    return _result(q, x, Gs, n_iter, table2_complexity("MMSE-SIC", M, K, n_iter=n_iter)["total"], t0)


def default_idc_schedule(n_iter):
    """Geometric ramp of input-decision correlations from 0.5 up to 1."""
    if n_iter == 1:
        return (1.0,)
    return tuple(0.5 * 2.0 ** (i / (n_iter - 1)) for i in range(n_iter))


@dataclass(frozen=True)
class BigdfeFilters:
    """Precomputed BI-GDFE filters for one channel (independent of x)."""

    F: tuple         # per iteration, M x K
    bias: tuple      # per iteration, length K
    schedule: tuple
    init: np.ndarray  # linear MMSE filter, M x K, already bias-free


def bigdfe_filters(G, rho, schedule):
    """Filters of every iteration; depend only on G, rho and the IDC schedule."""
    schedule = tuple(float(c) for c in schedule)
    if any(not 0 <= c <= 1 for c in schedule):
        raise ValueError("IDC values must lie in [0, 1]")
    M, K = G.shape
    Gs = np.sqrt(rho / K) * G
    Fs, biases = [], []
    for c in (0.0,) + schedule:
        v = 1 - c ** 2
        AG = np.linalg.solve(v * Gs @ Gs.conj().T + np.eye(M), Gs)
        s0 = np.real(np.sum(Gs.conj() * AG, axis=0))
        F = AG / (1 + (1 - v) * s0)
        Fs.append(F)
        biases.append(s0 / (1 + (1 - v) * s0))
    init = Fs[0] / biases[0]
    return BigdfeFilters(tuple(Fs[1:]), tuple(biases[1:]), schedule, init)


def detect_bigdfe(G, x, rho, n_iter=4, idc_schedule=None, filters=None):
    """Block-iterative generalised DFE with hard decision feedback.

    Iteration i subtracts ``c_i`` times the reconstructed interference of the
    previous hard decisions, where ``c_i`` is the assumed input-decision
    correlation. Pass ``filters`` from :func:`bigdfe_filters` to reuse them
    across received vectors.
    """
    t0 = time.perf_counter_ns()
    M, K = G.shape
    if filters is None:
        sched = idc_schedule if idc_schedule is not None else default_idc_schedule(n_iter)
        if len(sched) != n_iter:
            raise ValueError("IDC schedule length must equal n_iter")
        filters = bigdfe_filters(G, rho, sched)
    Gs = np.sqrt(rho / K) * G
    q = slice_qpsk(filters.init.conj().T @ x)
    for F, s, c in zip(filters.F, filters.bias, filters.schedule):
        interf = Gs @ q
        xk = x[:, None] - c * (interf[:, None] - Gs * q)
        z = (F.conj() * xk).sum(axis=0) / s
        q = slice_qpsk(z)
    n = len(filters.F)
    return _result(q, x, Gs, n, table2_complexity("BI-GDFE", M, K, n_iter=n)["total"], t0)


def _neighbor_deltas(q):
    """Changes that move one symbol to an adjacent QPSK point: (K, 2)."""
    return np.stack([-2 * q.real, -2j * q.imag], axis=1).astype(complex)


def detect_random_step(G, x, rho, mode="TS", n_iter=None, n_tabu=60, record_trace=False):
    """Local search from the MMSE slice over single-symbol moves.

    ``mode="LAS"`` takes the best strictly improving move until none is
    left. ``mode="TS"`` always takes the best non-tabu move, keeps a FIFO of
    the last ``n_tabu`` visited vectors, and returns the best vector seen
    after ``n_iter`` moves.
    """
    t0 = time.perf_counter_ns()
    M, K = G.shape
    mode = mode.upper()
    if n_iter is None:
        n_iter = 60 if mode == "TS" else 1000
    Gs = np.sqrt(rho / K) * G
    gn = np.sum(np.abs(Gs) ** 2, axis=0)
    q = slice_qpsk(_mmse_estimate(Gs, x))
    r = x - Gs @ q
    metric = float(np.real(r.conj() @ r))
    best_q, best_metric = q.copy(), metric
    tabu, tabu_set = [], set()
    if mode == "TS":
        tabu.append(q.tobytes())
        tabu_set.add(tabu[-1])
    trace = [(q.copy(), metric, list(tabu) if mode == "TS" else None)] if record_trace else None
    visited = 1
    for _ in range(n_iter):
        D = _neighbor_deltas(q)                                  # (K, 2)
        corr = Gs.conj().T @ r                                   # g_k^H r
        new = metric - 2 * np.real(np.conj(D) * corr[:, None]) + np.abs(D) ** 2 * gn[:, None]
        visited += 2 * K
        if mode == "LAS":
            k, c = np.unravel_index(np.argmin(new), new.shape)
            if new[k, c] >= metric:
                break
        else:
            order = np.argsort(new, axis=None)
            for flat in order:
                k, c = np.unravel_index(flat, new.shape)
                cand = q.copy()
                cand[k] += D[k, c]
                if cand.tobytes() not in tabu_set:
                    break
            else:
                break
        q = q.copy()
        q[k] += D[k, c]
        r = r - Gs[:, k] * D[k, c]
        metric = float(new[k, c])
        if mode == "TS":
            key = q.tobytes()
            tabu.append(key)
            tabu_set.add(key)
            if len(tabu) > n_tabu:
                tabu_set.discard(tabu.pop(0))
        if record_trace:
            trace.append((q.copy(), metric, list(tabu) if mode == "TS" else None))
        if metric < best_metric:
            best_q, best_metric = q.copy(), metric
    out_q = best_q if mode == "TS" else q
    flops = table2_complexity("TS", M, K, n_iter=n_iter,
                              n_tabu=n_tabu if mode == "TS" else 0)["total"]
    return _result(out_q, x, Gs, visited, flops, t0, trace)


def _fcsd_order(Gs, r):
    """Column order for FCSD: position ``K-1-i`` holds the i-th detected stream.

    The first ``r`` detected streams (fully enumerated) are picked as the
    weakest remaining post-ZF stream, the rest as the strongest, recomputing
    the ZF noise amplification after each pick.
    """
    K = Gs.shape[1]
    remaining = list(range(K))
    picked = []
    for level in range(K):
        sub = Gs[:, remaining]
        amp = np.real(np.diag(np.linalg.pinv(sub.conj().T @ sub)))
        idx = int(np.argmax(amp)) if level < r else int(np.argmin(amp))
        picked.append(remaining.pop(idx))
    return picked[::-1]


def _qr(Gs, x):
    Q, R = np.linalg.qr(Gs, mode="reduced")
    return R, Q.conj().T @ x, float(np.sum(np.abs(x) ** 2) - np.sum(np.abs(Q.conj().T @ x) ** 2))


def _fcsd_search(Gs, x, r, order):
    """Enumerate the top ``r`` levels, ZF-DF the rest.

    Candidates grow as a tree: each enumerated level multiplies the partial
    vectors by four (child ``4 i + c`` of node ``i`` takes ``QPSK[c]``), the
    ZF-DF levels extend every partial vector by one sliced symbol. ``U``
    carries the interference of the detected symbols on the levels still to
    come.
    """
    K = Gs.shape[1]
    Gp = Gs[:, order]
    R, y, _ = _qr(Gp, x)
    U = np.zeros((1, K), dtype=complex)
    metric = np.zeros(1)
    sliced = []
    for pos in range(K):
        lvl = K - 1 - pos
        z = y[lvl] - U[:, lvl]
        if pos < r:
            e = z[:, None] - R[lvl, lvl] * QPSK[None, :]
            metric = (metric[:, None] + (e.real ** 2 + e.imag ** 2)).ravel()
            if lvl:
                U = (U[:, None, :lvl] + QPSK[None, :, None] * R[:lvl, lvl]).reshape(-1, lvl)
            sliced.append(None)
        else:
            s = slice_qpsk(z / R[lvl, lvl])
            e = z - R[lvl, lvl] * s
            metric = metric + (e.real ** 2 + e.imag ** 2)
            if lvl:
                U = U[:, :lvl] + s[:, None] * R[:lvl, lvl]
            sliced.append(s)
    i = int(np.argmin(metric))
    n_cand = metric.shape[0]
    qp = np.empty(K, dtype=complex)
    for pos in range(K - 1, -1, -1):
        if sliced[pos] is None:
            i, c = divmod(i, 4)
            qp[K - 1 - pos] = QPSK[c]
        else:
            qp[K - 1 - pos] = sliced[pos][i]
    q = np.empty(K, dtype=complex)
    q[order] = qp
    return q, n_cand


def detect_fcsd(G, x, rho, r=8, budget=4 ** 10, order=None):
    """Fixed-complexity sphere decoder.

    All ``4**r`` combinations of the ``r`` weakest streams are enumerated and
    each is completed by ZF decision feedback; the candidate with the smallest
    metric wins. ``r = 0`` is plain ordered ZF-DF and ``r = K`` is exhaustive.
    ``order`` overrides the stream ordering (position ``K-1`` is detected first).
    """
    t0 = time.perf_counter_ns()
    M, K = G.shape
    if not 0 <= r <= K:
        raise ValueError("r must lie in [0, K]")
    if 4 ** r > budget:
        raise BudgetExceeded(f"4**{r} candidates exceed the budget of {budget}")
    if M < K:
        raise ValueError("FCSD needs M >= K")
    Gs = np.sqrt(rho / K) * G
    if order is None:
        order = _fcsd_order(Gs, r)
    q, n = _fcsd_search(Gs, x, r, list(order))
    return _result(q, x, Gs, n, table2_complexity("FCSD", M, K, r=r)["total"], t0)


def detect_zf_df(G, x, rho):
    """Ordered ZF decision feedback (FCSD with nothing enumerated)."""
    return detect_fcsd(G, x, rho, r=0)


@functools.lru_cache(maxsize=None)
def _index_table(n):
    """All ``4**n`` QPSK index tuples in lexicographic order, shape (4**n, n)."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8)
    return np.array(list(itertools.product(range(4), repeat=n)), dtype=np.int8)


def detect_ml_oracle(G, x, rho=None, row_chunk=1024):
    """Exhaustive minimiser of ``||x - sqrt(p) G q||^2`` over all QPSK vectors.

    ``rho=None`` means G already includes the transmit amplitude. The metric
    is expanded as ``|x|^2 - 2 Re(b^H q) + q^H A q`` and the symbol vector
    split in two halves, so the cross term of every pair of half-vectors is
    one block of a single matrix product. All ``4**K`` vectors are scored.
    """
    t0 = time.perf_counter_ns()
    M, K = G.shape
    if K > 12:
        raise TooLarge(f"exhaustive search over 4**{K} vectors refused")
    Gs = G if rho is None else np.sqrt(rho / K) * G
    A = Gs.conj().T @ Gs
    b = Gs.conj().T @ x
    k1 = K // 2
    Q1 = QPSK[_index_table(k1)]          # (4**k1, k1)
    Q2 = QPSK[_index_table(K - k1)]      # (4**k2, k2)

    def half(Qh, sl):
        Ah = A[sl, sl]
        quad = np.real(np.einsum("ni,ij,nj->n", Qh.conj(), Ah, Qh))
        return quad - 2 * np.real(Qh @ b[sl].conj())

    c1 = half(Q1, slice(0, k1))
    c2 = half(Q2, slice(k1, K))
    C = Q1.conj() @ A[:k1, k1:]          # (4**k1, k2)
    best = (np.inf, 0, 0)
    for s in range(0, Q1.shape[0], row_chunk):
        m = c1[s:s + row_chunk, None] + c2[None, :] + 2 * np.real(C[s:s + row_chunk] @ Q2.T)
        i = int(np.argmin(m))
        i1, i2 = divmod(i, m.shape[1])
        if m[i1, i2] < best[0]:
            best = (m[i1, i2], s + i1, i2)
    q = np.concatenate([Q1[best[1]], Q2[best[2]]])
    return _result(q, x, Gs, 4 ** K, table2_complexity("ML", M, K)["total"], t0)


def table2_complexity(technique, M, K, n_iter=None, n_tabu=None, n_neigh=None, r=None,
                      S=4):
    """Rough floating-point operation counts per received vector and per channel.

    Returns a dict with keys ``per_x``, ``per_G`` and ``total``. LAS is
    charged as TS with an empty tabu list.
    """
    t = technique.upper()
    if n_neigh is None:
        n_neigh = 2 * K
    if t == "MMSE":
        px, pg = M * K, M * K ** 2 + K ** 3
    elif t == "MMSE-SIC":
        px, pg = (M ** 2 * K + M ** 3) * (n_iter or 6), 0
    elif t == "BI-GDFE":
        n = n_iter or 4
        px, pg = M * K * n, (M ** 2 * K + M ** 3) * n
    elif t in ("TS", "LAS"):
        n = n_iter if n_iter is not None else 60
        nt = n_tabu if n_tabu is not None else (60 if t == "TS" else 0)
        px, pg = ((M + nt) * n_neigh + M * K) * n, M * K ** 2 + K ** 3
    elif t == "FCSD":
        rr = 8 if r is None else r
        px, pg = (M ** 2 + K ** 2 + rr ** 2) * S ** rr, M * K ** 2 + K ** 3
    elif t in ("ML", "MAP"):
        px, pg = M * K * S ** K, 0
    else:
        raise UnknownTechnique(f"no complexity entry for {technique!r}")
    return {"per_x": px, "per_G": pg, "total": px + pg}


def detect(cfg, G, x, rho):
    """Run the detector selected by a :class:`DetectorConfig`."""
    t = cfg.technique
    if t == "MMSE":
        return detect_linear_mmse(G, x, rho)
    if t == "MMSE-SIC":
        return detect_mmse_sic(G, x, rho, cfg.sic_iters)
    if t == "BI-GDFE":
        return detect_bigdfe(G, x, rho, cfg.bigdfe_iters, cfg.idc_schedule)
    if t == "LAS":
        return detect_random_step(G, x, rho, "LAS", cfg.las_iters)
    if t == "TS":
        return detect_random_step(G, x, rho, "TS", cfg.ts_iters, cfg.tabu)
    if t == "FCSD":
        return detect_fcsd(G, x, rho, min(cfg.r, G.shape[1]), cfg.fcsd_budget)
    if t == "ML":
        return detect_ml_oracle(G, x, rho)
    raise UnknownTechnique(t)


def qpsk_ber_awgn(snr):
    """Bit error rate of Gray QPSK at symbol SNR ``snr`` (linear)."""
    return scipy.stats.norm.sf(np.sqrt(snr))


@dataclass
class BerPoint:
    technique: str
    M: int
    K: int
    rho_db: float
    vectors: int = 0
    symbol_errors: int = 0
    bit_errors: int = 0
    flops: float = 0.0
    wall_ns: int = 0

    @property
    def bits(self):
        return 2 * self.K * self.vectors

    @property
    def ber(self):
        return self.bit_errors / self.bits if self.vectors else float("nan")

    @property
    def ser(self):
        return self.symbol_errors / (self.K * self.vectors) if self.vectors else float("nan")

    def ci(self, level=0.95):
        """Clopper-Pearson interval on the bit error rate."""
        n, k = self.bits, self.bit_errors
        a = 1 - level
        lo = scipy.stats.beta.ppf(a / 2, k, n - k + 1) if k > 0 else 0.0
        hi = scipy.stats.beta.ppf(1 - a / 2, k + 1, n - k) if k < n else 1.0
        return float(lo), float(hi)

    def as_row(self):
        lo, hi = self.ci()
        return {"technique": self.technique, "M": self.M, "K": self.K,
                "rho_dB": self.rho_db, "vectors": self.vectors,
                "symbol_errors": self.symbol_errors, "BER": self.ber,
                "CI_low": lo, "CI_high": hi,
                "est_flops": self.flops / max(self.vectors, 1), "wall_ns": self.wall_ns}


def _ber_batch(args):
    base, M, K, rho, configs, start, size = args
    stats = {c.technique: [0, 0, 0.0, 0] for c in configs}
    stats["IF"] = [0, 0, 0.0, 0]
    p = rho / K
    for v in range(start, start + size):
        r = rngmod.trial_stream(base, v)
        G = crandn(r, M, K)
        bits = r.integers(0, 2, 2 * K)
        q = qpsk_map(bits)
        w = crandn(r, M)
        x = np.sqrt(p) * G @ q + w
        for c in configs:
            res = detect(c, G, x, rho)
            st = stats[c.technique]
            st[0] += int(np.sum(res.q_hat != q))
            st[1] += int(np.sum(qpsk_demap(res.q_hat) != bits))
            st[2] += res.flops
            st[3] += res.wall_ns
        # interference-free genie: z_k = ||g_k|| sqrt(p) q_k + n_k
        gn = np.linalg.norm(G, axis=0)
        z = gn * np.sqrt(p) * q + crandn(r, K)
        qi = slice_qpsk(z)
        stats["IF"][0] += int(np.sum(qi != q))
        stats["IF"][1] += int(np.sum(qpsk_demap(qi) != bits))
    return stats


def ber_experiment(M, K, rho_db_list, configs, rng, target_errors=500, max_vectors=100_000,
                   batch=50, workers=1):
    """BER of several detectors plus the interference-free genie.

    A fresh channel, symbol vector and noise are drawn for every received
    vector and shared by all detectors. Vectors are processed in fixed
    batches; after each batch (in order) the run stops once every detector
    and the genie have ``target_errors`` symbol errors or ``max_vectors``
    vectors have been used. The outcome does not depend on ``workers``.

    Returns
    -------
    list of BerPoint
    """
    configs = [c if isinstance(c, DetectorConfig) else DetectorConfig(c) for c in configs]
    base0 = rngmod.substream_seed(rng)
    points = []
    for rho_db in rho_db_list:
        rho = 10 ** (rho_db / 10)
        base = rngmod.trial_stream(base0, "rho", repr(float(rho_db))).integers(0, 2 ** 63 - 1)
        acc = {c.technique: BerPoint(c.technique, M, K, rho_db) for c in configs}
        acc["IF"] = BerPoint("IF", M, K, rho_db)
        n_batches = -(-max_vectors // batch)
        b = 0
        done = False
        while b < n_batches and not done:
            wave = list(range(b, min(b + max(workers, 1), n_batches)))
            outs = pmap(_ber_batch,
                        [(int(base), M, K, rho, configs, i * batch,
                          min(batch, max_vectors - i * batch)) for i in wave], workers)
            for i, out in zip(wave, outs):
                for t, (se, be, fl, ns) in out.items():
                    pt = acc[t]
                    pt.vectors += min(batch, max_vectors - i * batch)
                    pt.symbol_errors += se
                    pt.bit_errors += be
                    pt.flops += fl
                    pt.wall_ns += ns
                b = i + 1
                if all(pt.symbol_errors >= target_errors for pt in acc.values()):
                    done = True
                    break
        points.extend(acc.values())
    return points
