import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vlmimo import detection as det
from vlmimo.errors import BudgetExceeded, OddBitCount, TooLarge, UnknownTechnique
from vlmimo.numerics import crandn

from oracles import brute_force_ml, qfunc

seeds = st.integers(0, 2 ** 32 - 1)


def instance(seed, M, K, rho_db=6.0, noise=True):
    r = np.random.default_rng(seed)
    G = crandn(r, M, K)
    q = det.qpsk_map(r.integers(0, 2, 2 * K))
    rho = 10 ** (rho_db / 10)
    x = np.sqrt(rho / K) * G @ q + (crandn(r, M) if noise else 0)
    return G, q, x, rho


def scaled(G, rho):
    return np.sqrt(rho / G.shape[1]) * G


ALL = [lambda G, x, rho: det.detect_linear_mmse(G, x, rho),
       lambda G, x, rho: det.detect_mmse_sic(G, x, rho),
       lambda G, x, rho: det.detect_bigdfe(G, x, rho),
       lambda G, x, rho: det.detect_random_step(G, x, rho, "LAS"),
       lambda G, x, rho: det.detect_random_step(G, x, rho, "TS"),
       lambda G, x, rho: det.detect_fcsd(G, x, rho, r=min(2, G.shape[1])),
       lambda G, x, rho: det.detect_zf_df(G, x, rho)]


class TestConstellation:
    def test_roundtrip(self, rng):
        bits = rng.integers(0, 2, (10_000, 8))
        for b in bits:
            assert np.array_equal(det.qpsk_demap(det.qpsk_map(b)), b)

    def test_unit_energy(self):
        assert np.all(np.abs(det.QPSK) == 1.0)

    def test_min_distance(self):
        d = np.abs(det.QPSK[:, None] - det.QPSK[None, :])
        assert np.isclose(d[d > 0].min(), np.sqrt(2))

    def test_gray(self):
        # adjacent points differ in exactly one bit
        for a in range(4):
            for b in range(4):
                if np.isclose(abs(det.QPSK[a] - det.QPSK[b]), np.sqrt(2)):
                    ba = det.qpsk_demap(det.QPSK[a:a + 1])
                    bb = det.qpsk_demap(det.QPSK[b:b + 1])
                    assert np.sum(ba != bb) == 1

    def test_odd_bits(self):
        with pytest.raises(OddBitCount):
            det.qpsk_map([1, 0, 1])


@settings(max_examples=15)
@given(seeds, st.integers(1, 6), st.integers(0, 4))
def test_slicer_closure(seed, K, extra):
    G, q, x, rho = instance(seed, K + extra, K, rho_db=0.0)
    for f in ALL:
        res = f(G, x, rho)
        assert np.all(np.isin(np.round(res.q_hat, 12), np.round(det.QPSK, 12)))
        assert np.isfinite(res.metric) and res.flops >= 0


def test_noiseless_identity():
    K = 6
    q = det.qpsk_map(np.random.default_rng(1).integers(0, 2, 2 * K))
    rho = float(K)                                   # p = 1
    x = q.copy()
    for f in ALL:
        assert np.array_equal(f(np.eye(K, dtype=complex), x, rho).q_hat, q)
    assert np.array_equal(det.detect_ml_oracle(np.eye(K, dtype=complex), x, rho).q_hat, q)


@given(seeds, st.floats(-10, 20))
def test_single_user_mmse_is_ml(seed, rho_db):
    G, q, x, rho = instance(seed, 4, 1, rho_db)
    assert np.array_equal(det.detect_linear_mmse(G, x, rho).q_hat,
                          det.detect_ml_oracle(G, x, rho).q_hat)


class TestML:
    @pytest.mark.parametrize("K", [1, 2, 3, 5])
    def test_matches_brute_force(self, K):
        for seed in range(6):
            G, q, x, rho = instance(seed, K + 1, K, 3.0)
            Gs = scaled(G, rho)
            ref, m = brute_force_ml(Gs, x)
            res = det.detect_ml_oracle(G, x, rho)
            assert np.isclose(res.metric, m)
            assert np.array_equal(res.q_hat, ref)

    def test_prescaled(self):
        G, q, x, rho = instance(0, 4, 3)
        assert np.array_equal(det.detect_ml_oracle(scaled(G, rho), x).q_hat,
                              det.detect_ml_oracle(G, x, rho).q_hat)

    def test_too_large(self):
        with pytest.raises(TooLarge):
            det.detect_ml_oracle(np.zeros((13, 13)), np.zeros(13))

    @settings(max_examples=15)
    @given(seeds)
    def test_below_every_detector(self, seed):
        G, q, x, rho = instance(seed, 6, 5, 4.0)
        m = det.detect_ml_oracle(G, x, rho).metric
        for f in ALL:
            assert m <= f(G, x, rho).metric + 1e-9


class TestFCSD:
    def test_exhaustive_equals_ml(self):
        for seed in range(30):
            K = 2 + seed % 7
            G, q, x, rho = instance(seed, K, K, 8.0)
            a = det.detect_fcsd(G, x, rho, r=K)
            b = det.detect_ml_oracle(G, x, rho)
            assert np.array_equal(a.q_hat, b.q_hat)

    @given(seeds, st.integers(1, 5))
    def test_no_worse_than_zf_df(self, seed, r):
        G, q, x, rho = instance(seed, 6, 5, 2.0)
        order = det._fcsd_order(scaled(G, rho), r)
        a = det.detect_fcsd(G, x, rho, r=r, order=order)
        b = det.detect_fcsd(G, x, rho, r=0, order=order)
        assert a.metric <= b.metric + 1e-9

    def test_r0_is_zf_df(self):
        G, q, x, rho = instance(3, 6, 5)
        assert np.array_equal(det.detect_fcsd(G, x, rho, r=0).q_hat,
                              det.detect_zf_df(G, x, rho).q_hat)

    def test_zf_df_by_hand(self):
        # unordered ZF-DF on an upper triangular channel: back substitution
        Gs = np.array([[1.0, 0.4], [0.0, 1.0]], dtype=complex)
        q = det.QPSK[[0, 3]]
        x = Gs @ q + np.array([0.1 - 0.1j, -0.2 + 0.05j])
        res = det.detect_fcsd(Gs, x, 2.0, r=0, order=[0, 1])
        assert np.array_equal(res.q_hat, q)

    def test_budget(self):
        G, q, x, rho = instance(0, 8, 8)
        with pytest.raises(BudgetExceeded):
            det.detect_fcsd(G, x, rho, r=6, budget=4 ** 5)

    def test_default_r(self):
        assert det.DetectorConfig("FCSD").r == 8


class TestRandomStep:
    @given(seeds)
    def test_ts_no_worse_than_mmse(self, seed):
        G, q, x, rho = instance(seed, 8, 8, 6.0)
        mm = det.detect_linear_mmse(G, x, rho).metric
        assert det.detect_random_step(G, x, rho, "TS").metric <= mm + 1e-9

    @given(seeds)
    def test_las_monotone(self, seed):
        G, q, x, rho = instance(seed, 8, 8, 6.0)
        res = det.detect_random_step(G, x, rho, "LAS", record_trace=True)
        m = [t[1] for t in res.trace]
        assert all(b < a for a, b in zip(m, m[1:]))
        # stops at a local minimum: no single move improves
        Gs = scaled(G, rho)
        for k in range(8):
            for d in det._neighbor_deltas(res.q_hat)[k]:
                c = res.q_hat.copy()
                c[k] += d
                assert np.sum(np.abs(x - Gs @ c) ** 2) >= res.metric - 1e-9

    @given(seeds, st.integers(1, 20))
    def test_tabu_audit(self, seed, n_tabu):
        G, q, x, rho = instance(seed, 6, 6, 4.0)
        res = det.detect_random_step(G, x, rho, "TS", n_iter=40, n_tabu=n_tabu,
                                     record_trace=True)
        for prev, cur in zip(res.trace, res.trace[1:]):
            assert cur[0].tobytes() not in prev[2]
            assert len(cur[2]) <= n_tabu + 1
        best = min(t[1] for t in res.trace)
        assert np.isclose(res.metric, best)

    def test_defaults(self):
        cfg = det.DetectorConfig("TS")
        assert cfg.ts_iters == 60 and cfg.tabu == 60
        assert det.DetectorConfig("MMSE-SIC").sic_iters == 6
        assert det.DetectorConfig("BI-GDFE").bigdfe_iters == 4


class TestSIC:
    def test_orthogonal_is_genie(self, rng):
        Q, _ = np.linalg.qr(crandn(rng, 10, 4))
        G = 3 * Q
        for seed in range(20):
            r = np.random.default_rng(seed)
            q = det.qpsk_map(r.integers(0, 2, 8))
            x = np.sqrt(1 / 4) * G @ q + crandn(r, 10)
            genie = det.slice_qpsk(G.conj().T @ x)
            assert np.array_equal(det.detect_mmse_sic(G, x, 1.0, n_iter=1).q_hat, genie)

    def test_needs_iteration(self, rng):
        with pytest.raises(ValueError):
            det.detect_mmse_sic(crandn(rng, 4, 2), np.zeros(4), 1.0, n_iter=0)


class TestBIGDFE:
    def test_filters_independent_of_x(self, rng):
        G = crandn(rng, 8, 6)
        f1 = det.bigdfe_filters(G, 4.0, det.default_idc_schedule(4))
        a = det.detect_bigdfe(G, crandn(rng, 8), 4.0, filters=f1)
        f2 = det.bigdfe_filters(G, 4.0, det.default_idc_schedule(4))
        b = det.detect_bigdfe(G, crandn(rng, 8), 4.0, filters=f2)
        for F1, F2 in zip(f1.F, f2.F):
            assert np.array_equal(F1, F2)
        assert a.metric != b.metric

    def test_reusing_filters_same_output(self, rng):
        G = crandn(rng, 8, 6)
        x = crandn(rng, 8)
        f = det.bigdfe_filters(G, 4.0, det.default_idc_schedule(4))
        assert np.array_equal(det.detect_bigdfe(G, x, 4.0, filters=f).q_hat,
                              det.detect_bigdfe(G, x, 4.0).q_hat)

    def test_full_idc_orthogonal(self, rng):
        Q, _ = np.linalg.qr(crandn(rng, 10, 4))
        G = 2 * Q
        q = det.qpsk_map(rng.integers(0, 2, 8))
        x = G @ q + 0.3 * crandn(rng, 10)
        res = det.detect_bigdfe(G, x, 4.0, n_iter=1, idc_schedule=(1.0,))
        assert np.array_equal(res.q_hat, det.slice_qpsk(G.conj().T @ x))

    def test_schedule(self):
        s = det.default_idc_schedule(4)
        assert np.isclose(s[0], 0.5) and np.isclose(s[-1], 1.0)
        assert np.all(np.diff(s) > 0)
        with pytest.raises(ValueError):
            det.detect_bigdfe(np.eye(2), np.zeros(2), 1.0, n_iter=3, idc_schedule=(1.0,))
        with pytest.raises(ValueError):
            det.bigdfe_filters(np.eye(2), 1.0, (1.5,))


class TestTable2:
    def test_values(self):
        M, K = 40, 15
        assert det.table2_complexity("MMSE", M, K) == {
            "per_x": M * K, "per_G": M * K ** 2 + K ** 3, "total": M * K + M * K ** 2 + K ** 3}
        f = det.table2_complexity("FCSD", M, K, r=3)
        assert f["per_x"] == (M ** 2 + K ** 2 + 9) * 64
        assert f["per_G"] == M * K ** 2 + K ** 3
        assert det.table2_complexity("ML", 8, 8)["per_x"] == 64 * 4 ** 8
        assert det.table2_complexity("MMSE-SIC", M, K, n_iter=6)["per_x"] == (M * M * K + M ** 3) * 6
        bi = det.table2_complexity("BI-GDFE", M, K, n_iter=4)
        assert bi["per_x"] == M * K * 4 and bi["per_G"] == (M * M * K + M ** 3) * 4
        ts = det.table2_complexity("TS", M, K, n_iter=60, n_tabu=60, n_neigh=30)
        assert ts["per_x"] == ((M + 60) * 30 + M * K) * 60
        las = det.table2_complexity("LAS", M, K, n_iter=60, n_neigh=30)
        assert las["per_x"] == (M * 30 + M * K) * 60

    def test_unknown(self):
        with pytest.raises(UnknownTechnique):
            det.table2_complexity("SD", 4, 4)
        with pytest.raises(UnknownTechnique):
            det.DetectorConfig("SD")


class TestBer:
    def test_genie_matches_q_function(self):
        # ||g||^2 p is Gamma(M, p) distributed; average the Q-function over it
        M, K, rho_db = 4, 2, 0.0
        pts = det.ber_experiment(M, K, [rho_db], ["MMSE"], np.random.default_rng(0),
                                 target_errors=4000, max_vectors=40_000, batch=500)
        genie = [p for p in pts if p.technique == "IF"][0]
        p = 10 ** (rho_db / 10) / K
        g = np.random.default_rng(1).gamma(M, 1.0, 400_000)
        target = np.mean([qfunc(np.sqrt(v)) for v in g[:100_000] * p])
        assert abs(genie.ber - target) / target < 0.05

    def test_awgn_formula(self):
        assert np.isclose(det.qpsk_ber_awgn(4.0), qfunc(2.0))

    def test_worker_invariance(self):
        kw = dict(target_errors=30, max_vectors=400, batch=25)
        a = det.ber_experiment(8, 4, [2.0, 6.0], ["MMSE", "TS"], np.random.default_rng(2), **kw)
        b = det.ber_experiment(8, 4, [2.0, 6.0], ["MMSE", "TS"], np.random.default_rng(2),
                               workers=4, **kw)
        strip = lambda pts: [(p.technique, p.rho_db, p.vectors, p.symbol_errors, p.bit_errors,
                              p.flops) for p in pts]
        assert strip(a) == strip(b)

    def test_stop_rule(self):
        pts = det.ber_experiment(4, 4, [0.0], ["MMSE"], np.random.default_rng(0),
                                 target_errors=20, max_vectors=10_000, batch=10)
        assert all(p.symbol_errors >= 20 for p in pts)
        assert pts[0].vectors < 10_000
        assert pts[-1].technique == "IF"

    def test_ci(self):
        p = det.BerPoint("MMSE", 4, 4, 0.0, vectors=1000, symbol_errors=50, bit_errors=60)
        lo, hi = p.ci()
        assert lo < p.ber < hi
        assert det.BerPoint("MMSE", 4, 4, 0.0, vectors=10).ci()[0] == 0.0
        row = p.as_row()
        assert list(row) == ["technique", "M", "K", "rho_dB", "vectors", "symbol_errors", "BER",
                             "CI_low", "CI_high", "est_flops", "wall_ns"]
