import numpy as np
import pytest
from hypothesis import given, strategies as st

from vlmimo import capacity as cap
from vlmimo.errors import NonFinite, UnknownRegime, VPRangeExceeded
from vlmimo.numerics import crandn

seeds = st.integers(0, 2 ** 32 - 1)


def orthogonal_columns(M, K, scale=1.0):
    Q, _ = np.linalg.qr(crandn(np.random.default_rng(0), M, K))
    return scale * Q


class TestP2P:
    def test_scalar(self):
        assert np.isclose(cap.p2p_rate(np.array([[1.0]]), 3.0).rate, 2.0)

    def test_equal_singular_values_hit_upper_bound(self):
        G = orthogonal_columns(6, 3, 2.0)
        rep = cap.p2p_rate(G, 5.0)
        assert abs(rep.rate - rep.upper_bound) < 1e-9

    def test_many_receive_antennas(self, rng):
        G = crandn(rng, 500, 2)
        rho = 1.0
        target = 2 * np.log2(1 + rho * 500 / 2)
        assert abs(cap.p2p_rate(G, rho).rate - target) / target < 0.02

    @given(st.integers(1, 6), st.integers(1, 6), st.floats(0, 100), seeds)
    def test_bounds_hold(self, nr, nt, rho, seed):
        G = crandn(np.random.default_rng(seed), nr, nt)
        rep = cap.p2p_rate(G, rho)
        assert rep.lower_bound - 1e-9 <= rep.rate <= rep.upper_bound + 1e-9

    @given(st.integers(1, 6), st.integers(1, 6), seeds)
    def test_monotone_in_rho(self, nr, nt, seed):
        G = crandn(np.random.default_rng(seed), nr, nt)
        rates = [cap.p2p_rate(G, r).rate for r in (0.0, 0.1, 1.0, 10.0, 100.0)]
        assert np.all(np.diff(rates) >= -1e-12)

    def test_nonfinite(self):
        with pytest.raises(NonFinite):
            cap.p2p_rate(np.array([[np.nan]]), 1.0)


@given(st.integers(1, 6), st.integers(1, 6), seeds)
def test_determinant_identity(m, n, seed):
    A = crandn(np.random.default_rng(seed), m, n)
    a = np.linalg.slogdet(np.eye(m) + A @ A.conj().T)[1] / np.log(2)
    b = np.linalg.slogdet(np.eye(n) + A.conj().T @ A)[1] / np.log(2)
    assert abs(a - b) < 1e-9
    assert abs(cap.log2det_eye_plus(A) - a) < 1e-9


class TestAsymptotic:
    def test_values(self):
        assert np.isclose(cap.asymptotic_rate("LowSNR", rho=0.01, n_r=100), 1.4427, atol=1e-4)
        assert np.isclose(cap.asymptotic_rate("ManyTx", rho=1.0, n_r=4), 4.0)
        assert np.isclose(cap.asymptotic_rate("ReverseSum", M=100, rho_r=0.1, beta=[1, 1]),
                          6.9189, atol=1e-4)
        assert np.isclose(cap.asymptotic_rate("ManyRx", rho=1.0, n_t=2, n_r=8),
                          2 * np.log2(5))

    def test_unknown(self):
        with pytest.raises(UnknownRegime):
            cap.asymptotic_rate("Nope", rho=1)

    def test_missing_param(self):
        with pytest.raises(ValueError):
            cap.asymptotic_rate("ManyTx", rho=1.0)

    def test_waterfill_kkt(self):
        g = np.array([10.0, 5.0, 0.1])
        x = cap.waterfill(g)
        assert np.isclose(x.sum(), 1) and np.all(x >= 0)
        d = g / (1 + g * x)          # derivative of sum log(1 + g x)
        act = x > 0
        assert np.allclose(d[act], d[act][0])
        assert np.all(d[~act] <= d[act][0] + 1e-12)


class TestReverse:
    def test_single_user(self, rng):
        g = crandn(rng, 5, 1)
        assert np.isclose(cap.reverse_sum_rate(g, 2.0),
                          np.log2(1 + 2 * np.sum(np.abs(g) ** 2)))

    def test_zero_channel(self):
        assert cap.reverse_sum_rate(np.zeros((4, 2)), 3.0) == 0.0

    def test_large_array_limit(self, rng):
        M, K, rho = 512, 4, 0.1
        G = crandn(rng, M, K)
        target = cap.asymptotic_rate("ReverseSum", M=M, rho_r=rho, beta=np.ones(K))
        assert abs(cap.reverse_sum_rate(G, rho) - target) / target < 0.03


@given(st.integers(2, 200))
def test_project_simplex(seed):
    v = np.random.default_rng(seed).normal(size=7) * 3
    x = cap.project_simplex(v)
    assert np.all(x >= 0) and np.isclose(x.sum(), 1)
    # projection optimality: (v - x) . (y - x) <= 0 for every simplex point y
    for y in np.random.default_rng(seed + 1).dirichlet(np.ones(7), 20):
        assert (v - x) @ (y - x) <= 1e-10


class TestForward:
    def test_single_user(self, rng):
        g = crandn(rng, 6, 1)
        val, alloc = cap.forward_sum_capacity(g, 3.0)
        assert np.allclose(alloc.gamma, [1.0])
        assert np.isclose(val, np.log2(1 + 3 * np.sum(np.abs(g) ** 2)))

    def test_symmetric_uniform(self):
        G = orthogonal_columns(8, 4, 1.5)
        val, alloc = cap.forward_sum_capacity(G, 2.0)
        assert np.allclose(alloc.gamma, 0.25, atol=1e-6)

    def test_large_array_limit(self, rng):
        M, K, rho = 200, 4, 0.5
        G = crandn(rng, M, K)
        val, _ = cap.forward_sum_capacity(G, rho)
        target = cap.asymptotic_rate("ForwardSum", M=M, rho_f=rho, beta=np.ones(K))
        assert abs(val - target) / target < 0.03

    @pytest.mark.parametrize("M,K,rho_db", [(4, 4, 10), (15, 15, 0), (40, 15, 20),
                                            (6, 3, -10), (100, 15, 10)])
    def test_kkt_certificate(self, rng, M, K, rho_db):
        G = crandn(rng, M, K)
        rho = 10 ** (rho_db / 10)
        val, alloc = cap.forward_sum_capacity(G, rho)
        assert cap.kkt_residual(G, rho, alloc.gamma) <= 1e-6
        assert np.isclose(val, cap.forward_objective(G, rho, alloc.gamma))

    @given(seeds)
    def test_beats_random_allocations(self, seed):
        r = np.random.default_rng(seed)
        G = crandn(r, 5, 4)
        val, _ = cap.forward_sum_capacity(G, 4.0)
        for y in r.dirichlet(np.ones(4), 100):
            assert cap.forward_objective(G, 4.0, y) <= val + 1e-9

    @given(seeds)
    def test_monotone_in_rho(self, seed):
        G = crandn(np.random.default_rng(seed), 4, 3)
        vals = [cap.forward_sum_capacity(G, r)[0] for r in (0.0, 0.5, 5.0, 50.0)]
        assert np.all(np.diff(vals) >= -1e-9)

    def test_negative_rho(self, rng):
        with pytest.raises(ValueError):
            cap.forward_sum_capacity(crandn(rng, 3, 2), -1.0)


class TestTable1:
    def test_zf(self):
        assert cap.table1_sinr("ZF", 2.0, 1.0) == 1.0

    def test_mf_floor(self):
        assert abs(cap.table1_sinr("MF", 8.0, 1e6) - 8.0) < 1e-4

    def test_imperfect_reduces(self):
        assert cap.table1_sinr("ZF", 4.0, 10.0, xi=1.0) == cap.table1_sinr("ZF", 4.0, 10.0)
        v = cap.table1_sinr("ZF", 4.0, 10.0, xi=0.9)
        assert np.isclose(v, 0.81 * 10 * 3 / (0.19 * 10 + 1))
        assert np.isclose(cap.table1_sinr("MF", 4.0, 10.0, xi=0.9),
                          0.81 * 40 / 11)

    def test_if(self):
        assert cap.table1_sinr("IF", 3.0, 2.0) == 6.0

    def test_vp(self):
        a = 1.5
        assert np.isclose(cap.table1_sinr("VP", a, 2.0),
                          2.0 * a * np.pi / 6 * (1 - 1 / a) ** (1 - a))
        with pytest.raises(VPRangeExceeded):
            cap.table1_sinr("VP", 4.0, 2.0)

    def test_vp_boundary(self):
        # gain pi/6 (1-1/a)^(1-a) crosses 1 between 1.78 and 1.80
        cap.table1_sinr("VP", 1.78, 1.0)
        with pytest.raises(VPRangeExceeded):
            cap.table1_sinr("VP", 1.80, 1.0)

    def test_zf_needs_alpha(self):
        with pytest.raises(ValueError):
            cap.table1_sinr("ZF", 1.0, 1.0)
