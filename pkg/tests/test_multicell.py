import numpy as np
import pytest
from hypothesis import given, strategies as st

from vlmimo import multicell as mc
from vlmimo.numerics import crandn

seeds = st.integers(0, 2 ** 32 - 1)


def edge_referenced(profile, layout):
    return profile.beta * layout.radius ** 3.8


class TestLayout:
    def test_two_tiers_is_19_cells(self):
        assert mc.CellLayout().n_cells == 19

    def test_home_distances(self, rng):
        layout, drop, _ = mc.build_layout_and_drop(rng)
        d = np.hypot(*(drop.positions - layout.centers[:, None, :]).transpose(2, 0, 1))
        assert d.min() >= 100 and d.max() <= 1600
        assert drop.K == 10

    def test_seed_determinism(self):
        a = mc.build_layout_and_drop(np.random.default_rng(5))
        b = mc.build_layout_and_drop(np.random.default_rng(5))
        assert np.array_equal(a[1].positions, b[1].positions)
        assert np.array_equal(a[2].beta, b[2].beta)

    def test_beta_shape(self, rng):
        _, _, prof = mc.build_layout_and_drop(rng, K=4)
        assert prof.beta.shape == (19, 19, 4)


class TestEstimate:
    def test_noise_vanishes(self, rng):
        G = crandn(rng, 1, 20, 4)
        est = mc.pilot_contaminated_estimate(G, 1e9, rng).G_hat / np.sqrt(1e9)
        assert np.linalg.norm(est - G[0]) / np.linalg.norm(G[0]) < 1e-3

    def test_two_cells_exact(self):
        G = crandn(np.random.default_rng(0), 2, 6, 3)
        rho = 4.0
        est = mc.pilot_contaminated_estimate(G, rho, np.random.default_rng(9)).G_hat
        V = crandn(np.random.default_rng(9), 6, 3)
        assert np.allclose(est, np.sqrt(rho) * (G[0] + G[1]) + V)

    def test_entry_variance(self, rng):
        beta = np.array([1.0, 0.3, 0.05])
        rho = 2.0
        G = crandn(rng, 3, 4000, 10) * np.sqrt(beta)[:, None, None]
        est = mc.pilot_contaminated_estimate(G, rho, rng).G_hat
        target = rho * beta.sum() + 1
        assert abs(np.mean(np.abs(est) ** 2) - target) / target < 0.05

    def test_rho_p_positive(self, rng):
        with pytest.raises(ValueError):
            mc.pilot_contaminated_estimate(np.zeros((2, 3, 1)), 0.0, rng)


class TestAsymptotic:
    def test_mf_example(self):
        b = np.array([[1.0, 0.5], [0.5, 1.0]])[:, :, None]
        assert np.isclose(mc.asymptotic_sir("MF", b, np.inf, 0, 0), 4.0)

    def test_no_interferers(self):
        assert mc.asymptotic_sir("MF", np.ones((1, 1, 1)), np.inf, 0, 0) == np.inf

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            mc.asymptotic_sir_all("RZF", np.ones((2, 2, 1)))

    def test_zf_tends_to_mf(self, rng):
        _, _, p = mc.build_layout_and_drop(rng)
        b = p.beta
        zf = mc.asymptotic_sir_all("ZF", b, 1e-9)
        mf = mc.asymptotic_sir_all("MF", b)
        assert np.max(np.abs(zf - mf) / mf) < 1e-6

    @given(seeds)
    def test_mf_invariant_to_rho_p(self, seed):
        b = np.random.default_rng(seed).uniform(0.01, 2, (4, 4, 3))
        ref = mc.asymptotic_sir_all("MF", b)
        for rp in (1e-3, 1.0, 1e6):
            assert np.array_equal(mc.asymptotic_sir_all("MF", b, rp), ref)

    @given(seeds)
    def test_zf_monotone_single_interferer(self, seed):
        # one interfering cell: the SIR is a single ratio that moves
        # monotonically from the MF value to the rho_p -> inf limit
        b = np.random.default_rng(seed).uniform(0.01, 2, (2, 2, 3))
        s = np.array([mc.asymptotic_sir_all("ZF", b, rp) for rp in np.logspace(-4, 6, 40)]
                     + [mc.asymptotic_sir_all("ZF", b)])
        d = np.diff(s, axis=0)
        tol = 1e-12 * np.abs(s[1:])
        assert np.all(np.all(d >= -tol, axis=0) | np.all(d <= tol, axis=0))

    def test_zf_not_monotone_in_general(self):
        # three cells: the SIR first rises then falls as rho_p grows
        b = np.array([[1.0, 1.1, 1.6], [0.9, 1.5, 1.5], [1.9, 0.3, 1.5]])[:, :, None]
        s = np.array([mc.asymptotic_sir("ZF", b, rp, 0, 0) for rp in np.logspace(-4, 6, 200)])
        assert s.max() > s[0] and s.max() > s[-1] + 1e-3

    @pytest.mark.xfail(strict=True, reason="per-terminal ZF SIR is not monotone in rho_p once "
                       "several interfering cells pull the ratio in opposite directions")
    def test_zf_monotone_on_random_profiles(self):
        r = np.random.default_rng(17)
        for _ in range(100):
            layout, _, p = mc.build_layout_and_drop(r)
            b = edge_referenced(p, layout)
            s = np.array([mc.asymptotic_sir_all("ZF", b, rp) for rp in np.logspace(-3, 6, 12)]
                         + [mc.asymptotic_sir_all("ZF", b)])
            d = np.diff(s, axis=0)
            tol = 1e-9 * np.abs(s[1:])
            assert np.all(np.all(d >= -tol, axis=0) | np.all(d <= tol, axis=0))


class TestFiniteM:
    def test_needs_m_ge_k(self, rng):
        with pytest.raises(ValueError):
            mc.finite_m_sir_monte_carlo([5], rng, K=10, drops=1)

    def test_asymptotic_ignores_small_scale(self):
        # same drop stream, different array sizes and techniques
        a = mc.finite_m_sir_monte_carlo([10], np.random.default_rng(1), drops=2, techniques=("MF",))
        b = mc.finite_m_sir_monte_carlo([12, 20], np.random.default_rng(1), drops=2,
                                        techniques=("ZF",))
        for t in ("MF", "ZF"):
            assert np.array_equal(a.asymptotic[t], b.asymptotic[t])

    def test_worker_invariance(self):
        a = mc.finite_m_sir_monte_carlo([10, 20], np.random.default_rng(4), drops=3,
                                        techniques=("MF", "ZF", "RZF"))
        b = mc.finite_m_sir_monte_carlo([10, 20], np.random.default_rng(4), drops=3,
                                        techniques=("MF", "ZF", "RZF"), workers=3)
        for k in a.sir:
            assert np.array_equal(a.sir[k], b.sir[k])

    def test_nondecreasing_in_m(self):
        res = mc.finite_m_sir_monte_carlo([20, 40, 80], np.random.default_rng(8), drops=12)
        for t in ("MF", "ZF"):
            means = [np.mean(10 * np.log10(res.sir[(M, t)]), axis=(1, 2)) for M in res.M_list]
            for lo, hi in zip(means, means[1:]):
                diff = hi - lo                      # paired over drops
                se = diff.std(ddof=1) / np.sqrt(diff.size)
                assert diff.mean() > -1.645 * se

    def test_sir_cdf(self):
        x, p = mc.sir_cdf([1.0, 100.0, 10.0])
        assert np.allclose(x, [0, 10, 20]) and np.allclose(p, [1 / 3, 2 / 3, 1])

    @pytest.mark.slow
    @pytest.mark.xfail(strict=True, reason="with per-realisation total-power normalisation MF "
                       "already exceeds the ZF mean SIR at equal M")
    def test_mf_needs_hundredfold_antennas(self):
        res = mc.finite_m_sir_monte_carlo([10, 100, 1000], np.random.default_rng(12), drops=10)
        target = res.mean_sir_db(100, "ZF")
        assert res.mean_sir_db(1000, "MF") < target

    @pytest.mark.slow
    @pytest.mark.xfail(strict=False, reason="calibration gives 0.497 of the asymptotic dB at "
                       "M/K = 20, marginally below the 50% threshold")
    def test_zf_hefty_share(self):
        res = mc.finite_m_sir_monte_carlo([200], np.random.default_rng(3), drops=40,
                                          techniques=("ZF",))
        assert res.mean_sir_db(200, "ZF") >= 0.5 * res.asymptotic_mean_sir_db("ZF")
