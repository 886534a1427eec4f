"""Figure-analog drivers. Each writes its CSV files under ``cfg.output`` and
returns ``{name: path}``.

All randomness comes from streams keyed by ``(seed, experiment, trial,
purpose)``, so outputs do not depend on ``cfg.workers``.
"""

import os

import numpy as np

from .. import __version__
from .. import capacity as cap
from .. import channel as ch
from .. import detection as det
from .. import multicell as mc
from .. import precoding as pre
from .. import rng as rngmod
from ..errors import VPRangeExceeded
from .._parallel import pmap
from ..errors import DivergenceDetected
from ..numerics import NeumannConfig, crandn, neumann_inverse
from .config import ExperimentConfig
from .csvio import write_csv

__all__ = ['run_experiment', 'capacity_experiment', 'coupling_capacity',
           'precoding_experiment', 'multicell_experiment', 'detect_experiment',
           'focusing_experiment', 'focusing_grid', 'eigen_cdf_experiment',
           'ordered_eigenvalues', 'neumann_bench_experiment', 'EXPERIMENTS']


def _provenance(cfg):
    return {"config": cfg.config_hash(), "seed": cfg.seed, "version": __version__,
            "experiment": cfg.experiment}


def _path(cfg, name):
    return os.path.join(cfg.output, f"{name}.csv")


def _db(x):
    return 10 * np.log10(x)


def _lin(db):
    return np.inf if db is None else 10 ** (db / 10)


def coupling_capacity(z_r, spacing, rho, draws, rng, K=None):
    """Ergodic rate of a coupled ULA under a uniform 2D angular spectrum.

    The receive array has ``len(z_r)`` elements at ``spacing`` wavelengths;
    the ``K`` (default: same count) terminals are uncoupled.
    """
    z_r = np.asarray(z_r, complex)
    M = z_r.shape[0]
    K = M if K is None else K
    spec = ch.CorrelationSpec.uniform_aps(ch.ula_positions(M, spacing), K=K)
    cpl = ch.CouplingSpec.uncoupled_terminals(z_r, K)
    base = rngmod.substream_seed(rng)
    rates = np.empty(draws)
    for t in range(draws):
        G = ch.correlated_channel(M, K, spec, rngmod.trial_stream(base, t))
        rates[t] = cap.p2p_rate(ch.coupled_channel(G, cpl), rho).rate
    return rates


def _capacity_task(args):
    base, t, M, K, rhos = args
    G = crandn(rngmod.trial_stream(base, M, t), M, K)
    out = []
    for rho in rhos:
        fwd, _ = cap.forward_sum_capacity(G, rho)
        out.append((cap.p2p_rate(G, rho).rate, cap.reverse_sum_rate(G, rho), fwd))
    return out


def capacity_experiment(cfg):
    """Mean point-to-point, reverse and forward (DPC) sum rates over IID
    draws, plus the coupled-array trend for the built-in impedance matrices."""
    p = cfg.params
    r = rngmod.stream(cfg.seed, cfg.experiment, 0, "iid")
    base = rngmod.substream_seed(r)
    rhos = [10 ** (x / 10) for x in p["rho_db"]]
    rows = []
    for M in p["M"]:
        outs = pmap(_capacity_task, [(base, t, M, p["K"], rhos)
                                         for t in range(p["draws"])], cfg.workers)
        arr = np.array(outs)               # (draws, rho, 3)
        mean = arr.mean(axis=0)
        for i, rho_db in enumerate(p["rho_db"]):
            rows.append((M, p["K"], rho_db, *mean[i]))
    paths = {"capacity": write_csv(
        _path(cfg, "capacity"),
        ["M", "K", "rho_dB", "p2p_rate", "reverse_sum_rate", "forward_sum_rate"],
        rows, _provenance(cfg))}
    crow = []
    rho = 10 ** (p["coupling_rho_db"] / 10)
    for spacing, Z in ((0.05, ch.PAPER_ZR_005), (0.5, ch.PAPER_ZR_05)):
        rr = rngmod.stream(cfg.seed, cfg.experiment, 0, f"coupling-{spacing}")
        coupled = coupling_capacity(Z, spacing, rho, p["coupling_draws"], rr)
        rr = rngmod.stream(cfg.seed, cfg.experiment, 0, f"coupling-{spacing}")
        plain = coupling_capacity(Z[0, 0] * np.eye(3), spacing, rho, p["coupling_draws"], rr)
        crow.append((spacing, p["coupling_rho_db"], coupled.mean(), plain.mean()))
    paths["coupling"] = write_csv(
        _path(cfg, "capacity_coupling"),
        ["spacing_lambda", "rho_dB", "rate_coupled", "rate_uncoupled"], crow,
        _provenance(cfg))
    return paths


def precoding_experiment(cfg):
    """Monte-Carlo per-terminal SINR and sum rate of forward-link precoders
    next to the closed-form large-array values."""
    p = cfg.params
    rows = []
    K = p["K"]
    for alpha in p["alpha"]:
        M = int(round(alpha * K))
        for rho_db in p["rho_db"]:
            rho = 10 ** (rho_db / 10)
            for tech in p["techniques"]:
                r = rngmod.stream(cfg.seed, cfg.experiment, 0, f"{tech}-{M}-{rho_db}")
                if tech == "VP":
                    stats = None
                else:
                    stats = pre.measure_forward_sinr(
                        tech, M, K, rho, p["xi"], p["trials"], r,
                        p["rzf_delta"] if tech == "RZF" else None, cfg.workers)
                try:
                    closed = cap.table1_sinr(tech, M / K, rho,
                                             p["xi"] if p["xi"] < 1 else None)
                    closed_db = _db(closed)
                except (VPRangeExceeded, ValueError):
                    closed_db = float("nan")
                if stats is None:
                    rows.append((tech, M, K, rho_db, p["xi"], float("nan"), float("nan"),
                                 closed_db, float("nan")))
                else:
                    rows.append((tech, M, K, rho_db, p["xi"], stats.power_ratio_db,
                                 _db(stats.mean_sinr), closed_db, stats.mean_sum_rate))
    return {"precoding": write_csv(
        _path(cfg, "precoding"),
        ["technique", "M", "K", "rho_dB", "xi", "sinr_dB", "mean_sinr_dB",
         "closed_form_dB", "sum_rate"], rows, _provenance(cfg))}


def multicell_experiment(cfg):
    """Per-terminal SIR samples at finite M and as M grows without bound,
    plus their empirical CDFs."""
    p = cfg.params
    layout = mc.CellLayout(p["radius"], p["tiers"], p["wraparound"])
    common = dict(K=p["K"], rho_p=_lin(p["rho_p_db"]), layout=layout,
                  min_distance=p["min_distance"], sigma_shadow_db=p["sigma_shadow_db"],
                  exponent=p["exponent"], workers=cfg.workers)
    fin = mc.finite_m_sir_monte_carlo(
        p["M"], rngmod.stream(cfg.seed, cfg.experiment, 0, "finite"),
        rho_f=_lin(p["rho_f_db"]), techniques=tuple(p["techniques"]), drops=p["drops"],
        rzf_delta_over_M=p["rzf_delta_over_M"], **common)
    asym = mc.finite_m_sir_monte_carlo(
        [], rngmod.stream(cfg.seed, cfg.experiment, 0, "asymptotic"),
        drops=p["asymptotic_drops"], **common)
    rows, cdf_rows = [], []

    def emit(M, tech, arr):
        d, C, K = arr.shape
        sir_db = _db(arr)
        for i in range(d):
            for c in range(C):
                for k in range(K):
                    rows.append((M, tech, i, c * K + k, sir_db[i, c, k]))
        x, f = mc.sir_cdf(arr)
        cdf_rows.extend((M, tech, a, b) for a, b in zip(x, f))

    for M in fin.M_list:
        for tech in fin.techniques:
            emit(M, tech, fin.sir[(M, tech)])
    for tech in ("MF", "ZF"):
        emit("inf", tech, asym.asymptotic[tech])
    prov = _provenance(cfg)
    return {"sir": write_csv(_path(cfg, "multicell_sir"),
                             ["M", "technique", "drop_id", "terminal", "SIR_dB"], rows, prov),
            "cdf": write_csv(_path(cfg, "multicell_cdf"),
                             ["M", "technique", "SIR_dB", "probability"], cdf_rows, prov)}


def detection_configs(p):
    return [det.DetectorConfig(t, sic_iters=p["sic_iters"], bigdfe_iters=p["bigdfe_iters"],
                               ts_iters=p["ts_iters"], tabu=p["tabu"], r=p["fcsd_r"])
            for t in p["techniques"]]


def detect_experiment(cfg):
    """BER against rho for the configured detectors and the interference-free
    genie. With ``rho_scale_with_M`` the grid is shifted by
    ``10 log10(rho_ref_M / M)`` so rho falls like 1/M."""
    p = cfg.params
    shift = _db(p["rho_ref_M"] / p["M"]) if p["rho_scale_with_M"] else 0.0
    rho_db = [x + shift for x in p["rho_db"]]
    pts = det.ber_experiment(p["M"], p["K"], rho_db, detection_configs(p),
                             rngmod.stream(cfg.seed, cfg.experiment, 0, "ber"),
                             p["target_errors"], p["max_vectors"], p["batch"], cfg.workers)
    cols = ["technique", "M", "K", "rho_dB", "vectors", "symbol_errors", "BER", "CI_low",
            "CI_high", "est_flops", "wall_ns"]
    rows = [[pt.as_row()[c] for c in cols] for pt in pts]
    return {"ber": write_csv(_path(cfg, "detect_ber"), cols, rows, _provenance(cfg))}


def focusing_grid(grid_lambda=10.0, step_lambda=0.1):
    """Square grid centred on the origin that contains the origin exactly."""
    n = int(round(grid_lambda / 2 / step_lambda))
    ax = np.arange(-n, n + 1) * step_lambda
    X, Y = np.meshgrid(ax, ax, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def focusing_experiment(cfg):
    """Normalised field strength around a focus point for each array size.
    One scatterer realisation per (seed, M)."""
    p = cfg.params
    pts = focusing_grid(p["grid_lambda"], p["step_lambda"])
    rows = []
    for M in p["M"]:
        r = rngmod.stream(cfg.seed, cfg.experiment, 0, f"scatterers-{M}")
        field = ch.ScattererField.draw(M, r, p["n_scatterers"], p["side"], p["standoff"],
                                       p["spacing"], p["amp_exponent"])
        F = ch.normalized_field_strength(field, pts)
        rows.extend((M, x, y, f) for (x, y), f in zip(pts, F))
    return {"focusing": write_csv(_path(cfg, "focusing"),
                                  ["M", "x_lambda", "y_lambda", "F_dB"], rows,
                                  _provenance(cfg))}


def ordered_eigenvalues(K, M, draws, rng):
    """Eigenvalues of ``G^H G`` for IID ``M x K`` draws, largest first: (draws, K)."""
    base = rngmod.substream_seed(rng)
    out = np.empty((draws, K))
    for t in range(draws):
        G = crandn(rngmod.trial_stream(base, t), M, K)
        out[t] = np.linalg.eigvalsh(G.conj().T @ G)[::-1]
    return out


def eigen_cdf_experiment(cfg):
    """Empirical CDF of every ordered eigenvalue of ``G^H G`` (not divided by M)."""
    p = cfg.params
    rows = []
    for K, M in p["shapes"]:
        lam = ordered_eigenvalues(int(K), int(M), p["draws"],
                                  rngmod.stream(cfg.seed, cfg.experiment, 0, f"{K}x{M}"))
        n = lam.shape[0]
        for rank in range(lam.shape[1]):
            for v, f in zip(np.sort(lam[:, rank]), np.arange(1, n + 1) / n):
                rows.append((f"{K}x{M}", rank + 1, _db(v), f))
    return {"eigen_cdf": write_csv(_path(cfg, "eigen_cdf"),
                                   ["shape", "rank", "eigenvalue_dB", "probability"], rows,
                                   _provenance(cfg))}


def neumann_bench_experiment(cfg):
    """Relative Frobenius error of the truncated Neumann inverse of ``G^H G``."""
    p = cfg.params
    K = p["K"]
    rows = []
    for alpha in p["alpha"]:
        M = int(round(alpha * K))
        base = rngmod.substream_seed(rngmod.stream(cfg.seed, cfg.experiment, 0, f"M{M}"))
        Zs = []
        for t in range(p["draws"]):
            G = crandn(rngmod.trial_stream(base, t), M, K)
            Zs.append(G.conj().T @ G)
        for L in p["terms"]:
            nc = NeumannConfig(terms=L, delta=p["delta"], weighting=p["weighting"])
            errs = []
            for Z in Zs:
                exact = np.linalg.inv(Z)
                try:
                    approx = neumann_inverse(Z, nc, M, K)
                    errs.append(np.linalg.norm(approx - exact) / np.linalg.norm(exact))
                except DivergenceDetected:
                    errs.append(float("nan"))
            rows.append((M, K, alpha, L, p["weighting"], float(np.mean(errs))))
    return {"neumann": write_csv(_path(cfg, "neumann_bench"),
                                 ["M", "K", "alpha", "terms", "weighting", "rel_fro_error"],
                                 rows, _provenance(cfg))}


EXPERIMENTS = {
    "capacity": capacity_experiment,
    "precoding": precoding_experiment,
    "multicell": multicell_experiment,
    "detect": detect_experiment,
    "focusing": focusing_experiment,
    "eigen_cdf": eigen_cdf_experiment,
    "neumann_bench": neumann_bench_experiment,
}


def run_experiment(cfg: ExperimentConfig):
    """Run the experiment named by ``cfg`` and return the CSV paths written."""
    return EXPERIMENTS[cfg.experiment](cfg)
