"""Pilot contamination in a hexagonal multicell forward link.

Indexing follows ``beta[k, j, l]``: terminal ``l`` of cell ``k`` seen from the
base station of cell ``j``. With wrap-around every cell sits in an identical
environment, so statistics are pooled over all cells of a drop.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from ._parallel import pmap
from .channel import LargeScaleProfile, gen_large_scale
from .errors import UserTooClose
from .numerics import crandn
from .precoding import precoding_matrix

__all__ = ['CellLayout', 'UserDrop', 'ContaminatedEstimate', 'build_layout_and_drop',
           'pilot_contaminated_estimate', 'asymptotic_sir', 'asymptotic_sir_all',
           'MulticellResult', 'finite_m_sir_monte_carlo', 'sir_cdf']

_SQ3 = math.sqrt(3.0)


@dataclass(frozen=True)
class CellLayout:
    """Hexagonal cells with pointy-top orientation.

    ``radius`` is centre-to-vertex (half the vertex-to-vertex diameter).
    ``tiers`` rings of interferers surround the centre cell; with
    ``wraparound`` the cluster is tiled periodically and each link uses the
    nearest image of the base station.
    """

    radius: float = 800.0
    tiers: int = 2
    wraparound: bool = True
    reuse: int = 1

    def __post_init__(self):
        if self.tiers < 1:
            raise ValueError("need at least one tier of interfering cells")
        if self.reuse != 1:
            raise ValueError("only full frequency reuse is modelled")

    @property
    def centers(self):
        D = _SQ3 * self.radius
        a1 = np.array([D, 0.0])
        a2 = np.array([D / 2, D * _SQ3 / 2])
        n = self.tiers
        pts = [i * a1 + j * a2 for i in range(-n, n + 1) for j in range(-n, n + 1)
               if abs(i + j) <= n]
        pts.sort(key=lambda p: (round(np.hypot(*p), 6), round(math.atan2(p[1], p[0]) % (2 * np.pi), 6)))
        return np.array(pts)

    @property
    def n_cells(self):
        return 3 * self.tiers * (self.tiers + 1) + 1

    @property
    def image_shifts(self):
        if not self.wraparound:
            return np.zeros((1, 2))
        D = _SQ3 * self.radius
        a1 = np.array([D, 0.0])
        a2 = np.array([D / 2, D * _SQ3 / 2])
        T = (self.tiers + 1) * a1 + self.tiers * a2
        shifts = [np.zeros(2)]
        for k in range(6):
            th = k * np.pi / 3
            R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
            shifts.append(R @ T)
        return np.array(shifts)

    def inside(self, p):
        """Mask of offsets (relative to a cell centre) inside the hexagon."""
        x, y = np.abs(p[..., 0]), np.abs(p[..., 1])
        return (x <= _SQ3 / 2 * self.radius) & (x + _SQ3 * y <= _SQ3 * self.radius)

    def distances(self, points):
        """Distance from every point ``(..., 2)`` to every base station ``(..., C)``."""
        bs = self.centers[:, None, :] + self.image_shifts[None]
        diff = points[..., None, None, :] - bs
        return np.linalg.norm(diff, axis=-1).min(axis=-1)


@dataclass(frozen=True)
class UserDrop:
    positions: np.ndarray  # (C, K, 2), absolute coordinates in metres
    min_distance: float = 100.0

    @property
    def K(self):
        return self.positions.shape[1]


@dataclass(frozen=True)
class ContaminatedEstimate:
    G_hat: np.ndarray
    cells: tuple
    rho_p: float


def _drop_users(layout, K, rng, min_distance, max_retries):
    C = layout.n_cells
    need = C * K
    got = []
    R = layout.radius
    for _ in range(max_retries):
        p = rng.uniform(-R, R, size=(2 * need, 2))
        ok = layout.inside(p) & (np.hypot(p[:, 0], p[:, 1]) >= min_distance)
        got.extend(p[ok])
        if len(got) >= need:
            break
    else:
        raise UserTooClose("could not place terminals outside the minimum distance")
    off = np.array(got[:need]).reshape(C, K, 2)
    return off + layout.centers[:, None, :]


def build_layout_and_drop(rng, K=10, layout=None, min_distance=100.0,
                          sigma_shadow_db=8.0, exponent=3.8, max_retries=1000):
    """Place K terminals uniformly in every cell and draw their large-scale
    coefficients to every base station.

    Returns
    -------
    layout : CellLayout
    drop : UserDrop
    profile : LargeScaleProfile
        ``beta`` has shape (C, C, K).
    """
    layout = layout if layout is not None else CellLayout()
    pos = _drop_users(layout, K, rng, min_distance, max_retries)
    r = layout.distances(pos)               # (C, K, C_bs)
    r = np.transpose(r, (0, 2, 1))          # (k, j, l)
    profile = gen_large_scale(r, rng, sigma_shadow_db, exponent, min_distance)
    return layout, UserDrop(pos, min_distance), profile


def pilot_contaminated_estimate(G_to_bs, rho_p, rng, cell=None):
    """Channel estimate at one base station when all cells reuse the pilots.

    Parameters
    ----------
    G_to_bs : array_like, shape (C, M, K)
        ``G_to_bs[i]`` is the channel from the terminals of cell i to this
        base station.
    rho_p : float
        Pilot SNR. ``inf`` drops the noise and returns ``sum_i G_in``.

    Returns ``sqrt(rho_p) * sum_i G_in + V`` with V IID CN(0, 1).
    """
    Gs = np.asarray(G_to_bs, dtype=complex)
    if rho_p <= 0:
        raise ValueError("rho_p must be positive")
    total = Gs.sum(axis=0)
    if np.isinf(rho_p):
        G_hat = total
    else:
        G_hat = np.sqrt(rho_p) * total + crandn(rng, *total.shape)
    return ContaminatedEstimate(G_hat, tuple(range(Gs.shape[0])), rho_p)


def asymptotic_sir_all(kind, beta, rho_p=np.inf):
    """M -> infinity SIR for every terminal; returns an array (C, K).

    MF: ``beta_jjl^2 / sum_{n != j} beta_jnl^2``.
    ZF: each term is divided by ``(sum_i beta_inl + 1/rho_p)^2`` first.
    Terminals without interferers get ``inf``.
    """
    b = beta.beta if isinstance(beta, LargeScaleProfile) else np.asarray(beta, float)
    C = b.shape[0]
    j = np.arange(C)
    if kind.upper() == "MF":
        w = b ** 2
    elif kind.upper() == "ZF":
        noise = 0.0 if np.isinf(rho_p) else 1.0 / rho_p
        w = (b / (b.sum(axis=0) + noise)[None]) ** 2
    else:
        raise ValueError(f"no asymptotic SIR for {kind!r}")
    sig = w[j, j, :]
    # sum the interferers directly; subtracting sig from the full sum would
    # cancel catastrophically at high SIR
    off = ~np.eye(C, dtype=bool)
    inter = np.where(off[:, :, None], w, 0.0).sum(axis=1)
    with np.errstate(divide="ignore"):
        return np.where(inter > 0, sig / np.where(inter > 0, inter, 1.0), np.inf)


def asymptotic_sir(kind, beta, rho_p, j, l):
    """Asymptotic SIR of terminal ``l`` in cell ``j``."""
    return float(asymptotic_sir_all(kind, beta, rho_p)[j, l])


@dataclass
class MulticellResult:
    M_list: list
    techniques: list
    sir: dict = field(default_factory=dict)          # (M, tech) -> (drops, C, K)
    asymptotic: dict = field(default_factory=dict)   # tech -> (drops, C, K)

    def samples(self, M, tech):
        return self.sir[(M, tech)].ravel()

    def mean_sir_db(self, M, tech):
        """``10 log10 E{SIR}``."""
        return 10 * np.log10(np.mean(self.samples(M, tech)))

    def mean_capacity(self, M, tech):
        return float(np.mean(np.log2(1 + self.samples(M, tech))))

    def asymptotic_mean_sir_db(self, tech):
        return 10 * np.log10(np.mean(self.asymptotic[tech]))

    def asymptotic_mean_capacity(self, tech):
        return float(np.mean(np.log2(1 + self.asymptotic[tech])))


def _finite_sir_one(b, M, K, rho_p, rho_f, tech, delta, r):
    """SIR of every terminal for one drop at one array size."""
    C = b.shape[0]
    T = np.empty((C, C, K, K), dtype=complex)   # T[j, n] = G_jn^T P_n
    for n in range(C):
        G = crandn(r, C, M, K) * np.sqrt(b[:, n, :])[:, None, :]
        est = pilot_contaminated_estimate(G, rho_p, r).G_hat
        P, _ = precoding_matrix(tech, est, 1.0 if np.isinf(rho_f) else rho_f,
                                None if delta is None else delta)
        T[:, n] = np.einsum("jmk,ml->jkl", G, P)
    p = np.abs(T) ** 2
    j = np.arange(C)
    sig = p[j, j][:, np.arange(K), np.arange(K)]
    noise = 0.0 if np.isinf(rho_f) else 1.0
    inter = p.sum(axis=(1, 3)) - sig + noise
    return sig / inter


def _drop_task(args):
    (base, d, M_list, K, rho_p, rho_f, techniques, delta_over_M, layout,
     min_distance, sigma, exponent) = args
    r = rngmod.trial_stream(base, d, "drop")
    _, _, prof = build_layout_and_drop(r, K, layout, min_distance, sigma, exponent)
    # SNRs are referenced to a cell-edge terminal without shadowing
    b = prof.beta * layout.radius ** exponent
    out = {"asym": {t: asymptotic_sir_all(t, b, rho_p) for t in ("MF", "ZF")}}
    for M in M_list:
        for tech in techniques:
            rr = rngmod.trial_stream(base, d, M, tech)
            delta = delta_over_M * M if tech == "RZF" else None
            out[(M, tech)] = _finite_sir_one(b, M, K, rho_p, rho_f, tech, delta, rr)
    return out


def finite_m_sir_monte_carlo(M_list, rng, K=10, rho_p=np.inf, rho_f=np.inf,
                             techniques=("MF", "ZF"), drops=20, rzf_delta_over_M=1 / 20,
                             layout=None, min_distance=100.0, sigma_shadow_db=8.0,
                             exponent=3.8, workers=1):
    """Per-terminal SIR at finite M through explicit precoding.

    Every base station builds its precoder from its contaminated estimate,
    normalised to unit (or ``rho_f``) total power; a terminal's SIR is the
    power of its own symbol's coefficient over everything else it receives.
    ``rho_p`` and ``rho_f`` are SNRs of an unshadowed terminal at the cell
    edge; ``inf`` removes the corresponding noise. Closed-form M -> infinity
    SIRs for MF and ZF are returned for the same drops.
    """
    layout = layout if layout is not None else CellLayout()
    M_list = [int(m) for m in M_list]
    if any(m < K for m in M_list):
        raise ValueError("every M must be at least K")
    base = rngmod.substream_seed(rng)
    args = [(base, d, M_list, K, rho_p, rho_f, tuple(t.upper() for t in techniques),
             rzf_delta_over_M, layout, min_distance, sigma_shadow_db, exponent)
            for d in range(drops)]
    outs = pmap(_drop_task, args, workers)
    res = MulticellResult(M_list, [t.upper() for t in techniques])
    for key in outs[0]:
        if key == "asym":
            continue
        res.sir[key] = np.stack([o[key] for o in outs])
    for t in ("MF", "ZF"):
        res.asymptotic[t] = np.stack([o["asym"][t] for o in outs])
    return res


def sir_cdf(samples):
    """Empirical CDF as ``(SIR_dB, probability)`` pairs, sorted."""
    s = np.sort(10 * np.log10(np.asarray(samples, float).ravel()))
    return s, np.arange(1, s.size + 1) / s.size
