"""Channel realizations for the propagation models used across the package.

All generators take an explicit ``numpy.random.Generator`` and return a
:class:`ChannelRealization` whose ``G`` is M x K (base-station antennas by
terminals). Distances and positions in the geometric and correlation models
are measured in wavelengths.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (DegenerateGeometry, DimensionMismatch, NotPSD,
                     SingularImpedanceSum, UserTooClose)
from .numerics import bessel_j0, crandn, hermitian_sqrt

__all__ = ['ChannelRealization', 'LargeScaleProfile', 'CorrelationSpec',
           'CouplingSpec', 'ScattererField', 'gen_iid_rayleigh',
           'gen_multiuser_channel', 'gen_large_scale', 'correlated_channel',
           'coupled_channel', 'geometric_gains', 'normalized_field_strength',
           'imperfect_csi', 'ula_positions', 'usa_positions',
           'clarke_correlation', 'PAPER_ZR_005', 'PAPER_ZR_05', 'as_matrix']


def _seed_path(rng):
    ss = getattr(rng.bit_generator, "seed_seq", None)
    if ss is None:
        return None
    return (ss.entropy, tuple(ss.spawn_key))


@dataclass(frozen=True)
class ChannelRealization:
    G: np.ndarray
    model_tag: str = "iid"
    seed_path: Optional[tuple] = None

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=complex))
        if G.ndim != 2 or min(G.shape) < 1:
            raise DimensionMismatch(f"channel must be a non-empty matrix, got {G.shape}")
        if not np.all(np.isfinite(G)):
            raise ValueError("channel has non-finite entries")
        object.__setattr__(self, "G", G)

    @property
    def M(self):
        return self.G.shape[0]

    @property
    def K(self):
        return self.G.shape[1]


def as_matrix(G):
    return G.G if isinstance(G, ChannelRealization) else np.asarray(G, dtype=complex)


def gen_iid_rayleigh(M, K, rng):
    """M x K matrix of IID CN(0, 1) entries."""
    if M < 1 or K < 1:
        raise DimensionMismatch("M and K must be positive")
    return ChannelRealization(crandn(rng, M, K), "iid", _seed_path(rng))


def gen_multiuser_channel(H, beta):
    """Apply large-scale fading: ``G = H diag(beta)^{1/2}``."""
    Hm = as_matrix(H)
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.size != Hm.shape[1]:
        raise DimensionMismatch(f"beta has {beta.size} entries for {Hm.shape[1]} terminals")
    if np.any(beta <= 0):
        raise ValueError("large-scale coefficients must be positive")
    tag = H.model_tag if isinstance(H, ChannelRealization) else "iid"
    path = H.seed_path if isinstance(H, ChannelRealization) else None
    return ChannelRealization(Hm * np.sqrt(beta), tag + "+large_scale", path)


@dataclass(frozen=True)
class LargeScaleProfile:
    """Large-scale coefficients ``beta = z / r**exponent``.

    ``beta[k, j, l]`` couples terminal ``l`` of cell ``k`` to the base
    station of cell ``j``; ``z`` and ``r`` have the same shape.
    """

    beta: np.ndarray
    z: np.ndarray
    r: np.ndarray
    exponent: float = 3.8
    sigma_shadow_db: float = 8.0


def gen_large_scale(r, rng, sigma_shadow_db=8.0, exponent=3.8, min_distance=100.0):
    """Draw lognormal shadowing for every link and combine with path loss.

    Parameters
    ----------
    r : array_like
        Link distances in metres, any shape (typically cells x cells x K).
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < min_distance):
        raise UserTooClose(f"link distance {r.min():.1f} m below {min_distance} m")
    z = 10 ** (rng.normal(0.0, sigma_shadow_db, r.shape) / 10) if sigma_shadow_db > 0 \
        else np.ones_like(r)
    return LargeScaleProfile(z / r ** exponent, z, r, exponent, sigma_shadow_db)


def ula_positions(n, spacing):
    """Uniform linear array along the x axis, centred at the origin."""
    x = (np.arange(n) - (n - 1) / 2) * spacing
    return np.column_stack([x, np.zeros(n)])


def usa_positions(n_side, spacing):
    """Uniform square array of ``n_side**2`` elements."""
    g = (np.arange(n_side) - (n_side - 1) / 2) * spacing
    X, Y = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def clarke_correlation(positions):
    """Spatial correlation under a uniform 2-D angular power spectrum.

    Entry (m, n) is ``J0(2 pi d_mn)`` with ``d_mn`` in wavelengths.
    """
    P = np.asarray(positions, dtype=float)
    d = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
    return bessel_j0(2 * np.pi * d).astype(complex)


def _matrix_to_obj(A):
    A = np.asarray(A, dtype=complex)
    return {"re": A.real.tolist(), "im": A.imag.tolist()}


def _matrix_from_obj(obj):
    return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)


@dataclass(frozen=True)
class CorrelationSpec:
    """Receive/transmit correlation matrices of the Kronecker model."""

    psi_r: np.ndarray
    psi_t: np.ndarray
    rx_positions: Optional[np.ndarray] = None
    tx_positions: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("psi_r", "psi_t"):
            P = np.atleast_2d(np.asarray(getattr(self, name), dtype=complex))
            if P.shape[0] != P.shape[1]:
                raise DimensionMismatch(f"{name} must be square")
            if np.max(np.abs(P - P.conj().T)) > 1e-10:
                raise NotPSD(f"{name} is not Hermitian")
            if np.max(np.abs(np.diag(P) - 1)) > 1e-10:
                raise ValueError(f"{name} must have a unit diagonal")
            w = np.linalg.eigvalsh(P)
            if w.min() < -1e-8:
                raise NotPSD(f"{name} has eigenvalue {w.min():.3e}")
            object.__setattr__(self, name, P)

    @classmethod
    def uniform_aps(cls, rx_positions, tx_positions=None, K=None):
        """Clarke correlation at the receiver; transmitter uncorrelated
        (``K`` terminals) unless ``tx_positions`` is given."""
        psi_r = clarke_correlation(rx_positions)
        if tx_positions is not None:
            psi_t = clarke_correlation(tx_positions)
        else:
            psi_t = np.eye(K if K is not None else 1, dtype=complex)
        return cls(psi_r, psi_t,
                   None if rx_positions is None else np.asarray(rx_positions, float),
                   None if tx_positions is None else np.asarray(tx_positions, float))

    @classmethod
    def identity(cls, M, K):
        return cls(np.eye(M, dtype=complex), np.eye(K, dtype=complex))

    def to_dict(self):
        if self.rx_positions is not None:
            out = {"kind": "uniform_2d_aps", "rx_positions": self.rx_positions.tolist()}
            if self.tx_positions is not None:
                out["tx_positions"] = self.tx_positions.tolist()
            else:
                out["K"] = self.psi_t.shape[0]
            return out
        return {"kind": "explicit", "psi_r": _matrix_to_obj(self.psi_r),
                "psi_t": _matrix_to_obj(self.psi_t)}

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "uniform_2d_aps":
            return cls.uniform_aps(d["rx_positions"], d.get("tx_positions"), d.get("K"))
        if d["kind"] == "explicit":
            return cls(_matrix_from_obj(d["psi_r"]), _matrix_from_obj(d["psi_t"]))
        raise ValueError(f"unknown correlation kind {d['kind']!r}")


def correlated_channel(M, K, spec, rng):
    """Kronecker-model channel ``Psi_r^{1/2} G_iid Psi_t^{1/2}``.

    ``G_iid`` is drawn exactly as :func:`gen_iid_rayleigh` draws it, so
    identity correlation reproduces the IID matrix for the same stream.
    """
    if spec.psi_r.shape != (M, M) or spec.psi_t.shape != (K, K):
        raise DimensionMismatch("correlation matrices do not match (M, K)")
    G_iid = crandn(rng, M, K)
    try:
        Rr = hermitian_sqrt(spec.psi_r)
        Rt = hermitian_sqrt(spec.psi_t)
    except ValueError as e:
        raise NotPSD(str(e)) from None
    return ChannelRealization(Rr @ G_iid @ Rt, "kronecker", _seed_path(rng))


# Self and mutual impedances (ohms) of a three-dipole ULA from the
# induced-EMF method, at 0.05 and 0.5 wavelength element spacing.
PAPER_ZR_005 = np.array([
    [72.9 + 42.4j, 71.4 + 24.3j, 67.1 + 7.6j],
    [71.4 + 24.3j, 72.9 + 42.4j, 71.4 + 24.3j],
    [67.1 + 7.6j, 71.4 + 24.3j, 72.9 + 42.4j]])

PAPER_ZR_05 = np.array([
    [72.9 + 42.4j, -12.5 - 29.8j, 4.0 + 17.7j],
    [-12.5 - 29.8j, 72.9 + 42.4j, -12.5 - 29.8j],
    [4.0 + 17.7j, -12.5 - 29.8j, 72.9 + 42.4j]])


@dataclass(frozen=True)
class CouplingSpec:
    """Antenna and load impedances of a coupled array.

    ``z_l`` defaults to a per-port conjugate match of the isolated element
    (``conj(z11) I``) and ``r11`` to ``Re(z11)``.
    """

    z_r: np.ndarray
    z_t: np.ndarray
    z_l: Optional[np.ndarray] = None
    r11: Optional[float] = None

    def __post_init__(self):
        z_r = np.atleast_2d(np.asarray(self.z_r, dtype=complex))
        z_t = np.atleast_2d(np.asarray(self.z_t, dtype=complex))
        for name, Z in (("z_r", z_r), ("z_t", z_t)):
            if Z.shape[0] != Z.shape[1]:
                raise DimensionMismatch(f"{name} must be square")
            if np.any(np.diag(Z).real <= 0):
                raise ValueError(f"{name} needs positive self-resistance")
        z_l = self.z_l
        if z_l is None:
            z_l = np.conj(z_r[0, 0]) * np.eye(z_r.shape[0])
        z_l = np.atleast_2d(np.asarray(z_l, dtype=complex))
        if z_l.shape != z_r.shape:
            raise DimensionMismatch("z_l must match z_r")
        object.__setattr__(self, "z_r", z_r)
        object.__setattr__(self, "z_t", z_t)
        object.__setattr__(self, "z_l", z_l)
        if self.r11 is None:
            object.__setattr__(self, "r11", float(z_r[0, 0].real))

    @classmethod
    def uncoupled_terminals(cls, z_r, K, z_l=None):
        """Coupled receive array serving K independent single-antenna terminals."""
        z11 = np.asarray(z_r, dtype=complex)[0, 0]
        return cls(z_r, z11 * np.eye(K), z_l)

    def to_dict(self):
        return {"z_r": _matrix_to_obj(self.z_r), "z_t": _matrix_to_obj(self.z_t),
                "z_l": _matrix_to_obj(self.z_l), "r11": self.r11}

    @classmethod
    def from_dict(cls, d):
        return cls(_matrix_from_obj(d["z_r"]), _matrix_from_obj(d["z_t"]),
                   _matrix_from_obj(d["z_l"]) if "z_l" in d else None, d.get("r11"))


def coupled_channel(G, cpl):
    """Overall channel including coupling and matching,
    ``2 r11 Re(Z_l)^{1/2} (Z_l + Z_r)^{-1} G Re(Z_t)^{-1/2}``."""
    Gm = as_matrix(G)
    M, K = Gm.shape
    if cpl.z_r.shape != (M, M) or cpl.z_t.shape != (K, K):
        raise DimensionMismatch("impedance matrices do not match the channel")
    S = cpl.z_l + cpl.z_r
    if np.linalg.cond(S) > 1e12:
        raise SingularImpedanceSum("Z_l + Z_r is singular")
    Rl_half = hermitian_sqrt(cpl.z_l.real)
    Rt_inv_half = hermitian_sqrt(cpl.z_t.real, inverse=True)
    out = 2 * cpl.r11 * Rl_half @ np.linalg.solve(S, Gm) @ Rt_inv_half
    tag = (G.model_tag if isinstance(G, ChannelRealization) else "iid") + "+coupling"
    path = G.seed_path if isinstance(G, ChannelRealization) else None
    return ChannelRealization(out, tag, path)


@dataclass(frozen=True)
class ScattererField:
    """Single-bounce scattering geometry around a focus point.

    Scatterers fill a ``side x side`` square centred at the origin; the ULA
    lies on the line ``x = -side/2 - standoff`` with its broadside towards
    the origin. ``amp_exponent`` is applied per leg, so a path through
    scatterer s has amplitude ``|a_s| / (d1 * d2)**amp_exponent``.
    """

    scatterers: np.ndarray
    reflections: np.ndarray
    antennas: np.ndarray
    amp_exponent: float = 1.0

    @classmethod
    def draw(cls, M, rng, n_scatterers=400, side=800.0, standoff=1600.0,
             spacing=0.5, amp_exponent=1.0):
        sc = rng.uniform(-side / 2, side / 2, size=(n_scatterers, 2))
        a = crandn(rng, n_scatterers)
        y = (np.arange(M) - (M - 1) / 2) * spacing
        ant = np.column_stack([np.full(M, -side / 2 - standoff), y])
        return cls(sc, a, ant, amp_exponent)

    @property
    def M(self):
        return self.antennas.shape[0]

    def to_dict(self):
        return {"scatterers": self.scatterers.tolist(),
                "reflections": _matrix_to_obj(self.reflections[None, :]),
                "antennas": self.antennas.tolist(), "amp_exponent": self.amp_exponent}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["scatterers"], float),
                   _matrix_from_obj(d["reflections"])[0],
                   np.asarray(d["antennas"], float), float(d["amp_exponent"]))


def geometric_gains(field, points):
    """Narrowband gains from each antenna to one or more receive points.

    Parameters
    ----------
    field : ScattererField
    points : array_like, shape (2,) or (P, 2)

    Returns
    -------
    ndarray, shape (M,) or (M, P)
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    d1 = np.linalg.norm(field.antennas[:, None, :] - field.scatterers[None], axis=-1)
    d2 = np.linalg.norm(field.scatterers[:, None, :] - pts[None], axis=-1)
    if d1.min() < 0.1 or d2.min() < 0.1:
        raise DegenerateGeometry("a path leg is shorter than a tenth of a wavelength")
    A = np.exp(-2j * np.pi * d1) / d1 ** field.amp_exponent * field.reflections
    B = np.exp(-2j * np.pi * d2) / d2 ** field.amp_exponent
    g = A @ B
    return g[:, 0] if single else g


def normalized_field_strength(field, points, focus=(0.0, 0.0)):
    """Field strength (dB) at ``points`` when the array is matched to ``focus``,
    relative to what a weight matched to each point itself would deliver.

    Equals 0 dB at the focus and is never positive (Cauchy-Schwarz).
    """
    gc = geometric_gains(field, np.asarray(focus, float))
    gp = geometric_gains(field, points)
    single = gp.ndim == 1
    gp = gp[:, None] if single else gp
    wc = np.conj(gc) / np.linalg.norm(gc)
    num = np.abs(wc @ gp) ** 2
    den = np.sum(np.abs(gp) ** 2, axis=0)
    F = 10 * np.log10(np.minimum(num / den, 1.0))
    # the ratio is exactly one at the focus; drop the rounding residue there
    at_focus = np.all(np.atleast_2d(np.asarray(points, float)) == np.asarray(focus, float),
                      axis=1)
    F[at_focus] = 0.0
    return F[0] if single else F


def imperfect_csi(G, xi, rng):
    """Channel estimate ``xi G + sqrt(1 - xi^2) E`` with E IID CN(0, 1)."""
    if not 0 <= xi <= 1:
        raise ValueError("xi must lie in [0, 1]")
    Gm = as_matrix(G)
    if xi == 1:
        est = Gm.copy()
    else:
        est = xi * Gm + np.sqrt(1 - xi ** 2) * crandn(rng, *Gm.shape)
    return ChannelRealization(est, "estimate", _seed_path(rng))
