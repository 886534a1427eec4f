"""Achievable rates and capacities in bits per channel use."""

from dataclasses import dataclass

import numpy as np

from .channel import as_matrix
from .errors import NonFinite, OptimizerStall, UnknownRegime, VPRangeExceeded

__all__ = ['RateReport', 'PowerAllocation', 'p2p_rate', 'asymptotic_rate',
           'reverse_sum_rate', 'forward_sum_capacity', 'forward_objective',
           'kkt_residual', 'project_simplex', 'waterfill', 'table1_sinr',
           'log2det_eye_plus']

LN2 = np.log(2.0)


@dataclass(frozen=True)
class RateReport:
    rate: float
    lower_bound: float
    upper_bound: float
    regime_tag: str = "exact"

    def __post_init__(self):
        if not self.lower_bound - 1e-9 <= self.rate <= self.upper_bound + 1e-9:
            raise ValueError("rate outside its bounds")


@dataclass(frozen=True)
class PowerAllocation:
    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if np.any(g < -1e-9) or abs(g.sum() - 1) > 1e-9:
            raise ValueError("power allocation must lie on the unit simplex")
        object.__setattr__(self, "gamma", np.clip(g, 0.0, None))


def log2det_eye_plus(A):
    """``log2 det(I + A A^H)`` via the singular values of A."""
    s = np.linalg.svd(A, compute_uv=False)
    return float(np.sum(np.log1p(s ** 2)) / LN2)


def _finite(G):
    G = as_matrix(G)
    if not np.all(np.isfinite(G)):
        raise NonFinite("channel has non-finite entries")
    return np.atleast_2d(G)


def p2p_rate(G, rho):
    """Point-to-point rate ``log2 det(I + (rho/n_t) G G^H)`` with the
    trace-based lower and upper bounds."""
    if rho < 0:
        raise ValueError("rho must be non-negative")
    G = _finite(G)
    n_r, n_t = G.shape
    rate = log2det_eye_plus(np.sqrt(rho / n_t) * G)
    tr = float(np.sum(np.abs(G) ** 2))
    n = min(n_r, n_t)
    lower = np.log2(1 + rho * tr / n_t)
    upper = n * np.log2(1 + rho * tr / (n_t * n))
    return RateReport(rate, lower, upper)


def asymptotic_rate(regime, **params):
    """Closed-form large-array limits.

    ``LowSNR(rho, n_r)``, ``ManyTx(rho, n_r)``, ``ManyRx(rho, n_t, n_r)``,
    ``ReverseSum(M, rho_r, beta)``, ``ForwardSum(M, rho_f, beta)``.
    """
    try:
        if regime == "LowSNR":
            return params["rho"] * params["n_r"] / LN2
        if regime == "ManyTx":
            return params["n_r"] * np.log2(1 + params["rho"])
        if regime == "ManyRx":
            n_t = params["n_t"]
            return n_t * np.log2(1 + params["rho"] * params["n_r"] / n_t)
        if regime == "ReverseSum":
            beta = np.asarray(params["beta"], float)
            return float(np.sum(np.log2(1 + params["M"] * params["rho_r"] * beta)))
        if regime == "ForwardSum":
            snr = params["M"] * params["rho_f"] * np.asarray(params["beta"], float)
            gamma = waterfill(snr)
            return float(np.sum(np.log2(1 + snr * gamma)))
    except KeyError as e:
        raise ValueError(f"missing parameter {e.args[0]!r} for regime {regime}") from None
    raise UnknownRegime(f"unknown regime {regime!r}")


def waterfill(gains):
    """Maximise ``sum log(1 + gains_k x_k)`` over the unit simplex."""
    g = np.asarray(gains, dtype=float)
    order = np.argsort(g)[::-1]
    inv = 1.0 / g[order]
    x = np.zeros_like(g)
    for n in range(len(g), 0, -1):
        level = (1 + inv[:n].sum()) / n
        alloc = level - inv[:n]
        if alloc[-1] >= 0:
            x[order[:n]] = alloc
            break
    return x


def reverse_sum_rate(G, rho_r):
    """``log2 det(I_K + rho_r G^H G)``."""
    if rho_r < 0:
        raise ValueError("rho_r must be non-negative")
    G = _finite(G)
    return log2det_eye_plus(np.sqrt(rho_r) * G)


def project_simplex(v):
    """Euclidean projection onto ``{x >= 0, sum x = 1}``."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1
    idx = np.arange(1, len(v) + 1)
    k = np.nonzero(u - css / idx > 0)[0][-1]
    return np.maximum(v - css[k] / (k + 1), 0.0)


def forward_objective(G, rho_f, gamma):
    """``log2 det(I_M + rho_f G diag(gamma) G^H)``."""
    G = as_matrix(G)
    return log2det_eye_plus(np.sqrt(rho_f) * G * np.sqrt(np.asarray(gamma, float)))


def _forward_grad(A, rho_f, gamma):
    # G^H (I + rho G D G^H)^{-1} G = (I + rho A D)^{-1} A  (push-through)
    K = A.shape[0]
    X = np.linalg.solve(np.eye(K) + rho_f * A * gamma, A)
    return rho_f * np.real(np.diag(X)) / LN2


def _kkt_from_grad(grad, gamma, active_tol=1e-9):
    active = gamma > active_tol
    lam = grad[active].mean() if active.any() else grad.max()
    res = max(0.0, float(np.max(grad - lam)))
    if active.any():
        res = max(res, float(np.max(np.abs(grad[active] - lam))))
    return res


def kkt_residual(G, rho_f, gamma, active_tol=1e-9):
    """Worst violation of the simplex KKT conditions at ``gamma``.

    At an optimum every partial derivative is at most the multiplier, with
    equality wherever ``gamma_k > 0``.
    """
    G = as_matrix(G)
    gamma = np.asarray(gamma, float)
    return _kkt_from_grad(_forward_grad(G.conj().T @ G, rho_f, gamma), gamma, active_tol)


def _newton_polish(A, rho_f, gamma, tol, steps=8, active_tol=1e-9):
    # Newton steps on the face of currently active users, accepted only when
    # the KKT residual drops; this needs no objective differences, which
    # lose resolution once the sum rate is large
    K = A.shape[0]
    res = _kkt_from_grad(_forward_grad(A, rho_f, gamma), gamma, active_tol)
    for _ in range(steps):
        if res <= tol * 1e-2:
            break
        act = np.flatnonzero(gamma > active_tol)
        B = np.linalg.solve(np.eye(K) + rho_f * A * gamma, A)[np.ix_(act, act)]
        g = rho_f * np.real(np.diag(B)) / LN2
        H = -(rho_f ** 2 / LN2) * np.abs(B) ** 2
        n = act.size
        kkt = np.zeros((n + 1, n + 1))
        kkt[:n, :n] = H
        kkt[:n, n] = kkt[n, :n] = 1.0
        try:
            sol = np.linalg.solve(kkt, np.concatenate([-(g - g.mean()), [0.0]]))
        except np.linalg.LinAlgError:
            break
        d = sol[:n]
        t = 1.0
        neg = d < 0
        if neg.any():
            t = min(1.0, 0.99 * float(np.min(-gamma[act][neg] / d[neg])))
        cand = gamma.copy()
        cand[act] += t * d
        cres = _kkt_from_grad(_forward_grad(A, rho_f, cand), cand, active_tol)
        if cres >= res:
            break
        gamma, res = cand, cres
    return gamma


def forward_sum_capacity(G, rho_f, tol=1e-7, max_iter=10_000):
    """Sum capacity of the forward link (equal to the dirty-paper sum rate).

    Maximises the concave objective :func:`forward_objective` over the unit
    simplex by projected gradient ascent with a backtracking line search,
    then refines with Newton steps on the active face. The gradient phase
    stops once the KKT residual is below ``tol`` times the largest partial
    derivative clipped at one, or when no step improves the objective in
    floating point.

    Returns
    -------
    value : float
    allocation : PowerAllocation
    """
    if rho_f < 0:
        raise ValueError("rho_f must be non-negative")
    G = _finite(G)
    K = G.shape[1]
    gamma = np.full(K, 1.0 / K)
    if K == 1 or rho_f == 0:
        return forward_objective(G, rho_f, gamma), PowerAllocation(gamma)
    A = G.conj().T @ G

    def f(x):
        return log2det_eye_plus(np.sqrt(rho_f) * G * np.sqrt(x))

    val = f(gamma)
    step = 1.0 / max(rho_f * np.real(np.trace(A)) / LN2, 1e-12)
    for _ in range(max_iter):
        grad = _forward_grad(A, rho_f, gamma)
        scale = min(1.0, float(np.max(np.abs(grad))))
        res = _kkt_from_grad(grad, gamma)
        if res <= tol * scale:
            break
        step *= 2.0
        while True:
            cand = project_simplex(gamma + step * grad)
            cval = f(cand)
            if cval >= val + 0.5 * grad @ (cand - gamma) - 1e-15 or step < 1e-16:
                break
            step *= 0.5
        if cval <= val:
            # no resolvable ascent left in floating point
            break
        gamma, val = cand, cval
    else:
        raise OptimizerStall("forward sum-capacity optimizer hit its iteration cap")
    gamma = _newton_polish(A, rho_f, gamma, tol)
    res = _kkt_from_grad(_forward_grad(A, rho_f, gamma), gamma)
    if res > np.sqrt(tol) * scale:
        raise OptimizerStall("forward sum-capacity optimizer stalled away from optimum")
    gamma = gamma / gamma.sum()
    return f(gamma), PowerAllocation(gamma)


def table1_sinr(technique, alpha, rho_f, xi=None):
    """Large-system SNR/SINR of single-cell forward-link precoders.

    ``xi=None`` (or 1) means perfect CSI; otherwise ``xi`` is the estimate
    reliability in [0, 1].
    """
    perfect = xi is None
    xi2 = 1.0 if perfect else float(xi) ** 2
    if not 0 <= xi2 <= 1:
        raise ValueError("xi must lie in [0, 1]")
    t = technique.upper()
    if t == "IF":
        return rho_f * alpha
    if t == "ZF":
        if alpha <= 1:
            raise ValueError("ZF requires alpha > 1")
        return xi2 * rho_f * (alpha - 1) / ((1 - xi2) * rho_f + 1)
    if t == "MF":
        return xi2 * rho_f * alpha / (rho_f + 1)
    if t == "VP":
        if not perfect and xi2 != 1:
            raise ValueError("no vector-perturbation expression for imperfect CSI")
        if alpha <= 1:
            raise ValueError("VP requires alpha > 1")
        gain = np.pi / 6 * (1 - 1 / alpha) ** (1 - alpha)
        if gain > 1:
            raise VPRangeExceeded(f"VP expression exceeds the IF benchmark at alpha={alpha:g}")
        return rho_f * alpha * gain
    raise ValueError(f"unknown technique {technique!r}")
