"""Closed-form constants, rates and decay bounds.

All flow formulas share the factor (1 - e^{-KT})/K, replaced by its series
when |K| T is tiny so that every constant is continuous through K = 0.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq, minimize_scalar

_SERIES_CUTOFF = 1e-8


def _one_minus_exp_over(K: float, T: float) -> float:
    """(1 - e^{-KT}) / K with the T limit at K = 0 and 1/K at T = inf."""
    if math.isinf(T):
        if K <= 0:
            raise ValueError("T = inf requires K > 0")
        return 1.0 / K
    x = K * T
    if abs(x) < _SERIES_CUTOFF:
        return T * (1.0 - x / 2.0 + x * x / 6.0)
    return -math.expm1(-x) / K


def _check_T(T: float) -> float:
    T = float(T)
    if T < 0 or math.isnan(T):
        raise ValueError("T must be >= 0")
    return T


def _decay(K: float, T: float) -> float:
    return 0.0 if math.isinf(T) else math.exp(-K * T)


def poincare_flow(K: float, M: float, T: float, C_P0: float = 0.0) -> float:
    """Poincare constant of the time-T marginal: e^{-KT} C_P0 + M (1 - e^{-KT}) / K."""
    T = _check_T(T)
    if M <= 0:
        raise ValueError("M must be > 0")
    return _decay(K, T) * C_P0 + M * _one_minus_exp_over(K, T)


def logsobolev_flow(K: float, T: float, C_LS0: float = 0.0) -> float:
    """Log-Sobolev constant of the time-T marginal (sigma = Id): e^{-KT} C0 + 2 (1 - e^{-KT}) / K."""
    T = _check_T(T)
    return _decay(K, T) * C_LS0 + 2.0 * _one_minus_exp_over(K, T)


def t2_constant(K: float, T: float) -> float:
    """Transport-entropy constant of the time-T marginal started from a point."""
    T = _check_T(T)
    if K > 0:
        if math.isinf(T):
            return 2.0 / K
        return min(2.0 / K, 4.0 * _one_minus_exp_over(K / 2.0, T) / 2.0)
    if math.isinf(T):
        raise ValueError("T = inf requires K > 0")
    if abs(K * T) < _SERIES_CUTOFF:
        # 4[(1-q)/K - (1-q)^2/K] with q = e^{-KT/2} expands to 2T - 3 K T^2 / 2 + ...
        return 2.0 * T - 1.5 * K * T * T
    one_minus_q = -math.expm1(-K * T / 2.0)
    return 4.0 * (one_minus_q / K - one_minus_q**2 / K)


def t2_flow(K: float, T: float, C_W0: float, lam: float | None = None) -> float:
    """Transport constant of the time-T marginal when the initial law has constant C_W0."""
    T = _check_T(T)
    if K > 0:
        if lam is None or not 0 < lam < K:
            raise ValueError("t2_flow with K > 0 needs 0 < lam < K")
        return _decay(K - lam, T) * C_W0 + 2.0 / lam
    if math.isinf(T):
        raise ValueError("T = inf requires K > 0")
    r = _one_minus_exp_over(K, T)
    B_T = 1.0 + math.sqrt(2.0) * r - 2.0 * K * r
    return t2_constant(K, T) + math.sqrt(2.0) / 2.0 + B_T * C_W0


def wi_constant(K: float, lam: float, T: float, D0: float = 0.0) -> float:
    """e^{-AT} D0 + 2 (1 - e^{-AT}) / (A lam) with A = K - 2 lam."""
    T = _check_T(T)
    if lam <= 0:
        raise ValueError("lam must be > 0")
    A = K - 2.0 * lam
    return _decay(A, T) * D0 + 2.0 * _one_minus_exp_over(A, T) / lam


def beckner_constant(m: float, M: float, K: float, t: float) -> float:
    """M ((m+2)/m) (e^{2Kt/m} - 1) / K."""
    if m < 2:
        raise ValueError("m must be >= 2")
    t = _check_T(t)
    if math.isinf(t):
        raise ValueError("t must be finite")
    # (e^{2Kt/m} - 1)/K = (2t/m) * (e^{x} - 1)/x with x = 2Kt/m
    x = 2.0 * K * t / m
    ratio = 1.0 + x / 2.0 + x * x / 6.0 if abs(x) < _SERIES_CUTOFF else math.expm1(x) / x
    return M * (m + 2.0) / m * (2.0 * t / m) * ratio


def superconvex_Kbeta(beta: float, d: int) -> float:
    """Convexity constant K_beta of |x|^(2 beta) for the condition <grad U(x)-grad U(y), x-y> >= K |x-y|^(2 beta)."""
    if beta < 1:
        raise ValueError("beta must be >= 1")
    if d == 1:
        return 2.0 * beta * 2.0 ** (2.0 - 2.0 * beta)
    return 2.0 * beta * 2.0 ** (3.0 - 3.0 * beta)


def superconvex_CP_CLS(K: float, beta: float) -> tuple[float, float]:
    """Poincare and log-Sobolev bounds under K |x-y|^(2 beta) convexity."""
    if K <= 0:
        raise ValueError("K must be > 0")
    if beta < 1:
        raise ValueError("beta must be >= 1")
    scale = (32.0 / K**2) ** (1.0 / (2.0 * beta))
    c36 = 36.0 ** ((2.0 * beta - 1.0) / beta)
    CP = 4.0 * c36 * scale
    first = 4.0 ** ((3.0 * beta - 2.0) / (2.0 * beta - 1.0)) * 36.0 ** ((beta - 1.0) / beta)
    CLS = scale * (first + 8.0 * c36)
    return CP, CLS


def lack_CP_CLS(K: float, beta: float) -> tuple[float, float]:
    """Poincare and log-Sobolev bounds when convexity only holds in the form K (|x-y|^(2 beta) wedge |x-y|^2)."""
    if K <= 0:
        raise ValueError("K must be > 0")
    if beta < 1:
        raise ValueError("beta must be >= 1")
    scale = (32.0 / K**2) ** (1.0 / (2.0 * (beta + 1.0)))
    c36 = 36.0 ** ((2.0 * beta + 1.0) / (beta + 1.0))
    CP = max(32.0 / K, 4.0 * c36 * scale)
    first = 4.0 ** ((3.0 * beta + 1.0) / (2.0 * beta + 1.0)) * 36.0 ** (beta / (beta + 1.0))
    CLS = max(32.0 / K, scale * (first + 8.0 * c36))
    return CP, CLS


def _invert_increasing(fun: Callable[[float], float], target: float, rtol: float = 1e-10) -> float:
    """Solve fun(x) = target for x > 0 with fun increasing and fun(0+) = 0."""
    if target == 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while fun(hi) < target:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            raise ValueError("inverse does not exist on the available range")
    return brentq(lambda x: fun(x) - target, lo, hi, rtol=rtol, xtol=1e-300, maxiter=2000)


def _F_inverse(alpha: Callable[[float], float], a: float) -> float:
    if np.all([alpha(e) == 0 for e in (1e-6, 1.0, 1e6)]):
        raise ValueError("rate function alpha is identically zero")
    return _invert_increasing(lambda e: e * alpha(e) ** 2, a)


def weak_w2i(alpha: Callable[[float], float], K: float, I: float) -> float:
    """Transport bound 2 F(8 I / K^2) where F inverts e -> e alpha(e)^2."""
    if K <= 0:
        raise ValueError("K must be > 0")
    if I < 0:
        raise ValueError("Fisher information must be >= 0")
    return 2.0 * _F_inverse(alpha, 8.0 * I / K**2)


def weak_w2i_entropy(alpha: Callable[[float], float], K: float, I: float) -> float:
    """Entropy bound 2 (I F(8 I / K^2))^{1/2}."""
    if K <= 0:
        raise ValueError("K must be > 0")
    if I < 0:
        raise ValueError("Fisher information must be >= 0")
    return 2.0 * math.sqrt(I * _F_inverse(alpha, 8.0 * I / K**2))


# ---------------------------------------------------------------------------
# decay bounds


def decay_bounds(kind: str, **p) -> float:
    """Pointwise decay formulas selected by ``kind``.

    polynomial-superconvex
        dist, beta > 1, K, t: bound on |X_t - Y_t|^2 along a synchronous pair,
        dist^2 (1 + K (beta-1) dist^(2(beta-1)) t)^(-1/(beta-1)).
    alpha-epsilon
        eta0, K, alpha, eps, t: eta0 e^{-K alpha(eps) t} + eps.  With
        ``beta`` and ``theta`` instead of ``alpha``/``eps`` the choice
        alpha(e) = e^(beta-1), eps = eta0 t^(-theta) is substituted.
    reverse-gradient
        f_sup, t: 2 f_sup / sqrt(2 pi t).
    ou-hitting
        lam, t, r: sqrt(lam) e^{-t lam/2} / (sqrt(2 pi) sqrt(1 - e^{-t lam})) r.
    variance-decay
        K, M, t: M/(2K) e^{-Kt}; ``corrected=True`` gives M/K e^{-Kt}.
    entropy-decay
        K, M, t, c=1: c M / K e^{-Kt}.
    mixed-commutation
        c_n, phi_min, q, L, lam, t: c_n (2/phi_min)^{1/(2q)} e^{[(1-1/(2q)) L - lam/(2q)] t}.
    """
    if kind == "polynomial-superconvex":
        beta, K, t, dist = p["beta"], p["K"], p["t"], p["dist"]
        if beta <= 1 or K <= 0 or t < 0:
            raise ValueError("needs beta > 1, K > 0, t >= 0")
        mult = (1.0 + K * (beta - 1.0) * dist ** (2.0 * (beta - 1.0)) * t) ** (-1.0 / (beta - 1.0))
        return dist**2 * mult
    if kind == "alpha-epsilon":
        eta0, K, t = p["eta0"], p["K"], p["t"]
        if K <= 0 or t < 0 or eta0 < 0:
            raise ValueError("needs K > 0, t >= 0, eta0 >= 0")
        if "theta" in p:
            beta, theta = p["beta"], p["theta"]
            if t == 0:
                raise ValueError("the power choice of eps needs t > 0")
            return eta0 * (t ** (-theta) + math.exp(-K * eta0 ** (beta - 1.0) * t ** (1.0 - theta * (beta - 1.0))))
        eps = p["eps"]
        return eta0 * math.exp(-K * p["alpha"](eps) * t) + eps
    if kind == "reverse-gradient":
        t = p["t"]
        if t <= 0:
            raise ValueError("t must be > 0")
        return 2.0 * p["f_sup"] / math.sqrt(2.0 * math.pi * t)
    if kind == "ou-hitting":
        lam, t, r = p["lam"], p["t"], p["r"]
        if lam <= 0 or t <= 0:
            raise ValueError("needs lam > 0 and t > 0")
        return math.sqrt(lam) * math.exp(-t * lam / 2.0) / (math.sqrt(2.0 * math.pi) * math.sqrt(-math.expm1(-t * lam))) * r
    if kind == "variance-decay":
        K, M, t = p["K"], p.get("M", 1.0), p["t"]
        if K <= 0:
            raise ValueError("variance decay needs K > 0")
        factor = 1.0 if p.get("corrected", False) else 0.5
        return factor * M / K * math.exp(-K * t)
    if kind == "entropy-decay":
        K, M, t, c = p["K"], p.get("M", 1.0), p["t"], p.get("c", 1.0)
        if K <= 0:
            raise ValueError("entropy decay needs K > 0")
        return c * M / K * math.exp(-K * t)
    if kind == "mixed-commutation":
        q = p["q"]
        if q <= 1:
            raise ValueError("q must be > 1")
        expo = ((1.0 - 1.0 / (2.0 * q)) * p["L"] - p["lam"] / (2.0 * q)) * p["t"]
        return p["c_n"] * (2.0 / p["phi_min"]) ** (1.0 / (2.0 * q)) * math.exp(expo)
    raise ValueError(f"unknown decay kind {kind!r}")


# ---------------------------------------------------------------------------
# reflection-coupling rate


class NoRateError(ValueError):
    """kappa is not positive at infinity, so the reflection rate is undefined."""


@dataclass
class EberleRate:
    R0: float
    R1: float
    phi_min: float
    lam: float
    c: float
    kappa_infinity: float
    D_r: np.ndarray = field(repr=False)
    D_values: np.ndarray = field(repr=False)
    general: bool = False
    M: float | None = None
    N_inv: float | None = None
    Lambda: float | None = None
    positivity: bool | None = None

    @property
    def prefactor(self) -> float:
        return 2.0 / self.phi_min

    def D(self, r) -> np.ndarray:
        """Tabulated concave distance; linear with slope phi_min/2 beyond the table."""
        r = np.asarray(r, dtype=float)
        last_r, last_v = self.D_r[-1], self.D_values[-1]
        inside = np.interp(r, self.D_r, self.D_values)
        return np.where(r > last_r, last_v + 0.5 * self.phi_min * (r - last_r), inside)

    def w1_bound(self, dist: float, t: float) -> float:
        """(2/phi_min) e^{-lam t} |x - y|."""
        return self.prefactor * math.exp(-self.lam * t) * dist


def _as_kappa_callable(kappa) -> Callable[[np.ndarray], np.ndarray]:
    if callable(kappa):
        return lambda r: np.asarray(kappa(np.asarray(r, dtype=float)), dtype=float) * np.ones(np.shape(r))
    if hasattr(kappa, "kappa_radii"):
        radii, vals = np.asarray(kappa.kappa_radii), np.asarray(kappa.kappa_values)
    else:
        radii, vals = (np.asarray(a, dtype=float) for a in kappa)
    return lambda r: np.interp(r, radii, vals)


def _kappa_at_infinity(kfun) -> float:
    return float(np.min(kfun(np.geomspace(1e4, 1e8, 41))))


def _find_R0(kfun, r_hi: float) -> float:
    grid = np.concatenate([[0.0], np.geomspace(1e-9, r_hi, 4001)])
    vals = kfun(grid[1:])
    neg = np.nonzero(vals < 0)[0]
    if neg.size == 0:
        return 0.0
    j = neg[-1] + 1  # index into grid of the last negative point
    a, b = grid[j], grid[j + 1]
    return brentq(lambda r: float(kfun(np.array([r]))[0]), a, b, xtol=1e-15, rtol=1e-15)


def _inf_beyond(kfun, R: float) -> float:
    grid = R * np.concatenate([[1.0], np.geomspace(1.0 + 1e-9, 1e8 / max(R, 1e-12), 800)])
    return float(np.min(kfun(grid)))


def _find_R1(kfun, R0: float) -> float:
    def G(R):
        return _inf_beyond(kfun, R) - 8.0 / (R * (R - R0))

    lo = R0 + 1e-12 * max(1.0, R0)
    hi = R0 + 1.0
    while G(hi) < 0:
        lo, hi = hi, R0 + 2.0 * (hi - R0)
        if hi > 1e8:
            raise NoRateError("R1 is unbounded for this kappa profile")
    return brentq(G, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)


def eberle_rate(kappa, general: tuple[float, float, float] | dict | None = None,
                n_table: int = 401) -> EberleRate:
    """Reflection-coupling contraction rate built from a curvature profile.

    ``kappa`` is a callable r -> kappa(r), a ``CurvatureReport`` or a pair
    ``(radii, values)``.  ``general`` supplies ``(M, N_inv, Lambda)`` for a
    state-dependent diffusion matrix.
    """
    kfun = _as_kappa_callable(kappa)
    k_inf = _kappa_at_infinity(kfun)
    if not k_inf > 0:
        raise NoRateError(f"kappa at infinity is {k_inf:g} <= 0; no contraction rate")

    M = N_inv = Lam = None
    positivity = None
    if general is not None:
        if isinstance(general, dict):
            M, N_inv, Lam = general["M"], general["N_inv"], general["Lambda"]
        else:
            M, N_inv, Lam = general
        gap = 2.0 / N_inv - Lam
        positivity = gap > 0
        if not positivity:
            raise NoRateError(f"(2/N_inv) - Lambda = {gap:g} <= 0; reflection coupling may fail")
        c = 1.0 / gap
    else:
        c = 0.25

    R0 = _find_R0(kfun, 1e6)
    R1 = _find_R1(kfun, R0)

    def s_kneg(s):
        # kappa may blow up at 0 while s kappa^-(s) stays bounded
        s = max(s, 1e-300)
        with np.errstate(all="ignore"):
            val = s * max(-float(kfun(np.array([s]))[0]), 0.0)
        if not math.isfinite(val):
            raise ValueError("s kappa^-(s) is not finite near 0")
        return val

    # y = (I, Phi, J) with I' = s kappa^-(s), Phi' = phi, J' = Phi/phi
    def rhs(s, y):
        phi = math.exp(-c * y[0])
        return [s_kneg(s), phi, y[1] / phi]

    tol = dict(method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    breaks = [0.0] + ([R0] if 0 < R0 < R1 else []) + [R1]
    pieces, y = [], [0.0, 0.0, 0.0]
    for a, b in zip(breaks, breaks[1:]):
        sol = solve_ivp(rhs, (a, b), y, **tol)
        if not sol.success:
            raise RuntimeError(f"quadrature failed: {sol.message}")
        pieces.append(sol)
        y = list(sol.y[:, -1])

    def state(r: float):
        for sol in pieces:
            if r <= sol.t[-1]:
                return sol.sol(r)
        return pieces[-1].y[:, -1]

    I_R0 = state(R0)[0] if R0 > 0 else 0.0
    phi_min = math.exp(-c * I_R0)
    J_R1 = y[2]
    lam = 1.0 / J_R1 if general is None else 0.5 * phi_min / R1**2

    # D(r) = int_0^r phi g with g = 1 - J(r ^ R1) / (2 J(R1))
    r_tab = np.linspace(0.0, 2.0 * R1, n_table)

    def d_integrand(s):
        st = state(min(s, R1))
        phi = math.exp(-c * st[0])
        return phi * (1.0 - 0.5 * st[2] / J_R1)

    D_vals = np.zeros(n_table)
    for i in range(1, n_table):
        a, b = r_tab[i - 1], r_tab[i]
        D_vals[i] = D_vals[i - 1] + quad(d_integrand, a, b, epsabs=0.0, epsrel=1e-12)[0]

    return EberleRate(R0=R0, R1=R1, phi_min=phi_min, lam=lam, c=c, kappa_infinity=k_inf,
                      D_r=r_tab, D_values=D_vals, general=general is not None, M=M, N_inv=N_inv,
                      Lambda=Lam, positivity=positivity)


def eberle_poincare(rate: EberleRate) -> float:
    """Poincare constant 1/(2 lam)."""
    return 1.0 / (2.0 * rate.lam)


def perturbed_convex_poincare_bound(K: float, M: float) -> float:
    """(M/K + sqrt(8/K))^2 e^{M^2/(8K)} for kappa(r) = K - M/r, which equals R1^2 / phi_min."""
    if K <= 0 or M < 0:
        raise ValueError("needs K > 0 and M >= 0")
    return (M / K + math.sqrt(8.0 / K)) ** 2 * math.exp(M * M / (8.0 * K))


# ---------------------------------------------------------------------------
# time-dependent curvature, mean field, kinetic


def nonhomogeneous_t2(Kfun: Callable[[float], float], lamfun: Callable[[float], float], T: float,
                      C_T0: float = 0.0, dlamfun: Callable[[float], float] | None = None) -> float:
    """4 e^{-K(T)+lam(T)} int_0^T e^{K(s)-lam(s)} / lam'(s) ds + C_T0 e^{-K(T)+lam(T)}."""
    T = _check_T(T)
    if math.isinf(T):
        raise ValueError("T must be finite")
    if T == 0:
        return C_T0

    def dlam(s):
        if dlamfun is not None:
            return float(dlamfun(s))
        h = 1e-6 * max(1.0, abs(s))
        lo = max(s - h, 0.0)
        return (lamfun(s + h) - lamfun(lo)) / (s + h - lo)

    def integrand(s):
        dl = dlam(s)
        if not dl > 0:
            raise ValueError(f"lam' vanishes at s = {s:g}")
        return math.exp(Kfun(s) - lamfun(s) - (Kfun(T) - lamfun(T))) / dl

    val, _ = quad(integrand, 0.0, T, epsabs=0.0, epsrel=1e-12, limit=200)
    return 4.0 * val + C_T0 * math.exp(-Kfun(T) + lamfun(T))


def linear_lambda(rate: float):
    """lam(t) = rate t with its derivative."""
    if rate <= 0:
        raise ValueError("rate must be > 0")
    return (lambda t: rate * t), (lambda t: rate)


def proportional_lambda(Kfun, dKfun, factor: float):
    """lam(t) = factor K(t) with its derivative."""
    return (lambda t: factor * Kfun(t)), (lambda t: factor * dKfun(t))


def mckean_rate(K_V: float, K_W: float, sigma_variant: tuple[float, float] | None = None,
                matched_means_V0: bool = False) -> float:
    """Contraction rate of the mean-field equation in squared W2."""
    if matched_means_V0:
        return float(K_W)
    base = K_V + min(K_W, 0.0)
    if sigma_variant is None:
        return float(base)
    r, l = sigma_variant
    return float(base - r * (1.0 + 4.0 * l * l))


@dataclass(frozen=True)
class KineticContraction:
    a: float
    b: float
    K: float

    def Q(self) -> np.ndarray:
        return np.array([[self.a, self.b / 2.0], [self.b / 2.0, 1.0]])


def kinetic_rate(a: float, b: float, delta: float) -> float:
    """Guaranteed decay rate of a|dx|^2 + b<dx,dv> + |dv|^2 for V = |x|^2 + W, Lip(grad W) <= delta."""
    if b * b >= 4.0 * a:
        return -np.inf
    Q = np.array([[a, b / 2.0], [b / 2.0, 1.0]])
    w, V = np.linalg.eigh(Q)
    Qm = V @ np.diag(w ** -0.5) @ V.T
    rates = []
    for J in (-delta, delta):
        A = np.array([[0.0, 1.0], [-2.0 - J, -1.0]])
        S = Qm @ (A.T @ Q + Q @ A) @ Qm
        rates.append(-float(np.linalg.eigvalsh(S)[-1]))
    return min(rates)


def kinetic_contraction_search(delta: float, a_grid=None, b_fracs=None) -> KineticContraction | None:
    """Grid search for a quadratic form under which the kinetic difference flow contracts."""
    a_grid = np.geomspace(0.1, 10.0, 81) if a_grid is None else np.asarray(a_grid, float)
    b_fracs = np.linspace(0.0, 1.0, 80, endpoint=False) if b_fracs is None else np.asarray(b_fracs, float)
    best = None
    for a in a_grid:
        for frac in b_fracs:
            b = frac * 2.0 * math.sqrt(a)
            K = kinetic_rate(a, b, delta)
            if K > 0 and (best is None or K > best.K):
                best = KineticContraction(float(a), float(b), K)
    return best


# ---------------------------------------------------------------------------
# stability under convolution and scaling


def convolution_constants(lam: float, C_X: float, C_Y: float, kind: str = "P",
                          C_mix: float | None = None) -> tuple[float, float]:
    """Constants of sqrt(lam) X + sqrt(1-lam) Y for independent X, Y.

    Returns ``(upper, implied)`` where ``upper = lam C_X + (1-lam) C_Y`` and
    ``implied`` is the bound on C_X implied by lam C_X <= C_mix + (1-lam) C_Y,
    with ``C_mix`` defaulting to ``upper``.
    """
    if kind not in ("P", "LS"):
        raise ValueError("kind must be 'P' or 'LS'")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must be in [0, 1]")
    if C_X < 0 or C_Y < 0:
        raise ValueError("constants must be nonnegative")
    upper = lam * C_X + (1.0 - lam) * C_Y
    mix = upper if C_mix is None else C_mix
    implied = math.inf if lam == 0 else (mix + (1.0 - lam) * C_Y) / lam
    return upper, implied


def gaussian_smoothing(C_Z: float, alpha: float, kind: str = "P") -> float:
    """Constant of Z + alpha G with G standard Gaussian: C_Z + c alpha^2 (c = 1 for P, 2 for LS)."""
    if kind not in ("P", "LS"):
        raise ValueError("kind must be 'P' or 'LS'")
    return C_Z + (1.0 if kind == "P" else 2.0) * alpha * alpha


def prekopa_curvature(K: float, lam: float) -> float:
    """Curvature K / (lam + K (1 - lam)) of sqrt(lam) X for a K-convex X."""
    den = lam + K * (1.0 - lam)
    if den <= 0:
        raise ValueError("lam + K (1 - lam) must be > 0")
    return K / den


def generalized_inverse(c: Callable[[float], float], v: float, t_max: float = 1e12) -> float:
    """inf {t >= 0 : c(t) <= v} for a nonincreasing c."""
    if v >= c(0.0):
        return 0.0
    hi = 1.0
    while c(hi) > v:
        hi *= 2.0
        if hi > t_max:
            raise ValueError("decay function is not invertible on the needed range")
    lo = hi / 2.0 if hi > 1.0 else 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if c(mid) <= v:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    return hi


def weak_poincare_alpha(c: Callable[[float], float], s: float, span: float = 25.0) -> float:
    """alpha(s) = s inf_{u>0} c^{-1}(u e^{1-u/s}) / u for a decreasing decay function c."""
    if s <= 0:
        raise ValueError("s must be > 0")
    probe = [c(t) for t in (0.0, 1.0, 10.0, 100.0)]
    if any(b > a for a, b in zip(probe, probe[1:])):
        raise ValueError("decay function must be nonincreasing")

    def h(logu):
        u = math.exp(logu)
        with np.errstate(over="ignore"):
            v = u * math.exp(1.0 - u / s) if u / s < 700 else 0.0
        if v <= 0:
            return math.inf
        return generalized_inverse(c, v) / u

    centre = math.log(s)
    grid = np.linspace(centre - span, centre + 5.0, 601)
    vals = np.array([h(g) for g in grid])
    j = int(np.argmin(vals))
    if vals[j] == 0.0:
        return 0.0
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    res = minimize_scalar(h, bracket=(lo, grid[j], hi) if 0 < j < grid.size - 1 else None,
                          method="golden", tol=1e-12)
    best = min(vals[j], float(res.fun))
    return s * best


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class InequalityCertificate:
    kind: str
    constant: float
    T: float
    inputs: dict
    formula: str
    anchor: str
    convention: str | None = None

    def __post_init__(self):
        if not self.constant >= 0:
            raise ValueError("certificate constant must be >= 0")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["T"] = "inf" if math.isinf(self.T) else self.T
        return out


_CERT_TABLE = {
    "poincare-flow": ("Poincare", poincare_flow, ("K", "M", "T", "C_P0"), "e^{-KT} C_P0 + M (1-e^{-KT})/K", None),
    "logsobolev-flow": ("logSobolev", logsobolev_flow, ("K", "T", "C_LS0"), "e^{-KT} C_LS0 + 2 (1-e^{-KT})/K", None),
    "t2": ("T2", t2_constant, ("K", "T"), "min(2/K, 4(1-e^{-KT/2})/K) and K <= 0 branches", "half-squared"),
    "t2-flow": ("T2", t2_flow, ("K", "T", "C_W0", "lam"), "e^{-(K-lam)T} C_W0 + 2/lam or C_T + sqrt2/2 + B_T C_W0", "half-squared"),
    "wi": ("WI", wi_constant, ("K", "lam", "T", "D0"), "e^{-AT} D0 + 2(1-e^{-AT})/(A lam), A = K - 2 lam", "half-squared"),
    "beckner": ("Beckner", beckner_constant, ("m", "M", "K", "t"), "M ((m+2)/m) (e^{2Kt/m}-1)/K", None),
}


def certificate(name: str, **inputs) -> InequalityCertificate:
    """Evaluate a named flow constant and wrap it with its provenance."""
    if name not in _CERT_TABLE:
        raise KeyError(f"unknown certificate {name!r}; known: {sorted(_CERT_TABLE)}")
    kind, fn, args, formula, convention = _CERT_TABLE[name]
    vals = [inputs[a] for a in args if a in inputs]
    value = fn(*vals)
    T = float(inputs.get("T", inputs.get("t", math.inf)))
    return InequalityCertificate(kind=kind, constant=float(value), T=T, inputs=dict(inputs),
                                 formula=formula, anchor=name, convention=convention)


def formula_names() -> Sequence[str]:
    return tuple(_CERT_TABLE)
