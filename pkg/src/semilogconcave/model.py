"""Diffusion and potential specifications, plus curvature certification.

Arrays follow a batch convention: points are ``(n, d)``, drifts are
``(n, d)`` and diffusion matrices are ``(n, d, d)``.  A diffusion is

    dX_t = b(t, X_t) dt + sigma(t, X_t) dB_t.

For gradient diffusions ``b = -grad U / 2`` and ``sigma = Id``, so the
semi-convexity constant of the drift coincides with that of ``U``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .rng import child_generator

NEG_SENTINEL = -1.0e12
SIGMA_KINDS = ("identity", "constant", "diagonal", "general")


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class PotentialSpec:
    """A potential U with its gradient.

    ``U`` maps ``(n, d)`` to ``(n,)`` and ``grad_U`` maps ``(n, d)`` to
    ``(n, d)``.  ``dim`` is ``None`` when the family works in any dimension.
    """

    U: Callable[[np.ndarray], np.ndarray]
    grad_U: Callable[[np.ndarray], np.ndarray]
    family: str
    params: Mapping[str, float] = field(default_factory=dict)
    dim: int | None = None

    def value(self, x) -> np.ndarray:
        return self.U(np.atleast_2d(np.asarray(x, dtype=float)))

    def gradient(self, x) -> np.ndarray:
        return self.grad_U(np.atleast_2d(np.asarray(x, dtype=float)))

    @property
    def analytic_K(self) -> float | None:
        """Closed-form semi-convexity constant of U, when the family has one."""
        return _ANALYTIC_K.get(self.family, lambda p, d: None)(self.params, self.dim)

    def analytic_kappa(self, dim: int) -> Callable[[np.ndarray], np.ndarray] | None:
        """Closed-form kappa(r) for the gradient diffusion of U, if known."""
        maker = _ANALYTIC_KAPPA.get(self.family)
        return None if maker is None else maker(self.params, dim)


def _sqnorm(x: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", x, x)


def quadratic(lam: float) -> PotentialSpec:
    """U(x) = lam |x|^2.  Negative lam is allowed (repulsive interactions)."""
    lam = float(lam)
    return PotentialSpec(
        U=lambda x: lam * _sqnorm(x),
        grad_U=lambda x: 2.0 * lam * x,
        family="quadratic",
        params={"lam": lam},
    )


def zero_potential() -> PotentialSpec:
    return PotentialSpec(
        U=lambda x: np.zeros(x.shape[0]),
        grad_U=lambda x: np.zeros_like(x),
        family="zero",
        params={},
    )


def power(beta: float) -> PotentialSpec:
    """U(x) = |x|^(2 beta) with beta >= 1."""
    beta = float(beta)
    if beta < 1:
        raise ValueError("power family needs beta >= 1")

    def U(x):
        return _sqnorm(x) ** beta

    def grad_U(x):
        return (2.0 * beta * _sqnorm(x) ** (beta - 1.0))[:, None] * x

    return PotentialSpec(U=U, grad_U=grad_U, family="power", params={"beta": beta})


def double_well(a: float = 1.0, c: float = 1.0) -> PotentialSpec:
    """U(x) = a |x|^4 / 4 - c |x|^2 / 2."""
    a, c = float(a), float(c)
    if a <= 0:
        raise ValueError("double_well needs a > 0")

    def U(x):
        s = _sqnorm(x)
        return 0.25 * a * s * s - 0.5 * c * s

    def grad_U(x):
        return (a * _sqnorm(x) - c)[:, None] * x

    return PotentialSpec(U=U, grad_U=grad_U, family="double_well", params={"a": a, "c": c})


def convex_plus_bounded(K: float, M: float) -> PotentialSpec:
    """U = U1 + U2 with U1 = K|x|^2/2 and U2 = -(M/2) sqrt(1 + |x|^2).

    ``M`` bounds the oscillation sup |grad U2(x) - grad U2(y)|, which is the
    quantity that yields kappa(r) >= K - M/r.  Here |grad U2| <= M/2.
    """
    K, M = float(K), float(M)
    if K <= 0 or M < 0:
        raise ValueError("convex_plus_bounded needs K > 0 and M >= 0")

    def U(x):
        s = _sqnorm(x)
        return 0.5 * K * s - 0.5 * M * np.sqrt(1.0 + s)

    def grad_U(x):
        return (K - 0.5 * M / np.sqrt(1.0 + _sqnorm(x)))[:, None] * x

    return PotentialSpec(U=U, grad_U=grad_U, family="convex_plus_bounded", params={"K": K, "M": M})


def perturbed_quadratic(lam: float, delta: float) -> PotentialSpec:
    """U(x) = lam |x|^2 + delta * sum_i cos(x_i); the perturbation has a delta-Lipschitz gradient."""
    lam, delta = float(lam), float(delta)
    if delta < 0:
        raise ValueError("delta must be nonnegative")

    def U(x):
        return lam * _sqnorm(x) + delta * np.cos(x).sum(axis=1)

    def grad_U(x):
        return 2.0 * lam * x - delta * np.sin(x)

    return PotentialSpec(U=U, grad_U=grad_U, family="perturbed_quadratic", params={"lam": lam, "delta": delta})


def polynomial(terms: Sequence[tuple[Sequence[int], float]]) -> PotentialSpec:
    """Custom polynomial potential from a table of (multi-index, coefficient)."""
    if not terms:
        raise ValueError("polynomial potential needs at least one term")
    idx = np.array([list(t[0]) for t in terms], dtype=np.int64)
    coef = np.array([float(t[1]) for t in terms])
    if idx.ndim != 2 or (idx < 0).any():
        raise ValueError("multi-indices must be equal-length tuples of nonnegative integers")
    dim = idx.shape[1]

    def U(x):
        return (np.prod(x[:, None, :] ** idx[None], axis=2) * coef).sum(axis=1)

    def grad_U(x):
        out = np.zeros_like(x)
        for j in range(dim):
            lowered = idx.copy()
            factor = coef * idx[:, j]
            lowered[:, j] = np.maximum(idx[:, j] - 1, 0)
            out[:, j] = (np.prod(x[:, None, :] ** lowered[None], axis=2) * factor).sum(axis=1)
        return out

    params = {"terms": [(tuple(int(v) for v in i), float(c)) for i, c in zip(idx, coef)]}
    return PotentialSpec(U=U, grad_U=grad_U, family="polynomial", params=params, dim=dim)


_ANALYTIC_K: dict[str, Callable] = {
    "quadratic": lambda p, d: 2.0 * p["lam"],
    "zero": lambda p, d: 0.0,
    "power": lambda p, d: 2.0 if p["beta"] == 1.0 else 0.0,
    "double_well": lambda p, d: -p["c"],
    "convex_plus_bounded": lambda p, d: p["K"] - 0.5 * p["M"],
    "perturbed_quadratic": lambda p, d: 2.0 * p["lam"] - p["delta"],
}


def _kappa_power(p, dim):
    if dim != 1:
        return None
    beta = p["beta"]
    return lambda r: 2.0 * beta * 2.0 ** (2.0 - 2.0 * beta) * np.asarray(r, float) ** (2.0 * beta - 2.0)


_ANALYTIC_KAPPA: dict[str, Callable] = {
    "quadratic": lambda p, d: (lambda r: np.full(np.shape(r), 2.0 * p["lam"])),
    "zero": lambda p, d: (lambda r: np.zeros(np.shape(r))),
    "double_well": lambda p, d: (lambda r: p["a"] * np.asarray(r, float) ** 2 / 4.0 - p["c"]),
    "power": _kappa_power,
}

POTENTIAL_FAMILIES: dict[str, tuple[Callable[..., PotentialSpec], str]] = {
    "quadratic": (quadratic, "lam |x|^2 (params: lam)"),
    "zero": (zero_potential, "U = 0"),
    "power": (power, "|x|^(2 beta), beta >= 1 (params: beta)"),
    "double_well": (double_well, "a|x|^4/4 - c|x|^2/2 (params: a, c)"),
    "convex_plus_bounded": (convex_plus_bounded, "K|x|^2/2 - (M/2)sqrt(1+|x|^2) (params: K, M)"),
    "perturbed_quadratic": (perturbed_quadratic, "lam|x|^2 + delta sum cos(x_i) (params: lam, delta)"),
    "polynomial": (polynomial, "custom polynomial (params: terms = [{index=[...], coef=...}])"),
}


def make_potential(family: str, params: Mapping | None = None) -> PotentialSpec:
    """Build a potential from a family name and parameter map."""
    if family not in POTENTIAL_FAMILIES:
        raise KeyError(f"unknown potential family {family!r}; known: {sorted(POTENTIAL_FAMILIES)}")
    params = dict(params or {})
    if family == "polynomial":
        terms = params.get("terms", [])
        table = [(t["index"], t["coef"]) if isinstance(t, Mapping) else tuple(t) for t in terms]
        return polynomial(table)
    return POTENTIAL_FAMILIES[family][0](**params)


# ---------------------------------------------------------------------------
# diffusions


@dataclass
class DiffusionSpec:
    """dX = b(t, X) dt + sigma(t, X) dB in R^dim.

    ``sigma`` is only consulted when ``sigma_kind`` is not ``"identity"``.
    For ``"constant"`` it is a fixed ``(d, d)`` matrix, for ``"diagonal"`` a
    callable returning ``(n, d)`` diagonals, for ``"general"`` a callable
    returning ``(n, d, d)`` matrices.
    """

    dim: int
    drift: Callable[[float, np.ndarray], np.ndarray]
    sigma: object = None
    sigma_kind: str = "identity"
    time_dependent: bool = False
    metadata: dict = field(default_factory=dict)
    potential: PotentialSpec | None = None
    name: str = "custom"
    regularity: tuple[str, ...] = ()

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dimension must be a positive integer")
        if self.sigma_kind not in SIGMA_KINDS:
            raise ValueError(f"sigma_kind must be one of {SIGMA_KINDS}")
        if self.sigma_kind == "constant":
            self.sigma = np.array(self.sigma, dtype=float).reshape(self.dim, self.dim)
        elif self.sigma_kind in ("diagonal", "general") and not callable(self.sigma):
            raise ValueError(f"sigma_kind {self.sigma_kind!r} needs a callable sigma")

    def b(self, t: float, x) -> np.ndarray:
        return self.drift(t, np.atleast_2d(np.asarray(x, dtype=float)))

    def sigma_matrix(self, t: float, x) -> np.ndarray:
        """Diffusion matrices, shape ``(n, d, d)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n, d = x.shape
        if self.sigma_kind == "identity":
            return np.broadcast_to(np.eye(d), (n, d, d)).copy()
        if self.sigma_kind == "constant":
            return np.broadcast_to(self.sigma, (n, d, d)).copy()
        if self.sigma_kind == "diagonal":
            diag = np.asarray(self.sigma(t, x), dtype=float)
            out = np.zeros((n, d, d))
            out[:, np.arange(d), np.arange(d)] = diag
            return out
        return np.asarray(self.sigma(t, x), dtype=float)

    def apply_sigma(self, t: float, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """sigma(t, x) @ xi row by row, without forming identity matrices."""
        if self.sigma_kind == "identity":
            return xi
        if self.sigma_kind == "constant":
            return (self.sigma[None, :, :] * xi[:, None, :]).sum(axis=2)
        if self.sigma_kind == "diagonal":
            return np.asarray(self.sigma(t, x), dtype=float) * xi
        return (self.sigma_matrix(t, x) * xi[:, None, :]).sum(axis=2)

    @property
    def constant_sigma(self) -> bool:
        return self.sigma_kind in ("identity", "constant") and not self.time_dependent

    def check_finite(self, t: float, x) -> None:
        """Raise if b or sigma is not finite at the given points."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if not np.all(np.isfinite(self.b(t, x))):
            raise ValueError("drift returned a non-finite value")
        if self.sigma_kind != "identity" and not np.all(np.isfinite(self.sigma_matrix(t, x))):
            raise ValueError("diffusion matrix returned a non-finite value")


def gradient_diffusion(pot: PotentialSpec, dim: int, sigma_scale: float = 1.0) -> DiffusionSpec:
    """b = -grad U / 2 with sigma = sigma_scale * Id."""
    if pot.dim is not None and pot.dim != dim:
        raise ValueError(f"potential is defined in dimension {pot.dim}, not {dim}")
    grad = pot.grad_U

    def drift(t, x):
        return -0.5 * grad(x)

    meta = {"M": float(sigma_scale) ** 2}
    K = pot.analytic_K
    if K is not None:
        meta["K"] = K
    if pot.family == "power":
        from .constants import superconvex_Kbeta

        meta["beta"] = pot.params["beta"]
        meta["Kbeta"] = superconvex_Kbeta(pot.params["beta"], dim)
    if sigma_scale == 1.0:
        return DiffusionSpec(dim=dim, drift=drift, metadata=meta, potential=pot, name=f"gradient:{pot.family}")
    meta["N_inv"] = 1.0 / float(sigma_scale) ** 2
    meta["Lambda"] = 0.0
    return DiffusionSpec(
        dim=dim,
        drift=drift,
        sigma=float(sigma_scale) * np.eye(dim),
        sigma_kind="constant",
        metadata=meta,
        potential=pot,
        name=f"gradient:{pot.family}",
    )


def ou_spec(K: float, dim: int = 1) -> DiffusionSpec:
    """b = -(K/2) x, sigma = Id; the potential is (K/2)|x|^2."""
    return gradient_diffusion(quadratic(0.5 * K), dim)


def brownian_spec(dim: int = 1) -> DiffusionSpec:
    return gradient_diffusion(zero_potential(), dim)


def time_dependent_gradient(pot: PotentialSpec, Kprime: Callable[[float], float], dim: int) -> DiffusionSpec:
    """b(t, x) = -(grad U(x) + K'(t) x) / 2 with sigma = Id."""
    grad = pot.grad_U

    def drift(t, x):
        return -0.5 * (grad(x) + float(Kprime(t)) * x)

    return DiffusionSpec(
        dim=dim,
        drift=drift,
        time_dependent=True,
        metadata={"M": 1.0},
        potential=pot,
        name=f"time-dependent:{pot.family}",
    )


def builtin_kinetic(V: PotentialSpec, dim: int = 1) -> DiffusionSpec:
    """Kinetic system on (x, v) in R^(2 dim): dx = v dt, dv = -(grad V(x) + v) dt + dB."""
    grad = V.grad_U
    d = int(dim)

    def drift(t, z):
        x, v = z[:, :d], z[:, d:]
        return np.concatenate([v, -grad(x) - v], axis=1)

    diag = np.concatenate([np.zeros(d), np.ones(d)])

    def sigma(t, z):
        return np.broadcast_to(diag, z.shape)

    return DiffusionSpec(
        dim=2 * d,
        drift=drift,
        sigma=sigma,
        sigma_kind="diagonal",
        metadata={"kinetic": True, "position_dim": d},
        potential=V,
        name=f"kinetic:{V.family}",
        regularity=("hypoelliptic-unverified",),
    )


@dataclass
class McKeanSpec:
    """Interacting particle drift -grad V(X_i)/2 - (1/N) sum_j grad W(X_i - X_j)/2, sigma = Id."""

    V: PotentialSpec
    W: PotentialSpec
    dim: int
    metadata: dict = field(default_factory=dict)

    def interaction(self, X: np.ndarray) -> np.ndarray:
        """(1/N) sum_j grad W(X_i - X_j) for every particle i."""
        fam = self.W.family
        if fam == "zero":
            return np.zeros_like(X)
        if fam == "quadratic":
            return 2.0 * self.W.params["lam"] * (X - X.mean(axis=0))
        n = X.shape[0]
        out = np.zeros_like(X)
        chunk = max(1, 2_000_000 // max(n * X.shape[1], 1))
        for start in range(0, n, chunk):
            diff = X[start : start + chunk, None, :] - X[None, :, :]
            g = self.W.grad_U(diff.reshape(-1, X.shape[1])).reshape(diff.shape)
            out[start : start + chunk] = g.mean(axis=1)
        return out

    def particle_drift(self, t: float, X: np.ndarray) -> np.ndarray:
        return -0.5 * self.V.grad_U(X) - 0.5 * self.interaction(X)


def builtin_mckean(V: PotentialSpec, W: PotentialSpec, dim: int = 1, seed: int = 0) -> McKeanSpec:
    """Mean-field particle specification; W must be even."""
    rng = child_generator(seed, 11)
    probes = rng.normal(scale=2.0, size=(256, dim))
    w_plus, w_minus = W.value(probes), W.value(-probes)
    if not np.allclose(w_plus, w_minus, rtol=1e-12, atol=1e-12):
        raise ValueError("interaction potential W is not even")
    meta = {}
    K_V, K_W = V.analytic_K, W.analytic_K
    if K_V is not None and K_W is not None:
        from .constants import mckean_rate

        meta.update(K_V=K_V, K_W=K_W, rate=mckean_rate(K_V, K_W))
    return McKeanSpec(V=V, W=W, dim=dim, metadata=meta)


# ---------------------------------------------------------------------------
# curvature certification


@dataclass(frozen=True)
class SamplingPlan:
    """Random pair sampling with optional local refinement.

    Pairs are drawn as ``c +/- r u / 2`` with centers uniform in the cube
    ``[-center_scale, center_scale]^d``, directions uniform on the sphere and
    radii log-uniform over ``radius_range``.
    """

    n_pairs: int = 100_000
    radius_range: tuple[float, float] = (1e-3, 1e2)
    center_scale: float = 3.0
    refine_steps: int = 50
    seed: int = 0
    mode: str = "auto"  # auto | sampled | analytic

    def __post_init__(self):
        if self.n_pairs < 1:
            raise ValueError("sampling plan is empty")
        lo, hi = self.radius_range
        if not 0 < lo <= hi:
            raise ValueError("radius range must satisfy 0 < lo <= hi")
        if self.mode not in ("auto", "sampled", "analytic"):
            raise ValueError("mode must be auto, sampled or analytic")


@dataclass
class CurvatureReport:
    K_semiconvexity: float
    kappa_radii: np.ndarray
    kappa_values: np.ndarray
    kappa_infinity: float
    certification_mode: str
    Kbeta: tuple[float, float] | None = None
    diverged: bool = False
    is_upper_bound: bool = False

    def __post_init__(self):
        r = np.asarray(self.kappa_radii, dtype=float)
        if r.size and (np.any(r <= 0) or np.any(np.diff(r) <= 0)):
            raise ValueError("kappa radii must be positive and strictly increasing")

    def kappa(self, r) -> np.ndarray:
        """Piecewise-linear interpolation of the profile, flat outside the grid."""
        return np.interp(r, self.kappa_radii, self.kappa_values)


@dataclass(frozen=True)
class SemiconvexityResult:
    K: float
    mode: str
    is_upper_bound: bool
    diverged: bool = False
    worst_pair: tuple | None = None

    def __float__(self):
        return float(self.K)


def _pair_ratio(spec: DiffusionSpec, x: np.ndarray, y: np.ndarray, t: float = 0.0) -> np.ndarray:
    """-(|sigma(x)-sigma(y)|_HS^2 + 2<b(x)-b(y), x-y>) / |x-y|^2 for each row."""
    bx, by = spec.b(t, x), spec.b(t, y)
    if not (np.all(np.isfinite(bx)) and np.all(np.isfinite(by))):
        raise ValueError("drift returned a non-finite value at a probe point")
    dxy = x - y
    num = 2.0 * np.einsum("ij,ij->i", bx - by, dxy)
    if not spec.constant_sigma:
        ds = spec.sigma_matrix(t, x) - spec.sigma_matrix(t, y)
        num = num + np.einsum("ijk,ijk->i", ds, ds)
    return -num / _sqnorm(dxy)


def _random_pairs(rng, n, dim, radius_range, center_scale, radius=None):
    c = rng.uniform(-center_scale, center_scale, size=(n, dim))
    u = rng.normal(size=(n, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    if radius is None:
        lo, hi = radius_range
        r = np.exp(rng.uniform(math.log(lo), math.log(hi), size=n))
    else:
        r = np.full(n, float(radius))
    half = 0.5 * r[:, None] * u
    return c + half, c - half


def _coordinate_descent(fun, z0: np.ndarray, f0: float, sweeps: int, step0: float):
    """Cyclic one-dimensional minimisation with an adaptive step.

    Returns the best point, its value, and the best value after each sweep.
    """
    z, best = z0.copy(), float(f0)
    step = step0
    history = []
    for _ in range(sweeps):
        improved = False
        for j in range(z.size):
            v0 = z[j]

            def line(v):
                z[j] = v
                out = fun(z)
                z[j] = v0
                return out if np.isfinite(out) else np.inf

            res = minimize_scalar(line, bounds=(v0 - step, v0 + step), method="bounded",
                                  options={"xatol": 1e-14 * (1.0 + abs(v0))})
            if res.fun < best:
                best = float(res.fun)
                z[j] = res.x
                improved = True
        step = step * 2.0 if improved else step * 0.5
        history.append(best)
    return z, best, history


def _diverging(history: list[float]) -> bool:
    if len(history) < 4 or history[-1] > -1e6:
        return False
    tail = history[-4:]
    return all(b < 2.0 * a for a, b in zip(tail, tail[1:]) if a < 0)


def semiconvexity_K(spec: DiffusionSpec, plan: SamplingPlan | None = None) -> SemiconvexityResult:
    """Semi-convexity constant K of a diffusion.

    Analytic families return their closed form unless ``plan.mode`` is
    ``"sampled"``.  A sampled value is an infimum over the probed pairs and
    therefore an upper bound on the true K.
    """
    plan = plan or SamplingPlan()
    analytic = spec.metadata.get("K") if spec.potential is not None and spec.constant_sigma else None
    if plan.mode == "analytic" and analytic is None:
        raise ValueError("analytic mode is only available for built-in families with a known K")
    if plan.mode in ("auto", "analytic") and analytic is not None:
        return SemiconvexityResult(K=float(analytic), mode="analytic", is_upper_bound=False)

    d = spec.dim
    rng = child_generator(plan.seed, 21)
    n_a = plan.n_pairs // 2
    xa, ya = _random_pairs(rng, n_a, d, plan.radius_range, plan.center_scale)
    xb = rng.uniform(-plan.center_scale, plan.center_scale, size=(plan.n_pairs - n_a, d))
    yb = rng.uniform(-plan.center_scale, plan.center_scale, size=(plan.n_pairs - n_a, d))
    x, y = np.vstack([xa, xb]), np.vstack([ya, yb])
    keep = _sqnorm(x - y) > 0
    x, y = x[keep], y[keep]
    ratios = _pair_ratio(spec, x, y)
    i = int(np.argmin(ratios))
    best = float(ratios[i])
    z0 = np.concatenate([x[i], y[i]])

    def fun(z):
        a, b = z[:d][None], z[d:][None]
        if not np.any(a != b):
            return np.inf
        try:
            return float(_pair_ratio(spec, a, b)[0])
        except (ValueError, FloatingPointError):
            return np.inf

    diverged = False
    if plan.refine_steps > 0:
        with np.errstate(all="ignore"):
            step0 = max(float(np.linalg.norm(x[i] - y[i])), 1e-3)
            z, best, history = _coordinate_descent(fun, z0, best, plan.refine_steps, step0)
        diverged = _diverging(history)
        z0 = z
    if diverged or best < NEG_SENTINEL:
        return SemiconvexityResult(K=NEG_SENTINEL, mode="sampled", is_upper_bound=True, diverged=True,
                                   worst_pair=(z0[:d].copy(), z0[d:].copy()))
    return SemiconvexityResult(K=best, mode="sampled", is_upper_bound=True, diverged=False,
                               worst_pair=(z0[:d].copy(), z0[d:].copy()))


def kappa_profile(spec: DiffusionSpec, radii=None, plan: SamplingPlan | None = None,
                  pairs_per_radius: int | None = None) -> CurvatureReport:
    """kappa(r): infimum of the normalised dissipativity over pairs at distance exactly r."""
    plan = plan or SamplingPlan()
    if radii is None:
        radii = np.geomspace(plan.radius_range[0], plan.radius_range[1], 41)
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise ValueError("radii must be a non-empty 1-d grid")
    if np.any(radii <= 0):
        raise ValueError("kappa radii must be positive")
    if np.any(np.diff(radii) <= 0):
        raise ValueError("kappa radii must be strictly increasing")
    if not np.all(np.isfinite(radii)):
        raise ValueError("kappa radii must be finite")

    d = spec.dim
    Kbeta = None
    if "beta" in spec.metadata and "Kbeta" in spec.metadata:
        Kbeta = (spec.metadata["beta"], spec.metadata["Kbeta"])
    analytic = None
    if spec.potential is not None and spec.constant_sigma and plan.mode != "sampled":
        analytic = spec.potential.analytic_kappa(d)
    if plan.mode == "analytic" and analytic is None:
        raise ValueError("analytic mode is only available for built-in families with known kappa")

    if analytic is not None:
        vals = np.asarray(analytic(radii), dtype=float)
        K = spec.metadata.get("K", float(vals.min()))
        return CurvatureReport(K_semiconvexity=float(K), kappa_radii=radii, kappa_values=vals,
                               kappa_infinity=float(vals[-1]), certification_mode="analytic", Kbeta=Kbeta)

    n_per = pairs_per_radius or max(1000, plan.n_pairs // radii.size)
    rng = child_generator(plan.seed, 31)
    vals = np.empty_like(radii)
    for k, r in enumerate(radii):
        x, y = _random_pairs(rng, n_per, d, plan.radius_range, plan.center_scale, radius=r)
        ratios = _pair_ratio(spec, x, y)
        i = int(np.argmin(ratios))
        best = float(ratios[i])
        if plan.refine_steps > 0:
            c0 = 0.5 * (x[i] + y[i])
            u0 = (x[i] - y[i]) / r

            def fun(z, r=r):
                u = z[d:]
                nu = np.linalg.norm(u)
                if nu == 0:
                    return np.inf
                half = 0.5 * r * u / nu
                return float(_pair_ratio(spec, (z[:d] + half)[None], (z[:d] - half)[None])[0])

            with np.errstate(all="ignore"):
                _, best, _ = _coordinate_descent(fun, np.concatenate([c0, u0]), best,
                                                 plan.refine_steps, max(0.1 * r, 0.1))
        vals[k] = best
    n_tail = max(1, radii.size // 5)
    return CurvatureReport(
        K_semiconvexity=float(vals.min()),
        kappa_radii=radii,
        kappa_values=vals,
        kappa_infinity=float(vals[-n_tail:].min()),
        certification_mode="sampled",
        Kbeta=Kbeta,
        is_upper_bound=True,
    )


@dataclass(frozen=True)
class HphiResult:
    holds: bool
    min_ratio: float
    n_violations: int
    n_pairs: int

    def __iter__(self):
        return iter((self.holds, self.min_ratio))


def certify_Hphi(pot: PotentialSpec, beta: float, K: float, dim: int = 1,
                 plan: SamplingPlan | None = None, chunk: int = 100_000) -> HphiResult:
    """Probe <grad U(x) - grad U(y), x - y> >= K |x - y|^(2 beta).

    Centers and radii are both log-uniform over ``plan.radius_range`` so that
    near-origin and large-radius pairs are represented.
    """
    if beta < 1:
        raise ValueError("beta must be >= 1")
    plan = plan or SamplingPlan(n_pairs=1_000_000)
    rng = child_generator(plan.seed, 41)
    lo, hi = math.log(plan.radius_range[0]), math.log(plan.radius_range[1])
    min_ratio, n_bad, done = np.inf, 0, 0
    floor = K - 1e-12 * abs(K)  # rounding slack at equality pairs
    while done < plan.n_pairs:
        n = min(chunk, plan.n_pairs - done)
        cdir = rng.normal(size=(n, dim))
        cdir /= np.linalg.norm(cdir, axis=1, keepdims=True)
        c = cdir * np.exp(rng.uniform(lo, hi, size=(n, 1))) * rng.uniform(0, 1, size=(n, 1))
        u = rng.normal(size=(n, dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = np.exp(rng.uniform(lo, hi, size=(n, 1)))
        x, y = c + 0.5 * r * u, c - 0.5 * r * u
        dxy = x - y
        num = np.einsum("ij,ij->i", pot.gradient(x) - pot.gradient(y), dxy)
        ratio = num / _sqnorm(dxy) ** beta
        min_ratio = min(min_ratio, float(ratio.min()))
        n_bad += int(np.count_nonzero(ratio < floor))
        done += n
    return HphiResult(holds=n_bad == 0, min_ratio=min_ratio, n_violations=n_bad,
                      n_pairs=plan.n_pairs)


def probe_sigma_bounds(spec: DiffusionSpec, points: np.ndarray) -> dict:
    """M = sup|sigma u|^2, N_inv = sup|sigma^{-1} u|^2, Lambda = sup|(sigma(x)-sigma(x'))u|^2 over probes."""
    S = spec.sigma_matrix(0.0, points)
    sv = np.linalg.svd(S, compute_uv=False)
    M = float(np.max(sv[:, 0]) ** 2)
    smin = float(np.min(sv[:, -1]))
    N_inv = np.inf if smin == 0 else 1.0 / smin**2
    diffs = S[:, None] - S[None, :]
    Lam = float(np.max(np.linalg.norm(diffs.reshape(-1, spec.dim, spec.dim), ord=2, axis=(1, 2))) ** 2)
    return {"M": M, "N_inv": N_inv, "Lambda": Lam, "positivity": bool(2.0 / N_inv - Lam > 0)}
