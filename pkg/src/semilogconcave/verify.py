"""Monte Carlo checks of the contraction and functional-inequality bounds.

Every check returns a :class:`CheckResult`.  The default rule for an upper
bound is ``empirical <= bound + k * stderr`` with ``k = 3`` and bootstrap
standard errors (``B = 200`` resamples).  Lower-bound checks (fitted rates)
use ``empirical >= bound - k * stderr`` and are marked with ``sense = "ge"``.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr, xlogy
from scipy.stats import linregress

from . import constants as C
from .model import (DiffusionSpec, McKeanSpec, PotentialSpec, SamplingPlan, builtin_kinetic,
                    kappa_profile)
from .rng import child_generator
from .sde import (IntegratorConfig, ParticleCloud, couple_reflection, couple_reflection_general,
                  couple_synchronous, simulate, simulate_mckean)
from .transport import ASSIGNMENT_BUDGET, wasserstein

DEFAULT_K = 3.0
DEFAULT_B = 200


@dataclass
class CheckResult:
    name: str
    bound: float
    empirical: float
    stderr: float
    margin: float
    passed: bool | None
    k: float = DEFAULT_K
    sense: str = "le"
    asserted: bool = True
    provenance: dict = field(default_factory=dict)
    series: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    notes: str = ""

    def to_dict(self) -> dict:
        return _jsonable(dataclasses.asdict(self))

    def write_series(self, path) -> None:
        """CSV with columns t, empirical, bound, stderr, passed."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "empirical", "bound", "stderr", "passed"])
            for row in self.series:
                w.writerow([repr(float(row.get("t", math.nan))), repr(float(row["empirical"])),
                            repr(float(row["bound"])), repr(float(row["stderr"])), row.get("passed")])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if callable(obj):
        return getattr(obj, "__name__", repr(obj))
    return obj


def _floor(se: float, scale: float, n: int) -> float:
    """Keep stderr strictly positive for n > 1 (rounding-level floor)."""
    if n <= 1:
        return float(se)
    return max(float(se), 8.0 * np.finfo(float).eps * max(1.0, abs(scale)))


def _judge(emp: float, bound: float, se: float, k: float, sense: str = "le") -> tuple[bool, float]:
    if sense == "le":
        margin = (bound - emp) / se if se > 0 else (math.inf if emp <= bound else -math.inf)
        return bool(emp <= bound + k * se), float(margin)
    margin = (emp - bound) / se if se > 0 else (math.inf if emp >= bound else -math.inf)
    return bool(emp >= bound - k * se), float(margin)


def bootstrap_stderr(stat: Callable[[np.ndarray], float], n: int, B: int = DEFAULT_B, seed: int = 0) -> float:
    """Standard deviation of ``stat(idx)`` over ``B`` resamples of ``range(n)``."""
    if n <= 1:
        return 0.0
    rng = child_generator(seed, 77)
    vals = np.array([stat(rng.integers(0, n, size=n)) for _ in range(B)])
    return float(np.std(vals, ddof=1))


def _summarize(name, rows, k, sense="le", **kw) -> CheckResult:
    for row in rows:
        row["passed"], row["margin"] = _judge(row["empirical"], row["bound"], row["stderr"], k, sense)
    worst = min(rows, key=lambda r: r["margin"])
    return CheckResult(name=name, bound=worst["bound"], empirical=worst["empirical"], stderr=worst["stderr"],
                       margin=worst["margin"], passed=all(r["passed"] for r in rows), k=k, sense=sense,
                       series=rows, **kw)


def _provenance(spec, cfg: IntegratorConfig | None, **extra) -> dict:
    out = {}
    if spec is not None:
        out["spec"] = getattr(spec, "name", type(spec).__name__)
        meta = getattr(spec, "metadata", {})
        out["metadata"] = {k: v for k, v in meta.items()}
    if cfg is not None:
        out.update(seed=cfg.seed, h=cfg.h, N=cfg.N, T=cfg.T, scheme=cfg.scheme)
    out.update(extra)
    return _jsonable(out)


def _with_T(cfg: IntegratorConfig, T: float) -> IntegratorConfig:
    return dataclasses.replace(cfg, T=float(T))


# ---------------------------------------------------------------------------
# test-function library


@dataclass(frozen=True)
class TestFunction:
    name: str
    f: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]

    __test__ = False  # not a pytest class


def _directions(dim: int, n: int) -> np.ndarray:
    u = child_generator(2024, dim).normal(size=(n, dim))
    u[0] = np.eye(dim)[0]
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def default_test_functions(dim: int) -> list[TestFunction]:
    """Twenty fixed functions: linear forms, squared forms, sines and cosines."""
    U = _directions(dim, 5)
    omegas = (0.5, 1.0, 1.5, 2.0, 3.0)
    out = []
    for i, u in enumerate(U):
        out.append(TestFunction(f"linear{i}", lambda x, u=u: x @ u, lambda x, u=u: np.broadcast_to(u, x.shape)))
    for i, u in enumerate(U):
        out.append(TestFunction(f"square{i}", lambda x, u=u: (x @ u) ** 2, lambda x, u=u: 2.0 * (x @ u)[:, None] * u))
    for i, (u, w) in enumerate(zip(U, omegas)):
        out.append(TestFunction(f"sin{i}", lambda x, u=u, w=w: np.sin(w * (x @ u)),
                                lambda x, u=u, w=w: (w * np.cos(w * (x @ u)))[:, None] * u))
    for i, (u, w) in enumerate(zip(U, omegas)):
        out.append(TestFunction(f"cos{i}", lambda x, u=u, w=w: np.cos(w * (x @ u)),
                                lambda x, u=u, w=w: (-w * np.sin(w * (x @ u)))[:, None] * u))
    return out


def constant_function(value: float = 1.0) -> TestFunction:
    return TestFunction("constant", lambda x: np.full(x.shape[0], value), lambda x: np.zeros_like(x))


def exponential_tilts(dim: int, slopes: Sequence[float] = (0.5, 1.0, 2.0)) -> list[TestFunction]:
    """f(x) = exp(a x_1 / 2)."""
    e = np.eye(dim)[0]
    return [TestFunction(f"tilt{a:g}", lambda x, a=a: np.exp(0.5 * a * x[:, 0]),
                         lambda x, a=a: (0.5 * a * np.exp(0.5 * a * x[:, 0]))[:, None] * e) for a in slopes]


def _points(cloud) -> np.ndarray:
    pts = cloud.points if isinstance(cloud, ParticleCloud) else np.asarray(cloud, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise ValueError("empty cloud")
    return pts


def _functional_check(name, cloud, C_const, testfns, functional, k, B, seed, note) -> CheckResult:
    X = _points(cloud)
    n = X.shape[0]
    testfns = default_test_functions(X.shape[1]) if testfns is None else list(testfns)
    rows = []
    for j, tf in enumerate(testfns):
        fx = np.asarray(tf.f(X), dtype=float)
        g2 = np.sum(np.asarray(tf.grad(X), dtype=float) ** 2, axis=1)

        def diff(idx, fx=fx, g2=g2):
            return functional(fx[idx]) - C_const * float(np.mean(g2[idx]))

        emp = functional(fx)
        bound = C_const * float(np.mean(g2))
        se = _floor(bootstrap_stderr(diff, n, B, seed + j), max(abs(emp), abs(bound)), n)
        rows.append({"function": tf.name, "empirical": emp, "bound": bound, "stderr": se})
    prov = _provenance(None, None, N=n, C=C_const, seed=seed, B=B, t=getattr(cloud, "t", None))
    res = _summarize(name, rows, k, provenance=prov, notes=note)
    res.details["worst_function"] = min(rows, key=lambda r: r["margin"])["function"]
    return res


def _variance(fx: np.ndarray) -> float:
    return float(np.var(fx, ddof=1)) if fx.size > 1 else 0.0


def _entropy_jackknife(g: np.ndarray) -> float:
    """Ent(g) = E[g log g] - E g log E g with a jackknife correction of the second term."""
    n = g.size
    m = float(np.mean(g))
    first = float(np.mean(xlogy(g, g)))
    if n < 2:
        return first - xlogy(m, m)
    loo = (n * m - g) / (n - 1)
    second = n * xlogy(m, m) - (n - 1) * float(np.mean(xlogy(loo, loo)))
    return first - float(second)


_NECESSARY = "necessary-condition check: a finite family of test functions cannot certify the inequality"


def check_poincare(cloud, C_P: float, testfns=None, k: float = DEFAULT_K, B: int = DEFAULT_B,
                   seed: int = 0) -> CheckResult:
    """Var(f) <= C_P mean |grad f|^2 for every test function."""
    return _functional_check("poincare", cloud, C_P, testfns, _variance, k, B, seed, _NECESSARY)


def check_logsobolev(cloud, C_LS: float, testfns=None, k: float = DEFAULT_K, B: int = DEFAULT_B,
                     seed: int = 0) -> CheckResult:
    """Ent(f^2) <= C_LS mean |grad f|^2 for every test function."""
    return _functional_check("logsobolev", cloud, C_LS, testfns, lambda fx: _entropy_jackknife(fx * fx),
                             k, B, seed, _NECESSARY)


# ---------------------------------------------------------------------------
# contraction checks


def _require_K(spec: DiffusionSpec) -> float:
    if "K" not in spec.metadata:
        raise ValueError("spec metadata must declare K")
    return float(spec.metadata["K"])


def check_w_contraction(spec: DiffusionSpec, x, y, times, cfg: IntegratorConfig, p: float = 2.0,
                        k: float = DEFAULT_K, B: int = DEFAULT_B) -> CheckResult:
    """W_p(P_t(x,.), P_t(y,.)) / |x - y| against e^{-K_p t / p} under synchronous coupling.

    ``K_p`` comes from ``metadata["K_m"][p]`` when declared; for a constant
    diffusion matrix it defaults to p K / 2.
    """
    K = _require_K(spec)
    K_m = spec.metadata.get("K_m", {})
    if p in K_m:
        K_p = float(K_m[p])
    elif spec.constant_sigma:
        K_p = p * K / 2.0
    else:
        raise ValueError(f"metadata must declare K_m for p = {p} when sigma is not constant")
    x, y = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float))
    dist = float(np.linalg.norm(x - y))
    batch = couple_synchronous(spec, x, y, cfg, times)
    rows = []
    for i, t in enumerate(batch.times):
        X, Y = batch.clouds(i)
        n = X.shape[0]
        emp = wasserstein(X, Y, p).value / dist

        def stat(idx, X=X, Y=Y):
            return wasserstein(X[idx], Y[idx], p).value / dist

        se = _floor(bootstrap_stderr(stat, n, B, cfg.seed + i), emp, n)
        rows.append({"t": float(t), "empirical": emp, "bound": math.exp(-K_p * t / p), "stderr": se})
    prov = _provenance(spec, cfg, x=x, y=y, times=batch.times, p=p, k=k, B=B)
    res = _summarize("w_contraction", rows, k, provenance=prov, notes="ratio W_p(t)/|x-y|, standard convention")
    res.details.update(attrition=batch.attrition, K_p=K_p, snapped=batch.snapped)
    return res


def check_polynomial_decay(spec: DiffusionSpec, x, y, times, cfg: IntegratorConfig, slack: float | None = None) -> CheckResult:
    """Pathwise |X_t - Y_t|^2 <= dist^2 (1 + K_beta (beta-1) dist^(2(beta-1)) t)^(-1/(beta-1)) for every pair.

    ``x`` and ``y`` may be single points or ``(N, d)`` arrays of starting
    pairs.  The default slack multiplies the bound by ``1 + 10 h``.
    """
    beta, Kb = spec.metadata.get("beta"), spec.metadata.get("Kbeta")
    if beta is None or Kb is None or beta <= 1:
        raise ValueError("spec metadata must declare beta > 1 and Kbeta")
    slack = 10.0 * cfg.h if slack is None else slack
    batch = couple_synchronous(spec, x, y, cfg, times)
    eta = batch.distances() ** 2
    dist0 = np.sqrt(eta[:, 0]) if batch.times[0] == 0 else np.linalg.norm(
        np.broadcast_to(np.asarray(x, float), batch.x[:, 0].shape) - np.broadcast_to(np.asarray(y, float), batch.x[:, 0].shape), axis=1)
    rows = []
    for i, t in enumerate(batch.times):
        bounds = np.array([C.decay_bounds("polynomial-superconvex", beta=beta, K=Kb, t=float(t), dist=float(d0))
                           for d0 in dist0])
        ratio = np.where(bounds > 0, eta[:, i] / np.where(bounds > 0, bounds, 1.0), 0.0)
        ok = ~batch.blown_up
        worst = float(np.max(ratio[ok])) if np.any(ok) else math.nan
        rows.append({"t": float(t), "empirical": worst, "bound": 1.0 + slack, "stderr": 0.0})
    prov = _provenance(spec, cfg, times=batch.times, slack=slack)
    res = _summarize("polynomial_decay", rows, 0.0, provenance=prov,
                     notes="pathwise worst ratio of |X_t-Y_t|^2 to the polynomial bound; deterministic, no stderr")
    res.details["attrition"] = batch.attrition
    return res


def _finite_difference_gradient(f, x: np.ndarray, delta: float) -> np.ndarray:
    out = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = delta
        out[i] = (float(f((x + e)[None])[0]) - float(f((x - e)[None])[0])) / (2 * delta)
    return out


def check_gradient_commutation(spec: DiffusionSpec, f: Callable, grad_f: Callable, x, t: float,
                               cfg: IntegratorConfig, form: str = "strong", m: float | None = None,
                               k: float = DEFAULT_K, B: int = DEFAULT_B) -> CheckResult:
    """|grad P_t f(x)| against the strong, squared or interpolated commutation bound.

    The gradient is a central difference with step 1e-4 (1 + |x|) of Monte
    Carlo means that share their increments (common random numbers).
    """
    K = _require_K(spec)
    if form not in ("strong", "squared", "interpolated"):
        raise ValueError("form must be strong, squared or interpolated")
    if form == "interpolated" and (m is None or m < 2):
        raise ValueError("interpolated form needs m >= 2")
    x = np.atleast_1d(np.asarray(x, float))
    d = x.size
    delta = 1e-4 * (1.0 + float(np.linalg.norm(x)))
    if t == 0:
        left = float(np.linalg.norm(_finite_difference_gradient(f, x, delta)))
        right = float(np.linalg.norm(grad_f(x[None])[0]))
        rows = [{"t": 0.0, "empirical": left, "bound": right * (1 + 1e-6), "stderr": 0.0}]
        return _summarize("gradient_commutation", rows, k, provenance=_provenance(spec, None, x=x, t=0.0, form=form))
    run = _with_T(cfg, t)
    ends_p, ends_m = [], []
    for i in range(d):
        e = np.zeros(d)
        e[i] = delta
        ends_p.append(simulate(spec, x + e, run, [t]).paths[:, -1, :])
        ends_m.append(simulate(spec, x - e, run, [t]).paths[:, -1, :])
    base = simulate(spec, x, run, [t]).paths[:, -1, :]
    ok = np.isfinite(base).all(1)
    for a, b in zip(ends_p, ends_m):
        ok &= np.isfinite(a).all(1) & np.isfinite(b).all(1)
    fd = np.stack([(f(a[ok]) - f(b[ok])) / (2 * delta) for a, b in zip(ends_p, ends_m)], axis=1)
    gnorm = np.linalg.norm(grad_f(base[ok]), axis=1)
    n = fd.shape[0]

    def sides(idx):
        left = float(np.linalg.norm(fd[idx].mean(axis=0)))
        if form == "strong":
            right = math.exp(-K * t / 2) * float(np.mean(gnorm[idx]))
        elif form == "squared":
            right = math.exp(-K * t / 2) * math.sqrt(float(np.mean(gnorm[idx] ** 2)))
        else:
            q = m / (m - 1.0)
            right = (math.exp(-K * t / (m - 1.0)) * float(np.mean(gnorm[idx] ** q))) ** (1.0 / q)
        return left, right

    left, right = sides(np.arange(n))
    se = _floor(bootstrap_stderr(lambda idx: float(np.subtract(*sides(idx))), n, B, cfg.seed), right, n)
    rows = [{"t": float(t), "empirical": left, "bound": right, "stderr": se}]
    prov = _provenance(spec, run, x=x, t=t, form=form, m=m, delta=delta, k=k, B=B)
    return _summarize("gradient_commutation", rows, k, provenance=prov,
                      notes="left = |grad P_t f(x)| by common-random-number differences")


def check_eberle_w1(spec: DiffusionSpec, x, y, times, cfg: IntegratorConfig, rate: C.EberleRate | None = None,
                    radii=None, plan: SamplingPlan | None = None, k: float = DEFAULT_K,
                    B: int = DEFAULT_B) -> CheckResult:
    """W_1 between reflection-coupled marginals against (2/phi_min) e^{-lam t} |x - y|."""
    if rate is None:
        report = kappa_profile(spec, radii, plan)
        if not report.kappa_infinity > 0:
            raise C.NoRateError("kappa at infinity is not positive")
        rate = C.eberle_rate(report)
    x, y = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float))
    dist = float(np.linalg.norm(x - y))
    if spec.sigma_kind == "identity":
        batch = couple_reflection(spec, x, y, cfg, times)
    else:
        batch = couple_reflection_general(spec, x, y, cfg, times)
    rows = []
    for i, t in enumerate(batch.times):
        X, Y = batch.clouds(i)
        n = X.shape[0]
        use_pairs = X.shape[1] > 1 and n > ASSIGNMENT_BUDGET

        def stat(idx, X=X, Y=Y):
            if use_pairs:
                return float(np.mean(np.linalg.norm(X[idx] - Y[idx], axis=1)))
            return wasserstein(X[idx], Y[idx], 1).value

        emp = stat(np.arange(n))
        se = _floor(bootstrap_stderr(stat, n, B, cfg.seed + i), emp, n)
        rows.append({"t": float(t), "empirical": emp, "bound": rate.w1_bound(dist, float(t)), "stderr": se})
    prov = _provenance(spec, cfg, x=x, y=y, times=batch.times, k=k, B=B)
    res = _summarize("eberle_w1", rows, k, provenance=prov)
    res.details.update(R0=rate.R0, R1=rate.R1, phi_min=rate.phi_min, lam=rate.lam, attrition=batch.attrition)
    return res


def _tail_stderr(p: float, n: int) -> float:
    return max(math.sqrt(p * (1.0 - p) / n), 1.0 / n) if n > 1 else 0.0


def check_coupling_time_tail(spec: DiffusionSpec, x, y, times, cfg: IntegratorConfig, reference: str = "brownian",
                             lam: float | None = None, k: float = DEFAULT_K) -> CheckResult:
    """P(T_c > t) under reflection coupling against r/sqrt(2 pi t) or the OU hitting bound."""
    x, y = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float))
    r = float(np.linalg.norm(x - y))
    if reference == "ou":
        lam = float(spec.metadata.get("K")) if lam is None else float(lam)
        if not lam > 0:
            raise ValueError("the OU reference needs lam > 0")
    elif reference != "brownian":
        raise ValueError("reference must be 'brownian' or 'ou'")
    batch = couple_reflection(spec, x, y, cfg, times)
    tc = batch.coupling_time[~batch.blown_up]
    n = tc.size
    rows = []
    for t in batch.times:
        if t <= 0:
            continue
        p = float(np.mean(tc > t))
        if reference == "brownian":
            bound = r / math.sqrt(2 * math.pi * t)
            exact = 2.0 * float(ndtr(r / (2 * math.sqrt(t)))) - 1.0
        else:
            bound = C.decay_bounds("ou-hitting", lam=lam, t=float(t), r=r)
            tau = -math.expm1(-lam * t) / lam
            exact = 2.0 * float(ndtr(r / 2.0 * math.exp(-lam * t / 2) / math.sqrt(tau))) - 1.0
        rows.append({"t": float(t), "empirical": p, "bound": bound, "stderr": _tail_stderr(p, n),
                     "reference_exact": exact})
    prov = _provenance(spec, cfg, x=x, y=y, times=batch.times, reference=reference, lam=lam, k=k,
                       merge_threshold=batch.merge_threshold)
    res = _summarize("coupling_time_tail", rows, k, provenance=prov,
                     notes="binomial standard errors; reference_exact is the hitting law of the reference process")
    res.details["attrition"] = batch.attrition
    return res


# ---------------------------------------------------------------------------
# closed-form Gaussian checks


def _ou_parameters(spec: DiffusionSpec):
    pot = spec.potential
    if pot is None or pot.family not in ("quadratic", "zero") or spec.sigma_kind != "identity" or spec.time_dependent:
        raise ValueError("check_t2 needs an OU-family spec (quadratic or zero potential, sigma = Id)")
    return 2.0 * pot.params.get("lam", 0.0)


def check_t2(spec: DiffusionSpec, T: float, mean_shift, var_ratio: float = 1.0) -> CheckResult:
    """W_2^2 (half convention) <= C_T H for a Gaussian tilt of the time-T marginal.

    The marginal started from a point is N(m_T, s^2 Id) with
    s^2 = (1 - e^{-KT})/K.  The tilted law is N(m_T + mean_shift, var_ratio s^2 Id).
    """
    K = _ou_parameters(spec)
    d = spec.dim
    s2 = C._one_minus_exp_over(K, T) if not (math.isinf(T) and K <= 0) else math.inf
    if not math.isfinite(s2) or s2 <= 0:
        raise ValueError("the marginal variance must be positive and finite")
    shift = np.zeros(d)
    ms = np.atleast_1d(np.asarray(mean_shift, float))
    shift[: ms.size] = ms
    r = float(var_ratio)
    if r <= 0:
        raise ValueError("var_ratio must be > 0")
    m2 = float(shift @ shift)
    H = 0.5 * (d * r - d + m2 / s2 - d * math.log(r))
    W2_std = m2 + d * s2 * (math.sqrt(r) - 1.0) ** 2
    W2_half = 0.5 * W2_std
    C_T = C.t2_constant(K, T)
    bound = C_T * H
    rows = [{"t": T, "empirical": W2_half, "bound": bound * (1 + 1e-12), "stderr": 0.0}]
    prov = _provenance(spec, None, T=T, mean_shift=shift, var_ratio=r)
    res = _summarize("t2", rows, 0.0, provenance=prov, notes="closed form, half convention, no Monte Carlo")
    res.details.update(H=H, W2_half=W2_half, C_T=C_T, variance=s2)
    return res


def check_convolution(kind: str, sigma1: float, sigma2: float, lam: float, alpha: float | None = None) -> CheckResult:
    """Stability of Poincare / log-Sobolev constants under convolution, on Gaussian factors."""
    c = 1.0 if kind == "P" else 2.0 if kind == "LS" else None
    if c is None:
        raise ValueError("kind must be 'P' or 'LS'")
    CX, CY = c * sigma1**2, c * sigma2**2
    C_mix = c * (lam * sigma1**2 + (1 - lam) * sigma2**2)
    upper, implied = C.convolution_constants(lam, CX, CY, kind, C_mix=C_mix)
    tol = 1e-12 * max(1.0, upper)
    rows = [
        {"relation": "upper", "empirical": C_mix, "bound": upper + tol, "stderr": 0.0},
        {"relation": "implied-lower", "empirical": CX, "bound": implied + tol, "stderr": 0.0},
    ]
    if alpha is not None:
        smooth = c * (sigma1**2 + alpha**2)
        rows.append({"relation": "smoothing-up", "empirical": smooth,
                     "bound": C.gaussian_smoothing(CX, alpha, kind) + tol, "stderr": 0.0})
        rows.append({"relation": "smoothing-down", "empirical": CX,
                     "bound": smooth + (1.0 if kind == "P" else 2.0) * alpha**2 + tol, "stderr": 0.0})
    prov = _provenance(None, None, kind=kind, sigma1=sigma1, sigma2=sigma2, lam=lam, alpha=alpha)
    return _summarize("convolution", rows, 0.0, provenance=prov, notes="exact arithmetic on Gaussian constants")


# ---------------------------------------------------------------------------
# decay towards equilibrium


def check_variance_entropy_decay(spec: DiffusionSpec, g: Callable, grad_g: Callable, times,
                                 cfg: IntegratorConfig, kind: str = "variance", burn_in: float = 5.0,
                                 n_inner: int = 16, form: str = "corrected", k: float = DEFAULT_K,
                                 B: int = DEFAULT_B) -> CheckResult:
    """Var(P_t g) or Ent(P_t g) under the invariant law against its exponential bound.

    The invariant law is approximated by a cloud run for ``burn_in`` time
    units.  Each cloud point is continued ``n_inner`` times so that P_t g is
    estimated point by point; the variance estimate removes the inner
    sampling noise.

    For the variance, ``form="corrected"`` uses M/K e^{-Kt} mean|grad g|^2,
    which is what the identity Var(P_t g) = int_t^inf int |sigma grad P_s g|^2
    gives; ``form="stated"`` uses M/(2K).  The entropy bound is
    c M / K e^{-Kt} mean(|grad g|^2 / g) with c = 1.
    """
    K = _require_K(spec)
    if not K > 0:
        raise ValueError("decay checks need K > 0")
    if kind not in ("variance", "entropy"):
        raise ValueError("kind must be variance or entropy")
    if form not in ("corrected", "stated"):
        raise ValueError("form must be corrected or stated")
    M = float(spec.metadata.get("M", 1.0))
    times = np.atleast_1d(np.asarray(times, float))
    warm_cfg = _with_T(cfg, burn_in)
    warm = simulate(spec, np.zeros(spec.dim), warm_cfg, [burn_in]).cloud(0).points
    n = warm.shape[0]
    starts = np.repeat(warm, n_inner, axis=0)
    cont_cfg = dataclasses.replace(cfg, T=float(max(times.max(), cfg.h)), N=starts.shape[0],
                                   seed=(cfg.seed + 0x9E3779B97F4A7C15) % 2**64)
    cont = simulate(spec, starts, cont_cfg, times)
    grads = np.asarray(grad_g(warm), dtype=float)
    g0 = np.asarray(g(warm), dtype=float)
    if kind == "entropy":
        if np.any(g0 <= 0):
            raise ValueError("the entropy variant needs a positive test function")
        energy_terms = np.sum(grads**2, axis=1) / g0
    else:
        energy_terms = np.sum(grads**2, axis=1)
    rows = []
    for i, t in enumerate(cont.times):
        vals = np.asarray(g(np.nan_to_num(cont.paths[:, i, :])), dtype=float).reshape(n, n_inner)
        ok = np.isfinite(cont.paths[:, i, :]).all(axis=1).reshape(n, n_inner).all(axis=1)
        vals, en = vals[ok], energy_terms[ok]
        m = vals.shape[0]
        Pg = vals.mean(axis=1)
        inner = vals.var(axis=1, ddof=1) / n_inner if n_inner > 1 else np.zeros(m)
        if kind == "variance":
            factor = 1.0 if form == "corrected" else 0.5
            coef = factor * M / K * math.exp(-K * t)

            def stat(idx, Pg=Pg, inner=inner, en=en):
                return float(np.var(Pg[idx], ddof=1) - inner[idx].mean()) - coef * float(en[idx].mean())

            emp = float(np.var(Pg, ddof=1) - inner.mean())
        else:
            coef = M / K * math.exp(-K * t)

            def stat(idx, Pg=Pg, en=en):
                return _entropy_jackknife(Pg[idx]) - coef * float(en[idx].mean())

            emp = _entropy_jackknife(Pg)
        bound = coef * float(en.mean())
        se = _floor(bootstrap_stderr(stat, m, B, cfg.seed + i), max(abs(emp), bound), m)
        row = {"t": float(t), "empirical": emp, "bound": bound, "stderr": se}
        if kind == "variance":
            row["stated_bound"] = 0.5 * M / K * math.exp(-K * t) * float(en.mean())
        rows.append(row)
    prov = _provenance(spec, cfg, times=cont.times, kind=kind, burn_in=burn_in, n_inner=n_inner, form=form)
    res = _summarize(f"{kind}_decay", rows, k, provenance=prov)
    g_var = _variance(g0)
    res.details.update(var_g=g_var, mean_grad_sq=float(energy_terms.mean()),
                       stated_form_ratio=2.0 * K * g_var / (M * float(energy_terms.mean()))
                       if energy_terms.mean() > 0 else math.nan)
    return res


# ---------------------------------------------------------------------------
# mean field and kinetic


def _fit_rate(times: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Exponential decay rate of ``values`` by least squares on the log."""
    ok = values > 0
    fit = linregress(times[ok], np.log(values[ok]))
    return -float(fit.slope), float(fit.stderr)


def check_mckean_contraction(mspec: McKeanSpec, mu0, nu0, times, cfg: IntegratorConfig,
                             rate: float | None = None, matched_means: bool = False, tolerance: float = 0.15,
                             k: float = DEFAULT_K) -> CheckResult:
    """Fitted decay rate of W_2 between two particle clouds against rate/2.

    ``rate`` defaults to the mean-field rate from the metadata (or K_W for
    V = 0 with matched means).  Passes when the fitted rate is at least
    (1 - tolerance) rate/2 within k regression standard errors.
    """
    if rate is None:
        if "K_V" not in mspec.metadata:
            raise ValueError("metadata must declare K_V and K_W, or pass rate")
        rate = C.mckean_rate(mspec.metadata["K_V"], mspec.metadata["K_W"], matched_means_V0=matched_means)
    times = np.atleast_1d(np.asarray(times, float))
    prov = _provenance(mspec, cfg, times=times, rate=rate, matched_means=matched_means, tolerance=tolerance)
    if not rate > 0:
        return CheckResult(name="mckean_contraction", bound=rate / 2, empirical=math.nan, stderr=math.nan,
                           margin=math.nan, passed=None, k=k, sense="ge", asserted=False, provenance=prov,
                           notes="rate <= 0: not applicable")
    c1, c2 = simulate_mckean(mspec, mu0, cfg, times, init_sampler2=nu0)
    w = np.array([wasserstein(a.points, b.points, 2).value if a.N == b.N else math.nan for a, b in zip(c1, c2)])
    fitted, se = _fit_rate(np.array([c.t for c in c1]), w)
    target = rate / 2.0
    rows = [{"t": float(c.t), "empirical": float(wv), "bound": math.nan, "stderr": 0.0} for c, wv in zip(c1, w)]
    passed, margin = _judge(fitted, (1.0 - tolerance) * target, se, k, "ge")
    res = CheckResult(name="mckean_contraction", bound=(1.0 - tolerance) * target, empirical=fitted, stderr=se,
                      margin=margin, passed=passed, k=k, sense="ge", provenance=prov, series=rows,
                      notes="series holds W_2 between the clouds; headline compares fitted rate with rate/2")
    res.details.update(target=target, relative_error=abs(fitted - target) / target)
    return res


def check_kinetic_contraction(V: PotentialSpec, delta: float, x, y, times, cfg: IntegratorConfig,
                              dim: int = 1) -> CheckResult:
    """Fitted decay of N = a|dx|^2 + b<dx, dv> + |dv|^2 along synchronous pairs, reported only."""
    found = C.kinetic_contraction_search(delta)
    spec = builtin_kinetic(V, dim)
    batch = couple_synchronous(spec, x, y, cfg, times)
    prov = _provenance(spec, cfg, x=x, y=y, times=batch.times, delta=delta)
    if found is None:
        return CheckResult(name="kinetic_contraction", bound=math.nan, empirical=math.nan, stderr=math.nan,
                           margin=math.nan, passed=None, asserted=False, provenance=prov,
                           notes="no contracting quadratic form found on the search grid")
    diff = batch.x - batch.y
    dx, dv = diff[..., :dim], diff[..., dim:]
    N = found.a * np.sum(dx**2, -1) + found.b * np.sum(dx * dv, -1) + np.sum(dv**2, -1)
    ok = ~batch.blown_up
    mean_log = np.mean(np.log(N[ok]), axis=0)
    fit = linregress(batch.times, mean_log)
    fitted = -float(fit.slope)
    rows = [{"t": float(t), "empirical": float(np.exp(v)), "bound": float(math.exp(-found.K * t) * np.exp(mean_log[0])),
             "stderr": 0.0} for t, v in zip(batch.times, mean_log)]
    res = CheckResult(name="kinetic_contraction", bound=found.K, empirical=fitted, stderr=float(fit.stderr),
                      margin=math.nan, passed=None, sense="ge", asserted=False, provenance=prov, series=rows,
                      notes="constants of the strong commutation are not explicit; reported, not asserted")
    res.details.update(a=found.a, b=found.b, K_search=found.K, fitted_rate=fitted)
    return res


# ---------------------------------------------------------------------------
# exponential moments


def ou_exponential_moment(K: float, x0, t: float, a: float) -> float:
    """E exp(a |X_t|^2) for dX = -(K/2) X dt + dB started at x0."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    d = x0.size
    s2 = C._one_minus_exp_over(K, t) if t > 0 else 0.0
    mean2 = float(x0 @ x0) * math.exp(-K * t)
    den = 1.0 - 2.0 * a * s2
    if den <= 0:
        return math.inf
    return den ** (-d / 2.0) * math.exp(a * mean2 / den)


def calibrate_exponential_moment_rate(K: float, x0, times) -> float:
    """Smallest C_e (to 1e-10) with E exp(e^{-C_e t}|X_t|^2) <= e^{|x0|^2} at every time of the grid."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    target = math.exp(float(x0 @ x0))

    def worst(Ce):
        return max(ou_exponential_moment(K, x0, t, math.exp(-Ce * t)) / target for t in times)

    lo, hi = 0.0, 1.0
    while worst(hi) > 1.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            raise ValueError("no finite C_e found")
    if worst(lo) <= 1.0:
        return lo
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if worst(mid) <= 1.0 else (mid, hi)
    return hi


def check_exponential_moment(spec: DiffusionSpec, x0, C_e: float, times, cfg: IntegratorConfig,
                             k: float = DEFAULT_K) -> CheckResult:
    """Empirical E exp(e^{-C_e t} |X_t|^2) against e^{|x0|^2}."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    batch = simulate(spec, x0, cfg, times)
    bound = math.exp(float(x0 @ x0))
    rows = []
    for i, t in enumerate(batch.times):
        pts = batch.cloud(i).points
        vals = np.exp(math.exp(-C_e * t) * np.sum(pts**2, axis=1))
        n = vals.size
        emp = float(vals.mean())
        se = _floor(float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0, emp, n)
        rows.append({"t": float(t), "empirical": emp, "bound": bound, "stderr": se})
    prov = _provenance(spec, cfg, x0=x0, C_e=C_e, times=batch.times)
    return _summarize("exponential_moment", rows, k, provenance=prov)
