"""Euler-Maruyama integration and coupling constructions.

Every path draws its Gaussian increments from its own counter-based stream
(see :mod:`semilogconcave.rng`), so results are bitwise identical whatever the
chunking or worker count.  Paths whose state leaves ``[-BLOWUP, BLOWUP]`` or
becomes non-finite are frozen, flagged, and recorded as NaN afterwards.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import DiffusionSpec, McKeanSpec, probe_sigma_bounds
from .rng import NoiseSource, child_generator

BLOWUP = 1.0e12
SCHEMES = ("synchronous", "reflection", "reflection-general", "independent")
FORMAT_VERSION = 1


@dataclass(frozen=True)
class IntegratorConfig:
    h: float
    T: float
    N: int
    seed: int = 0
    scheme: str = "euler-maruyama"
    chunk_size: int = 4096
    workers: int = 1
    block_steps: int = 256

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("step h must be > 0")
        if not self.h <= self.T:
            raise ValueError("step h must not exceed the horizon T")
        if self.N < 1:
            raise ValueError("trajectory count N must be >= 1")
        if self.scheme != "euler-maruyama":
            raise ValueError("only the euler-maruyama scheme is implemented")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.h))


def snap_times(times: Sequence[float], cfg: IntegratorConfig):
    """Map requested times onto the step grid.

    Returns ``(indices, snapped_times, was_snapped)``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0:
        raise ValueError("observe_times is empty")
    if np.any(times < 0) or np.any(times > cfg.T * (1 + 1e-12)):
        raise ValueError("observe_times must lie in [0, T]")
    idx = np.rint(times / cfg.h).astype(np.int64)
    idx = np.minimum(idx, cfg.n_steps)
    snapped = idx * cfg.h
    was = bool(np.any(np.abs(snapped - times) > 1e-9 * np.maximum(cfg.h, times)))
    return idx, snapped, was


@dataclass
class ParticleCloud:
    points: np.ndarray
    t: float
    h: float
    seed: int
    block: str | None = None  # "xv" for kinetic states

    def __post_init__(self):
        if not np.all(np.isfinite(self.points)):
            raise ValueError("cloud coordinates must be finite")

    @property
    def N(self) -> int:
        return self.points.shape[0]


@dataclass
class TrajectoryBatch:
    times: np.ndarray
    paths: np.ndarray  # (N, m, d), NaN after blow-up
    blown_up: np.ndarray
    seed: int
    h: float
    requested_times: np.ndarray
    snapped: bool

    @property
    def N(self) -> int:
        return self.paths.shape[0]

    def cloud(self, i: int) -> ParticleCloud:
        pts = self.paths[:, i, :]
        return ParticleCloud(pts[~self.blown_up], float(self.times[i]), self.h, self.seed)

    @property
    def attrition(self) -> float:
        return float(np.mean(self.blown_up))


@dataclass
class CoupledBatch:
    scheme: str
    times: np.ndarray
    x: np.ndarray  # (N, m, d)
    y: np.ndarray
    coupling_time: np.ndarray  # inf when not coupled
    merge_threshold: float
    blown_up: np.ndarray
    seed: int
    h: float
    requested_times: np.ndarray
    snapped: bool
    flags: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.x.shape[0]

    def distances(self) -> np.ndarray:
        """|X_t - Y_t| with shape (N, m)."""
        return np.linalg.norm(self.x - self.y, axis=2)

    def clouds(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        ok = ~self.blown_up
        return self.x[ok, i, :], self.y[ok, i, :]

    @property
    def attrition(self) -> float:
        return float(np.mean(self.blown_up))


def _as_start(init, n: int, dim: int, seed: int, indices: np.ndarray) -> np.ndarray:
    """Initial states for the given trajectory indices."""
    if callable(init):
        rng = child_generator(seed, 3)
        pts = np.asarray(init(rng, n), dtype=float).reshape(n, dim)
        return pts[indices]
    arr = np.asarray(init, dtype=float)
    if arr.ndim == 1:
        if arr.size != dim:
            raise ValueError(f"initial point has dimension {arr.size}, expected {dim}")
        return np.broadcast_to(arr, (indices.size, dim)).copy()
    if arr.shape != (n, dim):
        raise ValueError(f"initial array must have shape {(n, dim)}")
    return arr[indices].copy()


def _guard(x_new: np.ndarray, alive: np.ndarray) -> np.ndarray:
    """Rows that blow up in this step."""
    bad = ~np.isfinite(x_new).all(axis=1) | (np.abs(x_new) > BLOWUP).any(axis=1)
    return bad & alive


def _chunks(n: int, size: int) -> list[np.ndarray]:
    return [np.arange(s, min(s + size, n)) for s in range(0, n, size)]


def _run_chunks(fn: Callable[[np.ndarray], tuple], cfg: IntegratorConfig) -> list[tuple]:
    parts = _chunks(cfg.N, cfg.chunk_size)
    if cfg.workers > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fn, parts))
    return [fn(p) for p in parts]


def _simulate_chunk(spec: DiffusionSpec, x0: np.ndarray, idx: np.ndarray, cfg: IntegratorConfig,
                    obs: np.ndarray):
    n, d = x0.shape
    h, sqh = cfg.h, math.sqrt(cfg.h)
    noise = NoiseSource(cfg.seed, idx, d, stream=0)
    out = np.full((n, obs.size, d), np.nan)
    alive = np.ones(n, dtype=bool)
    x = x0.copy()
    slots = {int(k): [j for j, v in enumerate(obs) if v == k] for k in np.unique(obs)}
    for j in slots.get(0, []):
        out[:, j] = x
    k = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while k < cfg.n_steps:
            nb = min(cfg.block_steps, cfg.n_steps - k)
            xi = noise.next(nb)
            for s in range(nb):
                t = k * h
                x_new = x + spec.drift(t, x) * h + spec.apply_sigma(t, x, xi[s]) * sqh
                bad = _guard(x_new, alive)
                alive &= ~bad
                x = np.where(alive[:, None], x_new, x)
                k += 1
                for j in slots.get(k, []):
                    out[:, j] = np.where(alive[:, None], x, np.nan)
    return out, ~alive


def simulate(spec: DiffusionSpec, init, cfg: IntegratorConfig, observe_times) -> TrajectoryBatch:
    """Euler-Maruyama paths X_{k+1} = X_k + b(t_k, X_k) h + sigma(t_k, X_k) sqrt(h) xi_k.

    ``init`` is a point, an ``(N, d)`` array, or a sampler ``(rng, n) -> (n, d)``.
    """
    obs, snapped_t, was = snap_times(observe_times, cfg)

    def run(idx):
        x0 = _as_start(init, cfg.N, spec.dim, cfg.seed, idx)
        return _simulate_chunk(spec, x0, idx, cfg, obs)

    parts = _run_chunks(run, cfg)
    paths = np.concatenate([p[0] for p in parts])
    blown = np.concatenate([p[1] for p in parts])
    return TrajectoryBatch(times=snapped_t, paths=paths, blown_up=blown, seed=cfg.seed, h=cfg.h,
                           requested_times=np.atleast_1d(np.asarray(observe_times, float)), snapped=was)


def simulate_nonhomogeneous(spec: DiffusionSpec, init, cfg: IntegratorConfig, observe_times) -> TrajectoryBatch:
    """Same scheme as :func:`simulate`; coefficients are evaluated at the grid time t_k."""
    return simulate(spec, init, cfg, observe_times)


# ---------------------------------------------------------------------------
# couplings


def _pair_chunk(spec: DiffusionSpec, x0, y0, idx, cfg: IntegratorConfig, obs, scheme: str,
                threshold: float):
    n, d = x0.shape
    h, sqh = cfg.h, math.sqrt(cfg.h)
    noise = NoiseSource(cfg.seed, idx, d, stream=0)
    noise_y = NoiseSource(cfg.seed, idx, d, stream=1) if scheme == "independent" else None
    out_x = np.full((n, obs.size, d), np.nan)
    out_y = np.full((n, obs.size, d), np.nan)
    alive = np.ones(n, dtype=bool)
    coupled = np.zeros(n, dtype=bool)
    tc = np.full(n, np.inf)
    x, y = x0.copy(), y0.copy()
    if scheme == "synchronous":
        same = np.all(x == y, axis=1)
        coupled |= same
        tc[same] = 0.0
    slots = {int(k): [j for j, v in enumerate(obs) if v == k] for k in np.unique(obs)}

    def record(k):
        for j in slots.get(k, []):
            out_x[:, j] = np.where(alive[:, None], x, np.nan)
            out_y[:, j] = np.where(alive[:, None], y, np.nan)

    record(0)
    inv_err = 0.0
    cond_max = 1.0
    k = 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        while k < cfg.n_steps:
            nb = min(cfg.block_steps, cfg.n_steps - k)
            xi = noise.next(nb)
            xi_y = noise_y.next(nb) if noise_y is not None else None
            for s in range(nb):
                t = k * h
                z = xi[s]
                x_new = x + spec.drift(t, x) * h + spec.apply_sigma(t, x, z) * sqh
                delta = x - y
                if scheme == "synchronous":
                    zy = z
                    y_inc = spec.apply_sigma(t, y, zy)
                elif scheme == "independent":
                    y_inc = spec.apply_sigma(t, y, xi_y[s])
                elif scheme == "reflection":
                    dist = np.linalg.norm(delta, axis=1, keepdims=True)
                    e = np.divide(delta, dist, out=np.zeros_like(delta), where=dist > 0)
                    y_inc = z - 2.0 * e * np.einsum("ij,ij->i", e, z)[:, None]
                else:  # reflection-general
                    S = spec.sigma_matrix(t, y)
                    active = alive & ~coupled
                    if np.any(active):
                        c = np.linalg.cond(S[active])
                        cond_max = max(cond_max, float(np.max(c)))
                        if not np.all(c < 1e8):
                            raise ValueError("diffusion matrix is numerically singular along the path")
                    w = np.linalg.solve(S, delta[:, :, None])[:, :, 0]
                    nw = np.linalg.norm(w, axis=1, keepdims=True)
                    u = np.divide(w, nw, out=np.zeros_like(w), where=nw > 0)
                    uu = np.einsum("ij,ij->i", u, u)
                    moving = active & (nw[:, 0] > 0)
                    if np.any(moving):
                        inv_err = max(inv_err, float(np.max(4.0 * np.abs(uu[moving] - 1.0))))
                    Hz = z - 2.0 * u * np.einsum("ij,ij->i", u, z)[:, None]
                    y_inc = (S * Hz[:, None, :]).sum(axis=2)
                y_new = y + spec.drift(t, y) * h + y_inc * sqh
                bad = _guard(x_new, alive) | _guard(y_new, alive)
                alive &= ~bad
                x = np.where(alive[:, None], x_new, x)
                y = np.where(alive[:, None], y_new, y)
                k += 1
                y[coupled] = x[coupled]
                if scheme in ("reflection", "reflection-general"):
                    d_new = x - y
                    close = np.linalg.norm(d_new, axis=1) <= threshold
                    crossed = np.einsum("ij,ij->i", d_new, delta) <= 0.0
                    hit = alive & ~coupled & (close | crossed)
                elif scheme in ("synchronous", "independent"):
                    hit = alive & ~coupled & np.all(x == y, axis=1)
                if np.any(hit):
                    tc[hit] = k * h
                    coupled |= hit
                    y[hit] = x[hit]
                record(k)
    return out_x, out_y, tc, ~alive, inv_err, cond_max


def _couple(spec, x0, y0, cfg, observe_times, scheme, merge_threshold=None, flags=None):
    if scheme not in SCHEMES:
        raise ValueError(f"unknown coupling scheme {scheme!r}")
    obs, snapped_t, was = snap_times(observe_times, cfg)
    threshold = math.sqrt(cfg.h) if merge_threshold is None else float(merge_threshold)

    def run(idx):
        xs = _as_start(x0, cfg.N, spec.dim, cfg.seed, idx)
        ys = _as_start(y0, cfg.N, spec.dim, cfg.seed + 1 if callable(y0) else cfg.seed, idx)
        return _pair_chunk(spec, xs, ys, idx, cfg, obs, scheme, threshold)

    parts = _run_chunks(run, cfg)
    flags = dict(flags or {})
    if scheme == "reflection-general":
        flags["involution_error"] = max(p[4] for p in parts)
        flags["max_condition_number"] = max(p[5] for p in parts)
    return CoupledBatch(
        scheme=scheme,
        times=snapped_t,
        x=np.concatenate([p[0] for p in parts]),
        y=np.concatenate([p[1] for p in parts]),
        coupling_time=np.concatenate([p[2] for p in parts]),
        merge_threshold=threshold,
        blown_up=np.concatenate([p[3] for p in parts]),
        seed=cfg.seed,
        h=cfg.h,
        requested_times=np.atleast_1d(np.asarray(observe_times, float)),
        snapped=was,
        flags=flags,
    )


def couple_synchronous(spec: DiffusionSpec, x0, y0, cfg: IntegratorConfig, observe_times) -> CoupledBatch:
    """Both paths driven by the same increments."""
    return _couple(spec, x0, y0, cfg, observe_times, "synchronous")


def couple_independent(spec: DiffusionSpec, x0, y0, cfg: IntegratorConfig, observe_times) -> CoupledBatch:
    """Y driven by an independent stream."""
    return _couple(spec, x0, y0, cfg, observe_times, "independent")


def _distinct_points(x0, y0):
    if callable(x0) or callable(y0):
        return
    a, b = np.asarray(x0, float), np.asarray(y0, float)
    if a.shape == b.shape and np.any(np.all(np.atleast_2d(a) == np.atleast_2d(b), axis=-1)):
        raise ValueError("reflection coupling needs x0 != y0")


def couple_reflection(spec: DiffusionSpec, x0, y0, cfg: IntegratorConfig, observe_times,
                      merge_threshold: float | None = None) -> CoupledBatch:
    """Mirror coupling for sigma = Id: Y uses (Id - 2 e e^T) xi until the pair merges."""
    if spec.sigma_kind != "identity":
        raise ValueError("couple_reflection needs sigma = Id; use couple_reflection_general")
    _distinct_points(x0, y0)
    return _couple(spec, x0, y0, cfg, observe_times, "reflection", merge_threshold)


def couple_reflection_general(spec: DiffusionSpec, x0, y0, cfg: IntegratorConfig, observe_times,
                              merge_threshold: float | None = None, probe_points=None) -> CoupledBatch:
    """Mirror coupling for invertible sigma: Y uses sigma(Y) (Id - 2 u u^T) xi, u along sigma^{-1}(Y)(X - Y)."""
    _distinct_points(x0, y0)
    meta = spec.metadata
    if all(k in meta for k in ("M", "N_inv", "Lambda")):
        bounds = {"M": meta["M"], "N_inv": meta["N_inv"], "Lambda": meta["Lambda"]}
        bounds["positivity"] = bool(2.0 / bounds["N_inv"] - bounds["Lambda"] > 0)
    else:
        if probe_points is None:
            rng = child_generator(cfg.seed, 5)
            centre = np.zeros(spec.dim) if callable(x0) else np.atleast_2d(np.asarray(x0, float))[0]
            probe_points = centre + rng.normal(scale=3.0, size=(64, spec.dim))
        bounds = probe_sigma_bounds(spec, np.asarray(probe_points, float))
    return _couple(spec, x0, y0, cfg, observe_times, "reflection-general", merge_threshold, flags=bounds)


def couple(spec, x0, y0, cfg, observe_times, scheme: str = "synchronous", **kw) -> CoupledBatch:
    """Dispatch on the scheme name."""
    fn = {
        "synchronous": couple_synchronous,
        "independent": couple_independent,
        "reflection": couple_reflection,
        "reflection-general": couple_reflection_general,
    }.get(scheme)
    if fn is None:
        raise ValueError(f"unknown coupling scheme {scheme!r}")
    return fn(spec, x0, y0, cfg, observe_times, **kw)


# ---------------------------------------------------------------------------
# mean-field particles


def _sample_init(init, n, dim, seed, tag):
    if callable(init):
        return np.asarray(init(child_generator(seed, tag), n), dtype=float).reshape(n, dim)
    arr = np.asarray(init, dtype=float)
    if arr.ndim == 1:
        return np.broadcast_to(arr, (n, dim)).copy()
    return arr.reshape(n, dim).copy()


def simulate_mckean(mspec: McKeanSpec, init_sampler, cfg: IntegratorConfig, observe_times,
                    init_sampler2=None):
    """Interacting particles, all advanced together each step.

    Returns a list of clouds, or a pair of lists when ``init_sampler2`` is
    given; the second cloud reuses the first cloud's increments particle by
    particle.
    """
    if cfg.N < 2:
        raise ValueError("mean-field simulation needs N >= 2 particles")
    obs, snapped_t, _ = snap_times(observe_times, cfg)
    d = mspec.dim
    h, sqh = cfg.h, math.sqrt(cfg.h)
    states = [_sample_init(init_sampler, cfg.N, d, cfg.seed, 101)]
    if init_sampler2 is not None:
        states.append(_sample_init(init_sampler2, cfg.N, d, cfg.seed, 102))
    noise = NoiseSource(cfg.seed, np.arange(cfg.N), d, stream=0)
    alive = [np.ones(cfg.N, dtype=bool) for _ in states]
    outs = [[None] * obs.size for _ in states]
    slots = {int(k): [j for j, v in enumerate(obs) if v == k] for k in np.unique(obs)}

    def record(k):
        for j in slots.get(k, []):
            for c, X in enumerate(states):
                outs[c][j] = ParticleCloud(X[alive[c]].copy(), float(snapped_t[j]), h, cfg.seed)

    record(0)
    k = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while k < cfg.n_steps:
            nb = min(cfg.block_steps, cfg.n_steps - k)
            xi = noise.next(nb)
            for s in range(nb):
                t = k * h
                for c, X in enumerate(states):
                    live = alive[c]
                    drift = np.zeros_like(X)
                    drift[live] = mspec.particle_drift(t, X[live])
                    X_new = X + drift * h + xi[s] * sqh
                    bad = _guard(X_new, live)
                    live &= ~bad
                    states[c] = np.where(live[:, None], X_new, X)
                k += 1
                record(k)
    if init_sampler2 is None:
        return outs[0]
    return outs[0], outs[1]


# ---------------------------------------------------------------------------
# serialization


def _batch_columns(batch) -> tuple[list[str], np.ndarray]:
    if isinstance(batch, CoupledBatch):
        N, m, d = batch.x.shape
        cols = ["time", "pair_id", "side"] + [f"x{j}" for j in range(d)] + ["coupling_time", "blown_up"]
        rows = []
        for side, arr in ((0, batch.x), (1, batch.y)):
            t = np.repeat(batch.times[None, :], N, axis=0).ravel()
            pid = np.repeat(np.arange(N), m)
            rows.append(np.column_stack([t, pid, np.full(N * m, side), arr.reshape(N * m, d),
                                         np.repeat(batch.coupling_time, m), np.repeat(batch.blown_up, m)]))
        return cols, np.vstack(rows)
    N, m, d = batch.paths.shape
    cols = ["time", "path_id"] + [f"x{j}" for j in range(d)] + ["blown_up"]
    t = np.repeat(batch.times[None, :], N, axis=0).ravel()
    pid = np.repeat(np.arange(N), m)
    return cols, np.column_stack([t, pid, batch.paths.reshape(N * m, d), np.repeat(batch.blown_up, m)])


def _meta(batch) -> dict:
    kind = "coupled" if isinstance(batch, CoupledBatch) else "trajectory"
    meta = {"format_version": FORMAT_VERSION, "kind": kind, "seed": int(batch.seed), "h": float(batch.h),
            "snapped": bool(batch.snapped)}
    if kind == "coupled":
        meta.update(scheme=batch.scheme, merge_threshold=float(batch.merge_threshold))
    return meta


def save_batch(batch, path) -> None:
    """Write a batch as CSV (``.csv``) or as a compressed columnar ``.npz``."""
    path = str(path)
    meta = _meta(batch)
    if path.endswith(".npz"):
        arrays = {"times": batch.times, "requested_times": batch.requested_times, "blown_up": batch.blown_up}
        if meta["kind"] == "coupled":
            arrays.update(x=batch.x, y=batch.y, coupling_time=batch.coupling_time)
        else:
            arrays["paths"] = batch.paths
        import json

        np.savez_compressed(path, meta=np.array(json.dumps(meta)), **arrays)
        return
    cols, data = _batch_columns(batch)
    header = " ".join(f"{k}={v}" for k, v in meta.items())
    with open(path, "w") as fh:
        fh.write(f"# semilogconcave-batch {header}\n")
        fh.write(",".join(cols) + "\n")
        np.savetxt(fh, data, delimiter=",", fmt="%.17g")


def load_batch(path):
    """Inverse of :func:`save_batch`."""
    import json

    path = str(path)
    if path.endswith(".npz"):
        with np.load(path) as z:
            meta = json.loads(str(z["meta"]))
            if meta["format_version"] != FORMAT_VERSION:
                raise ValueError(f"unsupported batch format version {meta['format_version']}")
            common = dict(times=z["times"], blown_up=z["blown_up"].astype(bool), seed=meta["seed"], h=meta["h"],
                          requested_times=z["requested_times"], snapped=meta["snapped"])
            if meta["kind"] == "coupled":
                return CoupledBatch(scheme=meta["scheme"], x=z["x"], y=z["y"], coupling_time=z["coupling_time"],
                                    merge_threshold=meta["merge_threshold"], **common)
            return TrajectoryBatch(paths=z["paths"], **common)
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# semilogconcave-batch"):
            raise ValueError("not a batch snapshot")
        meta = dict(item.split("=", 1) for item in first.split()[2:])
        if int(meta["format_version"]) != FORMAT_VERSION:
            raise ValueError(f"unsupported batch format version {meta['format_version']}")
        cols = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    d = sum(c.startswith("x") for c in cols)
    times = np.unique(data[:, 0])
    m = times.size
    seed, h, snapped = int(meta["seed"]), float(meta["h"]), meta["snapped"] == "True"
    if meta["kind"] == "coupled":
        half = data[data[:, 2] == 0], data[data[:, 2] == 1]
        N = half[0].shape[0] // m
        xs = [part[:, 3:3 + d].reshape(N, m, d) for part in half]
        return CoupledBatch(scheme=meta["scheme"], times=times, x=xs[0], y=xs[1],
                            coupling_time=half[0][::m, 3 + d], merge_threshold=float(meta["merge_threshold"]),
                            blown_up=half[0][::m, 4 + d].astype(bool), seed=seed, h=h, requested_times=times,
                            snapped=snapped)
    N = data.shape[0] // m
    return TrajectoryBatch(times=times, paths=data[:, 2:2 + d].reshape(N, m, d),
                           blown_up=data[::m, 2 + d].astype(bool), seed=seed, h=h, requested_times=times,
                           snapped=snapped)
