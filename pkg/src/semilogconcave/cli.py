"""Config-driven experiment runner.

A config is a TOML file.  Top-level keys:

``kind``
    simulate | couple | constants-table | check | sweep
``seed``
    integer, required (or ``--seed``)
``out``
    output directory (optional; ``--out`` and ``SEMILOG_OUT`` take precedence
    in that order, then ``results``)
``attrition_threshold``
    largest tolerated fraction of blown-up paths (default 0.01)

Tables: ``[spec]``, ``[integrator]``, and one of ``[simulate]``,
``[couple]``, ``[table]``, ``[check]``; a sweep adds ``[sweep]`` with a
dotted ``parameter`` path, its ``values`` and the ``job`` kind run at each
grid point.  See README.md for worked examples.

Exit status: 0 all asserted checks pass, 1 a check failed, 2 invalid config,
3 attrition above the threshold.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import copy
import csv
import hashlib
import importlib.metadata
import inspect
import json
import math
import os
import platform
import sys
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from . import constants as C
from . import model as M
from . import verify as V
from .sde import FORMAT_VERSION, SCHEMES, IntegratorConfig, couple, save_batch, simulate

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

RESULTS_VERSION = 1
ENV_OUT = "SEMILOG_OUT"
EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_ATTRITION = 0, 1, 2, 3
JOB_KINDS = ("simulate", "couple", "constants-table", "check")

_num = {"type": "number"}
_vec = {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 1}]}
_times = {"type": "array", "items": _num, "minItems": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(JOB_KINDS) + ["sweep"]},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "attrition_threshold": {"type": "number", "minimum": 0, "maximum": 1},
        "spec": {
            "type": "object",
            "properties": {
                "type": {"enum": ["gradient", "ou", "brownian", "kinetic", "mckean"]},
                "family": {"type": "string"},
                "params": {"type": "object"},
                "dim": {"type": "integer", "minimum": 1},
                "K": _num,
                "sigma_scale": {"type": "number", "exclusiveMinimum": 0},
                "V": {"type": "object", "required": ["family"]},
                "W": {"type": "object", "required": ["family"]},
            },
        },
        "integrator": {
            "type": "object",
            "required": ["h", "T", "N"],
            "properties": {
                "h": {"type": "number", "exclusiveMinimum": 0},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "N": {"type": "integer", "minimum": 1},
                "chunk_size": {"type": "integer", "minimum": 1},
                "workers": {"type": "integer", "minimum": 1},
            },
        },
        "simulate": {"type": "object", "required": ["times"],
                     "properties": {"init": _vec, "times": _times, "format": {"enum": ["csv", "npz"]}}},
        "couple": {"type": "object", "required": ["x", "y", "times"],
                   "properties": {"scheme": {"enum": list(SCHEMES)}, "x": _vec, "y": _vec, "times": _times,
                                  "format": {"enum": ["csv", "npz"]}}},
        "table": {"type": "object", "required": ["formulas", "grid"],
                  "properties": {"formulas": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                                 "grid": {"type": "object"}}},
        "check": {"type": "object", "required": ["name"], "properties": {"name": {"type": "string"}}},
        "sweep": {"type": "object", "required": ["parameter", "values", "job"],
                  "properties": {"parameter": {"type": "string"}, "values": {"type": "array"},
                                 "job": {"enum": list(JOB_KINDS)}}},
    },
}


class ConfigError(ValueError):
    """Invalid experiment configuration (exit status 2)."""


# ---------------------------------------------------------------------------
# formula table


def _eberle_perturbed(K: float, M: float) -> dict:
    """Reflection-coupling constants for kappa(r) = K - M / r."""
    rate = C.eberle_rate(lambda r: K - M / np.maximum(r, 1e-300))
    return {"lam": rate.lam, "R0": rate.R0, "R1": rate.R1, "phi_min": rate.phi_min,
            "poincare_bound": C.eberle_poincare(rate)}


FORMULAS = {
    "poincare_flow": C.poincare_flow,
    "logsobolev_flow": C.logsobolev_flow,
    "t2_constant": C.t2_constant,
    "t2_flow": C.t2_flow,
    "wi_constant": C.wi_constant,
    "beckner_constant": C.beckner_constant,
    "superconvex_Kbeta": C.superconvex_Kbeta,
    "superconvex_CP_CLS": C.superconvex_CP_CLS,
    "lack_CP_CLS": C.lack_CP_CLS,
    "perturbed_convex_poincare_bound": C.perturbed_convex_poincare_bound,
    "eberle_perturbed": _eberle_perturbed,
    "mckean_rate": C.mckean_rate,
    "kinetic_rate": C.kinetic_rate,
    "prekopa_curvature": C.prekopa_curvature,
}
_TUPLE_OUTPUTS = {"superconvex_CP_CLS": ("C_P", "C_LS"), "lack_CP_CLS": ("C_P", "C_LS")}


def _call_formula(name: str, point: dict) -> dict:
    fn = FORMULAS[name]
    sig = inspect.signature(fn)
    kwargs = {}
    for p in sig.parameters.values():
        if p.name in point:
            kwargs[p.name] = point[p.name]
        elif p.default is inspect.Parameter.empty:
            raise ConfigError(f"formula {name!r} needs input {p.name!r}")
    out = fn(**kwargs)
    if isinstance(out, dict):
        return {f"{name}.{k}": float(v) for k, v in out.items()}
    if name in _TUPLE_OUTPUTS:
        return {f"{name}.{k}": float(v) for k, v in zip(_TUPLE_OUTPUTS[name], out)}
    return {name: float(out)}


def _grid_points(grid: dict) -> list[dict]:
    keys = sorted(grid)
    if not keys:
        return [{}]
    axes = [v if isinstance(v, list) else [v] for v in (grid[k] for k in keys)]
    if any(len(a) == 0 for a in axes):
        raise ConfigError("table grid has an empty axis")
    mesh = np.array(np.meshgrid(*[np.arange(len(a)) for a in axes], indexing="ij")).reshape(len(keys), -1).T
    return [{k: _tomlnum(axes[j][i]) for j, (k, i) in enumerate(zip(keys, row))} for row in mesh]


def _tomlnum(v):
    if isinstance(v, str) and v.lower() in ("inf", "+inf", "infinity"):
        return math.inf
    return v


# ---------------------------------------------------------------------------
# config handling


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc


def _families_in(spec: dict) -> list[str]:
    out = [spec["family"]] if "family" in spec else []
    out += [spec[k]["family"] for k in ("V", "W") if isinstance(spec.get(k), dict) and "family" in spec[k]]
    return out


def validate_config(cfg: dict) -> None:
    """Raise :class:`ConfigError` unless the config is schema-valid and consistent."""
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from exc
    if "seed" not in cfg:
        raise ConfigError("seed is required (set it in the config or pass --seed)")
    for fam in _families_in(cfg.get("spec", {})):
        if fam not in M.POTENTIAL_FAMILIES:
            raise ConfigError(f"unknown potential family {fam!r}; known: {', '.join(sorted(M.POTENTIAL_FAMILIES))}")
    kind = cfg["kind"]
    job = cfg["sweep"]["job"] if kind == "sweep" else kind
    if kind == "sweep":
        if "sweep" not in cfg:
            raise ConfigError("a sweep config needs a [sweep] table")
        if len(cfg["sweep"]["values"]) == 0:
            raise ConfigError("sweep grid is empty")
    section = {"simulate": "simulate", "couple": "couple", "constants-table": "table", "check": "check"}[job]
    if section not in cfg:
        raise ConfigError(f"kind {job!r} needs a [{section}] table")
    if job == "constants-table":
        for name in cfg["table"]["formulas"]:
            if name not in FORMULAS:
                raise ConfigError(f"unknown formula {name!r}; known: {', '.join(sorted(FORMULAS))}")
    if job in ("simulate", "couple") or (job == "check" and cfg["check"]["name"] != "convolution"):
        for key in ("spec", "integrator"):
            if key not in cfg:
                raise ConfigError(f"kind {job!r} needs a [{key}] table")
    if job == "check" and cfg["check"]["name"] not in CHECKS:
        raise ConfigError(f"unknown check {cfg['check']['name']!r}; known: {', '.join(sorted(CHECKS))}")


def _potential(decl: dict) -> M.PotentialSpec:
    try:
        return M.make_potential(decl["family"], decl.get("params", {}))
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    except TypeError as exc:
        raise ConfigError(f"bad parameters for family {decl['family']!r}: {exc}") from exc


def build_spec(decl: dict, seed: int = 0):
    kind = decl.get("type", "gradient")
    dim = int(decl.get("dim", 1))
    if kind == "ou":
        return M.ou_spec(float(decl["K"]), dim)
    if kind == "brownian":
        return M.brownian_spec(dim)
    if kind == "kinetic":
        return M.builtin_kinetic(_potential(decl), dim)
    if kind == "mckean":
        return M.builtin_mckean(_potential(decl["V"]), _potential(decl["W"]), dim, seed)
    if "family" not in decl:
        raise ConfigError("a gradient spec needs a family")
    pot = _potential(decl)
    if pot.family == "polynomial":
        dim = pot.dim
    return M.gradient_diffusion(pot, dim, float(decl.get("sigma_scale", 1.0)))


def build_integrator(decl: dict, seed: int, workers: int | None) -> IntegratorConfig:
    kw = {k: decl[k] for k in ("chunk_size", "workers") if k in decl}
    if workers is not None:
        kw["workers"] = workers
    try:
        return IntegratorConfig(h=float(decl["h"]), T=float(decl["T"]), N=int(decl["N"]), seed=int(seed), **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# checks


def _testfn(name: str, dim: int) -> V.TestFunction:
    lib = {tf.name: tf for tf in V.default_test_functions(dim) + V.exponential_tilts(dim)}
    if name not in lib:
        raise ConfigError(f"unknown test function {name!r}; known: {', '.join(sorted(lib))}")
    return lib[name]


def _gaussian_sampler(mean, std):
    mean = np.atleast_1d(np.asarray(mean, float))
    return lambda rng, n: mean + std * rng.normal(size=(n, mean.size))


def _check_functional(which):
    def run(spec, icfg, p):
        T = float(p.get("T", icfg.T))
        init = p.get("init", [0.0] * spec.dim)
        batch = simulate(spec, init, icfg, [T])
        const = p.get("constant")
        if const is None:
            K = spec.metadata["K"]
            const = C.poincare_flow(K, spec.metadata.get("M", 1.0), T) if which == "poincare" else C.logsobolev_flow(K, T)
        fns = [_testfn(n, spec.dim) for n in p["functions"]] if "functions" in p else None
        fn = V.check_poincare if which == "poincare" else V.check_logsobolev
        res = fn(batch.cloud(0), float(const), fns, k=p.get("k", V.DEFAULT_K), seed=icfg.seed)
        res.details["attrition"] = batch.attrition
        return res
    return run


def _check_decay(kind):
    def run(spec, icfg, p):
        tf = _testfn(p.get("function", "sin0" if kind == "variance" else "tilt1"), spec.dim)
        return V.check_variance_entropy_decay(spec, tf.f, tf.grad, p["times"], icfg, kind=kind,
                                              burn_in=p.get("burn_in", 5.0), n_inner=p.get("n_inner", 16),
                                              form=p.get("form", "corrected"))
    return run


def _check_gradient(spec, icfg, p):
    tf = _testfn(p.get("function", "sin0"), spec.dim)
    return V.check_gradient_commutation(spec, tf.f, tf.grad, p["x"], float(p["t"]), icfg,
                                        form=p.get("form", "strong"), m=p.get("m"))


def _check_mckean(mspec, icfg, p):
    std = float(p.get("std", 1.0))
    return V.check_mckean_contraction(mspec, _gaussian_sampler(p["mu0_mean"], std),
                                      _gaussian_sampler(p["nu0_mean"], std), p["times"], icfg,
                                      rate=p.get("rate"), matched_means=p.get("matched_means", False),
                                      tolerance=p.get("tolerance", 0.15))


def _check_kinetic(spec_decl, icfg, p):
    return V.check_kinetic_contraction(_potential(spec_decl), float(p.get("delta", 0.0)), p["x"], p["y"],
                                       p["times"], icfg, dim=int(spec_decl.get("dim", 1)))


CHECKS = {
    "w_contraction": lambda s, c, p: V.check_w_contraction(s, p["x"], p["y"], p["times"], c, p=p.get("p", 2.0)),
    "gradient_commutation": _check_gradient,
    "poincare": _check_functional("poincare"),
    "logsobolev": _check_functional("logsobolev"),
    "t2": lambda s, c, p: V.check_t2(s, float(_tomlnum(p["T"])), p["mean_shift"], p.get("var_ratio", 1.0)),
    "variance_decay": _check_decay("variance"),
    "entropy_decay": _check_decay("entropy"),
    "eberle_w1": lambda s, c, p: V.check_eberle_w1(s, p["x"], p["y"], p["times"], c),
    "coupling_time_tail": lambda s, c, p: V.check_coupling_time_tail(s, p["x"], p["y"], p["times"], c,
                                                                     reference=p.get("reference", "brownian")),
    "polynomial_decay": lambda s, c, p: V.check_polynomial_decay(s, p["x"], p["y"], p["times"], c),
    "exponential_moment": lambda s, c, p: V.check_exponential_moment(s, p["x0"], float(p["C_e"]), p["times"], c),
    "mckean_contraction": _check_mckean,
    "kinetic_contraction": None,  # dispatched with the raw spec table
    "convolution": None,  # needs no spec
}


# ---------------------------------------------------------------------------
# jobs


def _run_job(cfg: dict, out: Path, workers: int | None) -> list[dict]:
    """Execute one non-sweep job; returns result records and writes side files into ``out``."""
    kind, seed = cfg["kind"], int(cfg["seed"])
    threshold = float(cfg.get("attrition_threshold", 0.01))
    if kind == "constants-table":
        rows = []
        for point in _grid_points(cfg["table"]["grid"]):
            row = dict(point)
            for name in cfg["table"]["formulas"]:
                try:
                    row.update(_call_formula(name, point))
                except ConfigError:
                    raise
                except (ValueError, ZeroDivisionError) as exc:
                    row[name] = math.nan
                    row.setdefault("errors", []).append(f"{name}: {exc}")
            rows.append(row)
        _write_rows(out / "table.csv", rows)
        return [{"kind": "constants-table", "rows": rows, "passed": None, "asserted": False, "attrition": 0.0}]
    if kind == "check" and cfg["check"]["name"] == "convolution":
        p = cfg["check"]
        res = V.check_convolution(p["kind"], p["sigma1"], p["sigma2"], p["lam"], p.get("alpha"))
        return [_check_record(res, out, threshold)]
    icfg = build_integrator(cfg["integrator"], seed, workers) if "integrator" in cfg else None
    if kind == "check" and cfg["check"]["name"] == "kinetic_contraction":
        res = _check_kinetic(cfg["spec"], icfg, cfg["check"])
        return [_check_record(res, out, threshold)]
    spec = build_spec(cfg.get("spec", {"type": "brownian"}), seed)
    if kind == "check":
        p = cfg["check"]
        try:
            res = CHECKS[p["name"]](spec, icfg, p)
        except KeyError as exc:
            raise ConfigError(f"check {p['name']!r} is missing parameter {exc.args[0]!r}") from exc
        return [_check_record(res, out, threshold)]
    if kind == "simulate":
        p = cfg["simulate"]
        batch = simulate(spec, p.get("init", [0.0] * spec.dim), icfg, p["times"])
    else:
        p = cfg["couple"]
        batch = couple(spec, p["x"], p["y"], icfg, p["times"], scheme=p.get("scheme", "synchronous"))
    fname = f"batch.{p.get('format', 'csv')}"
    save_batch(batch, out / fname)
    rec = {"kind": kind, "file": fname, "times": batch.times.tolist(), "snapped": bool(batch.snapped),
           "attrition": batch.attrition, "passed": None, "asserted": False,
           "attrition_exceeded": bool(batch.attrition > threshold)}
    if kind == "couple":
        finite = np.isfinite(batch.coupling_time)
        rec["scheme"] = batch.scheme
        rec["coupled_fraction"] = float(finite.mean())
        rec["flags"] = V._jsonable(getattr(batch, "flags", {}) or {})
    return [rec]


def _check_record(res: V.CheckResult, out: Path, threshold: float) -> dict:
    rec = res.to_dict()
    rec["kind"] = "check"
    att = float(res.details.get("attrition", 0.0) or 0.0)
    rec["attrition"] = att
    rec["attrition_exceeded"] = bool(att > threshold)
    if res.series:
        fname = f"series_{res.name}.csv"
        res.write_series(out / fname)
        rec["series_file"] = fname
    return rec


def _write_rows(path: Path, rows: list[dict]) -> None:
    cols = []
    for r in rows:
        cols += [k for k in r if k not in cols and not isinstance(r[k], (list, dict))]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in cols])


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _set_dotted(cfg: dict, path: str, value) -> dict:
    out = copy.deepcopy(cfg)
    node = out
    parts = path.split(".")
    for key in parts[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"sweep parameter path {path!r} crosses a non-table value")
    node[parts[-1]] = value
    return out


def _scalar_summary(rec: dict) -> dict:
    if rec.get("kind") == "constants-table":
        out = {}
        for i, row in enumerate(rec["rows"]):
            for k, v in row.items():
                if isinstance(v, (int, float)):
                    out[k if len(rec["rows"]) == 1 else f"{k}[{i}]"] = v
        return out
    keys = ("empirical", "bound", "stderr", "margin", "passed", "attrition")
    return {k: rec[k] for k in keys if k in rec}


def run_sweep(cfg: dict, out: Path, workers: int | None) -> list[dict]:
    sw = cfg["sweep"]
    base = {k: v for k, v in cfg.items() if k != "sweep"}
    base["kind"] = sw["job"]
    points = [_set_dotted(base, sw["parameter"], v) for v in sw["values"]]
    for i, pc in enumerate(points):
        try:
            validate_config(pc)
        except ConfigError as exc:
            raise ConfigError(f"sweep point {i}: {exc}") from exc
    dirs = [out / f"point_{i:03d}" for i in range(len(points))]
    for d in dirs:
        d.mkdir(parents=True, exist_ok=True)
    n_jobs = max(1, workers or 1)
    # points run concurrently; simulation inside each point stays single-threaded
    inner = 1 if n_jobs > 1 else workers
    with cf.ThreadPoolExecutor(max_workers=n_jobs) as pool:
        results = list(pool.map(lambda a: _run_job(a[0], a[1], inner), zip(points, dirs)))
    records, rows = [], []
    for value, d, recs in zip(sw["values"], dirs, results):
        for rec in recs:
            rec["sweep_parameter"] = sw["parameter"]
            rec["sweep_value"] = value
            rec["directory"] = d.name
            records.append(rec)
            rows.append({sw["parameter"]: value, **_scalar_summary(rec)})
    _write_rows(out / "sweep.csv", rows)
    return records


# ---------------------------------------------------------------------------
# entry points


def _manifest(path: Path, cfg: dict, raw: bytes, workers: int | None, command: str) -> dict:
    return {
        "format_version": RESULTS_VERSION,
        "command": command,
        "config_path": str(path),
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "config": cfg,
        "seed": int(cfg["seed"]),
        "workers": workers,
        "versions": {"semilogconcave": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "jsonschema": importlib.metadata.version("jsonschema"),
                     "python": platform.python_version()},
        "batch_format_version": FORMAT_VERSION,
    }


def _summary_lines(records: list[dict]) -> list[str]:
    lines = [f"{'#':>3}  {'kind':<16} {'name':<22} {'empirical':>14} {'bound':>14} {'stderr':>11} {'status':<8}"]
    for i, r in enumerate(records):
        status = "n/a" if r.get("passed") is None else ("PASS" if r["passed"] else "FAIL")
        if r.get("attrition_exceeded"):
            status += " ATTR"
        name = r.get("name", r.get("file", "table"))
        if "sweep_value" in r:
            name = f"{name}@{r['sweep_value']}"

        lines.append(f"{i:>3}  {r['kind']:<16} {name:<22} {_fmt(r.get('empirical'), 14)} {_fmt(r.get('bound'), 14)} "
                     f"{_fmt(r.get('stderr'), 11)} {status:<8}")
    return lines


def _fmt(v, width: int) -> str:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return f"{v:{width}.4g}"
    return f"{'' if v is None else str(v):>{width}}"


def _exit_status(records: list[dict]) -> int:
    if any(r.get("attrition_exceeded") for r in records):
        return EXIT_ATTRITION
    if any(r.get("asserted", True) and r.get("passed") is False for r in records):
        return EXIT_FAIL
    return EXIT_OK


def execute(config_path, out=None, seed: int | None = None, workers: int | None = None,
            command: str = "run") -> int:
    """Run a config file and write its results; returns the exit status."""
    path = Path(config_path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        print(f"error: cannot read config {path}: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        cfg = load_config(path)
        if seed is not None:
            cfg["seed"] = int(seed)
        validate_config(cfg)
        if command == "sweep" and cfg["kind"] != "sweep":
            raise ConfigError("the sweep command needs kind = 'sweep'")
        out_dir = Path(out or os.environ.get(ENV_OUT) or cfg.get("out") or "results")
        out_dir.mkdir(parents=True, exist_ok=True)
        if cfg["kind"] == "sweep":
            records = run_sweep(cfg, out_dir, workers)
        else:
            records = _run_job(cfg, out_dir, workers)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    status = _exit_status(records)
    doc = {"format_version": RESULTS_VERSION, "kind": cfg["kind"], "exit_status": status,
           "records": V._jsonable(records)}
    (out_dir / "records.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    manifest = _manifest(path, cfg, raw, workers, command)
    (out_dir / "manifest.json").write_text(json.dumps(V._jsonable(manifest), indent=2, sort_keys=True) + "\n")
    lines = _summary_lines(records) + [f"exit status: {status}"]
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return status


def list_families() -> list[str]:
    return [f"{name:<22} {desc}" for name, (_, desc) in sorted(M.POTENTIAL_FAMILIES.items())]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semilogconcave", description="Run semi log-concave diffusion experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run one experiment config"), ("sweep", "run a parameter sweep config")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="path to a TOML experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--workers", type=int, help="thread budget")
        p.add_argument("--out", help=f"output directory (default: ${ENV_OUT}, then the config, then ./results)")
    sub.add_parser("list-families", help="list built-in potential families")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-families":
        print("\n".join(list_families()))
        return EXIT_OK
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_SCHEMA
    return execute(args.config, out=args.out, seed=args.seed, workers=args.workers, command=args.command)


if __name__ == "__main__":
    sys.exit(main())
