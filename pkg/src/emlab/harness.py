"""Declarative experiments: config validation, execution, result files, replay.

A config is a JSON object with a ``kind`` and kind-specific parameters.
Every parameter not given takes the default listed in :data:`DEFAULTS`, and
the completed config is echoed into ``results.json`` so each result file is
self-describing.  The worker count is deliberately not echoed: it changes
wall-clock time only.

``results.json`` layout (``schema_version`` 1)::

    schema_version, package_version, config, seed_ledger, results,
    checks, wall_clock_seconds

Keys are sorted and floats are written with ``repr`` precision, so two runs
of one config produce byte-identical files apart from the
``wall_clock_seconds`` line.

CSV tables per kind:

``error_curve``      ``error_curve.csv``: n, mse, ci, estimator_variant
``quadrature_w/em``  ``quadrature.csv``: n, Q, ci
``zvonkin``          ``scale_table.csv``: x, phi, phi_prime, psi_of_grid
``pde``              ``pde_field.csv``: t, x1..xd, u, du_dx1..du_dxd;
                     ``gradient_scaling.csv``: T, sup_grad, ratio, holder_ratio
``kernel_blowup``    ``kernel_blowup.csv``: t, k, l1_norm, exact
"""
from __future__ import annotations

import copy
import csv
import json
import math
import tempfile
import time
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from . import drifts as _drifts
from . import kolmogorov as _pde
from . import quadrature as _quad
from . import zvonkin as _zv
from .coupled_error import ConfigError, error_curve_problems, estimate_error_curve
from .rates import LOG_CORRECTED, PLAIN, FitError, fit_rate

__all__ = [
    "SCHEMA_VERSION",
    "KINDS",
    "DEFAULTS",
    "EXIT_OK",
    "EXIT_VALIDATION",
    "EXIT_ASSERTION",
    "ExperimentConfig",
    "RunOutcome",
    "ConfigError",
    "load_config",
    "run",
    "reproduce",
    "dumps",
]

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VALIDATION, EXIT_ASSERTION = 0, 2, 3
WALL_CLOCK_KEY = "wall_clock_seconds"

_LADDER = [2**k for k in range(4, 11)]

DEFAULTS = {
    "error_curve": {
        "drift": "sign", "drift_params": {}, "dimension": 1, "T": 1.0, "x0": 0.0,
        "levels": _LADDER, "M": 10_000, "n_ref": 2**14, "checkpoints": None,
        "epsilon_offset": None, "batch_size": 500, "ref_factor": 16,
        "fit_variant": PLAIN, "include_smallest": False, "weighted": False,
        "assert_slope": None,
    },
    "quadrature_w": {
        "functional": "sign_sin", "functional_params": {}, "tau": 0.0, "tau_prime": 1.0,
        "dimension": 1, "T": 1.0, "x0": 0.0, "levels": _LADDER, "M": 10_000, "finest_n": None,
        "batch_size": 500, "assert_slope": None, "assert_corrected_slope": None,
    },
    "quadrature_em": {
        "functional": "sign_sin", "functional_params": {}, "tau": 0.0, "tau_prime": 1.0,
        "drift": "sign", "drift_params": {}, "dimension": 1, "T": 1.0, "x0": 0.0,
        "levels": _LADDER, "M": 10_000, "finest_n": None, "batch_size": 500,
        "assert_slope": None, "assert_corrected_slope": None,
    },
    "zvonkin": {
        "drift": "sign", "drift_params": {}, "z": 0.0, "R": 3.0, "h": 1e-3,
        "martingale_n": 2**12, "martingale_M": 100_000, "martingale_T": 0.25,
        "martingale_sigmas": 5.0,
    },
    "pde": {
        "drift": "sin", "drift_params": {}, "dimension": 1, "source": "sign", "source_params": {},
        "N": 2048, "L": 10.0, "K": 64, "rule": "product", "T0": None, "tol": 1e-10, "max_iter": 60,
        "csv_time_stride": 8,
    },
    "kernel_blowup": {"dimension": 1, "N": 2048, "L": 10.0, "times": None, "tol": 0.1},
}
KINDS = tuple(DEFAULTS)


def _src_one(t, X):
    return np.ones(X.shape[:-1])


def _src_sign(t, X):
    return np.sign(X[..., 0])


def _src_sin(t, X):
    return np.sin(X[..., 0])


def _src_gaussian(t, X, sigma2=0.1):
    return np.exp(-np.sum(X**2, axis=-1) / (2 * sigma2))


SOURCES = {"one": _src_one, "sign": _src_sign, "sin": _src_sin, "gaussian": _src_gaussian}


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    params: dict = field(default_factory=dict)
    workers: int = 1
    out: str = "results"

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "ExperimentConfig":
        data = dict(data)
        kind = data.pop("kind", None)
        seed = data.pop("seed", 0)
        workers = data.pop("workers", 1)
        out = data.pop("out", "results")
        for key, value in overrides.items():
            if value is None:
                continue
            if key == "seed":
                seed = value
            elif key == "workers":
                workers = value
            elif key == "out":
                out = value
        return cls(kind, seed, data, workers, out)

    def completed(self) -> dict:
        """Parameters with every default filled in."""
        params = copy.deepcopy(DEFAULTS.get(self.kind, {}))
        params.update(copy.deepcopy(self.params))
        if params.get("checkpoints", 0) is None and self.kind == "error_curve":
            T = float(params["T"])
            params["checkpoints"] = [j * T / 8 for j in range(9)]
        if self.kind.startswith("quadrature") and params.get("finest_n") is None and params.get("levels"):
            params["finest_n"] = 16 * max(params["levels"])
        return params

    def echo(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, **self.completed()}


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return ExperimentConfig.from_dict(data, **overrides)


def validate(cfg: ExperimentConfig) -> list[str]:
    """Every violation in the config, not just the first."""
    errors = []
    if cfg.kind not in DEFAULTS:
        return [f"unknown experiment kind {cfg.kind!r}; expected one of {', '.join(KINDS)}"]
    if not isinstance(cfg.seed, int) or not 0 <= cfg.seed < 2**64:
        errors.append(f"seed {cfg.seed!r} is not an unsigned 64-bit integer")
    if not isinstance(cfg.workers, int) or cfg.workers < 1:
        errors.append(f"workers must be a positive integer, got {cfg.workers!r}")
    unknown = sorted(set(cfg.params) - set(DEFAULTS[cfg.kind]))
    if unknown:
        errors.append(f"unknown parameters for {cfg.kind}: {', '.join(unknown)}")
    p = cfg.completed()
    drift = None
    if "drift" in p:
        if p["drift"] not in _drifts.builtin_names():
            errors.append(f"unknown drift {p['drift']!r}")
        else:
            try:
                drift = _drifts.builtin(p["drift"], p.get("dimension", 1), **p["drift_params"])
            except (TypeError, ValueError) as exc:
                errors.append(f"drift parameters: {exc}")
    if cfg.kind == "error_curve":
        # a zero drift stands in when the named one is invalid, so ladder problems still surface
        probe = drift if drift is not None else _drifts.builtin("zero", max(1, int(p["dimension"])))
        try:
            errors += error_curve_problems(probe, p["levels"], p["M"], p["n_ref"], p["T"], p["checkpoints"],
                                           p["ref_factor"])
        except (TypeError, ValueError) as exc:
            errors.append(str(exc))
    if "functional" in p and p["functional"] not in _quad.functional_names():
        errors.append(f"unknown functional {p['functional']!r}")
    if "levels" in p:
        levels = p["levels"]
        if not levels or any(not isinstance(n, int) or n < 1 for n in levels):
            errors.append(f"levels must be positive integers, got {levels!r}")
        else:
            fine = p.get("finest_n")
            if isinstance(fine, int) and any(fine % n for n in levels):
                errors.append(f"levels {[n for n in levels if fine % n]} do not divide {fine}")
    if cfg.kind != "error_curve" and "M" in p and (not isinstance(p["M"], int) or p["M"] < 100):
        errors.append(f"M must be an integer >= 100, got {p['M']!r}")
    if "T" in p and not (isinstance(p["T"], (int, float)) and p["T"] > 0):
        errors.append(f"T must be positive, got {p['T']!r}")
    if cfg.kind == "pde":
        if p["source"] not in SOURCES:
            errors.append(f"unknown source {p['source']!r}; expected one of {', '.join(SOURCES)}")
        if p["dimension"] not in (1, 2):
            errors.append("pde solves are limited to d = 1, 2")
        if p["T0"] is not None and not 0 < p["T0"] <= 1:
            errors.append(f"T0 must lie in (0, 1], got {p['T0']}")
    if cfg.kind == "kernel_blowup" and p["times"] is not None:
        if any(t <= 0 for t in p["times"]):
            errors.append("kernel times must be positive")
    for key in ("assert_slope", "assert_corrected_slope"):
        b = p.get(key)
        if b is not None and (len(b) != 2 or (None not in b and b[0] > b[1])):
            errors.append(f"{key} must be [low, high], got {b!r}")
    return errors


@dataclass
class RunOutcome:
    exit_code: int
    payload: dict | None = None
    errors: list = field(default_factory=list)
    out_dir: Path | None = None
    tables: dict = field(default_factory=dict)


def _in_bracket(value, bracket) -> bool:
    """``bracket`` is ``[low, high]``; either side may be ``None`` (unbounded)."""
    if bracket is None:
        return True
    if value is None:
        return False
    low, high = bracket
    return (low is None or value >= low) and (high is None or value <= high)


def _fit_or_reason(curve, variant, **kw):
    try:
        return fit_rate(curve, variant, **kw).to_dict(), None
    except FitError as exc:
        return None, str(exc)


def _run_error_curve(p, seed, workers):
    drift = _drifts.builtin(p["drift"], p["dimension"], **p["drift_params"])
    curve = estimate_error_curve(
        drift, p["levels"], p["M"], p["n_ref"], T=p["T"], x0=p["x0"], seed=seed, checkpoints=p["checkpoints"],
        epsilon_offset=p["epsilon_offset"], batch_size=p["batch_size"], workers=workers,
        ref_factor=p["ref_factor"])
    results = {"curve": curve.to_dict(), "fit": None}
    if not curve.exact:
        results["fit"], reason = _fit_or_reason(curve, p["fit_variant"], include_smallest=p["include_smallest"],
                                                weighted=p["weighted"])
        if reason:
            results["fit_error"] = reason
    slope = results["fit"]["slope"] if results["fit"] else None
    checks = {}
    if p["assert_slope"] is not None:
        checks["slope_in_bracket"] = _in_bracket(slope, p["assert_slope"])
    return results, checks, {"error_curve.csv": curve.csv_rows()}


def _run_quadrature(p, seed, workers, with_drift):
    func = _quad.functional(p["functional"], tau=p["tau"], tau_prime=p["tau_prime"], **p["functional_params"])
    common = dict(M=p["M"], seed=seed, d=p["dimension"], finest_n=p["finest_n"], T=p["T"], x0=p["x0"],
                  batch_size=p["batch_size"], workers=workers)
    if with_drift:
        drift = _drifts.builtin(p["drift"], p["dimension"], **p["drift_params"])
        report = _quad.quadrature_statistic_em(func, drift, p["levels"], **common)
    else:
        report = _quad.quadrature_statistic_brownian(func, p["levels"], **common)
    results = {"report": report.to_dict()}
    checks = {}
    plain = report.plain_fit.slope if report.plain_fit else None
    corrected = report.corrected_fit.slope if report.corrected_fit else None
    if p["assert_slope"] is not None:
        checks["slope_in_bracket"] = _in_bracket(plain, p["assert_slope"])
    if p["assert_corrected_slope"] is not None:
        checks["corrected_slope_in_bracket"] = _in_bracket(corrected, p["assert_corrected_slope"])
    return results, checks, {"quadrature.csv": report.csv_rows()}


def _run_zvonkin(p, seed, workers):
    drift = _drifts.builtin(p["drift"], 1, **p["drift_params"])
    table = _zv.build_scale_table(drift, p["z"], R=p["R"], h=p["h"])
    residual = _zv.verify_ode_residual(table, drift)
    bounds = _zv.verify_lipschitz_bounds(table, drift)
    inv_err = float(np.max(np.abs(table.psi_at(table.phi) - table.grid)))
    mart = _zv.transformed_driftlessness_check(
        drift, n=p["martingale_n"], z=p["z"], M=p["martingale_M"], T=p["martingale_T"], seed=seed,
        table=table, sigmas=p["martingale_sigmas"])
    results = {
        "inverse_max_error": inv_err,
        "residual": residual.__dict__,
        "bounds": bounds.__dict__,
        "driftlessness": mart.__dict__,
    }
    checks = {
        "inverse_identity": inv_err <= 1e-10,
        "ode_residual": residual.passed,
        "lipschitz_bounds": bounds.passed,
        "driftlessness": mart.passed,
    }
    rows = [["x", "phi", "phi_prime", "psi_of_grid"]]
    rows += [[repr(float(a)), repr(float(b)), repr(float(c)), repr(float(e))]
             for a, b, c, e in zip(table.grid, table.phi, table.phi_prime, table.psi)]
    return results, checks, {"scale_table.csv": rows}


def _field_rows(F, stride):
    rows = [["t"] + [f"x{i + 1}" for i in range(F.grid.d)] + ["u"] + [f"du_dx{i + 1}" for i in range(F.grid.d)]]
    X = F.grid.mesh().reshape(-1, F.grid.d)
    for k in range(0, F.times.size, stride):
        u = F.u[k].reshape(-1)
        g = F.grad[k].reshape(F.grid.d, -1)
        for q in range(X.shape[0]):
            rows.append([repr(float(F.times[k]))] + [repr(float(v)) for v in X[q]] + [repr(float(u[q]))]
                        + [repr(float(v)) for v in g[:, q]])
    return rows


def _run_pde(p, seed, workers):
    d = p["dimension"]
    grid = _pde.BoxGrid(d, p["N"], p["L"])
    f = _drifts.builtin(p["drift"], d, **p["drift_params"])
    src = SOURCES[p["source"]]
    if p["source_params"]:
        src = partial(src, **p["source_params"])
    kw = dict(K=p["K"], rule=p["rule"], tol=p["tol"], max_iter=p["max_iter"])
    T0 = p["T0"] if p["T0"] is not None else _pde.find_contractive_horizon(f, src, grid, **kw)
    g_sup = float(np.max(np.abs(src(0.0, grid.mesh()))))

    one = _pde.heat_mild_solve(_src_one, T0, grid, K=p["K"], rule=p["rule"])
    t_err = float(np.max(np.abs(one.u[:, one.interior] - one.times[:, None])))

    scaling, fields = [], {}
    for T in (T0 / 4, T0 / 2, T0):
        F = _pde.drift_pde_solve(f, src, T, grid, **kw)
        fields[T] = F
        g = F.sup("grad")
        scaling.append({
            "T": T, "sup_u": F.sup("u"), "sup_grad": g, "ratio": g / math.sqrt(T),
            "holder_ratio": _pde.holder_gradient_seminorm(F, every=max(1, p["K"] // 8)) / T**0.25,
            "iterations": F.iterations, "contraction": F.contraction,
        })
    ratios = [s["ratio"] for s in scaling]
    heat = _pde.heat_mild_solve(src, T0, grid, K=p["K"], rule=p["rule"])
    blow = _pde.verify_kernel_blowup(_pde.BoxGrid(1, p["N"], p["L"]))
    results = {
        "T0": T0,
        "one_source_max_error": t_err,
        "heat_sup_u": heat.sup("u"),
        "heat_bound": T0 * g_sup,
        "gradient_scaling": scaling,
        "kernel_blowup": {"slopes": {str(k): v for k, v in blow.slopes.items()}, "passed": blow.passed},
    }
    checks = {
        "one_source_is_t": t_err <= 1e-6,
        "sup_bound_n1": heat.sup("u") <= T0 * g_sup * (1 + 1e-9),
        "kernel_blowup_slopes": blow.passed,
        "gradient_ratio_within_2": max(ratios) <= 2 * min(ratios),
    }
    rows = [["T", "sup_grad", "ratio", "holder_ratio"]]
    rows += [[repr(s["T"]), repr(s["sup_grad"]), repr(s["ratio"]), repr(s["holder_ratio"])] for s in scaling]
    tables = {"gradient_scaling.csv": rows}
    if d == 1:
        tables["pde_field.csv"] = _field_rows(fields[T0], p["csv_time_stride"])
    return results, checks, tables


def _run_kernel_blowup(p, seed, workers):
    grid = _pde.BoxGrid(p["dimension"], p["N"], p["L"])
    rep = _pde.verify_kernel_blowup(grid, p["times"], tol=p["tol"])
    results = {"times": list(rep.times), "norms": {str(k): v for k, v in rep.norms.items()},
               "slopes": {str(k): v for k, v in rep.slopes.items()}}
    rows = [["t", "k", "l1_norm", "exact"]]
    for k in (0, 1, 2):
        for t, v in zip(rep.times, rep.norms[k]):
            rows.append([repr(t), k, repr(v), repr(_pde.kernel_derivative_l1_exact(t, k))])
    return results, {"slopes_within_tol": rep.passed}, {"kernel_blowup.csv": rows}


_RUNNERS = {
    "error_curve": _run_error_curve,
    "quadrature_w": lambda p, s, w: _run_quadrature(p, s, w, False),
    "quadrature_em": lambda p, s, w: _run_quadrature(p, s, w, True),
    "zvonkin": _run_zvonkin,
    "pde": _run_pde,
    "kernel_blowup": _run_kernel_blowup,
}


def _seed_ledger(cfg: ExperimentConfig, p: dict) -> dict:
    ledger = {"experiment_seed": cfg.seed, "generator": "numpy Philox keyed by (experiment_seed, path_index)"}
    if "M" in p:
        ledger["path_indices"] = [0, p["M"]]
    if cfg.kind == "zvonkin":
        ledger["path_indices"] = [0, p["martingale_M"]]
    if cfg.kind in ("pde", "kernel_blowup"):
        ledger["generator"] = None
    return ledger


def dumps(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def execute(cfg: ExperimentConfig) -> RunOutcome:
    """Validate and run without writing files."""
    errors = validate(cfg)
    if errors:
        return RunOutcome(EXIT_VALIDATION, errors=errors)
    p = cfg.completed()
    start = time.perf_counter()
    try:
        results, checks, tables = _RUNNERS[cfg.kind](p, cfg.seed, cfg.workers)
    except ConfigError as exc:
        return RunOutcome(EXIT_VALIDATION, errors=str(exc).split("; "))
    except (ArithmeticError, _pde.KernelLeakageError, _pde.UnderResolvedKernelError) as exc:
        return RunOutcome(EXIT_ASSERTION, errors=[f"{type(exc).__name__}: {exc}"])
    payload = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "config": cfg.echo(),
        "seed_ledger": _seed_ledger(cfg, p),
        "results": results,
        "checks": checks,
        WALL_CLOCK_KEY: round(time.perf_counter() - start, 3),
    }
    payload = json.loads(dumps(payload))  # normalise tuples and numpy scalars
    code = EXIT_OK if all(checks.values()) else EXIT_ASSERTION
    failed = [k for k, v in checks.items() if not v]
    return RunOutcome(code, payload, [f"check failed: {k}" for k in failed], tables=tables)


def run(cfg: ExperimentConfig) -> RunOutcome:
    """Run ``cfg`` and write ``results.json`` plus its CSV tables into ``cfg.out``."""
    outcome = execute(cfg)
    if outcome.payload is None:
        return outcome
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.json").write_text(dumps(outcome.payload))
    for name, rows in outcome.tables.items():
        with open(out / name, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    outcome.out_dir = out
    return outcome


def _diff(a, b, path="") -> list[str]:
    if isinstance(a, dict) and isinstance(b, dict):
        out = []
        for k in sorted(set(a) | set(b)):
            sub = f"{path}.{k}" if path else str(k)
            if k not in a or k not in b:
                out.append(sub)
            else:
                out.extend(_diff(a[k], b[k], sub))
        return out
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return [path]
        out = []
        for i, (x, y) in enumerate(zip(a, b)):
            out.extend(_diff(x, y, f"{path}[{i}]"))
        return out
    same = a == b or (isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b))
    return [] if same else [path]


def reproduce(result_json, workers: int = 1) -> dict:
    """Re-run the config embedded in ``result_json`` and compare results field by field.

    Returns ``{"verdict": "identical" | "mismatch" | "version_mismatch",
    "mismatches": [...], ...}``; mismatch paths are dotted, e.g.
    ``results.curve.mse[3]``.
    """
    with open(result_json) as fh:
        stored = json.load(fh)
    version = stored.get("package_version")
    if version != __version__:
        return {"verdict": "version_mismatch", "mismatches": [],
                "detail": f"result written by version {version}, this is {__version__}"}
    if stored.get("schema_version") != SCHEMA_VERSION:
        return {"verdict": "version_mismatch", "mismatches": [],
                "detail": f"schema {stored.get('schema_version')} differs from {SCHEMA_VERSION}"}
    echo = dict(stored["config"])
    cfg = ExperimentConfig(echo.pop("kind"), echo.pop("seed"), echo, workers,
                           tempfile.mkdtemp(prefix="emlab-reproduce-"))
    fresh = execute(cfg)
    if fresh.payload is None:
        return {"verdict": "mismatch", "mismatches": ["run_failed"], "detail": "; ".join(fresh.errors)}
    mismatches = []
    for key in ("config", "seed_ledger", "results", "checks"):
        mismatches += _diff(stored.get(key), fresh.payload.get(key), key)
    return {"verdict": "identical" if not mismatches else "mismatch", "mismatches": mismatches}
