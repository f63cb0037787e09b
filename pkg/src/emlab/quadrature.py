"""Quadrature-error statistics of a bounded functional along Brownian and EM paths.

For a test functional ``f(s, x, y)`` and deterministic times ``tau <= tau'``
the statistic at level ``n`` is

    Q(n) = E | int_tau^tau' f(s, Z_s, Y) - f(s, Z_{k_n(s)}, Y) ds |^2,

with ``k_n(s) = floor(n s) / n`` and ``Z`` either ``x0 + W`` or the
continuous-time Euler-Maruyama path of level ``n``.  The time integral is a
left-endpoint Riemann sum on the finest grid.  ``Y`` is an optional frozen
parameter drawn once per path from ``y_sampler(rng, Z_tau)``, where ``rng``
is a stream of its own keyed by the path seed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable

import numpy as np

from . import drifts as _drifts
from .em import em_batch, extend_batch
from .moments import Moments, tree_reduce
from .parallel import batches, map_batches
from .rates import LOG_CORRECTED, PLAIN, RateFit, fit_rate
from .rng_paths import PathSeed, check_grid, generate_batch, grid_index

__all__ = [
    "TestFunctional",
    "ScalingReport",
    "UnboundedFunctionalError",
    "functional",
    "functional_names",
    "quadrature_statistic_brownian",
    "quadrature_statistic_em",
    "linear_functional_exact",
]


class UnboundedFunctionalError(ValueError):
    pass


@dataclass(frozen=True)
class TestFunctional:
    name: str
    f: Callable
    sup_bound: float
    tau: float = 0.0
    tau_prime: float = 1.0
    y_sampler: Callable | None = None
    params: dict = field(default_factory=dict)
    # f does not depend on s: coarse values can be computed once per coarse point
    autonomous: bool = False

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not 0 <= self.tau <= self.tau_prime:
            raise ValueError(f"need 0 <= tau <= tau', got {self.tau}, {self.tau_prime}")

    def __call__(self, s, x, y=None):
        return self.f(s, x, y)

    def scaled(self, c: float) -> "TestFunctional":
        return replace(self, f=partial(_scaled, g=self.f, c=float(c)), sup_bound=abs(c) * self.sup_bound,
                       params={**self.params, "scale": c * self.params.get("scale", 1.0)})

    def shifted(self, a: float) -> "TestFunctional":
        return replace(self, f=partial(_shifted, g=self.f, a=float(a)), sup_bound=self.sup_bound + abs(a),
                       params={**self.params, "shift": a + self.params.get("shift", 0.0)})

    def config(self) -> dict:
        return {"name": self.name, "tau": self.tau, "tau_prime": self.tau_prime, "params": dict(self.params)}


def _scaled(s, x, y, g, c):
    return c * g(s, x, y)


def _shifted(s, x, y, g, a):
    return g(s, x, y) + a


def _sign_sin(s, x, y):
    # sign(sin(pi x)) = (-1)^floor(x) off the integers, 0 on them; avoids sin's rounding near k*pi
    x1 = x[..., 0]
    fl = np.floor(x1)
    out = np.where(np.remainder(fl, 2.0) == 0.0, 1.0, -1.0)
    out[x1 == fl] = 0.0
    return out


def _linear(s, x, y, cap):
    return np.clip(x[..., 0], -cap, cap)


def _constant(s, x, y, c):
    return np.full(x.shape[:-1], c)


def _indicator(s, x, y):
    return (x[..., 0] > 0).astype(float)


def _time_modulated(s, x, y):
    return np.cos(np.pi * s) * np.sign(np.sin(np.pi * x[..., 0]))


def _shifted_sign(s, x, y):
    # y: per-path offset of shape (B,), broadcast against the time axis
    return np.sign(x[..., 0] - y)


_AUTONOMOUS = {"sign_sin", "linear", "constant", "indicator", "shifted_sign"}

_FUNCTIONALS = {
    "sign_sin": (lambda **p: (_sign_sin, 1.0), "sign(sin(pi x_1))"),
    "linear": (lambda cap=50.0: (partial(_linear, cap=float(cap)), float(cap)),
               "x_1 truncated to [-cap, cap] (default cap 50)"),
    "constant": (lambda c=1.0: (partial(_constant, c=float(c)), abs(float(c))), "constant c"),
    "indicator": (lambda **p: (_indicator, 1.0), "1{x_1 > 0}"),
    "time_modulated": (lambda **p: (_time_modulated, 1.0), "cos(pi s) sign(sin(pi x_1))"),
    "shifted_sign": (lambda **p: (_shifted_sign, 1.0), "sign(x_1 - Y), Y frozen at time tau"),
}


def functional_names() -> dict[str, str]:
    return {k: v[1] for k, v in _FUNCTIONALS.items()}


def _y_at_tau(rng, z_tau):
    return z_tau[..., 0] + rng.uniform(-0.5, 0.5, size=z_tau.shape[0])


def functional(name: str, tau: float = 0.0, tau_prime: float = 1.0, scale: float = 1.0, shift: float = 0.0,
               **params) -> TestFunctional:
    """Look up a registered test functional, optionally as ``scale * f + shift``."""
    try:
        make = _FUNCTIONALS[name][0]
    except KeyError:
        raise KeyError(f"unknown functional {name!r}; known: {sorted(_FUNCTIONALS)}") from None
    f, sup = make(**params)
    sampler = _y_at_tau if name == "shifted_sign" else None
    out = TestFunctional(name, f, sup, float(tau), float(tau_prime), sampler, dict(params),
                         autonomous=name in _AUTONOMOUS)
    if scale != 1.0:
        out = out.scaled(scale)
    if shift != 0.0:
        out = out.shifted(shift)
    return out


@dataclass
class ScalingReport:
    functional_name: str
    path_kind: str
    levels: list
    values: list
    ci_half_width: list
    path_count: int
    finest_n: int
    seed: int
    drift_name: str | None = None
    plain_fit: RateFit | None = None
    corrected_fit: RateFit | None = None

    fit_values_attr = "values"

    @property
    def exact(self) -> bool:
        return all(v == 0.0 for v in self.values)

    def to_dict(self) -> dict:
        return {
            "functional_name": self.functional_name,
            "path_kind": self.path_kind,
            "drift_name": self.drift_name,
            "levels": list(self.levels),
            "values": list(self.values),
            "ci_half_width": list(self.ci_half_width),
            "path_count": self.path_count,
            "finest_n": self.finest_n,
            "seed": self.seed,
            "exact": self.exact,
            "plain_fit": self.plain_fit.to_dict() if self.plain_fit else None,
            "corrected_fit": self.corrected_fit.to_dict() if self.corrected_fit else None,
        }

    def csv_rows(self) -> list[list]:
        rows = [["n", "Q", "ci"]]
        rows += [[n, repr(v), repr(c)] for n, v, c in zip(self.levels, self.values, self.ci_half_width)]
        return rows

    def write_csv(self, filename) -> None:
        with open(filename, "w", newline="") as fh:
            csv.writer(fh).writerows(self.csv_rows())


def _path_integrals(func: TestFunctional, Z: np.ndarray, finest_n: int, levels, i0: int, i1: int, y):
    """Per-path Riemann sums, shape ``(len(levels), B)``."""
    s = (np.arange(i0, i1) / finest_n)[:, None]
    fz = func(s, Z[i0:i1], y)
    bound = func.sup_bound * (1 + 1e-12)
    if np.any(np.abs(fz) > bound):
        raise UnboundedFunctionalError(f"{func.name}: sample exceeds sup_bound {func.sup_bound}")
    h = 1.0 / finest_n
    out = np.empty((len(levels), Z.shape[1]))
    j = np.arange(i0, i1)
    for li, n in enumerate(levels):
        r = finest_n // n
        if func.autonomous:
            fk = func(None, Z[::r], y)[j // r]
        else:
            fk = func(s, Z[(j // r) * r], y)
        out[li] = h * np.sum(fz - fk, axis=0)
    crude = 2 * func.sup_bound * (func.tau_prime - func.tau) * (1 + 1e-9)
    if np.any(np.abs(out) > crude):
        raise UnboundedFunctionalError(f"{func.name}: a path integral exceeds 2 sup|f| (tau' - tau)")
    return out


def _frozen_y(func: TestFunctional, seed: int, path_range, Z_tau):
    if func.y_sampler is None:
        return None
    ys = []
    for j, idx in enumerate(path_range):
        key = np.array([seed, idx], dtype=np.uint64)
        # counter offset keeps this stream disjoint from the path's increments
        rng = np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, 1]))
        ys.append(func.y_sampler(rng, Z_tau[j:j + 1])[0])
    return np.asarray(ys)


def _quad_batch(task) -> Moments:
    func, drift_cfg, path_range, seed, levels, finest_n, T, d, x0 = task
    W = generate_batch(seed, path_range, d, finest_n, T)
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), W.shape[1:])
    i0 = grid_index(func.tau, finest_n, T)
    i1 = grid_index(func.tau_prime, finest_n, T)
    if drift_cfg is None:
        Z = x0 + 0.0 + W
        y = _frozen_y(func, seed, path_range, Z[i0])
        vals = _path_integrals(func, Z, finest_n, levels, i0, i1, y)
    else:
        drift = _drifts.builtin(drift_cfg["name"], drift_cfg["dimension"], **drift_cfg["params"])
        vals = np.empty((len(levels), W.shape[1]))
        for li, n in enumerate(levels):
            X, D = em_batch(drift, W, finest_n, n, x0, return_drift_sum=True)
            Z = extend_batch(drift, X, D, W, finest_n, n, x0)
            y = _frozen_y(func, seed, path_range, Z[i0])
            vals[li] = _path_integrals(func, Z, finest_n, [n], i0, i1, y)[0]
    return Moments.from_samples(vals.T ** 2, axis=0)


def _run(func, drift, levels, M, seed, d, finest_n, T, x0, batch_size, workers, kind) -> ScalingReport:
    levels = [int(n) for n in levels]
    if finest_n is None:
        finest_n = 16 * max(levels)
    check_grid(finest_n, T)
    bad = [n for n in levels if n < 1 or finest_n % n]
    if bad:
        raise ValueError(f"levels {bad} do not divide finest_n = {finest_n}")
    if func.tau_prime > T:
        raise ValueError(f"tau' = {func.tau_prime} exceeds T = {T}")
    drift_cfg = None
    if drift is not None:
        if drift.dimension != d:
            raise ValueError("drift dimension differs from d")
        drift_cfg = drift.config()
    tasks = [(func, drift_cfg, r, seed, levels, finest_n, T, d, x0) for r in batches(M, batch_size)]
    mom = tree_reduce(map_batches(_quad_batch, tasks, workers))
    report = ScalingReport(
        functional_name=func.name, path_kind=kind, levels=levels, values=[float(v) for v in mom.mean],
        ci_half_width=[float(v) for v in mom.ci_half_width()], path_count=int(M), finest_n=int(finest_n),
        seed=int(seed), drift_name=drift.name if drift is not None else None,
    )
    if not report.exact and len(levels) >= 4 and all(v > 0 for v in report.values):
        report.plain_fit = fit_rate(report, PLAIN)
        report.corrected_fit = fit_rate(report, LOG_CORRECTED)
    return report


def quadrature_statistic_brownian(func: TestFunctional, levels, M: int, seed: int = 0, d: int = 1,
                                  finest_n: int | None = None, T: float = 1.0, x0=0.0, batch_size: int = 500,
                                  workers: int = 1) -> ScalingReport:
    """Estimate ``Q_W(n)`` along ``x0 + W`` for each level (``finest_n`` defaults to 16 x max level)."""
    return _run(func, None, levels, M, seed, d, finest_n, T, x0, batch_size, workers, "brownian")


def quadrature_statistic_em(func: TestFunctional, drift, levels, M: int, seed: int = 0, d: int = 1,
                            finest_n: int | None = None, T: float = 1.0, x0=0.0, batch_size: int = 500,
                            workers: int = 1) -> ScalingReport:
    """Estimate ``Q_X(n)`` along the continuous-time level-``n`` EM path."""
    if drift is None:
        raise ValueError("quadrature_statistic_em needs a drift")
    return _run(func, drift, levels, M, seed, d, finest_n, T, x0, batch_size, workers, "euler_maruyama")


def linear_functional_exact(n: int, finest_n: int, T: float = 1.0) -> float:
    """Exact value of the discretised statistic for ``f(s, x) = x_1`` on ``[0, T]``.

    On each coarse cell of ``m = finest_n / n`` fine steps of size ``h`` the
    Riemann sum equals ``h sum_l xi_l (m - 1 - l)`` with independent
    ``xi_l ~ N(0, h)``; cells are independent, so

        Q = n T h^3 (m - 1) m (2m - 1) / 6  ->  T / (3 n^2)   as h -> 0.
    """
    m = finest_n // n
    h = 1.0 / finest_n
    return n * T * h**3 * (m - 1) * m * (2 * m - 1) / 6.0
