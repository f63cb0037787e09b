"""One-dimensional scale function that removes a bounded drift locally.

For a centre ``z`` the scale function is

    phi_z(x) = int_0^x exp(-2 int_z^r 1{|z - s| <= 2} b(s) ds) dr,

so that ``phi_z'' = -2 b phi_z'`` on ``[z - 2, z + 2]`` and ``phi_z`` is
affine outside that window.  ``psi_z`` denotes its inverse.

Numerics: the inner integral uses the composite midpoint rule on cells of
width ``h/4`` anchored at ``z`` (so ``b`` is never evaluated at a cell edge);
the outer integral uses Simpson's rule on cells of width ``h`` whose midpoint
values come from the same quarter grid.  The base point ``0`` of the outer
integral is honoured exactly; only differences of ``phi_z`` matter for the
transformed process.

Crude bounds used by :func:`verify_lipschitz_bounds`, with ``S = sup|b|``:
the inner integral is at most ``4 S`` in absolute value (the window has length
4), so ``e^{-8S} <= phi' <= e^{8S}``, ``|phi''| = 2|b| phi' <= 2S e^{8S}``,
``psi' = 1/phi'(psi) <= e^{8S}`` and ``|(phi' o psi)'| = |phi''/phi'|(psi) <=
2S``.  Each of the four is at most ``e^{8S} (1 + 2S)^2``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .drifts import DriftSpec
from .rng_paths import generate_batch

__all__ = [
    "ScaleTable",
    "QuadratureStepError",
    "build_scale_table",
    "verify_ode_residual",
    "verify_lipschitz_bounds",
    "transformed_driftlessness_check",
    "crude_bound",
    "ResidualReport",
    "BoundReport",
    "DriftlessnessReport",
]

WINDOW = 2.0


class QuadratureStepError(ArithmeticError):
    """Residual or bound violation: the quadrature step is too coarse."""


def crude_bound(sup_b: float) -> float:
    return math.exp(8 * sup_b) * (1 + 2 * sup_b) ** 2


def _scalar_drift(drift: DriftSpec):
    if drift.dimension != 1:
        raise ValueError("the scale function is one-dimensional; got a drift of dimension "
                         f"{drift.dimension}")

    def b(x):
        x = np.asarray(x, dtype=float)
        return drift.evaluate(x[..., None])[..., 0]

    return b


class _Inner:
    """``I(x) = int_z^x 1{|z - s| <= 2} b(s) ds`` by midpoint cells of width q."""

    def __init__(self, b, z: float, q: float):
        self.z, self.q = z, q
        cells = int(math.ceil(WINDOW / q))
        mids = (np.arange(cells) + 0.5) * q
        # right side: cells [z + i q, z + (i+1) q]; left side mirrored
        vr = b(z + mids) * (mids <= WINDOW)
        vl = b(z - mids) * (mids <= WINDOW)
        self.right = np.concatenate([[0.0], np.cumsum(vr * q)])
        self.left = np.concatenate([[0.0], np.cumsum(vl * q)])
        self.b = b
        self.cells = cells

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        u = np.clip(x - self.z, -WINDOW, WINDOW)
        a = np.abs(u)
        m = np.minimum(np.floor(a / self.q).astype(np.int64), self.cells)
        rho = a - m * self.q
        pos = u >= 0
        cum = np.where(pos, self.right[m], self.left[m])
        # partial last cell, midpoint rule on [m q, m q + rho]
        with np.errstate(invalid="ignore"):
            pm = self.z + np.where(pos, 1.0, -1.0) * (m * self.q + rho / 2)
            part = np.where(rho > 0, self.b(pm) * rho, 0.0)
        return np.where(pos, cum + part, -(cum + part))

    def at_quarter(self, i):
        """Exact table value at ``z + i q`` for integer ``i``."""
        i = np.asarray(i)
        k = np.minimum(np.abs(i), self.cells)
        return np.where(i >= 0, self.right[k], -self.left[k])


@dataclass(frozen=True, eq=False)
class ScaleTable:
    z: float
    h: float
    grid: np.ndarray
    phi: np.ndarray
    phi_prime: np.ndarray
    phi_second: np.ndarray
    y_grid: np.ndarray
    psi: np.ndarray
    sup_b: float
    _inner: _Inner
    _b: object

    def phi_prime_at(self, x):
        return np.exp(-2.0 * self._inner(x))

    def phi_second_at(self, x):
        x = np.asarray(x, dtype=float)
        ind = np.abs(x - self.z) <= WINDOW
        return -2.0 * np.where(ind, self._b(x), 0.0) * self.phi_prime_at(x)

    def _cell(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.grid[0] - 1e-12) or np.any(x > self.grid[-1] + 1e-12):
            raise ValueError("point outside the scale table")
        j = np.clip(np.floor((x - self.grid[0]) / self.h).astype(np.int64), 0, self.grid.size - 2)
        t = (x - self.grid[j]) / self.h
        return j, t

    def _hermite(self, j, t):
        h = self.h
        p0, p1 = self.phi[j], self.phi[j + 1]
        m0, m1 = self.phi_prime[j] * h, self.phi_prime[j + 1] * h
        t2, t3 = t * t, t * t * t
        val = (2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * p1 + (t3 - t2) * m1
        der = ((6 * t2 - 6 * t) * p0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * p1 + (3 * t2 - 2 * t) * m1) / h
        return val, der

    def phi_at(self, x):
        """``phi_z`` off the grid by cubic Hermite interpolation of (phi, phi')."""
        j, t = self._cell(x)
        return self._hermite(j, t)[0]

    def psi_at(self, y):
        """Inverse of :meth:`phi_at`: bisection on the monotone table, then one Newton step."""
        y = np.asarray(y, dtype=float)
        if np.any(y < self.phi[0] - 1e-12) or np.any(y > self.phi[-1] + 1e-12):
            raise ValueError("value outside the range of the scale table")
        j = np.clip(np.searchsorted(self.phi, y, side="right") - 1, 0, self.grid.size - 2)
        lo = np.zeros_like(y)
        hi = np.ones_like(y)
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            below = self._hermite(j, mid)[0] < y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        t = 0.5 * (lo + hi)
        val, der = self._hermite(j, t)
        x = self.grid[j] + t * self.h
        return x - (val - y) / der

    def write_csv(self, filename) -> None:
        """Columns ``x, phi, phi_prime, psi_at_phi`` (the last checks the inverse)."""
        psi_back = self.psi_at(self.phi)
        with open(filename, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "phi", "phi_prime", "psi"])
            for row in zip(self.grid, self.phi, self.phi_prime, psi_back):
                w.writerow([repr(float(v)) for v in row])


def _simpson(phi_prime, a: float, b: float, max_step: float) -> float:
    if a == b:
        return 0.0
    cells = max(1, int(math.ceil(abs(b - a) / max_step)))
    x = np.linspace(a, b, cells + 1)
    w = (b - a) / cells
    mid = 0.5 * (x[:-1] + x[1:])
    return float(np.sum(w / 6.0 * (phi_prime(x[:-1]) + 4 * phi_prime(mid) + phi_prime(x[1:]))))


def build_scale_table(drift: DriftSpec, z: float = 0.0, R: float = 3.0, h: float = 1e-3) -> ScaleTable:
    """Tabulate ``phi_z``, ``phi_z'``, ``phi_z''`` on ``[z - R, z + R]`` with step ``h``."""
    if not h > 0 or not R > 0:
        raise ValueError("need h > 0 and R > 0")
    J = int(round(R / h))
    if abs(J * h - R) > 1e-9 * R:
        raise ValueError(f"R = {R} is not a multiple of h = {h}")
    b = _scalar_drift(drift)
    q = h / 4.0
    inner = _Inner(b, float(z), q)
    j = np.arange(-J, J + 1)
    grid = z + j * h
    phi_p = np.exp(-2.0 * inner.at_quarter(4 * j))
    mid_p = np.exp(-2.0 * inner.at_quarter(4 * j[:-1] + 2))
    # integral from z, cumulated outward in both directions from the centre node
    cells = h / 6.0 * (phi_p[:-1] + 4 * mid_p + phi_p[1:])
    tilde = np.empty_like(grid)
    tilde[J] = 0.0
    tilde[J + 1:] = np.cumsum(cells[J:])
    tilde[:J] = -np.cumsum(cells[:J][::-1])[::-1]

    def pp(x):
        return np.exp(-2.0 * inner(x))

    # tilde(0) = int_z^0 phi'
    if grid[0] <= 0.0 <= grid[-1]:
        j0 = min(int(math.floor((0.0 - grid[0]) / h)), grid.size - 1)
        base = tilde[j0] + _simpson(pp, grid[j0], 0.0, h)
    elif 0.0 < grid[0]:
        base = tilde[0] - _simpson(pp, 0.0, grid[0], h)
    else:
        base = tilde[-1] + _simpson(pp, grid[-1], 0.0, h)
    phi = tilde - base
    ind = np.abs(grid - z) <= WINDOW
    phi_s = -2.0 * np.where(ind, b(grid), 0.0) * phi_p
    if np.any(np.diff(phi) <= 0):
        raise QuadratureStepError("scale table is not strictly increasing")
    sup_b = float(drift.sup_bound)
    table = ScaleTable(float(z), float(h), grid, phi, phi_p, phi_s, np.array([]), np.array([]), sup_b, inner, b)
    y_grid = np.linspace(phi[0], phi[-1], grid.size)
    psi = table.psi_at(y_grid)
    object.__setattr__(table, "y_grid", y_grid)
    object.__setattr__(table, "psi", psi)
    return table


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    tolerance: float
    checked_points: int
    excluded_points: int
    max_fd_vs_analytic: float
    passed: bool


@dataclass(frozen=True)
class BoundReport:
    sup_phi_prime: float
    sup_phi_second: float
    sup_psi_prime: float
    sup_phi_prime_psi_prime: float
    bound: float
    passed: bool

    def suprema(self) -> tuple:
        return (self.sup_phi_prime, self.sup_phi_second, self.sup_psi_prime, self.sup_phi_prime_psi_prime)


def verify_ode_residual(table: ScaleTable, drift: DriftSpec, discontinuities=None, strict: bool = False,
                        tol_factor: float = 10.0, radius: float | None = None) -> ResidualReport:
    """Check ``phi''/2 + b phi' = 0`` with a centred difference of ``phi'``.

    Nodes whose stencil ``[x - h, x + h]`` leaves the window ``|x - z| <= 2``
    lies within ``radius`` (default ``h``) of a point of ``discontinuities``
    (default: the jumps of ``b``) are excluded.  The tolerance is
    ``tol_factor * h^2 * (1 + sup|b|)^3``; the centred difference is within
    it only where ``b''`` is moderate, so for a cusp such as the centre of the
    Hoelder drift list the cusp and pass a radius of order 0.1.
    """
    h, z, x = table.h, table.z, table.grid
    b = _scalar_drift(drift)
    if discontinuities is None:
        discontinuities = drift.jumps(x[0], x[-1]) if drift.jumps is not None else np.empty(0)
    jumps = np.asarray(discontinuities, dtype=float)
    interior = np.zeros(x.size, dtype=bool)
    interior[1:-1] = True
    interior &= np.abs(x - z) + h <= WINDOW + 1e-12
    near_jump = np.zeros(x.size, dtype=bool)
    radius = h if radius is None else max(radius, h)
    for p in jumps:
        near_jump |= np.abs(x - p) <= radius * (1 + 1e-9)
    eligible = interior & ~near_jump
    idx = np.flatnonzero(eligible)
    fd = (table.phi_prime[idx + 1] - table.phi_prime[idx - 1]) / (2 * h)
    res = 0.5 * fd + b(x[idx]) * table.phi_prime[idx]
    tol = tol_factor * h**2 * (1 + table.sup_b) ** 3
    max_res = float(np.max(np.abs(res))) if idx.size else 0.0
    fd_gap = float(np.max(np.abs(fd - table.phi_second[idx]))) if idx.size else 0.0
    report = ResidualReport(max_res, tol, int(idx.size), int(np.count_nonzero(interior & near_jump)), fd_gap,
                            max_res <= tol)
    if strict and not report.passed:
        raise QuadratureStepError(f"ODE residual {max_res:.3e} exceeds {tol:.3e}; refine h")
    return report


def verify_lipschitz_bounds(table: ScaleTable, drift: DriftSpec, strict: bool = False) -> BoundReport:
    """Grid suprema of ``|phi'|, |phi''|, |psi'|, |(phi' o psi)'|`` against the crude bound."""
    b = _scalar_drift(drift)
    x_pts = np.concatenate([table.grid, table.psi])
    pp = np.concatenate([table.phi_prime, table.phi_prime_at(table.psi)])
    ind = np.abs(x_pts - table.z) <= WINDOW
    bx = np.where(ind, b(x_pts), 0.0)
    s1 = float(np.max(np.abs(pp)))
    s2 = float(np.max(np.abs(2.0 * bx * pp)))
    s3 = float(np.max(1.0 / pp))
    s4 = float(np.max(np.abs(2.0 * bx)))
    bound = crude_bound(table.sup_b)
    report = BoundReport(s1, s2, s3, s4, bound, max(s1, s2, s3, s4) <= bound)
    if strict and not report.passed:
        raise QuadratureStepError(f"scale-function bound violated: {report}")
    return report


@dataclass(frozen=True)
class DriftlessnessReport:
    mean_increment: float
    stderr: float
    z_score: float
    exit_fraction: float
    path_count: int
    passed: bool


def transformed_driftlessness_check(drift: DriftSpec, n: int = 2**12, z: float = 0.0, M: int = 100_000,
                                    T: float = 0.25, seed: int = 0, h: float = 1e-3, batch_size: int = 10_000,
                                    table: ScaleTable | None = None, sigmas: float = 5.0) -> DriftlessnessReport:
    """Martingale check of ``Y = phi_z(X)`` stopped on leaving ``[z - 1, z + 1]``.

    ``X`` is the level-``n`` Euler-Maruyama path started at ``z``; it is
    stopped at the first grid time with ``|X - z| > 1`` or at ``T``.  The
    sample mean of ``Y_stop - Y_0`` must be within ``sigmas`` standard errors
    of zero.
    """
    if table is None:
        table = build_scale_table(drift, z, R=3.0, h=h)
    b = _scalar_drift(drift)
    y0 = float(table.phi_at(np.array(z)))
    incs, exited = [], 0
    for start in range(0, M, batch_size):
        idx = range(start, min(start + batch_size, M))
        W = generate_batch(seed, idx, 1, n, T)[:, :, 0]
        x = np.full(W.shape[1], float(z))
        active = np.ones(W.shape[1], dtype=bool)
        for k in range(W.shape[0] - 1):
            step = b(x) / n + (W[k + 1] - W[k])
            x = np.where(active, x + step, x)
            active &= np.abs(x - z) <= 1.0
        exited += int(np.count_nonzero(~active))
        incs.append(table.phi_at(x) - y0)
    inc = np.concatenate(incs)
    mean = float(np.mean(inc))
    se = float(np.std(inc, ddof=1) / math.sqrt(inc.size))
    zs = mean / se if se > 0 else 0.0
    return DriftlessnessReport(mean, se, zs, exited / M, M, abs(mean) <= sigmas * se if se > 0 else mean == 0.0)
