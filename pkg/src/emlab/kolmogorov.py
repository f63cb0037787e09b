"""Heat-semigroup (mild) solutions of du/dt = Laplacian(u)/2 + f . grad u + g, u(0) = 0.

Space is the box ``[-L, L]^d`` with ``N`` nodes per axis; the source is zero
outside the box, so values within ``pad = 6 sqrt(T) + sup|f| T`` of the edge
are a boundary layer and all norms are taken over the interior.  The
Gaussian mass dropped beyond ``6 sqrt(T)`` is ``2 Phi(-6) < 2e-9`` per axis.

The spatial kernel of ``P_t`` is the heat kernel integrated over grid cells,
``w_i(t) = Phi((i + 1/2) hx / sqrt t) - Phi((i - 1/2) hx / sqrt t)`` per axis:
nonnegative, total mass one on the infinite lattice, and the identity at
``t = 0``.  Two time rules are available:

``trapezoid``
    ``u(t_k) = ht [P_{t_k} g_0 / 2 + sum_{0<j<k} P_{t_k - t_j} g_j + g_k / 2]``.
``product``
    ``u(t_k) = sum_{j<k} (int_{t_j}^{t_{j+1}} P_{t_k - s} ds) (g_j + g_{j+1}) / 2``
    with the kernel integrated exactly in time (Gauss-Legendre in
    ``sqrt(tau)``).  This avoids the ``ht / hx`` spike the identity term of
    the trapezoid rule puts into ``grad u`` when ``g`` jumps.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.special import ndtr

from .drifts import DriftSpec

__all__ = [
    "BlowupReport",
    "BoxGrid",
    "GridField",
    "HeatKernel",
    "KernelLeakageError",
    "NonContractionError",
    "UnderResolvedKernelError",
    "heat_kernel",
    "heat_mild_solve",
    "drift_pde_solve",
    "find_contractive_horizon",
    "solve_backward_fd",
    "verify_kernel_blowup",
    "kernel_derivative_l1",
    "kernel_derivative_l1_exact",
    "holder_gradient_seminorm",
]

PAD_SIGMAS = 6.0


class KernelLeakageError(ValueError):
    """The box is too small for the horizon: no interior is left."""


class NonContractionError(ArithmeticError):
    def __init__(self, message, factor):
        super().__init__(message)
        self.factor = factor


class UnderResolvedKernelError(ValueError):
    pass


@dataclass(frozen=True)
class BoxGrid:
    d: int = 1
    N: int = 2048
    L: float = 10.0

    @property
    def hx(self) -> float:
        return 2 * self.L / (self.N - 1)

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.hx * np.arange(self.N)

    def mesh(self) -> np.ndarray:
        """Node coordinates, shape ``(N,) * d + (d,)``."""
        axes = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        return np.stack(axes, axis=-1)

    def interior(self, margin: float) -> np.ndarray:
        ok = np.abs(self.axis) <= self.L - margin
        mask = ok
        for _ in range(self.d - 1):
            mask = np.multiply.outer(mask, ok)
        return mask


@dataclass(frozen=True, eq=False)
class HeatKernel:
    """Cell-integrated heat kernel on lattice offsets ``-(N-1)..(N-1)`` per axis."""

    t: float
    hx: float
    weights_1d: np.ndarray
    d: int = 1

    @property
    def weights(self) -> np.ndarray:
        w = self.weights_1d
        for _ in range(self.d - 1):
            w = np.multiply.outer(w, self.weights_1d)
        return w

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights_1d)) ** self.d


def _weights_1d(t: float, hx: float, N: int) -> np.ndarray:
    i = np.arange(-(N - 1), N)
    if t <= 0:
        return (i == 0).astype(float)
    s = math.sqrt(t)
    return ndtr((i + 0.5) * hx / s) - ndtr((i - 0.5) * hx / s)


def heat_kernel(t: float, grid: BoxGrid) -> HeatKernel:
    return HeatKernel(float(t), grid.hx, _weights_1d(t, grid.hx, grid.N), grid.d)


# Gauss-Legendre nodes on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _time_integrated_kernel(tau0: float, tau1: float, grid: BoxGrid) -> np.ndarray:
    """``int_{tau0}^{tau1} w(tau) dtau`` on the full offset lattice (d-dim)."""
    s0, s1 = math.sqrt(tau0), math.sqrt(tau1)
    # geometric sub-intervals in sigma resolve the sigma ~ hx transition near tau = 0
    cuts = [s1]
    while cuts[-1] > max(s0, grid.hx / 16) and cuts[-1] / 2 > s0:
        cuts.append(cuts[-1] / 2)
    cuts.append(s0)
    cuts = cuts[::-1]
    acc = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        for x, w in zip(_GL_X, _GL_W):
            sig = a + (b - a) * x
            k = HeatKernel(sig * sig, grid.hx, _weights_1d(sig * sig, grid.hx, grid.N), grid.d).weights
            acc = acc + (b - a) * w * 2 * sig * k
    return acc


class _Convolver:
    def __init__(self, grid: BoxGrid):
        self.grid = grid
        self.shape = (sfft.next_fast_len(3 * grid.N - 2, real=True),) * grid.d
        self.axes = tuple(range(-grid.d, 0))

    def kernel_hat(self, w):
        return sfft.rfftn(w, self.shape, axes=self.axes)

    def field_hat(self, g):
        return sfft.rfftn(g, self.shape, axes=self.axes)

    def back(self, spec):
        full = sfft.irfftn(spec, self.shape, axes=self.axes)
        N = self.grid.N
        sl = (Ellipsis,) + (slice(N - 1, 2 * N - 1),) * self.grid.d
        return full[sl]


@dataclass(eq=False)
class GridField:
    """Space-time field on ``times x box`` with finite-difference derivatives."""

    grid: BoxGrid
    times: np.ndarray
    u: np.ndarray
    margin: float
    iterations: int = 1
    contraction: float | None = None
    _grad: np.ndarray | None = field(default=None, repr=False)
    _hess: np.ndarray | None = field(default=None, repr=False)

    @property
    def interior(self) -> np.ndarray:
        return self.grid.interior(self.margin)

    @property
    def grad(self) -> np.ndarray:
        """Centred differences, shape ``(K + 1, d) + (N,) * d``."""
        if self._grad is None:
            self._grad = _gradient(self.u, self.grid)
        return self._grad

    @property
    def hess(self) -> np.ndarray:
        if self._hess is None:
            g = self.grad
            d = self.grid.d
            H = np.empty((g.shape[0], d, d) + g.shape[2:])
            for a in range(d):
                for b in range(d):
                    if a == b:
                        H[:, a, a] = _second_difference(self.u, self.grid.hx, axis=1 + a)
                    else:
                        H[:, a, b] = np.gradient(g[:, a], self.grid.hx, axis=1 + b, edge_order=2)
            self._hess = H
        return self._hess

    def sup(self, which: str = "u") -> float:
        """Max-norm over all times and interior nodes of ``u``, ``grad`` or ``hess``."""
        m = self.interior
        if which == "u":
            return float(np.max(np.abs(self.u[:, m])))
        if which == "grad":
            return float(np.max(np.abs(self.grad[:, :, m])))
        if which == "hess":
            return float(np.max(np.abs(self.hess[:, :, :, m])))
        raise ValueError(which)

    def c12_norm(self) -> float:
        """Discrete ``sup|u| + sup|grad u| + sup|hess u| + sup|du/dt|`` over the interior."""
        dt = np.gradient(self.u, self.times, axis=0, edge_order=2)
        m = self.interior
        return self.sup("u") + self.sup("grad") + self.sup("hess") + float(np.max(np.abs(dt[:, m])))

    def write_csv(self, filename) -> None:
        """Columns ``t, x1..xd, u, du/dx1..du/dxd`` (all nodes)."""
        X = self.grid.mesh().reshape(-1, self.grid.d)
        with open(filename, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(self.grid.d)] + ["u"]
                       + [f"du_dx{i + 1}" for i in range(self.grid.d)])
            for k, t in enumerate(self.times):
                uk = self.u[k].reshape(-1)
                gk = self.grad[k].reshape(self.grid.d, -1)
                for p in range(X.shape[0]):
                    w.writerow([repr(float(t))] + [repr(float(v)) for v in X[p]] + [repr(float(uk[p]))]
                               + [repr(float(v)) for v in gk[:, p]])


def _gradient(u: np.ndarray, grid: BoxGrid) -> np.ndarray:
    d = grid.d
    out = np.empty((u.shape[0], d) + u.shape[1:])
    for a in range(d):
        out[:, a] = np.gradient(u, grid.hx, axis=1 + a, edge_order=2)
    return out


def _second_difference(u: np.ndarray, hx: float, axis: int) -> np.ndarray:
    u = np.moveaxis(u, axis, -1)
    out = np.empty_like(u)
    out[..., 1:-1] = (u[..., 2:] - 2 * u[..., 1:-1] + u[..., :-2]) / hx**2
    out[..., 0] = out[..., 1]
    out[..., -1] = out[..., -2]
    return np.moveaxis(out, -1, axis)


class _MildOperator:
    """Precomputed kernel spectra for repeated mild solves on one (grid, T, K)."""

    def __init__(self, grid: BoxGrid, T: float, K: int, rule: str):
        if rule not in ("product", "trapezoid"):
            raise ValueError(f"unknown time rule {rule!r}")
        self.grid, self.T, self.K, self.rule = grid, T, K, rule
        self.ht = T / K
        self.conv = _Convolver(grid)
        if rule == "product":
            self.khat = np.stack([
                self.conv.kernel_hat(_time_integrated_kernel((m - 1) * self.ht, m * self.ht, grid))
                for m in range(1, K + 1)])
        else:
            self.khat = np.stack([
                self.conv.kernel_hat(heat_kernel(m * self.ht, grid).weights) for m in range(1, K + 1)])

    def __call__(self, g: np.ndarray) -> np.ndarray:
        """``g``: source on the time nodes, shape ``(K + 1,) + (N,) * d``."""
        K = self.K
        u = np.zeros_like(g)
        if self.rule == "product":
            ghat = self.conv.field_hat(0.5 * (g[:-1] + g[1:]))
            for k in range(1, K + 1):
                spec = np.einsum("j...,j...->...", self.khat[k - 1::-1], ghat[:k])
                u[k] = self.conv.back(spec)
        else:
            ghat = self.conv.field_hat(g[:-1])
            w = np.ones(K)
            w[0] = 0.5
            for k in range(1, K + 1):
                spec = np.einsum("j,j...,j...->...", w[:k], self.khat[k - 1::-1], ghat[:k])
                u[k] = self.ht * (self.conv.back(spec) + 0.5 * g[k])
        return u


def _source_slices(g, grid: BoxGrid, times: np.ndarray) -> np.ndarray:
    X = grid.mesh()
    out = np.empty((times.size,) + (grid.N,) * grid.d)
    for k, t in enumerate(times):
        out[k] = np.broadcast_to(g(t, X), out.shape[1:])
    return out


def _margin(T: float, f_sup: float = 0.0) -> float:
    return PAD_SIGMAS * math.sqrt(T) + f_sup * T


def _check_box(grid: BoxGrid, margin: float) -> None:
    if grid.L - margin < 2 * grid.hx:
        raise KernelLeakageError(f"box half-width {grid.L} leaves no interior for padding {margin:.3g}")


def heat_mild_solve(g, T: float, grid: BoxGrid = BoxGrid(), K: int = 128, rule: str = "product") -> GridField:
    """Mild solution of ``du/dt = Laplacian(u)/2 + g``, ``u(0) = 0`` on ``[0, T]``.

    ``g(t, X)`` receives node coordinates of shape ``(N,)*d + (d,)`` and
    returns values broadcastable to ``(N,)*d``.
    """
    if not 0 < T <= 1:
        raise ValueError(f"horizon must lie in (0, 1], got {T}")
    margin = _margin(T)
    _check_box(grid, margin)
    times = np.linspace(0.0, T, K + 1)
    op = _MildOperator(grid, T, K, rule)
    return GridField(grid, times, op(_source_slices(g, grid, times)), margin)


def drift_pde_solve(f: DriftSpec, g, T: float, grid: BoxGrid = BoxGrid(), K: int = 128, max_iter: int = 60,
                    tol: float = 1e-10, rule: str = "product") -> GridField:
    """Picard iteration ``u <- mild(f . grad u + g)`` until successive iterates differ by ``tol``.

    Raises :class:`NonContractionError` with the measured contraction factor
    when the iteration does not contract (the horizon is too long for this
    drift) or does not reach ``tol`` within ``max_iter`` steps.
    """
    if f.dimension != grid.d:
        raise ValueError("drift dimension differs from the grid dimension")
    if not 0 < T <= 1:
        raise ValueError(f"horizon must lie in (0, 1], got {T}")
    margin = _margin(T, f.sup_bound)
    _check_box(grid, margin)
    times = np.linspace(0.0, T, K + 1)
    op = _MildOperator(grid, T, K, rule)
    gs = _source_slices(g, grid, times)
    fx = np.moveaxis(f(grid.mesh()), -1, 0)  # (d, N..)
    u = np.zeros_like(gs)
    gaps = []
    for it in range(1, max_iter + 1):
        src = gs + np.einsum("a...,ka...->k...", fx, _gradient(u, grid)) if it > 1 else gs
        new = op(src)
        gap = float(np.max(np.abs(new - u)))
        u = new
        gaps.append(gap)
        if gap <= tol:
            factor = gaps[-1] / gaps[-2] if len(gaps) > 1 and gaps[-2] > 0 else 0.0
            return GridField(grid, times, u, margin, iterations=it, contraction=factor)
        if len(gaps) >= 4 and gaps[-1] >= gaps[-2] >= gaps[-3]:
            factor = gaps[-1] / gaps[-2]
            raise NonContractionError(f"Picard iteration does not contract (factor {factor:.3g}); "
                                      f"T = {T} is too long", factor)
    factor = gaps[-1] / gaps[-2]
    raise NonContractionError(f"no convergence within {max_iter} iterations (factor {factor:.3g})", factor)


def find_contractive_horizon(f: DriftSpec, g, grid: BoxGrid = BoxGrid(), K: int = 64, start: float = 1.0,
                             max_halvings: int = 8, **kw) -> float:
    """Largest ``T = start / 2^j`` for which :func:`drift_pde_solve` converges."""
    T = start
    for _ in range(max_halvings + 1):
        try:
            drift_pde_solve(f, g, T, grid, K=K, **kw)
            return T
        except NonContractionError:
            T /= 2
    raise NonContractionError(f"no contractive horizon down to {T * 2}", float("nan"))


def solve_backward_fd(b: DriftSpec, component: int, T: float, grid: BoxGrid, steps: int | None = None) -> tuple:
    """Explicit finite differences for ``dv/dt + Laplacian(v)/2 + b . grad v = -b^i``, ``v(T) = 0`` (d = 1).

    Returns ``(times, v)`` with ``v`` of shape ``(len(times), N)``.  Used as an
    independent check on the mild solver through ``v(t) = u(T - t)``.
    """
    if grid.d != 1:
        raise ValueError("the finite-difference cross-check is one-dimensional")
    hx = grid.hx
    if steps is None:
        steps = int(math.ceil(T / (0.45 * hx * hx)))
    dt = T / steps
    x = grid.axis
    bx = b(x[:, None])[:, 0]
    src = b(x[:, None])[:, component]
    v = np.zeros(grid.N)
    out = [v.copy()]
    for _ in range(steps):
        vp = np.concatenate([[v[0]], v, [v[-1]]])
        lap = (vp[2:] - 2 * v + vp[:-2]) / hx**2
        grad = (vp[2:] - vp[:-2]) / (2 * hx)
        v = v + dt * (0.5 * lap + bx * grad + src)
        out.append(v.copy())
    times = T - dt * np.arange(steps + 1)
    return times[::-1], np.array(out[::-1])


def kernel_derivative_l1(t: float, k: int, grid: BoxGrid) -> float:
    """Discrete ``||d^k p(t)/dx_1^k||_{L1}`` from k-th differences of the cell-integrated kernel."""
    if t < 4 * grid.hx**2:
        raise UnderResolvedKernelError(f"t = {t} is below 4 hx^2 = {4 * grid.hx ** 2}")
    w = _weights_1d(t, grid.hx, grid.N)
    dw = np.diff(w, n=k) if k else w
    mass = float(np.sum(w)) ** (grid.d - 1)
    return float(np.sum(np.abs(dw))) / grid.hx**k * mass


def kernel_derivative_l1_exact(t: float, k: int) -> float:
    """``||d^k p(t)/dx_1^k||_{L1(R^d)}`` for the Gaussian kernel, k = 0, 1, 2.

    ``k = 1``: ``2 p(t, 0) = sqrt(2 / (pi t))``.  ``k = 2``: ``p'' = p (x^2/t -
    1)/t`` so the norm is ``E|Z^2 - 1| / t = 4 phi(1) / t``.
    """
    if k == 0:
        return 1.0
    if k == 1:
        return math.sqrt(2.0 / (math.pi * t))
    if k == 2:
        return 4.0 * math.exp(-0.5) / math.sqrt(2 * math.pi) / t
    raise ValueError("k must be 0, 1 or 2")


@dataclass(frozen=True)
class BlowupReport:
    times: tuple
    norms: dict
    slopes: dict
    passed: bool


def verify_kernel_blowup(grid: BoxGrid = BoxGrid(), times=None, tol: float = 0.1) -> BlowupReport:
    """Log-log slopes of ``||d^k p(t)||_{L1}`` against ``t``; expected ``-k/2``."""
    if times is None:
        t_min = 16 * grid.hx**2
        times = np.geomspace(t_min, min(1.0, grid.L**2 / 64), 12)
    times = np.asarray(times, dtype=float)
    norms, slopes = {}, {}
    for k in (0, 1, 2):
        v = np.array([kernel_derivative_l1(t, k, grid) for t in times])
        norms[k] = v.tolist()
        slopes[k] = float(np.polyfit(np.log(times), np.log(v), 1)[0])
    passed = all(abs(slopes[k] + k / 2) <= tol for k in (0, 1, 2))
    return BlowupReport(tuple(times.tolist()), norms, slopes, passed)


def holder_gradient_seminorm(field_: GridField, alpha: float = 0.5, every: int = 1) -> float:
    """``sup_t [grad u(t)]_{C^alpha}`` over interior node pairs along each axis (d = 1 exact pairs)."""
    m = field_.interior
    hx = field_.grid.hx
    best = 0.0
    for k in range(0, field_.times.size, every):
        for a in range(field_.grid.d):
            g = np.moveaxis(field_.grad[k, a], a, -1)
            mm = np.moveaxis(m, a, -1)
            g = np.where(mm, g, np.nan)
            n = g.shape[-1]
            for lag in range(1, n):
                diff = np.abs(g[..., lag:] - g[..., :-lag])
                if np.all(np.isnan(diff)):
                    break
                q = np.nanmax(diff) / (lag * hx) ** alpha
                best = max(best, float(q))
    return best
