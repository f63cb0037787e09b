"""Registry of drift coefficients b: R^d -> R^d with declared regularity.

Each builtin records its sup-norm bound and, where one exists, a modulus of
continuity ``theta`` such that ``|b^i(x) - b^i(y)| <= C theta(|x - y|)`` for
``|x - y| <= 1``.  Why each declared class is correct:

``zero``, ``constant``
    Lipschitz with constant 0; ``theta(r) = r``.
``sin``
    ``b^i(x) = sin(x_i)``; 1-Lipschitz, ``sup|b| = 1``, ``theta(r) = r``.
``holder``
    ``b^i(x) = min(1, |x - c|^alpha)``.  ``r -> r^alpha`` is concave with
    value 0 at 0, hence subadditive, so ``| |x|^alpha - |y|^alpha | <=
    | |x| - |y| |^alpha <= |x - y|^alpha``; truncation by ``min(1, .)`` is
    1-Lipschitz and keeps the bound.  Not Lipschitz at ``x = c``.
``dini_log``
    ``b^i(x) = 9 g(min(|x - c|, 1))`` with ``g(r) = 1 / log(e^3 / r)^2``,
    ``g(0) = 0``, so ``sup|b| = 1``.  With ``s = log(1/r)`` one gets
    ``g''(r) = 2 r^-2 (3 + s)^-4 (-s) <= 0`` on ``(0, 1]``: ``g`` is concave
    and increasing, hence subadditive, and ``theta = g`` is a modulus of
    ``b`` with constant 9.  ``int_0^1 g(r)/r dr = int_3^inf u^-2 du = 1/3``
    is finite, while ``g(r) / r^alpha -> inf`` for every ``alpha > 0``: Dini
    continuous but not Hoelder.
``sign``
    ``b(x) = sign(x_1) e_1`` with ``sign(0) = 0``.  Bounded measurable.
``step_grid``
    ``b(x) = s(x_1) e_1`` with ``s`` 1-periodic, ``+1`` on ``[0, 1/2)`` and
    ``-1`` on ``[1/2, 1)``.  Bounded measurable, jumps at ``k/2``.

Discontinuous drifts are total functions; their value on the (null) jump
set is the one stated above.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np
from scipy import integrate

__all__ = [
    "DriftSpec",
    "UnknownDriftError",
    "MissingModulusError",
    "LIPSCHITZ",
    "HOLDER",
    "DINI",
    "BOUNDED_MEASURABLE",
    "builtin",
    "builtin_names",
    "dini_integral",
    "dini_seminorm_estimate",
]

LIPSCHITZ = "lipschitz"
HOLDER = "holder"
DINI = "dini"
BOUNDED_MEASURABLE = "bounded_measurable"
REGULARITIES = (LIPSCHITZ, HOLDER, DINI, BOUNDED_MEASURABLE)


class UnknownDriftError(KeyError):
    pass


class MissingModulusError(ValueError):
    pass


@dataclass(frozen=True)
class DriftSpec:
    """A named drift ``b`` with its regularity bookkeeping.

    ``evaluate`` maps an array of shape ``(..., d)`` to the same shape.
    ``jumps(lo, hi)``, when set, lists the points of discontinuity of the
    scalar drift on ``[lo, hi]`` (one-dimensional usage only).
    """

    name: str
    dimension: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    regularity: str
    sup_bound: float
    dini_modulus: Callable[[np.ndarray], np.ndarray] | None = None
    holder_exponent: float | None = None
    params: dict = field(default_factory=dict)
    jumps: Callable[[float, float], np.ndarray] | None = None

    def __post_init__(self):
        if self.regularity not in REGULARITIES:
            raise ValueError(f"unknown regularity {self.regularity!r}")
        if self.regularity == HOLDER and not (0 < (self.holder_exponent or 0) < 1):
            raise ValueError("Hoelder drifts need an exponent in (0, 1)")
        if self.regularity in (DINI, HOLDER) and self.dini_modulus is None:
            raise MissingModulusError(f"{self.name}: regularity {self.regularity} needs a modulus")

    def __call__(self, x):
        return self.evaluate(np.asarray(x, dtype=float))

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"

    @property
    def constant_value(self) -> np.ndarray | None:
        """The constant vector for ``constant``/``zero`` drifts, else None."""
        if self.name == "zero":
            return np.zeros(self.dimension)
        if self.name == "constant":
            return np.broadcast_to(np.asarray(self.params["c"], dtype=float), (self.dimension,)).copy()
        return None

    def config(self) -> dict:
        return {"name": self.name, "dimension": self.dimension, "params": dict(self.params)}


# --- drift formulas -------------------------------------------------------
# module-level so that partials pickle across worker processes

def _zero(x):
    return np.zeros_like(x)


def _constant(x, c):
    return np.broadcast_to(c, x.shape).copy()


def _sin(x):
    return np.sin(x)


def _holder(x, alpha, center):
    r = np.abs(x - center)
    return np.minimum(1.0, r**alpha)


def _log_modulus(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = 1.0 / (3.0 - np.log(r[pos])) ** 2
    return out


def _dini_log(x, center, amplitude):
    d = x.shape[-1]
    r = np.sqrt(np.sum((x - center) ** 2, axis=-1))
    v = amplitude * 9.0 * _log_modulus(np.minimum(r, 1.0))
    return np.repeat(v[..., None], d, axis=-1)


def _sign(x):
    out = np.zeros_like(x)
    out[..., 0] = np.sign(x[..., 0])
    return out


def _step_grid(x):
    out = np.zeros_like(x)
    frac = x[..., 0] - np.floor(x[..., 0])
    out[..., 0] = np.where(frac < 0.5, 1.0, -1.0)
    return out


def _linear_modulus(r):
    return np.asarray(r, dtype=float)


def _power_modulus(r, alpha):
    return np.asarray(r, dtype=float) ** alpha


def _no_jumps(lo, hi):
    return np.empty(0)


def _point_jump(lo, hi, at):
    return np.array([at]) if lo <= at <= hi else np.empty(0)


def _half_integer_jumps(lo, hi):
    k = np.arange(math.ceil(2 * lo), math.floor(2 * hi) + 1)
    return k / 2.0


def _center(center, d):
    return np.broadcast_to(np.asarray(center, dtype=float), (d,)).copy()


def _make_zero(dimension):
    return DriftSpec("zero", dimension, _zero, LIPSCHITZ, 0.0, _linear_modulus, jumps=_no_jumps)


def _make_constant(dimension, c=1.0):
    cv = _center(c, dimension)
    return DriftSpec(
        "constant", dimension, partial(_constant, c=cv), LIPSCHITZ, float(np.max(np.abs(cv))),
        _linear_modulus, params={"c": c}, jumps=_no_jumps,
    )


def _make_sin(dimension):
    return DriftSpec("sin", dimension, _sin, LIPSCHITZ, 1.0, _linear_modulus, jumps=_no_jumps)


def _make_holder(dimension, alpha=0.5, center=0.0):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return DriftSpec(
        "holder", dimension, partial(_holder, alpha=float(alpha), center=_center(center, dimension)),
        HOLDER, 1.0, partial(_power_modulus, alpha=float(alpha)), holder_exponent=float(alpha),
        params={"alpha": alpha, "center": center}, jumps=_no_jumps,
    )


def _make_dini_log(dimension, center=0.0, amplitude=1.0):
    return DriftSpec(
        "dini_log", dimension,
        partial(_dini_log, center=_center(center, dimension), amplitude=float(amplitude)),
        DINI, abs(float(amplitude)), _log_modulus,
        params={"center": center, "amplitude": amplitude}, jumps=_no_jumps,
    )


def _make_sign(dimension):
    return DriftSpec(
        "sign", dimension, _sign, BOUNDED_MEASURABLE, 1.0, jumps=partial(_point_jump, at=0.0),
    )


def _make_step_grid(dimension):
    return DriftSpec("step_grid", dimension, _step_grid, BOUNDED_MEASURABLE, 1.0, jumps=_half_integer_jumps)


_BUILDERS = {
    "zero": _make_zero,
    "constant": _make_constant,
    "sin": _make_sin,
    "holder": _make_holder,
    "dini_log": _make_dini_log,
    "sign": _make_sign,
    "step_grid": _make_step_grid,
}

_DESCRIPTIONS = {
    "zero": "b = 0",
    "constant": "b = c (params: c, scalar or d-vector)",
    "sin": "b^i(x) = sin(x_i); Lipschitz",
    "holder": "b^i(x) = min(1, |x - center|^alpha); alpha-Hoelder (params: alpha, center)",
    "dini_log": "b^i(x) = 9 amplitude / log(e^3 / min(|x - center|, 1))^2; Dini, not Hoelder",
    "sign": "b(x) = sign(x_1) e_1, sign(0) = 0; bounded measurable",
    "step_grid": "b(x) = +-1 e_1, 1-periodic step in x_1, jumps at k/2; bounded measurable",
}


def builtin_names() -> dict[str, str]:
    """Builtin drift names with a one-line description each."""
    return dict(_DESCRIPTIONS)


def builtin(name: str, dimension: int = 1, **params) -> DriftSpec:
    """Look up a builtin drift by name.

    >>> builtin("sign")(np.array([-0.3]))
    array([-1.])
    """
    try:
        make = _BUILDERS[name]
    except KeyError:
        raise UnknownDriftError(f"unknown drift {name!r}; known: {sorted(_BUILDERS)}") from None
    if int(dimension) != dimension or dimension < 1:
        raise ValueError(f"dimension must be a positive integer, got {dimension}")
    spec = make(int(dimension), **params)
    if spec.regularity == DINI and not np.isfinite(dini_integral(spec)):
        raise ValueError(f"{name}: modulus fails the Dini condition")
    return spec


def dini_integral(spec_or_modulus) -> float:
    """``int_0^1 theta(r) / r dr`` by adaptive quadrature in ``u = -log r``."""
    theta = getattr(spec_or_modulus, "dini_modulus", spec_or_modulus)
    if theta is None:
        raise MissingModulusError(f"{spec_or_modulus.name} has no modulus")

    def integrand(u):
        return float(theta(np.array([math.exp(-u)]))[0])

    value, _ = integrate.quad(integrand, 0.0, np.inf, limit=500, epsabs=1e-12, epsrel=1e-10)
    return value


def dini_seminorm_estimate(spec: DriftSpec, sample_count: int = 100_000, seed: int = 0,
                           radius: float = 3.0) -> float:
    """Empirical lower bound on ``||b||_D = max_i (sup|b^i| + [b^i]_theta)``.

    Pairs ``(x, y)`` are drawn with ``x`` uniform on ``[-radius, radius]^d``
    around the drift's centre (if any) and ``|x - y| <= 1``; half the
    separations are log-uniform on ``[1e-8, 1]`` to probe small scales.
    """
    if spec.dini_modulus is None:
        raise MissingModulusError(f"{spec.name} has no modulus")
    rng = np.random.default_rng(seed)
    d = spec.dimension
    center = np.asarray(spec.params.get("center", 0.0), dtype=float)
    x = center + rng.uniform(-radius, radius, size=(sample_count, d))
    direction = rng.standard_normal((sample_count, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    half = sample_count // 2
    r = np.concatenate([
        rng.uniform(0.0, 1.0, size=half),
        10.0 ** rng.uniform(-8.0, 0.0, size=sample_count - half),
    ])
    r = np.maximum(r, 1e-300)
    y = x + r[:, None] * direction
    dist = np.linalg.norm(x - y, axis=1)
    bx, by = spec(x), spec(y)
    theta = spec.dini_modulus(dist)
    diff = np.abs(bx - by)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(diff > 0, diff / theta[:, None], 0.0)
    sup = np.max(np.abs(np.concatenate([bx, by])), axis=0)
    return float(np.max(sup + np.max(ratio, axis=0)))
