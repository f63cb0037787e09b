"""Euler-Maruyama paths for dX = b(X) dt + dW and their reference solutions.

The scheme is stored in the equivalent "accumulated drift" form

    X^n_{k/n} = x0n + (1/n) * sum_{i<k} b(X^n_{i/n}) + W_{k/n},

with the drift sum accumulated by compensated (TwoSum) addition and ``W``
taken from the shared finest-grid prefix sums.  This is algebraically the
usual one-step recursion, but it makes the zero-drift scheme equal to
``x0n + W`` bit for bit on every level, and the constant-drift scheme equal
to the exact solution ``x0 + c t + W_t`` up to a single rounding of ``k c``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .drifts import DriftSpec
from .rng_paths import BrownianTableau, GridError, check_grid

__all__ = [
    "SchemePath",
    "ReferencePath",
    "ReferenceError",
    "EXACT_ZERO",
    "EXACT_CONSTANT",
    "FINE_EM",
    "default_checkpoints",
    "checkpoint_indices",
    "simulate_em",
    "continuous_values",
    "simulate_reference",
    "em_batch",
    "extend_batch",
    "reference_batch",
    "reference_kind_for",
    "perturbed_initial",
    "write_path_csv",
]

EXACT_ZERO = "exact_zero_drift"
EXACT_CONSTANT = "exact_constant_drift"
FINE_EM = "fine_em"


class ReferenceError(ValueError):
    """Mismatched reference kind or insufficient reference resolution."""


@dataclass(frozen=True, eq=False)
class SchemePath:
    level_n: int
    times: np.ndarray
    states: np.ndarray
    initial: np.ndarray
    # accumulated drift D_k = (1/n) sum_{i<k} b(X_i), kept for the continuous extension
    drift_sum: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class ReferencePath:
    kind: str
    times: np.ndarray
    states: np.ndarray
    level: int | None = None


def default_checkpoints(T: float, count: int = 9) -> np.ndarray:
    """``count`` equispaced times ``j T / (count - 1)``, from 0 to T inclusive."""
    return np.arange(count) * (T / (count - 1))


def checkpoint_indices(checkpoints, n: int, T: float) -> np.ndarray:
    k = np.asarray(checkpoints, dtype=float) * n
    kr = np.round(k).astype(np.int64)
    if np.any(np.abs(k - kr) > 1e-9 * np.maximum(1.0, k)) or np.any(kr < 0) or np.any(kr > round(n * T)):
        raise GridError(f"checkpoints {list(checkpoints)} do not lie on the grid of level {n}")
    return kr


def _two_sum_add(s, comp, b):
    t = s + b
    bp = t - s
    comp += (s - (t - bp)) + (b - bp)
    return t


def _level_ratio(finest_n: int, n: int) -> int:
    if int(n) != n or n < 1 or finest_n % n:
        raise GridError(f"level {n} does not divide the finest level {finest_n}")
    return finest_n // int(n)


def em_batch(drift: DriftSpec, W: np.ndarray, finest_n: int, n: int, x0n,
             return_drift_sum: bool = False):
    """Level-``n`` scheme states for a batch of paths.

    ``W`` holds finest-grid prefix sums of shape ``(steps + 1, B, d)``.
    Returns ``X`` of shape ``(K + 1, B, d)`` with ``K = n T`` (and the
    accumulated drift ``D`` of the same shape if requested).
    """
    r = _level_ratio(finest_n, n)
    Wn = W[::r]
    K = Wn.shape[0] - 1
    x0n = np.broadcast_to(np.asarray(x0n, dtype=float), Wn.shape[1:])
    X = np.empty_like(Wn)
    D = np.empty_like(Wn) if return_drift_sum else None
    X[0] = x0n + 0.0 + Wn[0]
    if D is not None:
        D[0] = 0.0
    const = drift.constant_value
    if const is not None and not np.any(const):
        # zero drift: every accumulated sum is exactly 0
        X[1:] = x0n + 0.0 + Wn[1:]
        if D is not None:
            D[1:] = 0.0
        return (X, D) if return_drift_sum else X
    s = np.zeros(Wn.shape[1:])
    comp = np.zeros(Wn.shape[1:])
    inv_n = 1.0 / n
    for k in range(K):
        s = _two_sum_add(s, comp, drift.evaluate(X[k]))
        dk = (s + comp) * inv_n
        X[k + 1] = (x0n + dk) + Wn[k + 1]
        if D is not None:
            D[k + 1] = dk
    return (X, D) if return_drift_sum else X


def extend_batch(drift: DriftSpec, X: np.ndarray, D: np.ndarray, W: np.ndarray, finest_n: int,
                 n: int, x0n) -> np.ndarray:
    """Continuous-time scheme on the finest grid.

    ``X_t = x0n + D_{k_n(t)} + b(X_{k_n(t)}) (t - k_n(t)) + W_t`` for every
    finest time ``t``; equals ``x0n + W_t`` exactly when ``b = 0``.
    """
    r = _level_ratio(finest_n, n)
    steps = W.shape[0] - 1
    x0n = np.broadcast_to(np.asarray(x0n, dtype=float), W.shape[1:])
    out = np.empty_like(W)
    const = drift.constant_value
    if const is not None and not np.any(const):
        out[:] = x0n + 0.0 + W
        return out
    K = X.shape[0] - 1
    bk = drift.evaluate(X[:K])  # (K, B, d)
    offs = (np.arange(r) / finest_n)[:, None, None]  # t - k_n(t)
    for k in range(K):
        sl = slice(k * r, (k + 1) * r)
        out[sl] = (x0n + (D[k] + bk[k] * offs)) + W[sl]
    out[steps] = X[K]
    return out


def simulate_em(drift: DriftSpec, tableau: BrownianTableau, n: int, x0n) -> SchemePath:
    """Euler-Maruyama path of level ``n`` driven by ``tableau``."""
    check_grid(n, tableau.horizon)
    W = tableau.path[:, None, :]
    X, D = em_batch(drift, W, tableau.finest_n, n, np.asarray(x0n, dtype=float), return_drift_sum=True)
    times = np.arange(X.shape[0]) / n
    return SchemePath(int(n), times, X[:, 0, :], np.broadcast_to(np.asarray(x0n, float), (tableau.dimension,)).copy(),
                      D[:, 0, :])


def continuous_values(drift: DriftSpec, path: SchemePath, tableau: BrownianTableau) -> np.ndarray:
    """The scheme's continuous-time extension at every finest-grid time."""
    W = tableau.path[:, None, :]
    out = extend_batch(drift, path.states[:, None, :], path.drift_sum[:, None, :], W,
                       tableau.finest_n, path.level_n, path.initial)
    return out[:, 0, :]


def reference_kind_for(drift: DriftSpec) -> str:
    if drift.name == "zero":
        return EXACT_ZERO
    if drift.name == "constant":
        return EXACT_CONSTANT
    return FINE_EM


def reference_batch(drift: DriftSpec, W: np.ndarray, finest_n: int, T: float, x0, kind: str,
                    n_ref: int, checkpoints) -> np.ndarray:
    """Reference states at ``checkpoints``, shape ``(len(checkpoints), B, d)``."""
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), W.shape[1:])
    idx_fine = checkpoint_indices(checkpoints, finest_n, T)
    if kind == EXACT_ZERO:
        if drift.constant_value is None or np.any(drift.constant_value):
            raise ReferenceError(f"exact zero-drift reference requested for drift {drift.name!r}")
        return x0 + 0.0 + W[idx_fine]
    if kind == EXACT_CONSTANT:
        c = drift.constant_value
        if c is None:
            raise ReferenceError(f"exact constant-drift reference requested for drift {drift.name!r}")
        t = (idx_fine / finest_n)[:, None, None]
        return (x0 + c * t) + W[idx_fine]
    if kind == FINE_EM:
        X = em_batch(drift, W, finest_n, n_ref, x0)
        return X[checkpoint_indices(checkpoints, n_ref, T)]
    raise ReferenceError(f"unknown reference kind {kind!r}")


def simulate_reference(drift: DriftSpec, tableau: BrownianTableau, n_ref: int, x0, kind: str | None = None,
                       checkpoints=None, max_tested_n: int | None = None, ref_factor: int = 16) -> ReferencePath:
    """Exact solution (zero/constant drift) or fine-grid EM proxy on the same tableau.

    With ``kind=None`` the kind is chosen from the drift.  For ``fine_em``,
    ``n_ref`` must be at least ``ref_factor * max_tested_n`` when the
    largest tested level is given.
    """
    kind = kind or reference_kind_for(drift)
    if checkpoints is None:
        checkpoints = tableau.times if kind != FINE_EM else np.arange(round(n_ref * tableau.horizon) + 1) / n_ref
    if kind == FINE_EM:
        _level_ratio(tableau.finest_n, n_ref)
        if max_tested_n is not None and n_ref < ref_factor * max_tested_n:
            raise ReferenceError(f"n_ref = {n_ref} is below {ref_factor} x {max_tested_n}")
    states = reference_batch(drift, tableau.path[:, None, :], tableau.finest_n, tableau.horizon, x0, kind,
                             n_ref, checkpoints)
    return ReferencePath(kind, np.asarray(checkpoints, dtype=float), states[:, 0, :],
                         n_ref if kind == FINE_EM else None)


def perturbed_initial(x0, n: int, epsilon: float) -> np.ndarray:
    """``x0 + n^{(-1+eps)/2} e_1``, so that ``|x0n - x0|^2 = n^{-1+eps}``."""
    x0 = np.array(x0, dtype=float, ndmin=1)
    out = x0.copy()
    out[0] += float(n) ** ((-1.0 + epsilon) / 2.0)
    return out


def write_path_csv(path: SchemePath | ReferencePath, filename) -> None:
    """Debug dump: columns ``t, X1, ..., Xd``."""
    states = path.states
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"X{i + 1}" for i in range(states.shape[1])])
        for t, row in zip(path.times, states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
