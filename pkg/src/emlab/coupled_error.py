"""Monte Carlo estimate of max_t E|X^n_t - X_t|^2 over a ladder of levels.

Every path draws one Brownian tableau at the reference level ``n_ref``; the
reference solution and all tested levels are driven by restrictions of that
one path.  Per path and level the squared error is recorded at each
checkpoint, and two estimators of the supremum are reported:

``mean_of_max``
    ``(1/M) sum_paths max_t |X^n_t - X_t|^2``, an estimate of ``E max_t``,
    which dominates ``max_t E``.
``max_of_means``
    ``max_t (1/M) sum_paths |X^n_t - X_t|^2``, which is at most ``sup_t E``
    over the continuum of times.

The checkpoint maximum is itself a lower bound for the supremum over all
``t``; errors between checkpoints are not observed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import drifts as _drifts
from .em import FINE_EM, checkpoint_indices, default_checkpoints, em_batch, perturbed_initial, reference_batch, \
    reference_kind_for
from .moments import Moments, tree_reduce
from .parallel import batches, map_batches
from .rng_paths import check_grid, generate_batch

__all__ = ["ErrorCurve", "ConfigError", "estimate_error_curve", "error_curve_problems", "MEAN_OF_MAX", "MAX_OF_MEANS"]

MEAN_OF_MAX = "mean_of_max"
MAX_OF_MEANS = "max_of_means"


class ConfigError(ValueError):
    pass


@dataclass
class ErrorCurve:
    drift_name: str
    dimension: int
    T: float
    epsilon_offset: float | None
    levels: list
    mse: list
    ci_half_width: list
    path_count: int
    n_ref: int
    seed: int
    reference_kind: str
    checkpoints: list
    mse_max_of_means: list = field(default_factory=list)
    ci_max_of_means: list = field(default_factory=list)
    mse_per_checkpoint: list = field(default_factory=list)

    fit_values_attr = "mse"

    @property
    def exact(self) -> bool:
        return all(v == 0.0 for v in self.mse)

    def to_dict(self) -> dict:
        return {
            "drift_name": self.drift_name,
            "dimension": self.dimension,
            "T": self.T,
            "epsilon_offset": self.epsilon_offset,
            "levels": list(self.levels),
            "mse": list(self.mse),
            "ci_half_width": list(self.ci_half_width),
            "mse_max_of_means": list(self.mse_max_of_means),
            "ci_max_of_means": list(self.ci_max_of_means),
            "mse_per_checkpoint": [list(r) for r in self.mse_per_checkpoint],
            "path_count": self.path_count,
            "n_ref": self.n_ref,
            "seed": self.seed,
            "reference_kind": self.reference_kind,
            "checkpoints": list(self.checkpoints),
            "exact": self.exact,
        }

    def csv_rows(self) -> list[list]:
        rows = [["n", "mse", "ci", "estimator_variant"]]
        for n, v, c in zip(self.levels, self.mse, self.ci_half_width):
            rows.append([n, repr(v), repr(c), MEAN_OF_MAX])
        for n, v, c in zip(self.levels, self.mse_max_of_means, self.ci_max_of_means):
            rows.append([n, repr(v), repr(c), MAX_OF_MEANS])
        return rows

    def write_csv(self, filename) -> None:
        with open(filename, "w", newline="") as fh:
            csv.writer(fh).writerows(self.csv_rows())


def _error_batch(task) -> Moments:
    (drift_cfg, path_range, seed, levels, n_ref, T, x0, checkpoints, epsilon, kind) = task
    drift = _drifts.builtin(drift_cfg["name"], drift_cfg["dimension"], **drift_cfg["params"])
    d = drift.dimension
    W = generate_batch(seed, path_range, d, n_ref, T)
    ref = reference_batch(drift, W, n_ref, T, x0, kind, n_ref, checkpoints)  # (C, B, d)
    B = W.shape[1]
    out = np.empty((B, len(levels), len(checkpoints) + 1))
    for li, n in enumerate(levels):
        x0n = perturbed_initial(x0, n, epsilon) if epsilon is not None else x0
        X = em_batch(drift, W, n_ref, n, x0n)
        Xc = X[checkpoint_indices(checkpoints, n, T)]
        err = np.sum((Xc - ref) ** 2, axis=-1)  # (C, B)
        out[:, li, 1:] = err.T
        out[:, li, 0] = np.max(err, axis=0)
    return Moments.from_samples(out, axis=0)


def error_curve_problems(drift, levels, M: int, n_ref: int, T: float = 1.0, checkpoints=None,
                         ref_factor: int = 16, min_paths: int = 100) -> list[str]:
    """Every reason :func:`estimate_error_curve` would reject these arguments."""
    levels = [int(n) for n in levels]
    errors = []
    if M < min_paths:
        errors.append(f"path count M = {M} is below {min_paths}")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        errors.append(f"levels {levels} are not strictly increasing")
    try:
        check_grid(n_ref, T)
    except ValueError as exc:
        errors.append(str(exc))
    else:
        bad = [n for n in levels if n < 1 or n_ref % n]
        if bad:
            errors.append(f"levels {bad} do not divide n_ref = {n_ref}")
    if drift.regularity == _drifts.BOUNDED_MEASURABLE and drift.dimension != 1:
        errors.append(f"bounded measurable drift {drift.name!r} is only admissible in dimension 1")
    if reference_kind_for(drift) == FINE_EM and levels and n_ref < ref_factor * max(levels):
        errors.append(f"n_ref = {n_ref} is below {ref_factor} x largest level {max(levels)}")
    if checkpoints is None:
        checkpoints = default_checkpoints(T)
    for n in levels:
        try:
            checkpoint_indices([float(t) for t in checkpoints], n, T)
        except ValueError as exc:
            errors.append(str(exc))
    return errors


def estimate_error_curve(drift, levels, M: int, n_ref: int, T: float = 1.0, x0=0.0, seed: int = 0,
                         checkpoints=None, epsilon_offset: float | None = None, batch_size: int = 500,
                         workers: int = 1, ref_factor: int = 16, min_paths: int = 100) -> ErrorCurve:
    """Estimate the max-over-checkpoints mean-square error for each level.

    ``drift`` is a :class:`~emlab.drifts.DriftSpec` from the builtin
    registry.  ``epsilon_offset`` switches on the perturbed initial value
    ``x0n = x0 + n^{(-1+eps)/2} e_1``.
    """
    levels = [int(n) for n in levels]
    errors = error_curve_problems(drift, levels, M, n_ref, T, checkpoints, ref_factor, min_paths)
    kind = reference_kind_for(drift)
    if checkpoints is None:
        checkpoints = default_checkpoints(T)
    checkpoints = [float(t) for t in checkpoints]
    if errors:
        raise ConfigError("; ".join(errors))

    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (drift.dimension,)).copy()
    tasks = [(drift.config(), r, seed, levels, n_ref, T, x0, checkpoints, epsilon_offset, kind)
             for r in batches(M, batch_size)]
    mom = tree_reduce(map_batches(_error_batch, tasks, workers))
    mean, ci = mom.mean, mom.ci_half_width()
    per_cp = mean[:, 1:]
    arg = np.argmax(per_cp, axis=1)
    rows = np.arange(len(levels))
    return ErrorCurve(
        drift_name=drift.name, dimension=drift.dimension, T=float(T), epsilon_offset=epsilon_offset,
        levels=levels, mse=[float(v) for v in mean[:, 0]], ci_half_width=[float(v) for v in ci[:, 0]],
        path_count=int(M), n_ref=int(n_ref), seed=int(seed), reference_kind=kind, checkpoints=checkpoints,
        mse_max_of_means=[float(v) for v in per_cp[rows, arg]],
        ci_max_of_means=[float(v) for v in ci[:, 1:][rows, arg]],
        mse_per_checkpoint=[[float(v) for v in row] for row in per_cp],
    )
