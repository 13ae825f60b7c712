"""Ensemble reductions with standard-error bands."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class EnsembleStats:
    """Per-time mean, variance and ``k``-standard-error band over paths.

    With a single path the band is disabled (``se`` is NaN).
    """

    n_paths: int
    mean: np.ndarray
    var: np.ndarray
    se: np.ndarray
    k: float = 3.0

    @property
    def lo(self) -> np.ndarray:
        return self.mean - self.k * self.se

    @property
    def hi(self) -> np.ndarray:
        return self.mean + self.k * self.se

    @property
    def band_enabled(self) -> bool:
        return self.n_paths > 1


def ensemble_stats(samples: np.ndarray, k: float = 3.0) -> EnsembleStats:
    """Reduce ``samples[path, time]``; rows are folded in the given order."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n == 0:
        raise ValueError("no completed paths to reduce")
    mean = x.mean(axis=0)
    if n > 1:
        var = x.var(axis=0, ddof=1)
        se = np.sqrt(var / n)
    else:
        var = np.full(mean.shape, np.nan)
        se = np.full(mean.shape, np.nan)
    return EnsembleStats(n, mean, var, se, k)


def fit_decay_rate(times: np.ndarray, values: np.ndarray) -> float:
    """Least-squares rate ``lam`` of ``values ~ A exp(-lam t)`` (positive values only)."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    ok = v > 0
    if ok.sum() < 2:
        return float("nan")
    slope = np.polyfit(t[ok], np.log(v[ok]), 1)[0]
    return float(-slope)


def observed_orders(dts, errors) -> tuple[np.ndarray, float]:
    """Pairwise orders ``log(e_i/e_j)/log(h_i/h_j)`` and the fitted log-log slope."""
    h = np.asarray(dts, dtype=float)
    e = np.asarray(errors, dtype=float)
    pair = np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])
    slope = np.polyfit(np.log(h), np.log(e), 1)[0]
    return pair, float(slope)
