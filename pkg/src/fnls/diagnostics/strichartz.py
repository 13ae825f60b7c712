"""Mixed space-time norms ``||u||_{L^r(0,T; L^p)}`` from trajectory snapshots."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..spectral import MultiplierCache, SpectralField, free_propagator, l2_norm, lp_norm

MIN_SNAPSHOTS = 8


class CoarseScheduleError(ValueError):
    pass


def strichartz_norm(traj_or_times, r: float, p: float,
                    snapshots: Sequence[SpectralField] | None = None) -> float:
    """Composite quadrature: ``lp_norm`` per snapshot, trapezoid of its r-th power in time.

    ``r = inf`` takes the maximum over snapshots. Accepts a Trajectory or a
    ``(times, snapshots)`` pair.
    """
    if snapshots is None:
        times, snapshots = traj_or_times.snapshot_times, traj_or_times.snapshots
    else:
        times = traj_or_times
    if len(snapshots) < MIN_SNAPSHOTS:
        raise CoarseScheduleError(f"need at least {MIN_SNAPSHOTS} snapshots, got {len(snapshots)}")
    norms = np.array([lp_norm(s.to_physical(), p) for s in snapshots])
    if math.isinf(r):
        return float(norms.max())
    return float(np.trapezoid(norms**r, np.asarray(times, dtype=float)) ** (1 / r))


def free_evolution(g: SpectralField, cache: MultiplierCache, times) -> list[SpectralField]:
    return [free_propagator(g.to_physical(), float(t), cache).to_physical() for t in times]


def strichartz_ratio(g: SpectralField, cache: MultiplierCache, times, r: float, p: float) -> float:
    """``||S(t) g||_{L^r L^p} / ||g||_{L^2}`` for the free flow."""
    snaps = free_evolution(g, cache, times)
    return strichartz_norm(times, r, p, snaps) / l2_norm(g)


def strichartz_corpus(profiles: Sequence[SpectralField], cache: MultiplierCache, times,
                      r: float, p: float) -> dict:
    """Empirical sup of the free-flow ratio over a corpus of profiles (reported only)."""
    ratios = [strichartz_ratio(g, cache, times, r, p) for g in profiles]
    return {"r": r, "p": p, "ratios": ratios, "max_ratio": max(ratios)}
