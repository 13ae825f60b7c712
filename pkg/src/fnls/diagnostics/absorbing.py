"""Absorbing radius and pullback absorption experiments.

The radius of the absorbing ball ``K(varrho) = {E||u||^rho <= R(varrho)}``::

    R = E0 + C1(rho) ||Phi||^rho (g-b)^(-rho/2)
        + C2(rho) (g-b)^(1-rho/2) e^{-(g-b) rho varrho/2}
          int_{-inf}^{varrho} e^{(g-b) rho s/2} ||psi1(s)||^{rho/2} ds

``E0`` is a reference moment of the ball. It is zero by default, since the
initial data of a family that grows into the past more slowly than the
damping gap contributes nothing in the pullback limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..dynamics import ModelParams, Psi1Schedule, RegimeError, admissible_pair
from ..integrators import BlowupGuard, Scheme, run_ensemble
from ..noise import CovarianceSpec
from ..spectral import MultiplierCache, SpectralField, l2_norm
from .moments import c1, c2, linear_mean_mass, psi1_window_integral
from .stats import ensemble_stats


def absorbing_radius(params: ModelParams, rho: float, varrho: float,
                     psi1_schedule: Psi1Schedule | None = None, hs_norm_sq: float = 0.0,
                     initial_moment: float = 0.0) -> float:
    d = params.gamma - params.beta
    if d <= 0:
        raise RegimeError("gamma>beta", "absorbing radius needs gamma > beta")
    noise = c1(rho) * hs_norm_sq ** (rho / 2) * d ** (-rho / 2)
    integral = psi1_window_integral(psi1_schedule, d * rho / 2, rho / 2, -math.inf, varrho)
    forcing = c2(rho) * d ** (1 - rho / 2) * integral
    return float(initial_moment + noise + forcing)


def linear_entry_time(initial_mass: float, hs2: float, gamma: float, radius: float,
                      c: float = 0.0) -> float:
    """First ``t`` with closed-form ``E||u(t)||^2 <= radius`` (``rho = 2``)."""
    kappa = 2 * (gamma - c)
    plateau = hs2 / kappa
    if initial_mass <= radius:
        return 0.0
    if radius <= plateau:
        return math.inf
    return math.log((initial_mass - plateau) / (radius - plateau)) / kappa


@dataclass
class InitialFamily:
    """Deterministic initial data ``u0 = sqrt(mass(s)) * profile / ||profile||``
    for a path started at time ``s``."""

    name: str
    profile: SpectralField
    mass_at: Callable[[float], float]
    start_dependent: bool = False

    @classmethod
    def constant(cls, name: str, profile: SpectralField, mass: float) -> "InitialFamily":
        return cls(name, profile, lambda s: mass, False)

    @classmethod
    def growing_into_past(cls, name: str, profile: SpectralField, mass0: float,
                          rate: float) -> "InitialFamily":
        """Mass ``mass0 exp(-rate s)``: tempered (attracted) iff ``rate < gamma - beta``."""
        return cls(name, profile, lambda s: mass0 * math.exp(-rate * s), True)

    def field_at(self, s: float) -> SpectralField:
        p = self.profile.to_physical()
        return p * (math.sqrt(self.mass_at(s)) / l2_norm(p))


@dataclass
class AbsorbingProbe:
    rho: float
    varrho_grid: list[float]
    t_grid: list[float]
    families: list[InitialFamily]
    reference_moment: float = 0.0
    R_values: dict = field(default_factory=dict)
    entry_times: dict = field(default_factory=dict)


@dataclass
class ProbeCell:
    varrho: float
    family: str
    radius: float
    t_grid: np.ndarray
    estimate: np.ndarray
    se: np.ndarray
    entry_time: float | None
    monotone_after_entry: bool
    blown_paths: int = 0
    aborted: bool = False


def _entry(t_grid, est, radius):
    inside = est <= radius
    if not inside[-1]:
        return None
    i = len(inside) - 1
    while i > 0 and inside[i - 1]:
        i -= 1
    return float(t_grid[i])


def pullback_absorption_probe(probe: AbsorbingProbe, params: ModelParams, cache: MultiplierCache,
                              cov: CovarianceSpec, dt: float, n_paths: int,
                              scheme=Scheme.EXP_EULER, seed: int = 0,
                              psi1: Psi1Schedule | None = None, guard: BlowupGuard | None = None,
                              k: float = 3.0, chunk_size: int = 50) -> list[ProbeCell]:
    """Estimate ``E||u(varrho, varrho - t, u0)||^rho`` over the (varrho, t) grid.

    For an autonomous forcing and a start-independent family, the law of
    ``u(varrho, varrho - t, u0)`` equals that of ``u(t, 0, u0)``, so one forward
    ensemble supplies every horizon. Otherwise each horizon is a separate
    ensemble started at ``varrho - t``.
    """
    regime = params.regime
    if not regime.attractor_enabled:
        raise RegimeError("regime", "absorption probe disabled: " + "; ".join(regime.messages))
    t_grid = np.asarray(probe.t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be nonnegative and increasing")
    if psi1 is None:
        psi1 = params.forcing.psi1_schedule(cache.grid)
    hs2 = cov.hs_norm_squared
    power = probe.rho / 2
    cells = []
    for varrho in probe.varrho_grid:
        radius = absorbing_radius(params, probe.rho, varrho, psi1, hs2, probe.reference_moment)
        probe.R_values[varrho] = radius
        for fam in probe.families:
            est = np.empty(len(t_grid))
            se = np.empty(len(t_grid))
            blown = 0
            if params.forcing.is_autonomous and not fam.start_dependent:
                t_max = float(t_grid[-1])
                u0 = fam.field_at(varrho - t_max)
                if t_max > 0:
                    run = run_ensemble(u0, (0.0, t_max), dt, params, cache, cov, scheme, seed,
                                       n_paths, guard=guard, chunk_size=chunk_size)
                    blown = int((~run.completed).sum())
                    if blown == n_paths:
                        est[:], se[:] = np.nan, np.nan
                    else:
                        idx = [int(round(t / dt)) for t in t_grid]
                        st = ensemble_stats(run.moment(power)[:, idx], k)
                        est[:], se[:] = st.mean, np.nan_to_num(st.se)
                else:
                    est[:], se[:] = l2_norm(u0) ** probe.rho, 0.0
            else:
                for i, t in enumerate(t_grid):
                    u0 = fam.field_at(varrho - t)
                    if t == 0:
                        est[i], se[i] = l2_norm(u0) ** probe.rho, 0.0
                        continue
                    run = run_ensemble(u0, (varrho - t, varrho), dt, params, cache, cov, scheme,
                                       seed, n_paths, guard=guard, chunk_size=chunk_size)
                    lost = int((~run.completed).sum())
                    blown += lost
                    if lost == n_paths:
                        est[i], se[i] = np.nan, np.nan
                        continue
                    st = ensemble_stats(run.moment(power)[:, -1], k)
                    est[i], se[i] = st.mean[0], np.nan_to_num(st.se[0])
            entry = _entry(t_grid, est, radius)
            mono = True
            if entry is not None:
                j0 = int(np.searchsorted(t_grid, entry))
                e, s = est[j0:], se[j0:]
                mono = bool(np.all(np.diff(e) <= k * np.sqrt(s[1:] ** 2 + s[:-1] ** 2) + 1e-12 * np.abs(e[:-1])))
            probe.entry_times[(varrho, fam.name)] = entry
            cells.append(ProbeCell(varrho, fam.name, radius, t_grid, est, se, entry, mono,
                                   blown, aborted=blown > 0))
    return cells


def rho_admissibility_note(params: ModelParams, rho: float) -> str | None:
    """Warn when the moment order is below the time exponent ``r``."""
    pair = admissible_pair(params.n, params.alpha, params.sigma)
    if rho < pair.r:
        return f"rho = {rho} is below the Strichartz time exponent r = {pair.r}"
    return None


__all__ = ["absorbing_radius", "linear_entry_time", "linear_mean_mass", "InitialFamily",
           "AbsorbingProbe", "ProbeCell", "pullback_absorption_probe", "rho_admissibility_note"]
