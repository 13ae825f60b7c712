"""Expected-mass law and moment bounds checked against ensembles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ..dynamics import ModelParams, Psi1Schedule, RegimeError
from ..integrators import EnsembleRun
from .stats import EnsembleStats, ensemble_stats, fit_decay_rate


class InsufficientPathsError(ValueError):
    pass


def young_constant(m: float) -> float:
    """``((m-1)/m)^(m-1)``, equal to 1 at ``m = 1``."""
    return 1.0 if m == 1 else ((m - 1) / m) ** (m - 1)


def c1(m: float) -> float:
    """Noise constant: ``2^(m-1) ((m-1)/m)^(m-1) (2m-1)^m / m``.

    Young's inequality with weight ``(gamma-beta)/2`` on the Ito terms,
    then integration of the resulting linear differential inequality.
    """
    return 2 ** (m - 1) * young_constant(m) * (2 * m - 1) ** m / m


def c2(m: float) -> float:
    """Forcing constant: ``4^m 2^(m-1) ((m-1)/m)^(m-1) / m``."""
    return 4**m * 2 ** (m - 1) * young_constant(m) / m


def linear_mean_mass(t, initial_mass: float, hs2: float, gamma: float, c: float = 0.0):
    """Exact ``E||u(t)||^2`` when the forcing is ``f = i c u`` with constant ``c``.

    The power nonlinearity drops out of the mass balance, so this holds for
    every sigma:  ``d/dt E M = -2 (gamma - c) E M + ||Phi||_HS^2``.
    """
    t = np.asarray(t, dtype=float)
    kappa = 2 * (gamma - c)
    if kappa == 0:
        return initial_mass + hs2 * t
    decay = np.exp(-kappa * t)
    return decay * initial_mass + hs2 / kappa * (1 - decay)


@dataclass
class ExpectedMassReport:
    mode: str
    times: np.ndarray
    stats: EnsembleStats
    reference: np.ndarray
    tolerance: np.ndarray
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(np.all(np.abs(self.stats.mean - self.reference) <= self.tolerance))

    @property
    def max_z(self) -> float:
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(self.stats.mean - self.reference) / self.stats.se
        return float(np.nanmax(np.where(np.isfinite(z), z, np.nan))) if np.any(np.isfinite(z)) else 0.0


def _time_index(run: EnsembleRun, times) -> np.ndarray:
    if times is None:
        return np.arange(len(run.times))
    t0 = run.times[0]
    return np.array([int(round((t - t0) / run.dt)) for t in times])


def expected_mass_check(run: EnsembleRun, times=None, k: float = 3.0, rtol: float = 1e-9,
                        min_paths: int = 100) -> ExpectedMassReport:
    """Ensemble mean of the mass against its exact law.

    For forcings ``i c u`` with constant ``c`` the reference is the closed
    form; otherwise each path's drift-corrected mass
    ``M(t) - M(0) - int(-2 gamma M - 2 Im(u, f) + ||Phi||^2) ds``
    must average to zero. Tolerance is ``k`` standard errors plus ``rtol``
    times the reference scale.

    The drift integral is a left-point sum, so the residual carries a
    first-order bias in ``dt`` on top of the statistical error; pick ``dt``
    so that this bias sits below the band.
    """
    ok = run.completed
    if ok.sum() < min_paths:
        raise InsufficientPathsError(f"need at least {min_paths} completed paths, got {int(ok.sum())}")
    idx = _time_index(run, times)
    t = run.times[idx] - run.times[0]
    mass = run.mass[ok]
    hs2 = run.cov.hs_norm_squared
    c = run.params.forcing.uniform_phase_rate
    if c is not None:
        stats = ensemble_stats(mass[:, idx], k)
        m0 = float(np.mean(mass[:, 0]))
        ref = linear_mean_mass(t, m0, hs2, run.params.gamma, c)
        mode = "closed_form"
        scale = np.abs(ref)
    else:
        if run.forcing_pairing is None:
            raise ValueError("general forcing needs an ensemble run with record_forcing=True")
        drift = -2 * run.params.gamma * mass[:, :-1] - 2 * run.forcing_pairing[ok] + hs2
        integral = np.concatenate([np.zeros((mass.shape[0], 1)), np.cumsum(drift * run.dt, axis=1)], axis=1)
        resid = mass - mass[:, :1] - integral
        stats = ensemble_stats(resid[:, idx], k)
        ref = np.zeros(len(idx))
        mode = "ode_residual"
        scale = np.mean(mass[:, idx], axis=0)
    se = np.nan_to_num(stats.se, nan=0.0)
    tol = k * se + rtol * np.maximum(scale, 1e-300)
    return ExpectedMassReport(mode, run.times[idx], stats, ref, tol)


def psi1_window_integral(psi1: Psi1Schedule | None, rate: float, power: float,
                         lo: float, hi: float) -> float:
    """``int_lo^hi exp(rate (s - hi)) psi1(s)^power ds`` (``lo`` may be -inf)."""
    if psi1 is None or psi1.is_zero:
        return 0.0
    if psi1.support is not None:
        lo, hi_c = max(lo, psi1.support[0]), min(hi, psi1.support[1])
    else:
        hi_c = hi
    if hi_c <= lo:
        return 0.0
    if psi1.l1_norm is None:
        kappa = rate + psi1.rate * power
        a = psi1.amplitude**power
        # exp(rate (s - hi)) a exp(rate1 p s) integrates to a e^{-rate hi} [e^{kappa s}/kappa]
        if kappa == 0:
            if math.isinf(lo):
                raise DivergentIntegralError("psi1 integral diverges at -inf")
            return a * math.exp(-rate * hi) * (hi_c - lo)
        if math.isinf(lo):
            if kappa < 0:
                raise DivergentIntegralError("psi1 integral diverges at -inf")
            return a * math.exp(kappa * hi_c - rate * hi) / kappa
        return a * math.exp(-rate * hi) * (math.exp(kappa * hi_c) - math.exp(kappa * lo)) / kappa
    val, err = integrate.quad(lambda s: math.exp(rate * (s - hi)) * psi1(s) ** power,
                              lo, hi_c, epsrel=1e-8, limit=200)
    if not math.isfinite(val) or err > 1e-6 * max(abs(val), 1e-300) + 1e-300:
        raise DivergentIntegralError(f"psi1 integral failed to converge (value {val}, error {err})")
    return float(val)


class DivergentIntegralError(ValueError):
    pass


def moment_bound(t, m: float, gamma: float, beta: float, hs2: float, initial_moment: float,
                 psi1: Psi1Schedule | None = None, varrho: float = 0.0, tight: bool = False):
    """Bound on ``E||u(varrho, varrho - t, u0)||^(2m)``.

        exp(-(g-b) m t) E||u0||^(2m) + C1(m) ||Phi||^(2m) (g-b)^(-m) [1 - exp(-(g-b) m t)]
        + C2(m) (g-b)^(1-m) int_{varrho-t}^{varrho} exp(-(g-b) m (varrho-s)) ||psi1(s)||^m ds

    The bracket is dropped (set to 1) unless ``tight``.
    """
    d = gamma - beta
    if d <= 0:
        raise RegimeError("gamma>beta", "moment bound needs gamma > beta")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    decay = np.exp(-d * m * t)
    noise = c1(m) * hs2**m * d ** (-m) * ((1 - decay) if tight else 1.0)
    forcing = np.array([c2(m) * d ** (1 - m) * psi1_window_integral(psi1, d * m, m, varrho - ti, varrho)
                        for ti in t])
    return decay * initial_moment + noise + forcing


@dataclass
class MomentBoundReport:
    m: int
    times: np.ndarray
    stats: EnsembleStats
    bound: np.ndarray
    tight_bound: np.ndarray
    fitted_rate: float
    predicted_rate: float
    passed: bool = field(init=False)

    def __post_init__(self):
        se = np.nan_to_num(self.stats.se, nan=0.0)
        self.passed = bool(np.all(self.stats.mean <= self.bound + self.stats.k * se))

    @property
    def margin(self) -> np.ndarray:
        return self.bound - self.stats.mean


def moment_bound_check(run: EnsembleRun, m: int, params: ModelParams | None = None, times=None,
                       psi1: Psi1Schedule | None = None, varrho: float = 0.0,
                       k: float = 3.0) -> MomentBoundReport:
    """Compare ensemble ``E||u||^(2m)`` with the moment bound at each horizon.

    Also fits the relaxation rate of the mean toward its late-time plateau
    (reported next to ``(gamma - beta) m``, not asserted).
    """
    params = params or run.params
    if not params.gamma > params.beta:
        raise RegimeError("gamma>beta", "moment bounds are disabled unless gamma > beta")
    idx = _time_index(run, times)
    t = run.times[idx] - run.times[0]
    mom = run.moment(m)
    stats = ensemble_stats(mom[:, idx], k)
    init = float(np.mean(mom[:, 0]))
    hs2 = run.cov.hs_norm_squared
    if psi1 is None:
        psi1 = params.forcing.psi1_schedule(run.cov.grid)
    args = (m, params.gamma, params.beta, hs2, init, psi1, varrho)
    bound = moment_bound(t, *args)
    tight = moment_bound(t, *args, tight=True)
    full = ensemble_stats(mom, k)
    tail = full.mean[int(0.8 * len(full.mean)):]
    plateau = float(np.mean(tail))
    gap = full.mean - plateau
    se = np.nan_to_num(full.se, nan=0.0)
    sel = gap > 10 * se + 1e-12 * abs(plateau)
    tt = run.times - run.times[0]
    rate = fit_decay_rate(tt[sel], gap[sel]) if sel.sum() >= 2 else float("nan")
    return MomentBoundReport(m, run.times[idx], stats, bound, tight, rate,
                             (params.gamma - params.beta) * m)


def gap_decay_rate(run_a: EnsembleRun, run_b: EnsembleRun, t_max: float | None = None) -> float:
    """Decay rate of ``E||u_a||^2 - E||u_b||^2`` for two ensembles on shared noise."""
    if not np.array_equal(run_a.path_indices, run_b.path_indices) or run_a.seed != run_b.seed:
        raise ValueError("gap decay needs ensembles driven by the same noise paths")
    ok = run_a.completed & run_b.completed
    gap = np.mean(run_a.mass[ok] - run_b.mass[ok], axis=0)
    t = run_a.times - run_a.times[0]
    sel = np.ones_like(t, dtype=bool) if t_max is None else t <= t_max
    return fit_decay_rate(t[sel], gap[sel])
