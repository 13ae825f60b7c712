"""Pathwise Ito balance for ``||u||^(2m)``.

Every term is rebuilt from quantities the integrator logged at the left
end of each step: the mass, ``Im(u, f)``, the basis projections
``(u, e_k)`` and the increment coordinates ``phi_k dbeta_k``. Integrals
use left-point sums only, as Ito integrals require.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..integrators import BlowupGuard, Trajectory, run_path
from ..noise import CovarianceSpec
from ..spectral import SpectralField, fft
from .stats import observed_orders


class MissingLogError(ValueError):
    pass


@dataclass
class MassLedger:
    """Cumulative terms of the balance; ``residual = lhs - rhs`` per recorded time."""

    m: int
    times: np.ndarray
    lhs: np.ndarray
    initial: float
    damping: np.ndarray
    forcing: np.ndarray
    martingale: np.ndarray
    ito_correction: np.ndarray
    quadratic: np.ndarray

    @property
    def rhs(self) -> np.ndarray:
        return (self.initial + self.damping + self.forcing + self.martingale
                + self.ito_correction + self.quadratic)

    @property
    def residual(self) -> np.ndarray:
        return self.lhs - self.rhs

    @property
    def relative_max(self) -> float:
        return float(np.max(np.abs(self.residual)) / max(1.0, self.initial))


def _cumulative(step_terms: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(step_terms)])


def mass_ledger(traj: Trajectory, m: int = 1) -> MassLedger:
    if m < 1:
        raise ValueError("moment order m must be >= 1")
    if traj.increments is None or traj.projections is None or traj.forcing_pairing is None:
        raise MissingLogError("trajectory carries no increment log")
    n = traj.steps
    M = traj.mass[: n + 1]
    Ml = M[:-1]
    dt = traj.dt
    gamma = traj.params.gamma
    hs2 = traj.cov.hs_norm_squared
    im_p = traj.projections.imag
    dW_pair = np.sum(traj.increments * im_p, axis=1)           # Im(u, dW)
    w_m1 = Ml ** (m - 1)
    damping = _cumulative(-2 * gamma * m * Ml**m * dt)
    forcing = _cumulative(-2 * m * w_m1 * traj.forcing_pairing * dt)
    martingale = _cumulative(-2 * m * w_m1 * dW_pair)
    ito = _cumulative(m * hs2 * w_m1 * dt)
    if m >= 2:
        q = np.sum(traj.cov.amplitudes**2 * im_p**2, axis=1)    # sum_j Im(u, Phi e_j)^2
        quad = _cumulative(2 * (m - 1) * m * Ml ** (m - 2) * q * dt)
    else:
        quad = np.zeros(n + 1)
    return MassLedger(m, traj.times[: n + 1], M**m, float(M[0] ** m),
                      damping, forcing, martingale, ito, quad)


def ito_mass_residual(traj: Trajectory, m: int = 1) -> tuple[np.ndarray, float]:
    """Residual series and ``max|residual| / max(1, ||u0||^(2m))``."""
    led = mass_ledger(traj, m)
    return led.residual, led.relative_max


def gauge_contribution(traj: Trajectory) -> float:
    """Largest cumulative mass change the power nonlinearity would add if kept.

    The nonlinear drift ``i |u|^(2 sigma) u`` enters the balance through
    ``2 Im(u, |u|^(2 sigma) u) dt``, which vanishes pointwise.
    """
    if traj.gauge_pairing is None:
        raise MissingLogError("trajectory was run without record_gauge=True")
    return float(np.max(np.abs(_cumulative(2 * traj.gauge_pairing * traj.dt))))


def noise_quadratic_term(u: SpectralField, cov: CovarianceSpec) -> tuple[float, float]:
    """``sum_j Im(u, Phi e_j)^2`` via the spectral projection and via direct quadrature."""
    uv = u.to_physical().values
    proj = cov.project(fft(uv, cov.grid))
    via_basis = float(np.sum(cov.amplitudes**2 * proj.imag**2))
    dV = cov.grid.cell_volume
    direct = 0.0
    for k, phi in enumerate(cov.amplitudes):
        if phi == 0:
            continue
        ek = cov.basis_field(k)
        direct += (dV * np.sum(uv * phi * ek)).imag ** 2
    return via_basis, float(direct)


@dataclass
class ConvergenceStudy:
    dts: np.ndarray
    residuals: np.ndarray
    pair_orders: np.ndarray
    fitted_order: float

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.residuals) < 0))

    def passed(self, min_order: float = 0.5) -> bool:
        return self.monotone and self.fitted_order >= min_order and bool(np.all(self.pair_orders >= min_order))


def ledger_convergence(u0, t_span, dts, params, cache, cov, scheme="exp_euler", seed=0,
                       path_index=0, m: int = 1, guard: BlowupGuard | None = None) -> ConvergenceStudy:
    """Max relative ledger residual for each ``dt`` on one shared Brownian path.

    All runs draw the Brownian path at the finest step and coarse runs sum
    consecutive fine increments.
    """
    dts = np.sort(np.asarray(dts, dtype=float))[::-1]
    fine = dts[-1]
    res = []
    for dt in dts:
        sub = int(round(dt / fine))
        if abs(sub * fine - dt) > 1e-12 * dt:
            raise ValueError("every dt must be an integer multiple of the finest dt")
        traj = run_path(u0, t_span, dt, params, cache, cov, scheme, seed, path_index,
                        guard=guard, substeps=sub)
        res.append(ito_mass_residual(traj, m)[1])
    res = np.array(res)
    pair, slope = observed_orders(dts, res)
    return ConvergenceStudy(dts, res, pair, slope)
