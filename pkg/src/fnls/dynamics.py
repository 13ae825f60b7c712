"""Coefficient algebra of the damped fractional NLS with additive noise.

    i du - [(-Delta)^alpha u - |u|^(2 sigma) u] dt + i gamma u dt = f(t, x, u) dt + dW

Forcing families come with exact bound functions for

    Im(f conj(u)) <= beta |u|^2 + psi1(t, x)
    |f|           <= psi2(x) |u| + psi3(t, x)
    |f(u) - f(v)| <= psi4(x) |u - v|
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .spectral import PHYSICAL, Grid, SpectralField, SpaceTagError

FAMILIES = ("zero", "linear_phase", "additive", "combined")


class RegimeError(ValueError):
    """Parameters outside the range where a quantity is defined."""

    def __init__(self, constraint: str, message: str):
        super().__init__(message)
        self.constraint = constraint


def nonlinear_term(u: np.ndarray, sigma: float) -> np.ndarray:
    if sigma == 0:
        return u.copy()
    mod2 = u.real**2 + u.imag**2
    if sigma == 1:
        return mod2 * u
    return mod2**sigma * u


def nonlinearity(f: SpectralField, sigma: float) -> SpectralField:
    """Pointwise ``|u|^(2 sigma) u``."""
    if f.space != PHYSICAL:
        raise SpaceTagError("nonlinearity needs a physical-space field")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    return SpectralField(f.grid, nonlinear_term(f.values, sigma), PHYSICAL)


@dataclass(frozen=True)
class Psi1Schedule:
    """Time profile of ``||psi1(s)||_{L^1_x}``.

    ``amplitude * exp(rate * s)`` when ``rate`` is set (closed-form
    integrals), otherwise the callable ``l1_norm``; ``support`` restricts
    it to a time window.
    """

    amplitude: float = 0.0
    rate: float | None = 0.0
    l1_norm: Callable[[float], float] | None = None
    support: tuple[float, float] | None = None

    @property
    def is_zero(self) -> bool:
        return self.l1_norm is None and self.amplitude == 0.0

    def __call__(self, s: float) -> float:
        if self.support is not None and not self.support[0] <= s <= self.support[1]:
            return 0.0
        if self.l1_norm is not None:
            return float(self.l1_norm(s))
        return self.amplitude * math.exp(self.rate * s)


@dataclass(frozen=True, eq=False)
class ForcingSpec:
    """One of the built-in forcings.

    * ``zero``: f = 0.
    * ``linear_phase``: f = i c(x) u with 0 <= c <= beta.
    * ``additive``: f = g(t, x) = exp(g_rate t) g0(x), needs beta > 0.
    * ``combined``: f = i c(x) u + g(t, x) with 0 <= c <= beta/2.
    """

    family: str = "zero"
    beta: float = 0.0
    c_profile: np.ndarray | float = 0.0
    g_profile: np.ndarray | float = 0.0
    g_rate: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown forcing family {self.family!r}; choose from {FAMILIES}")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        c = np.asarray(self.c_profile, dtype=float)
        g = np.asarray(self.g_profile, dtype=np.complex128)
        cap = {"linear_phase": self.beta, "combined": self.beta / 2}.get(self.family)
        if cap is not None and (np.any(c < 0) or np.any(c > cap * (1 + 1e-15))):
            raise ValueError(f"{self.family} forcing needs 0 <= c(x) <= {cap}")
        if self.family in ("additive", "combined") and self.beta <= 0:
            raise ValueError(f"{self.family} forcing needs beta > 0 to absorb Im(g conj u)")
        object.__setattr__(self, "c_profile", c)
        object.__setattr__(self, "g_profile", g)

    @classmethod
    def zero(cls) -> "ForcingSpec":
        return cls("zero")

    @classmethod
    def linear_phase(cls, beta: float, c_profile=None) -> "ForcingSpec":
        return cls("linear_phase", beta, beta if c_profile is None else c_profile)

    @classmethod
    def additive(cls, beta: float, g_profile, g_rate: float = 0.0) -> "ForcingSpec":
        return cls("additive", beta, 0.0, g_profile, g_rate)

    @classmethod
    def combined(cls, beta: float, c_profile, g_profile, g_rate: float = 0.0) -> "ForcingSpec":
        return cls("combined", beta, c_profile, g_profile, g_rate)

    @property
    def has_phase(self) -> bool:
        return self.family in ("linear_phase", "combined")

    @property
    def has_source(self) -> bool:
        return self.family in ("additive", "combined")

    @property
    def is_autonomous(self) -> bool:
        return not self.has_source or self.g_rate == 0

    @property
    def uniform_phase_rate(self) -> float | None:
        """``c`` when ``f = i c u`` with constant ``c`` (a diagonal operator), else None."""
        if self.family == "zero":
            return 0.0
        if self.family == "linear_phase" and self.c_profile.ndim == 0:
            return float(self.c_profile)
        return None

    def source(self, t: float) -> np.ndarray:
        return math.exp(self.g_rate * t) * self.g_profile

    def evaluate(self, t: float, u: np.ndarray) -> np.ndarray:
        """Array kernel of ``f(t, ., u)``; ``u`` may carry leading batch axes."""
        if self.family == "zero":
            return np.zeros_like(u)
        out = np.zeros_like(u)
        if self.has_phase:
            out = out + 1j * self.c_profile * u
        if self.has_source:
            out = out + self.source(t)
        return out

    # -- declared bound functions ---------------------------------------

    def _g_weight(self) -> float:
        # |g||u| <= w |u|^2 + |g|^2/(4w) with w = beta (additive), beta/2 (combined)
        return self.beta if self.family == "additive" else self.beta / 2

    def psi1(self, t: float) -> np.ndarray | float:
        if not self.has_source:
            return 0.0
        return np.abs(self.source(t)) ** 2 / (4 * self._g_weight())

    def psi2(self) -> np.ndarray | float:
        return self.c_profile if self.has_phase else 0.0

    def psi3(self, t: float) -> np.ndarray | float:
        return np.abs(self.source(t)) if self.has_source else 0.0

    def psi4(self) -> np.ndarray | float:
        return self.psi2()

    def psi1_schedule(self, grid: Grid) -> Psi1Schedule:
        """``||psi1(s)||_{L^1}`` as an exponential in ``s`` (rate ``2 g_rate``)."""
        if not self.has_source:
            return Psi1Schedule()
        g0 = np.broadcast_to(self.g_profile, grid.shape)
        amp = grid.cell_volume * float(np.sum(np.abs(g0) ** 2)) / (4 * self._g_weight())
        return Psi1Schedule(amplitude=amp, rate=2 * self.g_rate)


def forcing_eval(spec: ForcingSpec, t: float, f: SpectralField) -> SpectralField:
    if f.space != PHYSICAL:
        raise SpaceTagError("forcing_eval needs a physical-space field")
    return SpectralField(f.grid, spec.evaluate(t, f.values), PHYSICAL)


@dataclass
class AssumptionReport:
    """Worst slack of each forcing bound; negative slack is a violation."""

    margins: dict[str, float]
    tolerance: float = 1e-12
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(m >= -self.tolerance for m in self.margins.values())

    @property
    def violations(self) -> dict[str, float]:
        return {k: -m for k, m in self.margins.items()}


def check_assumptions(spec: ForcingSpec, probe_fields: Sequence[SpectralField],
                      t: float = 0.0,
                      evaluator: Callable[[float, np.ndarray], np.ndarray] | None = None
                      ) -> AssumptionReport:
    """Evaluate the three forcing bounds at every lattice point of every probe.

    The derivative bound is checked in Lipschitz form on consecutive probe
    pairs. ``evaluator`` replaces the forcing while keeping ``spec``'s
    declared bounds, which is how deliberately broken forcings are probed.
    """
    if not probe_fields:
        raise ValueError("check_assumptions needs at least one probe field")
    f_of = evaluator if evaluator is not None else spec.evaluate
    psi1, psi2, psi3, psi4 = spec.psi1(t), spec.psi2(), spec.psi3(t), spec.psi4()
    worst = {"growth": -np.inf, "size": -np.inf, "lipschitz": -np.inf}
    us = [p.to_physical().values for p in probe_fields]
    for u in us:
        f = f_of(t, u)
        excess1 = np.imag(f * np.conj(u)) - spec.beta * np.abs(u) ** 2 - psi1
        excess2 = np.abs(f) - psi2 * np.abs(u) - psi3
        worst["growth"] = max(worst["growth"], float(np.max(excess1)))
        worst["size"] = max(worst["size"], float(np.max(excess2)))
    pairs = list(zip(us, us[1:])) or [(us[0], np.zeros_like(us[0]))]
    for u, v in pairs:
        excess3 = np.abs(f_of(t, u) - f_of(t, v)) - psi4 * np.abs(u - v)
        worst["lipschitz"] = max(worst["lipschitz"], float(np.max(excess3)))
    return AssumptionReport({k: -v for k, v in worst.items()})


@dataclass(frozen=True)
class AdmissiblePair:
    """Strichartz exponents ``(r, p)``; ``r = inf`` stands for the sigma = 0 pair."""

    r: float
    p: float
    n: int
    alpha: float
    endpoint_flag: bool = False

    @property
    def identity_residual(self) -> float:
        lhs = (0.0 if math.isinf(self.r) else 2 * self.alpha / self.r) + self.n / self.p
        return abs(lhs - self.n / 2)


def excluded_endpoint(n: int) -> tuple[float, float]:
    return (2.0, (4 * n - 2) / (2 * n - 3)) if n >= 2 else (2.0, math.inf)


def sigma_bound(n: int, alpha: float) -> float:
    """Upper limit ``2 alpha / (n - 2 alpha)`` on sigma (inf when n <= 2 alpha)."""
    return math.inf if n <= 2 * alpha else 2 * alpha / (n - 2 * alpha)


def admissible_pair(n: int, alpha: float, sigma: float) -> AdmissiblePair:
    """``r = 4 (sigma + 1) alpha / (n sigma)``, ``p = 2 sigma + 2``.

    Raises RegimeError when the resulting pair is not Strichartz-admissible
    (``r < 2``) or the inputs are out of range.
    """
    if n < 1:
        raise RegimeError("n>=1", f"dimension must be positive, got {n}")
    if not 0 < alpha <= 1:
        raise RegimeError("0<alpha<=1", f"alpha must lie in (0, 1], got {alpha}")
    if sigma < 0:
        raise RegimeError("sigma>=0", f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return AdmissiblePair(math.inf, 2.0, n, alpha)
    bound = sigma_bound(n, alpha)
    if sigma >= bound:
        raise RegimeError("sigma<2alpha/(n-2alpha)",
                          f"sigma = {sigma} violates sigma < 2 alpha/(n - 2 alpha) = {bound}; "
                          "time exponent would drop to r <= 2")
    r = 4 * (sigma + 1) * alpha / (n * sigma)
    p = 2 * sigma + 2
    er, ep = excluded_endpoint(n)
    endpoint = math.isclose(r, er, rel_tol=1e-12) and math.isclose(p, ep, rel_tol=1e-12)
    return AdmissiblePair(r, p, n, alpha, endpoint)


@dataclass
class RegimeReport:
    n: int
    alpha: float
    sigma: float
    gamma: float
    beta: float
    checks: dict[str, bool]
    messages: list[str]

    @property
    def well_posed(self) -> bool:
        """Hypotheses of the global well-posedness result."""
        return all(self.checks[k] for k in ("dimension", "alpha", "sigma"))

    @property
    def attractor_enabled(self) -> bool:
        return self.well_posed and self.checks["damping"]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def _frac(x: float) -> str:
    fr = Fraction(x).limit_denominator(1000)
    return str(fr) if abs(float(fr) - x) < 1e-12 else repr(x)


def validate_regime(n: int, alpha: float, sigma: float, gamma: float, beta: float) -> RegimeReport:
    """Evaluate every parameter constraint; never raises."""
    a_lo = n / (2 * n - 1) if n >= 1 else math.inf
    s_hi = sigma_bound(n, alpha) if alpha > 0 else 0.0
    checks = {
        "dimension": n >= 2,
        "alpha": a_lo <= alpha < 1,
        "sigma": 0 <= sigma < s_hi,
        "damping": gamma > beta,
    }
    text = {
        "dimension": f"n >= 2 (got n = {n})",
        "alpha": f"alpha >= n/(2n-1) = {_frac(a_lo)} and alpha < 1 (got alpha = {alpha})",
        "sigma": f"0 <= sigma < 2alpha/(n-2alpha) = {_frac(s_hi) if math.isfinite(s_hi) else 'inf'} "
                 f"(got sigma = {sigma})",
        "damping": f"gamma > beta (got gamma = {gamma}, beta = {beta})",
    }
    messages = [text[k] for k, ok in checks.items() if not ok]
    return RegimeReport(n, alpha, sigma, gamma, beta, checks, messages)


@dataclass(frozen=True)
class ModelParams:
    """Coefficients ``(n, alpha, sigma, gamma)`` and the forcing."""

    n: int
    alpha: float
    sigma: float
    gamma: float
    forcing: ForcingSpec = field(default_factory=ForcingSpec.zero)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")

    @property
    def beta(self) -> float:
        return self.forcing.beta

    @property
    def regime(self) -> RegimeReport:
        return validate_regime(self.n, self.alpha, self.sigma, self.gamma, self.beta)

    @property
    def regime_valid(self) -> bool:
        return self.regime.well_posed


def radiality_deviation(f: SpectralField, center=None, bins: int | None = None) -> float:
    """Relative L2 distance between ``u`` and its shell-averaged radial profile."""
    u = f.to_physical().values
    g = f.grid
    if center is None:
        center = [g.box_length / 2] * g.n
    r = np.sqrt(sum((x - c) ** 2 for x, c in zip(g.coordinates, center)))
    nb = bins or g.points_per_dim // 2
    idx = np.minimum((r / (g.box_length / 2) * nb).astype(int), nb)
    counts = np.bincount(idx.ravel(), minlength=nb + 1)
    re = np.bincount(idx.ravel(), u.real.ravel(), minlength=nb + 1)
    im = np.bincount(idx.ravel(), u.imag.ravel(), minlength=nb + 1)
    avg = (re + 1j * im) / np.maximum(counts, 1)
    denom = np.linalg.norm(u)
    return 0.0 if denom == 0 else float(np.linalg.norm(u - avg[idx]) / denom)
