"""Time stepping for the mild form of the stochastic fractional NLS.

Both schemes treat the dispersive and damping parts exactly in Fourier
space, evaluate noise and nonlinearity at the left endpoint (Ito), and
consume identical increments for a shared ``(seed, path_index)``.

exp_euler::

    u+ = E(dt) [u + dt P(i |u|^(2 sigma) u - i f(t, u)) - i dW]

strang::

    w  = E(dt/2) u
    u+ = E(dt/2) [P(w exp(i |w|^(2 sigma) dt) - i dt f(t + dt/2, w)) - i dW]

with ``E(s) = exp(-gamma s - i s |xi|^(2 alpha))`` and ``P`` the 2/3-rule
filter. For ``sigma = 0`` the power term is the linear map ``u -> u`` and
is folded into ``E`` as the phase ``exp(i s)``.

Runs are batched: the state carries a leading path axis and all paths of a
chunk advance together. Chunk composition depends only on ``chunk_size``,
never on the thread count, so results are reproducible bit for bit.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import spectral as sp
from .dynamics import ModelParams, nonlinear_term
from .noise import CovarianceSpec, NoiseStream, WienerIncrement
from .spectral import PHYSICAL, MultiplierCache, SpectralField


class Scheme(str, Enum):
    EXP_EULER = "exp_euler"
    STRANG = "strang"


class BlowupDetected(RuntimeError):
    """Mass crossed the guard threshold (or became non-finite).

    ``t_stop`` is the first recorded time past the threshold and serves as
    the estimate of the explosion time; ``onset`` is where the final run of
    consecutive mass growth began.
    """

    def __init__(self, t_stop: float, mass: float, path_index: int = 0,
                 onset: float | None = None, trajectory=None):
        super().__init__(f"blow-up on path {path_index} at t = {t_stop:.6g} (mass {mass:.6g})")
        self.t_stop = t_stop
        self.mass = mass
        self.path_index = path_index
        self.onset = onset
        self.trajectory = trajectory


@dataclass
class BlowupGuard:
    """Fires iff the discrete mass exceeds ``mass_threshold``.

    The default threshold is ``relative_factor`` times the initial mass
    (or ``relative_factor`` itself for zero initial data).
    """

    mass_threshold: float | None = None
    relative_factor: float = 1e6
    consecutive_growth_limit: int | None = None

    def threshold(self, initial_mass: float) -> float:
        if self.mass_threshold is not None:
            return float(self.mass_threshold)
        return self.relative_factor * (initial_mass if initial_mass > 0 else 1.0)


def default_dt(cache: MultiplierCache) -> float:
    """Largest step resolving the stiffest retained phase to ``pi/4``."""
    return math.pi / 4 / cache.max_symbol


def snapshot_schedule(t0: float, t1: float, count: int, kind: str = "uniform") -> np.ndarray:
    if count < 2:
        return np.array([t1])
    if kind == "uniform":
        return np.linspace(t0, t1, count)
    if kind == "geometric":
        span = t1 - t0
        first = span / 2 ** (count - 2)
        return np.concatenate([[t0], t0 + np.geomspace(first, span, count - 1)])
    raise ValueError(f"unknown snapshot schedule {kind!r}")


class _Kernel:
    """Precomputed multipliers and the vectorised step for one configuration.

    The kernel owns the layout of the state it advances. In general that is
    the full array of Fourier coefficients. When everything left is diagonal
    (``sigma = 0`` and ``f = i c u``) it is the flat vector of in-band modes
    only, since out-of-band modes start at zero and are never fed.
    """

    def __init__(self, params: ModelParams, cache: MultiplierCache, cov: CovarianceSpec,
                 dt: float, scheme: Scheme, allow_diagonal: bool = True):
        if cache.grid != cov.grid:
            raise sp.GridMismatchError("multiplier cache and covariance live on different grids")
        if not dt > 0:
            raise ValueError(f"time step must be positive, got {dt}")
        self.grid = g = cache.grid
        self.params = params
        self.cov = cov
        self.dt = dt
        self.scheme = Scheme(scheme)
        self.sigma = params.sigma
        self.forcing = params.forcing
        lin = params.gamma + 1j * cache.symbol
        if self.sigma == 0:
            lin = lin - 1j
        h = dt if self.scheme is Scheme.EXP_EULER else dt / 2
        self.E = np.exp(-h * lin)
        self.mask = g.dealias_mask
        c = self.forcing.uniform_phase_rate
        self.diagonal = allow_diagonal and self.sigma == 0 and c is not None
        self.c = c
        zero = np.array([0])
        pos, neg = cov.wavevector_indices
        if self.diagonal:
            self.band = np.flatnonzero(self.mask.ravel())
            full = self.E.ravel()[self.band]
            # exp_euler: E (1 + c dt); strang: E (1 + c dt) E
            self.linear = full * (1 + c * dt) * (full if self.scheme is Scheme.STRANG else 1)
            where = lambda idx: np.searchsorted(self.band, idx)
            zero, pos, neg = where(zero), where(pos), where(neg)
            out_e = full
        else:
            self.band = None
            out_e = self.E.ravel()
        dV = g.cell_volume
        # -i E(h) times the basis synthesis weights, at the driven positions
        self._noise_at = (zero, pos, neg)
        self._noise_e = (-1j * out_e[zero] / math.sqrt(dV), -1j * out_e[pos] / math.sqrt(2 * dV),
                         -1j * out_e[neg] / math.sqrt(2 * dV))

    # -- layout ---------------------------------------------------------------

    def encode(self, u_hat: np.ndarray) -> np.ndarray:
        if self.band is None:
            return u_hat
        flat = u_hat.reshape(u_hat.shape[: u_hat.ndim - self.grid.n] + (-1,))
        return flat[..., self.band].copy()

    def decode(self, state: np.ndarray) -> np.ndarray:
        if self.band is None:
            return state
        g = self.grid
        full = np.zeros(state.shape[:-1] + (g.size,), dtype=np.complex128)
        full[..., self.band] = state
        return full.reshape(state.shape[:-1] + g.shape)

    def mass(self, state: np.ndarray) -> np.ndarray:
        if self.band is None:
            return sp.mass_of(state, self.grid)
        return self.grid.cell_volume * sp.flat_mass(state)

    def project(self, state: np.ndarray) -> np.ndarray:
        return self.cov.project(self.decode(state))

    # -- dynamics -------------------------------------------------------------

    def pairings(self, state, t, want_forcing, want_gauge):
        """Left-point ``Im(u, f)`` and ``Im(u, |u|^(2 sigma) u)`` for each path."""
        g = self.grid
        dV = g.cell_volume
        axes = g.axes
        forcing = gauge = None
        if self.diagonal and not want_gauge:
            return None, -self.c * self.mass(state), None
        u = sp.ifft(self.decode(state), g)
        if want_forcing:
            f = self.forcing.evaluate(t, u)
            forcing = dV * np.sum(np.imag(u * np.conj(f)), axis=axes)
        if want_gauge:
            nl = nonlinear_term(u, self.sigma)
            gauge = dV * np.sum(np.imag(u * np.conj(nl)), axis=axes)
        return None, forcing, gauge

    def add_noise(self, flat: np.ndarray, coords: np.ndarray) -> None:
        """``flat += -i E(h) dW`` in place, touching only the driven modes."""
        zero, pos, neg = self._noise_at
        e0, ep, en = self._noise_e
        flat[..., zero] += e0 * coords[..., :1]
        if len(pos):
            z = coords[..., 1::2] - 1j * coords[..., 2::2]
            flat[..., pos] += ep * z
            flat[..., neg] += en * np.conj(z)

    def step(self, state: np.ndarray, t: float, coords: np.ndarray) -> np.ndarray:
        """Advance by one step; ``coords`` are the increment coordinates ``phi_k dbeta_k``."""
        dt = self.dt
        g = self.grid
        if self.diagonal:
            out = state * self.linear
            self.add_noise(out, coords)
            return out
        if self.scheme is Scheme.EXP_EULER:
            u = sp.ifft(state, g)
            rhs = -1j * self.forcing.evaluate(t, u)
            if self.sigma != 0:
                rhs += 1j * nonlinear_term(u, self.sigma)
            v = state + dt * (self.mask * sp.fft(rhs, g))
        else:
            w = sp.ifft(self.E * state, g)
            if self.sigma != 0:
                mod2 = w.real**2 + w.imag**2
                rot = w * np.exp(1j * dt * (mod2 if self.sigma == 1 else mod2**self.sigma))
            else:
                rot = w
            rot = rot - 1j * dt * self.forcing.evaluate(t + dt / 2, w)
            v = self.mask * sp.fft(rot, g)
        v *= self.E
        self.add_noise(v.reshape(v.shape[: v.ndim - g.n] + (-1,)), coords)
        return v


# ---------------------------------------------------------------------------
# single-step public API


@dataclass
class StepState:
    t: float
    u: SpectralField
    stream: NoiseStream
    scheme: Scheme = Scheme.EXP_EULER
    recorded_increments: list[tuple[float, np.ndarray]] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.recorded_increments)


def _step(state: StepState, dt: float, params: ModelParams, cache: MultiplierCache,
          cov: CovarianceSpec, scheme: Scheme, guard: BlowupGuard | None) -> StepState:
    if state.stream.spec is not cov:
        raise ValueError("noise stream was built for a different covariance")
    kern = _Kernel(params, cache, cov, dt, scheme)
    u_hat = sp.fft(state.u.to_physical().values, cache.grid)
    if not np.all(np.isfinite(u_hat)):
        raise BlowupDetected(state.t, math.inf)
    coords = state.stream.coords(dt)[0]
    new_hat = kern.decode(kern.step(kern.encode(u_hat), state.t, coords))
    mass = float(sp.mass_of(new_hat, cache.grid))
    t = state.t + dt
    m0 = float(sp.mass_of(u_hat, cache.grid))
    if not math.isfinite(mass) or (guard is not None and mass > guard.threshold(m0)):
        raise BlowupDetected(t, mass)
    log = state.recorded_increments + [(state.t, coords)]
    return StepState(t, SpectralField(cache.grid, sp.ifft(new_hat, cache.grid), PHYSICAL),
                     state.stream, Scheme(scheme), log)


def step_exp_euler(state, dt, params, cache, cov, guard=None) -> StepState:
    return _step(state, dt, params, cache, cov, Scheme.EXP_EULER, guard)


def step_strang(state, dt, params, cache, cov, guard=None) -> StepState:
    return _step(state, dt, params, cache, cov, Scheme.STRANG, guard)


def increment_field(cov: CovarianceSpec, coords: np.ndarray, dt: float) -> WienerIncrement:
    values = sp.ifft(cov.coefficients(coords), cov.grid).real
    return WienerIncrement(SpectralField(cov.grid, values.astype(complex)), dt, coords)


# ---------------------------------------------------------------------------
# batched runs


@dataclass
class Trajectory:
    """One path: per-step mass-balance inputs, snapshots and the increment log.

    ``projections[k]`` holds ``(u(t_k), e_j)`` for every noise basis mode and
    ``increments[k]`` the coordinates ``phi_j dbeta_j`` used on step k, so
    every Ito term can be rebuilt without storing fields.
    """

    times: np.ndarray
    mass: np.ndarray
    dt: float
    params: ModelParams
    cov: CovarianceSpec
    scheme: Scheme
    seed: int
    path_index: int
    forcing_pairing: np.ndarray | None = None
    gauge_pairing: np.ndarray | None = None
    projections: np.ndarray | None = None
    increments: np.ndarray | None = None
    snapshot_times: list[float] = field(default_factory=list)
    snapshots: list[SpectralField] = field(default_factory=list)
    status: str = "ok"
    t_stop: float | None = None

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def final(self) -> SpectralField:
        return self.snapshots[-1]


@dataclass
class EnsembleRun:
    """Scalar series of a batch of paths, rows sorted by path index."""

    path_indices: np.ndarray
    times: np.ndarray
    mass: np.ndarray
    forcing_pairing: np.ndarray | None
    status: list[str]
    t_stop: np.ndarray
    dt: float
    params: ModelParams
    cov: CovarianceSpec
    scheme: Scheme
    seed: int
    final: np.ndarray | None = None

    @property
    def completed(self) -> np.ndarray:
        return np.array([s == "ok" for s in self.status])

    def moment(self, m: float) -> np.ndarray:
        """``||u||^(2m)`` per path and time (completed paths only)."""
        return self.mass[self.completed] ** m


def _n_steps(t0: float, t1: float, dt: float) -> int:
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got ({t0}, {t1})")
    n = int(round((t1 - t0) / dt))
    if n < 1 or abs(n * dt - (t1 - t0)) > 1e-9 * max(1.0, abs(t1 - t0)):
        raise ValueError(f"dt = {dt} does not divide the interval [{t0}, {t1}]")
    return n


def _prepare_initial(u0, grid, n_paths):
    if isinstance(u0, SpectralField):
        vals = u0.to_physical().values
    else:
        vals = np.asarray(u0, dtype=np.complex128)
    u_hat = sp.fft(vals, grid) * grid.dealias_mask
    return np.broadcast_to(u_hat, (n_paths,) + grid.shape).copy()


def _simulate_chunk(u_hat, t0, n_steps, kern: _Kernel, streams, guard, substeps,
                    record_forcing, record_ledger, record_gauge, snap_steps):
    P = u_hat.shape[0]
    K = kern.cov.n_modes
    g = kern.grid
    dt = kern.dt
    mass = np.empty((P, n_steps + 1))
    forcing = np.empty((P, n_steps)) if record_forcing or record_ledger else None
    gauge = np.empty((P, n_steps)) if record_gauge else None
    proj = np.empty((P, n_steps, K), dtype=np.complex128) if record_ledger else None
    incr = np.empty((P, n_steps, K)) if record_ledger else None
    snaps = {}
    alive = np.ones(P, dtype=bool)
    status = ["ok"] * P
    t_stop = np.full(P, np.nan)
    state = kern.encode(u_hat)
    m0 = kern.mass(state)
    thresholds = np.array([guard.threshold(float(m)) for m in m0])
    growth_start = np.full(P, t0)
    onset = np.full(P, np.nan)

    def check(k, m):
        bad = alive & (~np.isfinite(m) | (m > thresholds))
        if np.any(bad):
            t = t0 + k * dt
            for i in np.flatnonzero(bad):
                status[i] = "blowup"
                t_stop[i] = t
                onset[i] = growth_start[i]
            alive[bad] = False
            state[bad] = 0

    mass[:, 0] = m0
    check(0, m0)
    block = 64
    coords_block = None
    for k in range(n_steps):
        j = k % block
        if j == 0:
            nb = min(block, n_steps - k)
            coords_block = np.stack([s.coords(dt, nb, substeps) for s in streams])
        coords = coords_block[:, j]
        t = t0 + k * dt
        if k in snap_steps:
            snaps[k] = sp.ifft(kern.decode(state), g)
        if forcing is not None or gauge is not None:
            _, fp, gp = kern.pairings(state, t, forcing is not None, gauge is not None)
            if forcing is not None:
                forcing[:, k] = fp
            if gauge is not None:
                gauge[:, k] = gp
        if proj is not None:
            proj[:, k] = kern.project(state)
            incr[:, k] = coords
        with np.errstate(over="ignore", invalid="ignore"):
            state = kern.step(state, t, coords)
        m = kern.mass(state)
        grew = m > mass[:, k]
        growth_start = np.where(grew, growth_start, t + dt)
        mass[:, k + 1] = m
        check(k + 1, m)
    if n_steps in snap_steps:
        snaps[n_steps] = sp.ifft(kern.decode(state), g)
    for i in np.flatnonzero(~alive):
        stop = int(round((t_stop[i] - t0) / dt))
        mass[i, stop + 1:] = np.nan
    return dict(u_hat=kern.decode(state), mass=mass, forcing=forcing, gauge=gauge, proj=proj, incr=incr,
                snaps=snaps, status=status, t_stop=t_stop, onset=onset)


def _threads() -> int:
    env = os.environ.get("FNLS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_ensemble(u0, t_span, dt, params: ModelParams, cache: MultiplierCache,
                 cov: CovarianceSpec, scheme=Scheme.EXP_EULER, seed: int = 0,
                 n_paths: int = 1, path_offset: int = 0, guard: BlowupGuard | None = None,
                 substeps: int = 1, record_forcing: bool = False, keep_final: bool = False,
                 chunk_size: int = 50, threads: int | None = None) -> EnsembleRun:
    """Simulate ``n_paths`` independent paths with indices ``path_offset + i``.

    ``u0`` is one field shared by every path or an array with a leading path
    axis. Paths that blow up are flagged and excluded from ``completed``.
    """
    t0, t1 = map(float, t_span)
    n = _n_steps(t0, t1, dt)
    grid = cache.grid
    guard = guard or BlowupGuard()
    kern = _Kernel(params, cache, cov, dt, scheme)
    u_all = _prepare_initial(u0, grid, n_paths)
    idx = np.arange(path_offset, path_offset + n_paths)
    chunks = [slice(a, min(a + chunk_size, n_paths)) for a in range(0, n_paths, chunk_size)]

    def work(sl):
        streams = [NoiseStream(seed, int(i), cov) for i in idx[sl]]
        return _simulate_chunk(u_all[sl].copy(), t0, n, kern, streams, guard, substeps,
                               record_forcing, False, False, set())

    workers = threads or _threads()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(sl) for sl in chunks]
    mass = np.concatenate([r["mass"] for r in results])
    forcing = np.concatenate([r["forcing"] for r in results]) if record_forcing else None
    status = [s for r in results for s in r["status"]]
    t_stop = np.concatenate([r["t_stop"] for r in results])
    final = np.concatenate([sp.ifft(r["u_hat"], grid) for r in results]) if keep_final else None
    return EnsembleRun(idx, t0 + dt * np.arange(n + 1), mass, forcing, status, t_stop,
                       dt, params, cov, Scheme(scheme), seed, final)


def run_path(u0, t_span, dt, params: ModelParams, cache: MultiplierCache, cov: CovarianceSpec,
             scheme=Scheme.EXP_EULER, seed: int = 0, path_index: int = 0,
             guard: BlowupGuard | None = None, substeps: int = 1, snapshot_times=None,
             record_gauge: bool = False, raise_on_blowup: bool = True) -> Trajectory:
    """Full single-path run with ledger inputs, snapshots and increment log.

    ``substeps`` builds each increment from that many finer Brownian steps
    of the same stream, coupling runs at ``dt`` and ``dt / substeps``.
    Snapshot times are snapped to the nearest step; the final state is
    always kept.
    """
    t0, t1 = map(float, t_span)
    n = _n_steps(t0, t1, dt)
    grid = cache.grid
    guard = guard or BlowupGuard()
    kern = _Kernel(params, cache, cov, dt, scheme)
    u_hat = _prepare_initial(u0, grid, 1)
    snap_steps = {n}
    if snapshot_times is not None:
        snap_steps |= {min(n, max(0, int(round((s - t0) / dt)))) for s in snapshot_times}
    stream = NoiseStream(seed, path_index, cov)
    r = _simulate_chunk(u_hat, t0, n, kern, [stream], guard, substeps, True, True,
                        record_gauge, snap_steps)
    times = t0 + dt * np.arange(n + 1)
    ks = sorted(r["snaps"])
    traj = Trajectory(times, r["mass"][0], dt, params, cov, Scheme(scheme), seed, path_index,
                      forcing_pairing=r["forcing"][0],
                      gauge_pairing=None if r["gauge"] is None else r["gauge"][0],
                      projections=r["proj"][0], increments=r["incr"][0],
                      snapshot_times=[float(times[k]) for k in ks],
                      snapshots=[SpectralField(grid, r["snaps"][k][0], PHYSICAL) for k in ks],
                      status=r["status"][0],
                      t_stop=None if np.isnan(r["t_stop"][0]) else float(r["t_stop"][0]))
    if traj.status != "ok" and raise_on_blowup:
        raise BlowupDetected(traj.t_stop, float(np.nanmax(traj.mass)), path_index,
                             float(r["onset"][0]), traj)
    return traj
