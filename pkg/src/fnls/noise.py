"""Q-Wiener increments with a diagonal covariance on the real Fourier basis.

The basis is the L2-orthonormal real trigonometric system of the box:
one constant mode ``1/sqrt(V)`` and, for every wavevector ``m`` in a
half-space, the pair ``sqrt(2/V) cos(xi.x)``, ``sqrt(2/V) sin(xi.x)``.
The covariance operator scales basis mode ``k`` by ``phi_k >= 0``, so an
increment is ``sum_k phi_k dbeta_k e_k`` and ``||Phi||_HS^2 = sum phi_k^2``.
Only modes inside the dealiasing band are representable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .spectral import FREQUENCY, PHYSICAL, Grid, SpectralField, fft, ifft

CONST, COS, SIN = 0, 1, 2


def _half_space(m) -> bool:
    for mj in m:
        if mj != 0:
            return mj > 0
    return False


def _flat_index(grid: Grid, m) -> int:
    N = grid.points_per_dim
    return int(np.ravel_multi_index(tuple(int(mj) % N for mj in m), grid.shape))


@dataclass(frozen=True, eq=False)
class CovarianceSpec:
    """Diagonal covariance: ``amplitudes[0]`` drives the constant mode and
    ``amplitudes[1 + 2j]``, ``amplitudes[2 + 2j]`` the cosine/sine pair of
    ``wavevectors[j]``."""

    grid: Grid
    wavevectors: np.ndarray
    amplitudes: np.ndarray
    decay_params: tuple[float, float] | None = None
    cutoff: float | None = None
    _pos: np.ndarray = field(init=False, repr=False)
    _neg: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        wv = np.asarray(self.wavevectors, dtype=np.int64).reshape(-1, self.grid.n)
        amp = np.asarray(self.amplitudes, dtype=float)
        if amp.shape != (1 + 2 * len(wv),):
            raise ValueError("need one constant amplitude plus a cos/sin pair per wavevector")
        if np.any(amp < 0) or not np.all(np.isfinite(amp)):
            raise ValueError("amplitudes must be finite and nonnegative")
        band = self.grid.band_limit
        for m in wv:
            if not _half_space(m):
                raise ValueError(f"wavevector {tuple(m)} is not a half-space representative")
            if np.any(np.abs(m) > band):
                raise ValueError(f"wavevector {tuple(m)} lies outside the dealiased band |m_j| <= {band}")
        wv.flags.writeable = False
        amp.flags.writeable = False
        object.__setattr__(self, "wavevectors", wv)
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "_pos", np.array([_flat_index(self.grid, m) for m in wv], dtype=np.int64))
        object.__setattr__(self, "_neg", np.array([_flat_index(self.grid, -m) for m in wv], dtype=np.int64))

    @property
    def n_modes(self) -> int:
        return self.amplitudes.size

    @property
    def hs_norm_squared(self) -> float:
        return float(np.sum(self.amplitudes**2))

    def scaled(self, factor: float) -> "CovarianceSpec":
        return CovarianceSpec(self.grid, self.wavevectors, factor * self.amplitudes,
                              self.decay_params, self.cutoff)

    @property
    def wavevector_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat grid indices of ``+m`` and ``-m`` for every wavevector."""
        return self._pos, self._neg

    # -- synthesis / analysis -------------------------------------------

    def coefficients(self, coords: np.ndarray) -> np.ndarray:
        """Frequency-space (ortho DFT) coefficients of ``sum_k coords_k e_k``.

        ``coords`` has shape ``(..., n_modes)``; the result has shape
        ``(...) + grid.shape``.
        """
        g = self.grid
        coords = np.asarray(coords, dtype=float)
        lead = coords.shape[:-1]
        out = np.zeros(lead + (g.size,), dtype=np.complex128)
        dV = g.cell_volume
        out[..., 0] = coords[..., 0] / np.sqrt(dV)
        if len(self._pos):
            z = (coords[..., 1::2] - 1j * coords[..., 2::2]) / np.sqrt(2 * dV)
            out[..., self._pos] = z
            out[..., self._neg] = np.conj(z)
        return out.reshape(lead + g.shape)

    def project(self, u_hat: np.ndarray) -> np.ndarray:
        """Inner products ``(u, e_k)`` from frequency coefficients of ``u``."""
        g = self.grid
        flat = u_hat.reshape(u_hat.shape[: u_hat.ndim - g.n] + (g.size,))
        dV = g.cell_volume
        out = np.empty(flat.shape[:-1] + (self.n_modes,), dtype=np.complex128)
        out[..., 0] = np.sqrt(dV) * flat[..., 0]
        if len(self._pos):
            a, b = flat[..., self._pos], flat[..., self._neg]
            out[..., 1::2] = np.sqrt(dV / 2) * (a + b)
            out[..., 2::2] = 1j * np.sqrt(dV / 2) * (a - b)
        return out

    def basis_field(self, k: int) -> np.ndarray:
        """Physical-space values of basis mode ``k``, built from cos/sin directly."""
        g = self.grid
        if k == 0:
            return np.full(g.shape, 1 / np.sqrt(g.volume))
        m = self.wavevectors[(k - 1) // 2]
        phase = sum(g.frequency_spacing * mj * xj for mj, xj in zip(m, g.coordinates))
        trig = np.cos if k % 2 == 1 else np.sin
        return np.sqrt(2 / g.volume) * trig(phase)

    def mode_kind(self, k: int) -> int:
        return CONST if k == 0 else (COS if k % 2 == 1 else SIN)


def make_covariance(grid: Grid, scale: float, decay: float, cutoff: float,
                    include_constant: bool = True) -> CovarianceSpec:
    """Built-in family ``phi_k = scale * (1 + |xi_k|^2)^(-decay/2)``.

    Keeps every wavevector with Euclidean ``|m| <= cutoff`` that also fits in
    the dealiased band.
    """
    if scale < 0:
        raise ValueError("noise scale must be nonnegative")
    band = grid.band_limit
    r = int(min(np.floor(cutoff), band)) if cutoff >= 0 else -1
    wv = []
    if r >= 0:
        for m in itertools.product(range(-r, r + 1), repeat=grid.n):
            if _half_space(m) and sum(mj * mj for mj in m) <= cutoff**2:
                wv.append(m)
    wv.sort(key=lambda m: (sum(mj * mj for mj in m), m))
    wv = np.array(wv, dtype=np.int64).reshape(-1, grid.n)
    xi2 = (grid.frequency_spacing**2) * np.sum(wv**2, axis=1)
    phi = scale * (1 + xi2) ** (-decay / 2)
    amp = np.empty(1 + 2 * len(wv))
    amp[0] = scale if include_constant and cutoff >= 0 else 0.0
    amp[1::2] = phi
    amp[2::2] = phi
    return CovarianceSpec(grid, wv, amp, (float(scale), float(decay)), float(cutoff))


def single_mode(grid: Grid, m, amplitude: float, kind: int = COS) -> CovarianceSpec:
    """Covariance exciting one basis mode only."""
    m = tuple(int(x) for x in np.broadcast_to(m, (grid.n,)))
    if kind == CONST or not any(m):
        return CovarianceSpec(grid, np.zeros((0, grid.n), dtype=np.int64), [amplitude])
    if not _half_space(m):
        m = tuple(-x for x in m)
    amp = [0.0, 0.0, 0.0]
    amp[1 if kind == COS else 2] = amplitude
    return CovarianceSpec(grid, np.array([m]), amp)


def zero_covariance(grid: Grid) -> CovarianceSpec:
    return CovarianceSpec(grid, np.zeros((0, grid.n), dtype=np.int64), [0.0])


def hs_norm(spec: CovarianceSpec) -> float:
    return float(np.sqrt(spec.hs_norm_squared))


@dataclass
class WienerIncrement:
    """Real-valued increment ``dW`` over ``dt``; ``coords`` are ``phi_k dbeta_k``."""

    field: SpectralField
    dt: float
    coords: np.ndarray


class NoiseStream:
    """Reproducible Brownian family for one Monte Carlo path.

    The normals come from a Philox generator keyed by ``(seed, path_index)``
    and are consumed one row of ``n_modes`` values per elementary step, so
    ``(seed, path_index, counter)`` fixes every increment. Rows are pulled
    from the generator in blocks; block size never changes the values.
    """

    block_rows = 256

    def __init__(self, seed: int, path_index: int, spec: CovarianceSpec):
        self.seed = int(seed)
        self.path_index = int(path_index)
        self.spec = spec
        self.counter = 0
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.path_index,))
        self._rng = np.random.Generator(np.random.Philox(ss))
        self._buf = np.empty((0, spec.n_modes))
        self._pos = 0

    def _take(self, rows: int) -> np.ndarray:
        have = self._buf.shape[0] - self._pos
        if have < rows:
            extra = max(rows - have, self.block_rows)
            fresh = self._rng.standard_normal((extra, self.spec.n_modes))
            self._buf = np.concatenate([self._buf[self._pos:], fresh])
            self._pos = 0
        out = self._buf[self._pos:self._pos + rows]
        self._pos += rows
        return out

    def coords(self, dt: float, n_steps: int = 1, substeps: int = 1) -> np.ndarray:
        """Increment coordinates for ``n_steps`` steps of size ``dt``.

        Each step is the sum of ``substeps`` finer Brownian increments, which
        is how coarse runs stay coupled to fine ones on the same path.
        """
        if not dt > 0:
            raise ValueError(f"time step must be positive, got {dt}")
        z = self._take(n_steps * substeps).reshape(n_steps, substeps, -1)
        db = z.sum(axis=1) * np.sqrt(dt / substeps)
        self.counter += n_steps
        return db * self.spec.amplitudes


def sample_increment(stream: NoiseStream, dt: float, substeps: int = 1) -> WienerIncrement:
    spec = stream.spec
    coords = stream.coords(dt, 1, substeps)[0]
    values = ifft(spec.coefficients(coords), spec.grid).real
    f = SpectralField(spec.grid, values.astype(np.complex128), PHYSICAL)
    return WienerIncrement(f, dt, coords)


@dataclass
class CovarianceReport:
    n_samples: int
    dt: float
    expected: np.ndarray
    empirical: np.ndarray
    z_scores: np.ndarray
    max_cross_z: float
    flagged: bool = field(init=False)

    def __post_init__(self):
        self.flagged = bool(np.max(np.abs(self.z_scores), initial=0.0) > 5 or self.max_cross_z > 5)


def covariance_check(spec: CovarianceSpec, n_samples: int, dt: float = 0.01,
                     seed: int = 0, batch: int = 512) -> CovarianceReport:
    """Statistical self-test of the synthesis path.

    Increments are synthesised to physical space, transformed back and
    projected on the basis; per-mode second moments are compared with
    ``phi_k^2 dt`` and pairwise products with zero.
    """
    if n_samples < 100:
        raise ValueError("covariance_check needs at least 100 samples")
    stream = NoiseStream(seed, 0, spec)
    g = spec.grid
    K = spec.n_modes
    s2 = np.zeros(K)
    cross = np.zeros((K, K))
    done = 0
    while done < n_samples:
        b = min(batch, n_samples - done)
        c = stream.coords(dt, b)
        phys = ifft(spec.coefficients(c), g).real
        proj = spec.project(fft(phys, g)).real
        s2 += np.sum(proj**2, axis=0)
        cross += proj.T @ proj
        done += b
    expected = spec.amplitudes**2 * dt
    empirical = s2 / n_samples
    se = expected * np.sqrt(2.0 / n_samples)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, (empirical - expected) / se, 0.0)
        cov = cross / n_samples
        sd = np.sqrt(np.outer(expected, expected) / n_samples)
        cz = np.where(sd > 0, np.abs(cov) / sd, 0.0)
    np.fill_diagonal(cz, 0.0)
    return CovarianceReport(n_samples, dt, expected, empirical, z, float(cz.max(initial=0.0)))
