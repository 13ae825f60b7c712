"""Periodic lattice, Fourier transforms and diagonal spectral operators.

Fields live on the box ``[0, L)^n`` sampled at ``N`` points per dimension.
Transforms use the unitary ("ortho") DFT, so the discrete L2 norm reads
``sqrt(dV * sum |u|^2)`` in either space, ``dV = (L/N)^n``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Literal

import numpy as np
import scipy.fft as sfft

PHYSICAL = "physical"
FREQUENCY = "frequency"
SpaceTag = Literal["physical", "frequency"]

SNAPSHOT_MAGIC = b"FNLS"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIId8x")


class GridMismatchError(ValueError):
    pass


class SpaceTagError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice with ``points_per_dim**n`` nodes.

    Frequencies are ``xi_j = 2*pi*m_j/L`` with integer ``m_j`` in
    ``[-N/2, N/2)``, laid out in FFT order.
    """

    n: int
    points_per_dim: int
    box_length: float

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"dimension n must be 1, 2 or 3, got {self.n}")
        N = self.points_per_dim
        if N < 2 or N & (N - 1):
            raise ValueError(f"points_per_dim must be a power of two >= 2, got {N}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_dim,) * self.n

    @property
    def size(self) -> int:
        return self.points_per_dim**self.n

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.n, 0))

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.n

    @property
    def volume(self) -> float:
        return self.box_length**self.n

    @property
    def frequency_spacing(self) -> float:
        return 2 * np.pi / self.box_length

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer lattice ``m`` along one axis, FFT order."""
        N = self.points_per_dim
        return np.fft.fftfreq(N, d=1.0 / N).astype(np.int64)

    @cached_property
    def integer_modes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.wavenumbers] * self.n), indexing="ij"))

    @cached_property
    def frequencies(self) -> tuple[np.ndarray, ...]:
        return tuple(self.frequency_spacing * m for m in self.integer_modes)

    @cached_property
    def xi_squared(self) -> np.ndarray:
        return sum(k**2 for k in self.frequencies)

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, ...]:
        x = self.spacing * np.arange(self.points_per_dim)
        return tuple(np.meshgrid(*([x] * self.n), indexing="ij"))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule: keep modes with ``3|m_j| < N`` on every axis."""
        N = self.points_per_dim
        keep = np.ones(self.shape, dtype=bool)
        for m in self.integer_modes:
            keep &= 3 * np.abs(m) < N
        return keep

    @property
    def band_limit(self) -> int:
        """Largest ``|m_j|`` retained by the dealiasing filter."""
        return (self.points_per_dim - 1) // 3


def make_grid(n: int, points_per_dim: int, box_length: float) -> Grid:
    return Grid(int(n), int(points_per_dim), float(box_length))


@dataclass
class SpectralField:
    """Complex lattice function tagged with the space it lives in."""

    grid: Grid
    values: np.ndarray
    space: SpaceTag = PHYSICAL

    def __post_init__(self):
        if self.space not in (PHYSICAL, FREQUENCY):
            raise SpaceTagError(f"unknown space tag {self.space!r}")
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != self.grid.shape:
            if values.size != self.grid.size:
                raise GridMismatchError(
                    f"values of shape {values.shape} do not fit grid {self.grid.shape}")
            values = values.reshape(self.grid.shape)
        self.values = values

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.values.copy(), self.space)

    def __mul__(self, c) -> "SpectralField":
        return SpectralField(self.grid, self.values * c, self.space)

    __rmul__ = __mul__

    def to_physical(self) -> "SpectralField":
        return self if self.space == PHYSICAL else inverse_transform(self)

    def to_frequency(self) -> "SpectralField":
        return self if self.space == FREQUENCY else forward_transform(self)


def zeros(grid: Grid, space: SpaceTag = PHYSICAL) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.shape, dtype=np.complex128), space)


def _check_grid(a: Grid, b: Grid):
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


# Array kernels: operate over the trailing ``grid.n`` axes so that leading
# axes can index Monte Carlo paths.

def fft(values: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.fftn(values, axes=grid.axes, norm="ortho")


def ifft(values: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.ifftn(values, axes=grid.axes, norm="ortho")


def mass_of(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Squared discrete L2 norm over the trailing axes (either space)."""
    return grid.cell_volume * flat_mass(values.reshape(values.shape[: values.ndim - grid.n] + (-1,)))


def flat_mass(flat: np.ndarray) -> np.ndarray:
    """``sum |v|^2`` over the last axis, without complex temporaries."""
    x = np.ascontiguousarray(flat, dtype=np.complex128).view(np.float64)
    return np.einsum("...i,...i->...", x, x)


def forward_transform(f: SpectralField) -> SpectralField:
    if f.space != PHYSICAL:
        raise SpaceTagError("forward_transform expects a physical-space field")
    return SpectralField(f.grid, fft(f.values, f.grid), FREQUENCY)


def inverse_transform(f: SpectralField) -> SpectralField:
    if f.space != FREQUENCY:
        raise SpaceTagError("inverse_transform expects a frequency-space field")
    return SpectralField(f.grid, ifft(f.values, f.grid), PHYSICAL)


@dataclass(frozen=True)
class MultiplierCache:
    """Symbol ``|xi|^(2 alpha)`` of the fractional Laplacian on a grid."""

    grid: Grid
    alpha: float
    symbol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        symbol = self.grid.xi_squared ** self.alpha
        symbol.flags.writeable = False
        object.__setattr__(self, "symbol", symbol)

    @property
    def max_symbol(self) -> float:
        """Largest symbol value inside the dealiased band."""
        return float(self.symbol[self.grid.dealias_mask].max())

    def phase(self, t: float) -> np.ndarray:
        return np.exp(-1j * t * self.symbol)

    def damped_phase(self, t: float, gamma: float) -> np.ndarray:
        return np.exp(-gamma * t - 1j * t * self.symbol)


def make_multiplier(grid: Grid, alpha: float) -> MultiplierCache:
    return MultiplierCache(grid, float(alpha))


def _apply_multiplier(f: SpectralField, mult: np.ndarray) -> SpectralField:
    if f.space == FREQUENCY:
        return SpectralField(f.grid, f.values * mult, FREQUENCY)
    return SpectralField(f.grid, ifft(fft(f.values, f.grid) * mult, f.grid), PHYSICAL)


def frac_laplacian(f: SpectralField, cache: MultiplierCache) -> SpectralField:
    """Apply ``(-Delta)^alpha``; the result keeps the input's space tag."""
    _check_grid(f.grid, cache.grid)
    return _apply_multiplier(f, cache.symbol)


def free_propagator(f: SpectralField, t: float, cache: MultiplierCache) -> SpectralField:
    """Unitary group ``exp(-i t (-Delta)^alpha)``."""
    _check_grid(f.grid, cache.grid)
    return _apply_multiplier(f, cache.phase(t))


def damped_propagator(f: SpectralField, t: float, gamma: float,
                      cache: MultiplierCache) -> SpectralField:
    """``exp(-gamma t)`` times the free group, for ``t, gamma >= 0``."""
    if t < 0:
        raise ValueError(f"damped propagator needs t >= 0, got {t}")
    if gamma < 0:
        raise ValueError(f"damping must be nonnegative, got {gamma}")
    _check_grid(f.grid, cache.grid)
    return _apply_multiplier(f, cache.damped_phase(t, gamma))


def dealias(f: SpectralField) -> SpectralField:
    return _apply_multiplier(f, f.grid.dealias_mask)


def l2_norm(f: SpectralField) -> float:
    return float(np.sqrt(mass_of(f.values, f.grid)))


def lp_norm(f: SpectralField, p: float) -> float:
    if p < 1:
        raise ValueError(f"lp_norm needs p >= 1, got {p}")
    if p == 2:
        return l2_norm(f)
    if f.space != PHYSICAL:
        raise SpaceTagError("lp_norm with p != 2 needs a physical-space field")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max())
    return float((f.grid.cell_volume * np.sum(a**p)) ** (1.0 / p))


def inner(f: SpectralField, g: SpectralField) -> complex:
    """Discrete ``(f, g) = sum f * conj(g) * dV``; both fields in one space."""
    _check_grid(f.grid, g.grid)
    if f.space != g.space:
        raise SpaceTagError("inner product of fields in different spaces")
    return complex(f.grid.cell_volume * np.vdot(g.values, f.values))


def plane_wave(grid: Grid, m, amplitude: complex = 1.0) -> SpectralField:
    """``amplitude * exp(i xi.x)`` for the integer wavevector ``m``."""
    m = np.broadcast_to(np.asarray(m, dtype=float), (grid.n,))
    phase = sum(grid.frequency_spacing * mj * xj for mj, xj in zip(m, grid.coordinates))
    return SpectralField(grid, amplitude * np.exp(1j * phase), PHYSICAL)


def gaussian(grid: Grid, amplitude: float = 1.0, width: float = 1.0,
             center=None) -> SpectralField:
    """Radial Gaussian bump centred in the box (or at ``center``)."""
    if center is None:
        center = [grid.box_length / 2] * grid.n
    r2 = sum((x - c) ** 2 for x, c in zip(grid.coordinates, center))
    return SpectralField(grid, amplitude * np.exp(-r2 / (2 * width**2)), PHYSICAL)


def boundary_mass_fraction(f: SpectralField, shell: float = 0.1) -> float:
    """Share of the mass sitting in the outer ``shell`` fraction of the box.

    Serves as the truncation monitor for the periodic stand-in of R^n.
    """
    u = f.to_physical()
    L = f.grid.box_length
    dist = np.max(np.stack([np.abs(x - L / 2) for x in f.grid.coordinates]), axis=0)
    outer = dist > (0.5 - shell / 2) * L
    total = mass_of(u.values, f.grid)
    if total == 0:
        return 0.0
    return float(f.grid.cell_volume * np.sum(np.abs(u.values[outer]) ** 2) / total)


def write_snapshot(path, f: SpectralField) -> None:
    """Binary snapshot: 32-byte little-endian header then interleaved re/im f64."""
    u = f.to_physical()
    g = f.grid
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, g.n, g.points_per_dim, g.box_length)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(u.values, dtype="<c16").tobytes())


def read_snapshot(path) -> SpectralField:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, version, n, N, L = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    grid = make_grid(n, N, L)
    body = np.frombuffer(data, dtype="<c16", offset=_HEADER.size)
    if body.size != grid.size:
        raise ValueError(f"{path}: expected {grid.size} values, found {body.size}")
    return SpectralField(grid, body.astype(np.complex128).reshape(grid.shape), PHYSICAL)
