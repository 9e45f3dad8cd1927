"""Torus grid, Fourier transforms, spectral calculus and the Leray projection.

Coefficient convention: ``coeffs = fftn(values) / n**d``, so that ``coeffs[k]``
is the Fourier coefficient of the trigonometric interpolant on ``[0, 2*pi)^d``.
With the normalized measure ``dx / (2*pi)**d`` Parseval reads
``mean(|u|**2) = sum(|coeffs|**2)``.

Arrays carry the field components just before the spatial axes, i.e. a vector
field batch has shape ``(..., d, n, ..., n)``; any leading axes are batch axes
(ensemble paths, noise modes) and are transformed independently.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid with ``n`` points per direction on the ``dim``-torus of period 2*pi."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigurationError(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 8 or self.n % 2:
            raise ConfigurationError(f"n must be even and >= 8, got {self.n}")

    @property
    def period(self) -> float:
        return TWO_PI

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @property
    def size(self) -> int:
        return self.n**self.dim

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers, shape ``(dim, n, ..., n)``, components in ``[-n/2, n/2)``."""
        k1 = np.rint(sfft.fftfreq(self.n, 1.0 / self.n)).astype(np.int64)
        return np.array(np.meshgrid(*([k1] * self.dim), indexing="ij"))

    @cached_property
    def kd(self) -> np.ndarray:
        """Derivative wavenumbers: ``k`` with the Nyquist component zeroed."""
        kd = self.k.astype(float)
        kd[self.k == -self.n // 2] = 0.0
        return kd

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.k.astype(float) ** 2, axis=0)

    @cached_property
    def kd2(self) -> np.ndarray:
        return np.sum(self.kd**2, axis=0)

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cutoff = self.n / 3.0
        return np.all(np.abs(self.k) <= cutoff, axis=0)

    @cached_property
    def x(self) -> np.ndarray:
        """Physical coordinates, shape ``(dim, n, ..., n)``."""
        x1 = TWO_PI * np.arange(self.n) / self.n
        return np.array(np.meshgrid(*([x1] * self.dim), indexing="ij"))

    @cached_property
    def _inv_kd2(self) -> np.ndarray:
        out = np.zeros_like(self.kd2)
        nz = self.kd2 > 0
        out[nz] = 1.0 / self.kd2[nz]
        return out

    def refined(self, factor: int) -> "TorusGrid":
        return TorusGrid(self.dim, self.n * factor)


@dataclass
class SpectralField:
    """Vector field on the torus stored by Fourier coefficients, shape ``(..., d, *grid.shape)``."""

    grid: TorusGrid
    coeffs: np.ndarray
    divfree: bool = False

    def __post_init__(self):
        _check_trailing(self.grid, self.coeffs, vector=True)

    @property
    def values(self) -> np.ndarray:
        return inverse_array(self.grid, self.coeffs)

    def copy(self) -> "SpectralField":
        return replace(self, coeffs=self.coeffs.copy())


@dataclass
class ScalarSpectralField:
    grid: TorusGrid
    coeffs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_trailing(self.grid, self.coeffs, vector=False)

    @property
    def values(self) -> np.ndarray:
        return inverse_array(self.grid, self.coeffs)


def _check_trailing(grid: TorusGrid, arr: np.ndarray, vector: bool) -> None:
    need = grid.dim + (1 if vector else 0)
    if arr.ndim < need or arr.shape[arr.ndim - grid.dim:] != grid.shape:
        raise ConfigurationError(
            f"array of shape {arr.shape} does not match grid {grid.shape}")
    if vector and arr.shape[-grid.dim - 1] != grid.dim:
        raise ConfigurationError(
            f"expected {grid.dim} components, got {arr.shape[-grid.dim - 1]}")


# -- array level transforms -------------------------------------------------

def forward_array(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    return sfft.fftn(values, axes=grid.axes) / grid.size


def inverse_array(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    return sfft.ifftn(coeffs, axes=grid.axes).real * grid.size


def forward_transform(grid: TorusGrid, values: np.ndarray) -> SpectralField:
    """Real grid samples ``(..., d, *shape)`` to a :class:`SpectralField`."""
    values = np.asarray(values, dtype=float)
    _check_trailing(grid, values, vector=True)
    return SpectralField(grid, forward_array(grid, values))


def forward_scalar(grid: TorusGrid, values: np.ndarray) -> ScalarSpectralField:
    values = np.asarray(values, dtype=float)
    _check_trailing(grid, values, vector=False)
    return ScalarSpectralField(grid, forward_array(grid, values))


def inverse_transform(f: SpectralField | ScalarSpectralField) -> np.ndarray:
    return inverse_array(f.grid, f.coeffs)


def mirror_index(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    """Return ``c(-k)`` laid out like ``c(k)``."""
    out = np.flip(coeffs, axis=grid.axes)
    return np.roll(out, 1, axis=grid.axes)


def hermitian_defect(grid: TorusGrid, coeffs: np.ndarray) -> float:
    """``max |c(-k) - conj(c(k))|`` relative to ``max |c|``."""
    scale = np.max(np.abs(coeffs)) or 1.0
    return float(np.max(np.abs(mirror_index(grid, coeffs) - np.conj(coeffs))) / scale)


# -- calculus ----------------------------------------------------------------

def project_array(grid: TorusGrid, c: np.ndarray) -> np.ndarray:
    kdotc = np.sum(grid.kd * c, axis=-grid.dim - 1, keepdims=True)
    return c - grid.kd * (kdotc * grid._inv_kd2)


def helmholtz_project(f: SpectralField) -> SpectralField:
    """Leray projection: removes the component of each mode parallel to ``k``.

    The zero mode, and modes whose derivative wavevector vanishes (pure
    Nyquist modes), pass through unchanged.
    """
    return SpectralField(f.grid, project_array(f.grid, f.coeffs), divfree=True)


def q_solve(f: SpectralField) -> ScalarSpectralField:
    """Mean-zero solution of ``lap psi = div f``; then ``P f = f - grad psi``."""
    g = f.grid
    kdotf = np.sum(g.kd * f.coeffs, axis=-g.dim - 1)
    return ScalarSpectralField(g, -1j * kdotf * g._inv_kd2)


def gradient(psi: ScalarSpectralField) -> SpectralField:
    g = psi.grid
    c = 1j * g.kd * np.expand_dims(psi.coeffs, -g.dim - 1)
    return SpectralField(g, c)


def divergence_array(grid: TorusGrid, c: np.ndarray) -> np.ndarray:
    return 1j * np.sum(grid.kd * c, axis=-grid.dim - 1)


def divergence(f: SpectralField) -> ScalarSpectralField:
    return ScalarSpectralField(f.grid, divergence_array(f.grid, f.coeffs))


def spectral_derivative(f, direction: int):
    """``d/dx_direction`` of a vector or scalar spectral field."""
    g = f.grid
    if not 0 <= direction < g.dim:
        raise ConfigurationError(f"axis {direction} out of range for dim {g.dim}")
    return replace(f, coeffs=1j * g.kd[direction] * f.coeffs)


def gradient_array(grid: TorusGrid, c: np.ndarray) -> np.ndarray:
    """Spectral gradient of each component: ``(..., d, *shape) -> (..., d, d, *shape)``
    with index order ``[component, direction]``."""
    return 1j * grid.kd * np.expand_dims(c, -grid.dim - 1)


def dealias_array(grid: TorusGrid, c: np.ndarray) -> np.ndarray:
    return c * grid.dealias_mask


def dealias(f):
    return replace(f, coeffs=dealias_array(f.grid, f.coeffs))


def inner(grid: TorusGrid, a: np.ndarray, b: np.ndarray, ncomp_axes: int = 1) -> np.ndarray:
    """``L^2`` inner product (normalized measure) over component and spatial axes."""
    axes = tuple(range(-grid.dim - ncomp_axes, 0))
    return np.sum((np.conj(a) * b).real, axis=axes)


def energy(grid: TorusGrid, c: np.ndarray) -> np.ndarray:
    """``||u||_{L^2}^2`` for vector coefficient arrays."""
    return inner(grid, c, c)


def enstrophy(grid: TorusGrid, c: np.ndarray) -> np.ndarray:
    """``||grad u||_{L^2}^2`` computed with the derivative wavenumbers."""
    return np.sum(grid.kd2 * np.sum(np.abs(c) ** 2, axis=-grid.dim - 1), axis=grid.axes)


def convection_array(grid: TorusGrid, c: np.ndarray, u_grid: np.ndarray | None = None) -> np.ndarray:
    """Dealiased ``div(u (x) u)`` in coefficient space for divergence-free ``u``."""
    d = grid.dim
    if u_grid is None:
        u_grid = inverse_array(grid, c)
    u = np.moveaxis(u_grid, -d - 1, 0)
    idx = [(i, j) for i in range(d) for j in range(i, d)]
    prods = np.stack([u[i] * u[j] for i, j in idx], axis=-d - 1)
    ph = np.moveaxis(dealias_array(grid, forward_array(grid, prods)), -d - 1, 0)
    out = np.zeros((d,) + ph.shape[1:], dtype=complex)
    for m, (i, j) in enumerate(idx):
        # (div(u u))^i = sum_j d_j(u^i u^j)
        out[i] += 1j * grid.kd[j] * ph[m]
        if i != j:
            out[j] += 1j * grid.kd[i] * ph[m]
    return np.moveaxis(out, 0, -d - 1)


# -- random test fields -------------------------------------------------------

def random_field(grid: TorusGrid, rng: np.random.Generator, batch: tuple[int, ...] = (),
                 band_limited: bool = False) -> SpectralField:
    """Gaussian white-noise vector field (real valued), optionally dealiased."""
    vals = rng.standard_normal(batch + (grid.dim,) + grid.shape)
    c = forward_array(grid, vals)
    if band_limited:
        c = dealias_array(grid, c)
    return SpectralField(grid, c)


# -- snapshot container ---------------------------------------------------------

SNAPSHOT_MAGIC = b"KNSSNAP1"
_HEADER = struct.Struct("<8siii")


def write_snapshot(path: str | Path, f: SpectralField | ScalarSpectralField) -> None:
    """Binary container: 8-byte magic, int32 ``dim, n, ncomp`` (little endian),
    then float64 little-endian grid samples in row-major ``(ncomp, n, ..., n)`` order."""
    vals = inverse_transform(f)
    g = f.grid
    if isinstance(f, ScalarSpectralField):
        vals = vals[None]
    if vals.ndim != g.dim + 1:
        raise ConfigurationError("snapshots hold a single field, not a batch")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, g.dim, g.n, vals.shape[0]))
        fh.write(np.ascontiguousarray(vals, dtype="<f8").tobytes())


def read_snapshot(path: str | Path) -> tuple[TorusGrid, np.ndarray]:
    raw = Path(path).read_bytes()
    magic, dim, n, ncomp = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ConfigurationError(f"{path}: not a field snapshot")
    g = TorusGrid(dim, n)
    vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    return g, vals.reshape((ncomp,) + g.shape).copy()
