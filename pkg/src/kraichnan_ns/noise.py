"""Transport-noise families, the Ito correction tensor, parabolicity margin,
nonlinearity presets and Brownian drivers.

A transport field is stored as a polarized plane wave
``b_n(x) = Re(alpha_n exp(i k_n . x))`` with ``alpha_n`` complex and
orthogonal to ``k_n``; ``k_n = 0`` gives a constant field ``Re(alpha_n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, UnsupportedModeError
from .spaces import bessel_norm
from .spectral import SpectralField, TorusGrid, forward_array

DIVFREE_TOL = 1e-12


@dataclass(frozen=True)
class NoiseFamily:
    wavevectors: np.ndarray  # (N_b, d) integers
    alphas: np.ndarray  # (N_b, d) complex, orthogonal to the wavevector
    zeta: float = 0.0
    amplitude: float = 0.0
    seed: int = 0
    h: np.ndarray | None = None  # (N_b, d, d) constants h_n^{ij}
    time_dependent: bool = False
    modulation: tuple[float, float] = (0.0, 1.0)  # (depth, frequency) for time-dependent b

    def __post_init__(self):
        k = np.atleast_2d(np.asarray(self.wavevectors, dtype=np.int64))
        a = np.atleast_2d(np.asarray(self.alphas, dtype=complex))
        if k.shape != a.shape:
            raise ConfigurationError("wavevectors and amplitudes must have equal shape")
        object.__setattr__(self, "wavevectors", k)
        object.__setattr__(self, "alphas", a)
        if self.h is not None:
            h = np.asarray(self.h, dtype=float)
            if h.shape != (self.n_modes, self.dim, self.dim):
                raise ConfigurationError(f"h must have shape {(self.n_modes, self.dim, self.dim)}")
            object.__setattr__(self, "h", h)
        defect = np.abs(np.sum(k * a, axis=1))
        if np.any(defect > DIVFREE_TOL * np.maximum(1.0, np.linalg.norm(a, axis=1) * np.linalg.norm(k, axis=1))):
            raise ConfigurationError("transport fields must be divergence free (alpha orthogonal to k)")

    # -- constructors --
    @classmethod
    def empty(cls, d: int) -> "NoiseFamily":
        return cls(np.zeros((0, d), dtype=np.int64), np.zeros((0, d), dtype=complex))

    @classmethod
    def constant(cls, vectors, **kw) -> "NoiseFamily":
        """Spatially constant transport fields ``b_n = vectors[n]``."""
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        return cls(np.zeros(v.shape, dtype=np.int64), v.astype(complex), **kw)

    @classmethod
    def from_modes(cls, modes, **kw) -> "NoiseFamily":
        """``modes``: iterable of ``(k, alpha)``; each gives ``Re(alpha e^{ik.x})``."""
        modes = list(modes)
        k = np.array([m[0] for m in modes], dtype=np.int64)
        a = np.array([m[1] for m in modes], dtype=complex)
        return cls(k, a, **kw)

    # -- basic properties --
    @property
    def dim(self) -> int:
        return self.wavevectors.shape[1]

    @property
    def n_modes(self) -> int:
        return self.wavevectors.shape[0]

    @property
    def is_constant_in_x(self) -> bool:
        return not np.any(self.wavevectors)

    @property
    def has_h(self) -> bool:
        return self.h is not None and bool(np.any(self.h))

    def modulation_factor(self, t: float) -> float:
        if not self.time_dependent:
            return 1.0
        depth, freq = self.modulation
        return 1.0 + depth * math.sin(2.0 * math.pi * freq * t)

    def max_modulation(self) -> float:
        return 1.0 + abs(self.modulation[0]) if self.time_dependent else 1.0

    def scaled(self, theta: float) -> "NoiseFamily":
        return NoiseFamily(self.wavevectors, theta * self.alphas, self.zeta,
                           theta * self.amplitude, self.seed, self.h,
                           self.time_dependent, self.modulation)

    # -- discretization --
    def _check_grid(self, grid: TorusGrid):
        if grid.dim != self.dim:
            raise ConfigurationError(f"noise is {self.dim}-D, grid is {grid.dim}-D")
        if self.n_modes and np.max(np.abs(self.wavevectors)) >= grid.n // 2:
            raise ConfigurationError("noise wavevectors exceed the grid's resolvable band")

    def coeffs(self, grid: TorusGrid) -> np.ndarray:
        """Fourier coefficients, shape ``(N_b, d, *grid.shape)``."""
        self._check_grid(grid)
        c = np.zeros((self.n_modes, self.dim) + grid.shape, dtype=complex)
        for m, (k, a) in enumerate(zip(self.wavevectors, self.alphas)):
            if not np.any(k):
                c[(m, slice(None)) + (0,) * self.dim] = a.real
                continue
            ip = tuple(int(x) % grid.n for x in k)
            im = tuple(int(-x) % grid.n for x in k)
            c[(m, slice(None)) + ip] += a / 2.0
            c[(m, slice(None)) + im] += np.conj(a) / 2.0
        return c

    def grid_values(self, grid: TorusGrid) -> np.ndarray:
        """Real samples ``(N_b, d, *grid.shape)``."""
        self._check_grid(grid)
        phase = np.tensordot(self.wavevectors.astype(float), grid.x, axes=(1, 0))
        e = np.exp(1j * phase)  # (N_b, *shape)
        return (self.alphas.reshape(self.alphas.shape + (1,) * self.dim)
                * e[:, None]).real

    def divergence_defect(self, grid: TorusGrid) -> float:
        """``max_k |sum_j k_j bhat_n^j(k)|`` over modes and fields."""
        c = self.coeffs(grid)
        if not self.n_modes:
            return 0.0
        return float(np.max(np.abs(np.sum(grid.kd * c, axis=1))))

    def mode_l2_mass(self) -> np.ndarray:
        """``||b_n||_{L^2}^2`` in closed form (normalized measure)."""
        nz = np.any(self.wavevectors, axis=1)
        mass = np.where(nz, 0.5 * np.sum(np.abs(self.alphas) ** 2, axis=1),
                        np.sum(self.alphas.real**2, axis=1))
        return mass

    def hs_norm(self, s: float) -> float:
        """Closed-form ``||(b_n)_n||_{H^{s,2}(l^2)}``."""
        k2 = np.sum(self.wavevectors.astype(float) ** 2, axis=1)
        return float(np.sqrt(np.sum((1.0 + k2) ** s * self.mode_l2_mass())))

    def measured_hs_norm(self, grid: TorusGrid, s: float) -> float:
        if not self.n_modes:
            return 0.0
        per_mode = bessel_norm(SpectralField(grid, self.coeffs(grid)), s, 2)
        return float(np.sqrt(np.sum(np.asarray(per_mode) ** 2)))

    def sup_l2_bound(self, grid: TorusGrid) -> float:
        """``M = max_x ||(b_n(x))_n||_{l^2}`` evaluated on the grid."""
        if not self.n_modes:
            return 0.0
        v = self.grid_values(grid)
        return float(np.sqrt(np.max(np.sum(v**2, axis=(0, 1))))) * self.max_modulation()

    def h_bound(self) -> float:
        if not self.has_h:
            return 0.0
        return float(np.sqrt(np.sum(self.h**2, axis=0)).max())

    def manifest(self, grid: TorusGrid, s_list=(0.0, 1.0)) -> dict:
        return {
            "n_modes": self.n_modes,
            "wavevectors": self.wavevectors.tolist(),
            "alphas_re": self.alphas.real.tolist(),
            "alphas_im": self.alphas.imag.tolist(),
            "zeta": self.zeta,
            "amplitude": self.amplitude,
            "seed": self.seed,
            "time_dependent": self.time_dependent,
            "M": self.sup_l2_bound(grid),
            "h_bound": self.h_bound(),
            "divergence_defect": self.divergence_defect(grid),
            "hs_norms": {f"{s:g}": self.measured_hs_norm(grid, s) for s in s_list},
        }


def _half_space_wavevectors(d: int, kmax: int) -> list[tuple[int, ...]]:
    rng1 = range(-kmax, kmax + 1)
    ks = []
    for k in np.array(np.meshgrid(*([list(rng1)] * d), indexing="ij")).reshape(d, -1).T:
        nz = np.nonzero(k)[0]
        if nz.size and k[nz[0]] > 0:
            ks.append(tuple(int(x) for x in k))
    ks.sort(key=lambda k: (sum(x * x for x in k), tuple(-x for x in k)))
    return ks


def _polarizations(k: np.ndarray, rng: np.random.Generator) -> list[np.ndarray]:
    k = k.astype(float)
    if k.size == 2:
        return [np.array([-k[1], k[0]]) / np.linalg.norm(k)]
    khat = k / np.linalg.norm(k)
    trial = np.eye(3)[np.argmin(np.abs(khat))]
    e1 = np.cross(khat, trial)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(khat, e1)
    th = rng.uniform(0.0, 2.0 * np.pi)
    return [math.cos(th) * e1 + math.sin(th) * e2, -math.sin(th) * e1 + math.cos(th) * e2]


def synthesize_kraichnan(d: int, n_fields: int, zeta: float, amplitude: float,
                         seed: int = 0, n: int = 32) -> NoiseFamily:
    """Divergence-free family of ``n_fields`` transport fields with amplitude
    ``amplitude * |k|^-zeta``, filled shell by shell (cosine and sine parts per
    polarization) inside the dealiased band of an ``n``-point grid.

    The seed fixes the polarization orientation in 3-D.
    """
    if zeta <= 0:
        raise ConfigurationError("spectral exponent zeta must be positive")
    if n_fields < 1:
        raise ConfigurationError("need at least one noise field")
    kmax = int(n // 3)
    ks = _half_space_wavevectors(d, kmax)
    per_k = 2 if d == 2 else 4
    if n_fields > per_k * len(ks):
        raise ConfigurationError(
            f"{n_fields} noise fields exceed grid capacity {per_k * len(ks)} for n={n}")
    rng = np.random.default_rng(seed)
    kk, aa = [], []
    for k in ks:
        k = np.array(k)
        amp = amplitude * np.linalg.norm(k) ** (-zeta)
        for e in _polarizations(k, rng):
            for phase in (1.0, -1j):  # cos, sin
                kk.append(k)
                aa.append(amp * phase * e)
        if len(kk) >= n_fields:
            break
    return NoiseFamily(np.array(kk[:n_fields]), np.array(aa[:n_fields]),
                       zeta=zeta, amplitude=amplitude, seed=seed)


# -- viscosity tensors ------------------------------------------------------------

@dataclass(frozen=True)
class ViscosityTensor:
    """Symmetric ``a^{ij}``, either constant ``(d, d)`` or gridded ``(d, d, *shape)``."""

    values: np.ndarray
    provenance: str = "direct"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim < 2 or v.shape[0] != v.shape[1]:
            raise ConfigurationError("viscosity tensor must be square in its first two axes")
        if not np.allclose(v, np.swapaxes(v, 0, 1), atol=1e-13, rtol=0):
            raise ConfigurationError("viscosity tensor must be symmetric")

    @classmethod
    def isotropic(cls, nu: float, d: int) -> "ViscosityTensor":
        return cls(nu * np.eye(d))

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def is_constant(self) -> bool:
        return self.values.ndim == 2

    def on_grid(self, grid: TorusGrid) -> np.ndarray:
        if self.is_constant:
            return np.broadcast_to(self.values.reshape(self.values.shape + (1,) * grid.dim),
                                   self.values.shape + grid.shape)
        if self.values.shape[2:] != grid.shape:
            raise ConfigurationError("gridded viscosity does not match the grid")
        return self.values

    def __add__(self, other: "ViscosityTensor") -> "ViscosityTensor":
        prov = "ito_correction_included" if "ito_correction_included" in (
            self.provenance, other.provenance) else self.provenance
        return ViscosityTensor(_broadcast_sum(self.values, other.values), prov)

    def __sub__(self, other: "ViscosityTensor") -> "ViscosityTensor":
        return ViscosityTensor(_broadcast_sum(self.values, -other.values), self.provenance)

    def min_eigenvalue(self, grid: TorusGrid | None = None) -> float:
        v = self.values
        if v.ndim == 2:
            return float(np.linalg.eigvalsh(v)[0])
        mats = np.moveaxis(v.reshape(v.shape[:2] + (-1,)), -1, 0)
        return float(np.min(np.linalg.eigvalsh(mats)[:, 0]))

    def max_eigenvalue(self) -> float:
        v = self.values
        if v.ndim == 2:
            return float(np.linalg.eigvalsh(v)[-1])
        mats = np.moveaxis(v.reshape(v.shape[:2] + (-1,)), -1, 0)
        return float(np.max(np.linalg.eigvalsh(mats)[:, -1]))


def _broadcast_sum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim < b.ndim:
        a = a.reshape(a.shape + (1,) * (b.ndim - a.ndim))
    elif b.ndim < a.ndim:
        b = b.reshape(b.shape + (1,) * (a.ndim - b.ndim))
    return a + b


def ito_correction(nf: NoiseFamily, grid: TorusGrid) -> ViscosityTensor:
    """``a_b = (1/2) sum_n b_n (x) b_n`` for time-independent, divergence-free ``b``."""
    if nf.time_dependent:
        raise UnsupportedModeError(
            "Stratonovich-to-Ito conversion requires (t, omega)-independent transport fields")
    if nf.n_modes == 0:
        return ViscosityTensor(np.zeros((grid.dim, grid.dim)), "ito_correction_included")
    if nf.divergence_defect(grid) > DIVFREE_TOL * max(1.0, np.abs(nf.alphas).max()):
        raise UnsupportedModeError("Ito correction formula needs divergence-free b")
    if nf.is_constant_in_x:
        b = nf.alphas.real
        return ViscosityTensor(0.5 * b.T @ b, "ito_correction_included")
    b = nf.grid_values(grid)
    ab = 0.5 * np.einsum("ni...,nj...->ij...", b, b)
    return ViscosityTensor(0.5 * (ab + np.swapaxes(ab, 0, 1)), "ito_correction_included")


def coercivity_nu(a: ViscosityTensor, nf: NoiseFamily | None, grid: TorusGrid) -> float:
    """Smallest eigenvalue of ``a(x) - a_b(x)`` over the grid (may be <= 0)."""
    if nf is None or nf.n_modes == 0:
        return a.min_eigenvalue()
    base = nf if not nf.time_dependent else NoiseFamily(
        nf.wavevectors, nf.alphas * nf.max_modulation(), nf.zeta, nf.amplitude, nf.seed)
    return (a - ito_correction(base, grid)).min_eigenvalue()


# -- nonlinearity presets --------------------------------------------------------

@dataclass
class NonlinearityPreset:
    """``g_n`` per noise mode plus an optional body force ``f_0`` (``u``-independent).

    kinds: ``zero``; ``linear`` ``g_n(u) = gamma_n u``; ``quadratic``
    ``g_n(u) = gamma_n u min(|u|, u_cap)``; ``custom`` with user callables
    ``g_fn(u) -> (..., N_b, d, *shape)``, ``f0_fn(u)`` and ``f_fn(u) -> (..., d, d, *shape)``
    (index order ``[k, j]`` for ``f_j^k``) acting on grid samples.
    """

    kind: str = "zero"
    gamma: np.ndarray | None = None
    u_cap: float = math.inf
    body_force: tuple = ()  # ((k, alpha), ...) with Re(alpha e^{ik.x})
    g_fn: Callable | None = None
    f0_fn: Callable | None = None
    f_fn: Callable | None = None
    lipschitz_const: float | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "quadratic", "custom"):
            raise ConfigurationError(f"unknown nonlinearity preset {self.kind!r}")
        if self.gamma is not None:
            self.gamma = np.asarray(self.gamma, dtype=float)
        if self.kind in ("linear", "quadratic") and self.gamma is None:
            raise ConfigurationError(f"{self.kind} preset needs per-mode coefficients gamma")
        if self.kind == "quadratic" and not self.u_cap > 0:
            raise ConfigurationError("u_cap must be positive")

    @property
    def has_g(self) -> bool:
        if self.kind == "custom":
            return self.g_fn is not None
        return self.kind != "zero" and bool(np.any(self.gamma))

    @property
    def g_is_linear(self) -> bool:
        return self.kind == "linear"

    @property
    def scaling_consistent(self) -> bool:
        """``g`` compatible with the parabolic scaling: absent or homogeneous quadratic."""
        return not self.has_g or (self.kind == "quadratic" and math.isinf(self.u_cap))

    @property
    def gamma_l2(self) -> float:
        return float(np.linalg.norm(self.gamma)) if self.gamma is not None else 0.0

    def check_modes(self, n_modes: int):
        if self.kind in ("linear", "quadratic") and self.gamma.shape != (n_modes,):
            raise ConfigurationError(
                f"gamma has {self.gamma.size} entries, noise has {n_modes} modes")

    def g_values(self, u: np.ndarray, dim: int) -> np.ndarray:
        """``g_n(u)`` on grid samples ``u`` of shape ``(..., d, *shape)`` -> ``(..., N_b, d, *shape)``."""
        if self.kind == "custom":
            return self.g_fn(u)
        gam = self.gamma.reshape((-1, 1) + (1,) * dim)
        uu = np.expand_dims(u, -dim - 2)
        if self.kind == "linear":
            return gam * uu
        mag = np.sqrt(np.sum(u**2, axis=-dim - 1, keepdims=True))
        return gam * uu * np.expand_dims(np.minimum(mag, self.u_cap), -dim - 2)

    def body_force_coeffs(self, grid: TorusGrid) -> np.ndarray | None:
        if not self.body_force:
            return None
        nf = NoiseFamily.from_modes(self.body_force)
        return np.sum(nf.coeffs(grid), axis=0)

    def certificate(self, grid: TorusGrid | None = None) -> dict:
        """Growth constants: ``(M1, M2)`` with ``sum|f_j| + ||g||_l2 <= M1(1+|y|) + M2|y|^2``,
        linear-growth ``C``, and ``Xi = sup|f_0(.,0)|``."""
        xi = 0.0
        if self.body_force:
            xi = float(sum(np.linalg.norm(np.asarray(a)) for _, a in self.body_force))
        g2 = self.gamma_l2
        if self.kind == "zero":
            return {"M1": xi, "M2": 0.0, "C_linear": 0.0, "Xi": xi}
        if self.kind == "linear":
            return {"M1": xi + g2, "M2": 0.0, "C_linear": g2, "Xi": xi}
        if self.kind == "quadratic":
            return {"M1": xi, "M2": g2, "C_linear": g2 * self.u_cap, "Xi": xi}
        return {"M1": None, "M2": None, "C_linear": None, "Xi": None}

    def lipschitz_certificate(self) -> float:
        """Constant ``L`` in ``||g(y)-g(y')||_l2 <= L(1+|y|+|y'|)|y-y'|``."""
        if self.lipschitz_const is not None:
            return self.lipschitz_const
        if self.kind == "zero":
            return 0.0
        # |u min(|u|,c) - v min(|v|,c)| <= 2 max(|u|,|v|)|u - v| covers both branches
        return self.gamma_l2 * (1.0 if self.kind == "linear" else 2.0)

    def lipschitz_spot_check(self, rng: np.random.Generator, dim: int, radius: float = 10.0,
                             samples: int = 2000) -> float:
        """Largest observed ratio ``||g(y)-g(y')|| / ((1+|y|+|y'|)|y-y'|)`` over random pairs."""
        if not self.has_g:
            return 0.0
        y = rng.uniform(-radius, radius, size=(samples, dim, 1, 1))
        yp = y + rng.normal(scale=radius * 0.1, size=y.shape)
        gy = self.g_values(y, 2)[..., 0, 0]
        gyp = self.g_values(yp, 2)[..., 0, 0]
        num = np.sqrt(np.sum((gy - gyp) ** 2, axis=(-2, -1)))
        ny, nyp = np.linalg.norm(y[..., 0, 0], axis=1), np.linalg.norm(yp[..., 0, 0], axis=1)
        den = (1 + ny + nyp) * np.linalg.norm((y - yp)[..., 0, 0], axis=1)
        return float(np.max(num / den))


# -- Brownian drivers ----------------------------------------------------------------

@dataclass
class BrownianDriver:
    """Gaussian increments ``dW_n ~ N(0, dt)``; path ``i`` draws from its own
    stream seeded by ``(seed, i)`` so paths are reproducible in isolation."""

    seed: int
    dt: float
    n_modes: int
    increments: np.ndarray | None = field(default=None, repr=False)  # (paths, steps, modes)
    path_offset: int = 0


def sample_increments(driver: BrownianDriver, steps: int, paths: int) -> np.ndarray:
    """Increment tensor of shape ``(paths, steps, n_modes)``."""
    if steps < 1 or paths < 1:
        raise ConfigurationError("steps and paths must be positive")
    if driver.increments is not None:
        inc = driver.increments
        if inc.shape[0] < paths or inc.shape[1] < steps or inc.shape[2] != driver.n_modes:
            raise ConfigurationError(
                f"stored increments {inc.shape} cannot supply {(paths, steps, driver.n_modes)}")
        return inc[:paths, :steps]
    sd = math.sqrt(driver.dt)
    out = np.empty((paths, steps, driver.n_modes))
    for i in range(paths):
        rng = np.random.default_rng([driver.seed, driver.path_offset + i])
        out[i] = sd * rng.standard_normal((steps, driver.n_modes))
    return out


def scaled_increments(driver: BrownianDriver, lam: float, h: float, steps: int,
                      paths: int) -> BrownianDriver:
    """Driver for ``beta_t = lam^{-1/2} w_{lam t}`` at step ``h``: each increment is
    ``lam^{-1/2}`` times the sum of the ``lam h / dt`` base increments it spans."""
    ratio = lam * h / driver.dt
    m = round(ratio)
    if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, ratio):
        raise ConfigurationError(
            f"lambda*h/dt = {ratio} must be a positive integer to aggregate base increments")
    base = sample_increments(driver, steps * m, paths)
    agg = base.reshape(paths, steps, m, driver.n_modes).sum(axis=2)
    return BrownianDriver(driver.seed, h, driver.n_modes, increments=agg / math.sqrt(lam))


__all__ = [
    "NoiseFamily", "synthesize_kraichnan", "ViscosityTensor", "ito_correction",
    "coercivity_nu", "NonlinearityPreset", "BrownianDriver", "sample_increments",
    "scaled_increments",
]
