"""Bessel-potential and Besov norm estimators, weighted time norms, and the
exponent arithmetic for critical spaces and Serrin-type blow-up criteria.

Norms use the normalized measure ``dx / (2*pi)**d`` and the pointwise
Euclidean norm over vector components, so ``||c||_{L^q} = |c|`` for a
constant vector ``c``. Absolute constants are convention dependent; only
relations between norms are meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError
from .spectral import ScalarSpectralField, SpectralField, TorusGrid, inverse_array

EXACT_TOL = 1e-12


def _unpack(f) -> tuple[TorusGrid, np.ndarray, bool]:
    if isinstance(f, SpectralField):
        return f.grid, f.coeffs, True
    if isinstance(f, ScalarSpectralField):
        return f.grid, f.coeffs, False
    raise TypeError(f"expected a spectral field, got {type(f).__name__}")


def lebesgue_norm_coeffs(grid: TorusGrid, c: np.ndarray, q: float, vector: bool = True) -> np.ndarray:
    """``L^q`` norm of the field with coefficients ``c``; exact Parseval sum for ``q = 2``."""
    if q < 1:
        raise ConfigurationError(f"integrability q must be >= 1, got {q}")
    if q == 2:
        axes = tuple(range(-grid.dim - (1 if vector else 0), 0))
        return np.sqrt(np.sum(np.abs(c) ** 2, axis=axes))
    vals = inverse_array(grid, c)
    mag = np.sqrt(np.sum(vals**2, axis=-grid.dim - 1)) if vector else np.abs(vals)
    if math.isinf(q):
        return np.max(mag, axis=grid.axes)
    return np.mean(mag**q, axis=grid.axes) ** (1.0 / q)


def bessel_multiplier(grid: TorusGrid, s: float) -> np.ndarray:
    return (1.0 + grid.k2) ** (s / 2.0)


def bessel_norm(f, s: float, q: float) -> np.ndarray | float:
    """``||f||_{H^{s,q}} = ||(1 - Laplacian)^{s/2} f||_{L^q}``."""
    grid, c, vector = _unpack(f)
    out = lebesgue_norm_coeffs(grid, c * bessel_multiplier(grid, s), q, vector)
    return out if np.ndim(out) else float(out)


# -- Littlewood-Paley ---------------------------------------------------------

def _smooth_step(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def lp_cutoff(r: np.ndarray) -> np.ndarray:
    """Smooth radial cutoff: 1 on ``r <= 1/2``, 0 on ``r >= 1``."""
    r = np.asarray(r, dtype=float)
    a = _smooth_step(1.0 - r)
    b = _smooth_step(r - 0.5)
    return a / (a + b)


def lp_block_symbol(kmag: np.ndarray, j: int) -> np.ndarray:
    """Dyadic symbol ``phi_j``; ``j = -1`` is the low block (here only ``k = 0``),
    and ``supp phi_j`` lies in ``2^(j-1) < |k| < 2^(j+1)`` for ``j >= 0``."""
    if j == -1:
        return lp_cutoff(kmag)
    return lp_cutoff(kmag / 2.0 ** (j + 1)) - lp_cutoff(kmag / 2.0**j)


def lp_block_count(grid: TorusGrid) -> int:
    kmax = float(np.max(grid.kmag))
    return max(0, math.ceil(math.log2(max(kmax, 1.0)))) + 1


def littlewood_paley_blocks(f) -> list[tuple[int, np.ndarray]]:
    """List of ``(j, coefficients of Delta_j f)`` for ``j = -1 .. J``."""
    grid, c, _ = _unpack(f)
    return [(j, c * lp_block_symbol(grid.kmag, j))
            for j in range(-1, lp_block_count(grid))]


def besov_norm(f, s: float, q: float, p_besov: float) -> np.ndarray | float:
    """``(sum_j 2^{j s p} ||Delta_j f||_{L^q}^p)^{1/p}``, low block weighted by 1."""
    grid, c, vector = _unpack(f)
    terms = []
    for j, cj in littlewood_paley_blocks(f):
        w = 1.0 if j < 0 else 2.0 ** (j * s)
        terms.append(w * lebesgue_norm_coeffs(grid, cj, q, vector))
    terms = np.stack(terms)
    if math.isinf(p_besov):
        out = np.max(terms, axis=0)
    else:
        out = np.sum(terms**p_besov, axis=0) ** (1.0 / p_besov)
    return out if np.ndim(out) else float(out)


# -- weighted time norms --------------------------------------------------------

@dataclass(frozen=True)
class WeightedTimeGrid:
    """Sample times and positive quadrature weights for ``int_a^b phi(t) |t-a|^kappa dt``.

    Each weight is the exact integral of ``|t-a|^kappa`` over its cell; the
    integrand is sampled once per cell.
    """

    a: float
    b: float
    kappa: float
    times: np.ndarray
    weights: np.ndarray

    @staticmethod
    def _cell_weights(a, nodes, kappa):
        e = kappa + 1.0
        return ((nodes[1:] - a) ** e - (nodes[:-1] - a) ** e) / e

    @classmethod
    def uniform(cls, a: float, b: float, kappa: float, steps: int) -> "WeightedTimeGrid":
        """Cells of a uniform step, sampled at their right endpoints (solver output times)."""
        nodes = np.linspace(a, b, steps + 1)
        return cls(a, b, kappa, nodes[1:].copy(), cls._cell_weights(a, nodes, kappa))

    @classmethod
    def graded(cls, a: float, b: float, kappa: float, cells: int = 200,
               levels: int = 30) -> "WeightedTimeGrid":
        """Uniform cells with the first one refined geometrically towards ``a``;
        samples at cell midpoints."""
        h = (b - a) / cells
        geo = a + h * 0.5 ** np.arange(levels, 0, -1)
        nodes = np.concatenate([[a], geo, a + h * np.arange(1, cells + 1)])
        return cls(a, b, kappa, 0.5 * (nodes[1:] + nodes[:-1]),
                   cls._cell_weights(a, nodes, kappa))


def weighted_time_norm(series: np.ndarray, grid: WeightedTimeGrid, p: float) -> np.ndarray | float:
    """``(int_a^b |series(t)|^p |t-a|^kappa dt)^{1/p}``; last axis of ``series`` is time."""
    series = np.asarray(series, dtype=float)
    if series.shape[-1] != grid.times.shape[0]:
        raise ConfigurationError(
            f"series has {series.shape[-1]} samples, grid has {grid.times.shape[0]}")
    if math.isinf(p):
        out = np.max(np.abs(series), axis=-1)
    else:
        out = np.sum(grid.weights * np.abs(series) ** p, axis=-1) ** (1.0 / p)
    return out if np.ndim(out) else float(out)


# -- exponent arithmetic ----------------------------------------------------------

class KappaCritical(NamedTuple):
    value: float
    admissible: bool


def kappa_critical(d: int, p: float, q: float, delta: float) -> KappaCritical:
    """Critical time weight ``-1 + (p/2)(2 + delta - d/q)`` and whether it lies in
    the admissible weight range (``[0, p/2-1)`` for ``p > 2``, ``{0}`` for ``p = q = 2``)."""
    kc = -1.0 + 0.5 * p * (2.0 + delta - d / q)
    return KappaCritical(kc, _weight_in_range(p, q, kc))


def _weight_in_range(p: float, q: float, kappa: float) -> bool:
    if p > 2 and q >= 2:
        return -EXACT_TOL <= kappa < p / 2.0 - 1.0 - EXACT_TOL
    if p == 2 and q == 2:
        return abs(kappa) <= EXACT_TOL
    return False


@dataclass(frozen=True)
class ParameterTuple:
    d: int
    p: float
    q: float
    delta: float
    kappa: float

    @property
    def kappa_c(self) -> float:
        return kappa_critical(self.d, self.p, self.q, self.delta).value

    @property
    def trace_smoothness(self) -> float:
        return 1.0 + self.delta - 2.0 * (1.0 + self.kappa) / self.p


@dataclass(frozen=True)
class ParameterReport:
    admissible: bool
    critical: bool
    trace_smoothness: float
    kappa_c: float
    reasons: tuple[str, ...]

    def as_dict(self) -> dict:
        return {"admissible": self.admissible, "critical": self.critical,
                "trace_smoothness": self.trace_smoothness, "kappa_c": self.kappa_c,
                "reasons": list(self.reasons)}


def validate_parameters(t: ParameterTuple) -> ParameterReport:
    """Check the weight/integrability header and the local well-posedness
    conditions ``delta in (-1,0]``, ``d/(2+delta) < q < d/(-delta)`` and
    ``2(1+kappa)/p + d/q <= 2 + delta``; the trace space is critical iff the
    last holds with equality."""
    reasons = []
    if not _weight_in_range(t.p, t.q, t.kappa):
        reasons.append("weight/integrability header: need p>2, q>=2, 0<=kappa<p/2-1 "
                       "or p=q=2, kappa=0")
    if not -1.0 < t.delta <= 0.0:
        reasons.append("delta must lie in (-1, 0]")
    q_hi = math.inf if t.delta == 0 else t.d / (-t.delta)
    if not (t.d / (2.0 + t.delta) < t.q < q_hi):
        reasons.append(f"q must lie in ({t.d / (2.0 + t.delta):g}, {q_hi:g})")
    lhs = 2.0 * (1.0 + t.kappa) / t.p + t.d / t.q
    rhs = 2.0 + t.delta
    if lhs > rhs + EXACT_TOL:
        reasons.append("2(1+kappa)/p + d/q exceeds 2 + delta")
    critical = abs(lhs - rhs) <= EXACT_TOL
    return ParameterReport(not reasons, critical, t.trace_smoothness, t.kappa_c, tuple(reasons))


@dataclass(frozen=True)
class SerrinPair:
    d: int
    p0: float
    q0: float
    delta0: float
    gamma0: float
    classic: bool
    admissible: bool

    def as_dict(self) -> dict:
        return dict(d=self.d, p0=self.p0, q0=self.q0, delta0=self.delta0,
                    gamma0=self.gamma0, classic=self.classic, admissible=self.admissible)


def serrin_exponents(d: int, p0: float, q0: float, delta0: float = 0.0) -> SerrinPair:
    """Smoothness ``gamma0 = 2/p0 + d/q0 - 1`` of the Serrin functional
    ``L^{p0}(H^{gamma0,q0})``; ``classic`` marks ``2/p0 + d/q0 = 1``."""
    s = 2.0 / p0 + d / q0
    gamma0 = s - 1.0
    header = _weight_in_range(p0, q0, 0.0)
    case1 = (-0.5 <= delta0 <= 0.0 and d / (2.0 + delta0) < q0 < d / (1.0 + delta0)
             and s <= 2.0 + delta0 + EXACT_TOL)
    case2 = delta0 == 0.0 and p0 == q0 == d == 2
    return SerrinPair(d, p0, q0, delta0, gamma0, abs(s - 1.0) <= EXACT_TOL,
                      header and (case1 or case2))


def critical_besov_smoothness(d: int, q: float) -> float:
    return d / q - 1.0


# -- parabolic scaling ------------------------------------------------------------

def _int_sqrt(lam: float) -> int:
    r = math.sqrt(lam)
    ri = round(r)
    if lam <= 0 or ri < 1 or abs(r - ri) > 1e-12:
        raise ConfigurationError(f"sqrt(lambda) must be a positive integer, got lambda={lam}")
    return ri


def scaling_transform(u: SpectralField, lam: float, t: float = 0.0) -> tuple[SpectralField, float]:
    """``u_lam(t/lam, x) = lam^{1/2} u(t, lam^{1/2} x)`` on the ``sqrt(lam)``-refined grid.

    Mode ``k`` moves to ``sqrt(lam) k`` with amplitude multiplied by ``sqrt(lam)``.
    """
    r = _int_sqrt(lam)
    if r == 1:
        return u.copy(), t
    g = u.grid.refined(r)
    c = np.zeros(u.coeffs.shape[:-u.grid.dim] + g.shape, dtype=complex)
    c[(Ellipsis,) + (slice(None, None, r),) * g.dim] = r * u.coeffs
    return SpectralField(g, c, divfree=u.divfree), t / lam
