"""Time integration of the projected stochastic Navier-Stokes system with
transport noise, and of its linear (turbulent Stokes) part.

The scheme is semi-implicit Euler-Maruyama: the constant-coefficient part of
``div(a grad u)`` is treated implicitly (or through the exponential factor),
everything else is explicit and evaluated at the left end point; the state is
re-projected and dealiased after every step.  Paths are advanced together as
a leading batch axis.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, UnsupportedModeError
from .noise import (BrownianDriver, NoiseFamily, NonlinearityPreset, ViscosityTensor,
                    coercivity_nu, ito_correction, sample_increments)
from .spaces import besov_norm, bessel_norm
from .spectral import (SpectralField, TorusGrid, convection_array, dealias_array,
                       energy, enstrophy, forward_array, gradient_array, inner,
                       inverse_array, mirror_index, project_array)

SCHEMES = ("semi-implicit", "exponential")
MODES = ("ito", "stratonovich")
LEDGER_TERMS = ("dissipation", "forcing", "convective", "qv_b", "qv_g", "qv_cross",
                "mart_b", "mart_g", "residual")


@dataclass
class SolverConfig:
    """Problem data and discretization for one family of runs.

    ``forcing_f(t)`` returns coefficients broadcastable to ``(paths, d, *shape)``
    and ``forcing_g(t)`` to ``(paths, N_b, d, *shape)``; both are additive and
    mostly used with ``convection=False`` (the linear Stokes problem).
    ``norms`` lists extra per-step norms as ``("bessel", s, q)`` or
    ``("besov", s, q, p)``.
    """

    grid: TorusGrid
    dt: float
    T: float
    mode: str = "ito"
    scheme: str = "semi-implicit"
    a: ViscosityTensor | None = None
    noise: NoiseFamily | None = None
    nonlinearity: NonlinearityPreset = field(default_factory=NonlinearityPreset)
    convection: bool = True
    forcing_f: Callable | None = None
    forcing_g: Callable | None = None
    forcing_label: str = ""
    blowup_factor: float = 1e6
    seed: int = 0
    allow_degenerate: bool = False
    norms: tuple = ()
    snapshot_every: int = 0

    def __post_init__(self):
        d = self.grid.dim
        if self.a is None:
            self.a = ViscosityTensor.isotropic(1.0, d)
        if self.noise is None:
            self.noise = NoiseFamily.empty(d)
        if not (self.dt > 0 and self.T > 0):
            raise ConfigurationError("dt and T must be positive")
        ratio = self.T / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigurationError(f"T/dt = {ratio} is not an integer number of steps")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}")
        if self.a.dim != d or self.noise.dim != d:
            raise ConfigurationError("viscosity, noise and grid dimensions differ")
        self.noise._check_grid(self.grid)
        self.nonlinearity.check_modes(self.noise.n_modes)
        if self.mode == "stratonovich":
            if self.noise.time_dependent:
                raise UnsupportedModeError(
                    "Stratonovich mode needs transport fields independent of (t, omega)")
            if self.nonlinearity.has_g or self.noise.has_h or self.forcing_g is not None:
                raise UnsupportedModeError(
                    "Stratonovich mode converts the transport term only; g and h must vanish")
        for spec in self.norms:
            if spec[0] not in ("bessel", "besov") or len(spec) != (3 if spec[0] == "bessel" else 4):
                raise ConfigurationError(f"bad norm spec {spec!r}")
        if not self.allow_degenerate and self.nu_hat <= 0:
            raise ConfigurationError(
                f"parabolicity fails: coercivity margin {self.nu_hat:.3g} <= 0")
        self._ops = None

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    @property
    def nu_hat(self) -> float:
        return coercivity_nu(self.a, self.noise, self.grid)

    @property
    def effective_viscosity(self) -> ViscosityTensor:
        if self.mode == "stratonovich" and self.noise.n_modes:
            return self.a + ito_correction(self.noise, self.grid)
        return self.a

    def with_(self, **changes) -> "SolverConfig":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return SolverConfig(**kw)

    def describe(self) -> dict:
        nl = self.nonlinearity
        return {
            "dim": self.grid.dim, "n": self.grid.n, "dt": self.dt, "T": self.T,
            "mode": self.mode, "scheme": self.scheme,
            "a": np.asarray(self.a.values).tolist() if self.a.is_constant else "gridded",
            "noise_wavevectors": self.noise.wavevectors.tolist(),
            "noise_alphas": [[[z.real, z.imag] for z in row] for row in self.noise.alphas],
            "noise_h": None if self.noise.h is None else self.noise.h.tolist(),
            "noise_time_dependent": self.noise.time_dependent,
            "nonlinearity": nl.kind,
            "gamma": None if nl.gamma is None else nl.gamma.tolist(),
            "u_cap": None if math.isinf(nl.u_cap) else nl.u_cap,
            "body_force": [[list(k), np.asarray(a, dtype=complex).real.tolist(),
                            np.asarray(a, dtype=complex).imag.tolist()] for k, a in nl.body_force],
            "convection": self.convection, "forcing": self.forcing_label,
            "blowup_factor": self.blowup_factor, "seed": self.seed,
            "norms": [list(s) for s in self.norms],
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def operators(self) -> "_Operators":
        if self._ops is None:
            self._ops = _Operators(self)
        return self._ops


class _Operators:
    """Precomputed symbols and noise samples for a configuration."""

    def __init__(self, cfg: SolverConfig):
        g = cfg.grid
        self.cfg = cfg
        self.grid = g
        a_eff = cfg.effective_viscosity
        kd = g.kd
        if a_eff.is_constant:
            A = a_eff.values
            self.symbol = np.einsum("i...,ij,j...->...", kd, A, kd)
            self.a_rem = None
        else:
            nu_bar = a_eff.min_eigenvalue()
            self.symbol = nu_bar * g.kd2
            rem = a_eff.values - nu_bar * np.eye(g.dim).reshape((g.dim, g.dim) + (1,) * g.dim)
            self.a_rem = rem if np.any(rem) else None
        if cfg.scheme == "exponential":
            self.factor = np.exp(-cfg.dt * self.symbol)
        else:
            self.factor = 1.0 / (1.0 + cfg.dt * self.symbol)
        nf = cfg.noise
        self.n_modes = nf.n_modes
        self.b_const = nf.alphas.real if (nf.n_modes and nf.is_constant_in_x) else None
        self.b_grid = nf.grid_values(g) if (nf.n_modes and not nf.is_constant_in_x) else None
        self.h = nf.h if nf.has_h else None
        self.f0 = cfg.nonlinearity.body_force_coeffs(g)
        nl = cfg.nonlinearity
        self.has_body = (self.f0 is not None or nl.f0_fn is not None or nl.f_fn is not None
                         or self.h is not None or cfg.forcing_f is not None)

    # -- building blocks on coefficient batches (P, d, *shape) --
    def transport_raw(self, c: np.ndarray, beta) -> np.ndarray:
        """``(beta . grad) u``, dealiased; ``beta`` is ``(P, d)`` constant or ``(P, d, *shape)``."""
        g = self.grid
        if np.ndim(beta) == 2:
            sym = np.tensordot(beta, g.kd, axes=(1, 0))  # (P, *shape)
            return 1j * sym[:, None] * c
        grad = inverse_array(g, gradient_array(g, c))  # (P, i, j, *shape)
        prod = np.einsum("pj...,pij...->pi...", beta, grad)
        return dealias_array(g, forward_array(g, prod))

    def g_combined(self, u_grid: np.ndarray, c: np.ndarray, w: np.ndarray) -> np.ndarray:
        """``sum_n w_n g_n(u)`` in coefficient space, ``w`` of shape ``(P, N_b)``."""
        nl = self.cfg.nonlinearity
        g = self.grid
        if nl.kind == "linear":
            return (w @ nl.gamma).reshape((-1,) + (1,) * (g.dim + 1)) * c
        vals = nl.g_values(u_grid, g.dim)  # (P, N_b, d, *shape)
        comb = np.einsum("pn,pn...->p...", w, vals)
        return dealias_array(g, forward_array(g, comb))

    def viscous_remainder(self, c: np.ndarray) -> np.ndarray:
        g = self.grid
        grad = inverse_array(g, gradient_array(g, c))  # [component i, direction k]
        flux = np.einsum("jk...,pik...->pij...", self.a_rem, grad)
        fh = dealias_array(g, forward_array(g, flux))
        return 1j * np.sum(g.kd * fh, axis=2)

    def body_terms(self, c: np.ndarray, u_grid: np.ndarray, t: float) -> np.ndarray:
        """``f_0 + div f + f~ + forcing_f(t)`` before projection."""
        cfg, g = self.cfg, self.grid
        nl = cfg.nonlinearity
        out = np.zeros_like(c)
        if self.f0 is not None:
            out = out + self.f0
        if nl.f0_fn is not None:
            out = out + dealias_array(g, forward_array(g, nl.f0_fn(u_grid)))
        if nl.f_fn is not None:
            fh = dealias_array(g, forward_array(g, nl.f_fn(u_grid)))  # (P, k, j, *shape)
            out = out + 1j * np.sum(g.kd * fh, axis=2)
        if self.h is not None:
            out = out + self.pressure_coupling(c, u_grid, t)
        if cfg.forcing_f is not None:
            out = out + cfg.forcing_f(t)
        return out

    def raw_sigma(self, c: np.ndarray, u_grid: np.ndarray, t: float) -> np.ndarray:
        """Per-mode ``(b_n . grad) u + g_n(u) + forcing_g_n(t)`` -> ``(P, N_b, d, *shape)``."""
        cfg, g = self.cfg, self.grid
        P, nb = c.shape[0], self.n_modes
        out = np.zeros((P, nb) + c.shape[1:], dtype=complex)
        mod = cfg.noise.modulation_factor(t)
        eye = np.eye(nb)
        for n in range(nb):
            if self.b_const is not None:
                beta = np.broadcast_to(mod * self.b_const[n], (P, g.dim))
            else:
                beta = np.broadcast_to(mod * self.b_grid[n], (P,) + self.b_grid.shape[1:])
            out[:, n] = self.transport_raw(c, beta)
            if cfg.nonlinearity.has_g:
                out[:, n] += self.g_combined(u_grid, c, np.broadcast_to(eye[n], (P, nb)))
        if cfg.forcing_g is not None:
            out = out + cfg.forcing_g(t)
        return out

    def pressure_coupling(self, c: np.ndarray, u_grid: np.ndarray, t: float) -> np.ndarray:
        """``f~^k = sum_n sum_j [(I - P) sigma_n]^j h_n^{jk}``."""
        raw = self.raw_sigma(c, u_grid, t)
        grad_part = raw - project_array(self.grid, raw)
        return np.einsum("pnj...,njk->pk...", grad_part, self.h)

    def noise_increment(self, c: np.ndarray, u_grid: np.ndarray, t: float,
                        dW: np.ndarray, project: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """``sum_n sigma_n dW_n`` split into the transport and the ``g`` parts."""
        cfg, g = self.cfg, self.grid
        P = c.shape[0]
        s_b = np.zeros_like(c)
        s_g = np.zeros_like(c)
        if self.n_modes == 0:
            return s_b, s_g
        mod = cfg.noise.modulation_factor(t)
        if self.b_const is not None:
            s_b = self.transport_raw(c, mod * (dW @ self.b_const))
        elif self.b_grid is not None:
            beta = mod * np.tensordot(dW, self.b_grid, axes=(1, 0))
            s_b = self.transport_raw(c, beta)
        if cfg.nonlinearity.has_g:
            s_g = s_g + self.g_combined(u_grid, c, dW)
        if cfg.forcing_g is not None:
            fg = np.broadcast_to(cfg.forcing_g(t), (P, self.n_modes) + c.shape[1:])
            s_g = s_g + np.einsum("pn,pn...->p...", dW, fg)
        if not project:
            return s_b, s_g
        return (dealias_array(g, project_array(g, s_b)),
                dealias_array(g, project_array(g, s_g)))

    def step(self, c: np.ndarray, t: float, dW: np.ndarray, ledger: bool = False):
        """One step on a batch ``(P, d, *shape)``; returns ``(c_next, terms)``.

        The explicit terms are summed first and projected once; the ledger
        projects them individually only for its own bookkeeping.
        """
        cfg, g = self.cfg, self.grid
        dt = cfg.dt
        need_grid = (cfg.convection or self.b_grid is not None or cfg.nonlinearity.kind
                     not in ("zero", "linear") or cfg.nonlinearity.f0_fn is not None
                     or cfg.nonlinearity.f_fn is not None)
        u_grid = inverse_array(g, c) if need_grid else None
        explicit = []
        conv = -convection_array(g, c, u_grid) if cfg.convection else None
        visc = self.viscous_remainder(c) if self.a_rem is not None else None
        body = self.body_terms(c, u_grid, t) if self.has_body else None
        for term in (conv, visc, body):
            if term is not None:
                explicit.append(term)
        s_b, s_g = self.noise_increment(c, u_grid, t, dW, project=False)
        rhs = c + s_b + s_g
        if explicit:
            rhs = rhs + dt * sum(explicit)
        c_next = dealias_array(g, project_array(g, self.factor * rhs))
        terms = None
        if ledger:
            zero = np.zeros(c.shape[0])
            e0, e1 = energy(g, c), energy(g, c_next)
            diss = -2.0 * dt * np.sum(self.symbol * np.sum(np.abs(c) ** 2, axis=1),
                                      axis=g.axes)
            if visc is not None:
                diss = diss + 2.0 * dt * inner(g, c, visc)
            pb = dealias_array(g, project_array(g, s_b))
            pg = dealias_array(g, project_array(g, s_g))
            terms = {
                "dissipation": diss,
                "forcing": 2.0 * dt * inner(g, c, body) if body is not None else zero,
                "convective": 2.0 * dt * inner(g, c, conv) if conv is not None else zero,
                "qv_b": energy(g, pb),
                "qv_g": energy(g, pg),
                "qv_cross": 2.0 * inner(g, pb, pg),
                "mart_b": 2.0 * inner(g, c, pb),
                "mart_g": 2.0 * inner(g, c, pg),
            }
            terms["residual"] = e1 - e0 - sum(terms[k] for k in LEDGER_TERMS[:-1])
        return c_next, terms


# -- public single-field operations -------------------------------------------------

def _as_batch(u: SpectralField) -> tuple[np.ndarray, bool]:
    c = u.coeffs
    single = c.ndim == u.grid.dim + 1
    return (c[None] if single else c), single


def drift(u: SpectralField, cfg: SolverConfig, t: float = 0.0) -> SpectralField:
    """``P[div(a grad u) - div(u (x) u) + f_0 + div f + f~]`` (plus ``forcing_f``)."""
    ops = cfg.operators()
    g = cfg.grid
    c, single = _as_batch(u)
    u_grid = inverse_array(g, c)
    out = -ops.symbol * c + ops.body_terms(c, u_grid, t)
    if cfg.convection:
        out = out - convection_array(g, c, u_grid)
    if ops.a_rem is not None:
        out = out + ops.viscous_remainder(c)
    out = dealias_array(g, project_array(g, out))
    return SpectralField(g, out[0] if single else out, divfree=True)


def diffusion(u: SpectralField, cfg: SolverConfig, t: float = 0.0) -> list[SpectralField]:
    """``P[(b_n . grad) u + g_n(u)]`` for each noise mode ``n``."""
    ops = cfg.operators()
    g = cfg.grid
    c, single = _as_batch(u)
    raw = ops.raw_sigma(c, inverse_array(g, c), t)
    sig = dealias_array(g, project_array(g, raw))
    return [SpectralField(g, sig[:, n][0] if single else sig[:, n], divfree=True)
            for n in range(ops.n_modes)]


def _single_step(u: SpectralField, cfg: SolverConfig, increments, t: float) -> SpectralField:
    c, single = _as_batch(u)
    dW = np.asarray(increments, dtype=float).reshape(c.shape[0], cfg.noise.n_modes)
    out, _ = cfg.operators().step(c, t, dW)
    return SpectralField(cfg.grid, out[0] if single else out, divfree=True)


def step_ito(u: SpectralField, cfg: SolverConfig, increments, t: float = 0.0) -> SpectralField:
    """One Ito step; ``increments`` holds ``dW_n`` per mode (per path for batches)."""
    if cfg.mode != "ito":
        cfg = cfg.with_(mode="ito")
    return _single_step(u, cfg, increments, t)


def step_stratonovich(u: SpectralField, cfg: SolverConfig, increments,
                      t: float = 0.0) -> SpectralField:
    """Stratonovich step: the Ito step with ``a`` replaced by ``a + a_b``."""
    if cfg.mode != "stratonovich":
        cfg = cfg.with_(mode="stratonovich")
    return _single_step(u, cfg, increments, t)


# -- trajectories ---------------------------------------------------------------------

@dataclass
class TrajectoryRecord:
    times: np.ndarray
    energy: np.ndarray  # (P, steps+1), NaN after blow-up
    enstrophy: np.ndarray
    norms: dict
    blown: np.ndarray  # (P,)
    sigma: np.ndarray  # (P,) first flagged time, T if none
    ledger: dict | None
    snapshots: list  # [(time, coeffs (P, d, *shape))]
    final: np.ndarray
    config_hash: str
    seed: int
    grid: TorusGrid
    u0_projected: bool = False

    @property
    def paths(self) -> int:
        return self.energy.shape[0]

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def h1_norm(self) -> np.ndarray:
        """``||u||_{H^{1,2}}`` series from the stored energy and enstrophy."""
        return np.sqrt(self.energy + self.enstrophy)

    def series_table(self) -> tuple[list[str], np.ndarray]:
        """Columns for the delimited-text export, one row per (path, time)."""
        cols = ["path", "time", "L2", "H1"] + list(self.norms) + ["blown"]
        rows = []
        for p in range(self.paths):
            alive = (self.times < self.sigma[p]) | ~self.blown[p]
            block = [np.full(self.times.shape, p, dtype=float), self.times,
                     np.sqrt(self.energy[p]), self.h1_norm()[p]]
            block += [self.norms[k][p] for k in self.norms]
            block.append((~alive).astype(float))
            rows.append(np.stack(block, axis=1))
        return cols, np.concatenate(rows, axis=0)


def norm_key(spec) -> str:
    if spec[0] == "bessel":
        return f"bessel_s{spec[1]:g}_q{spec[2]:g}"
    return f"besov_s{spec[1]:g}_q{spec[2]:g}_p{spec[3]:g}"


def _eval_norm(grid: TorusGrid, c: np.ndarray, spec) -> np.ndarray:
    f = SpectralField(grid, c)
    if spec[0] == "bessel":
        return np.asarray(bessel_norm(f, spec[1], spec[2]))
    return np.asarray(besov_norm(f, spec[1], spec[2], spec[3]))


def run_trajectory(u0: SpectralField, cfg: SolverConfig, paths: int | None = None,
                   driver: BrownianDriver | None = None, ledger: bool = True) -> TrajectoryRecord:
    """Integrate an ensemble from ``u0`` (one field shared by all paths, or a batch)."""
    g = cfg.grid
    if u0.grid != g:
        raise ConfigurationError("initial data and configuration grids differ")
    c = u0.coeffs
    if c.ndim == g.dim + 1:
        P = 1 if paths is None else paths
        c = np.broadcast_to(c, (P,) + c.shape).copy()
    else:
        P = c.shape[0]
        if paths is not None and paths != P:
            raise ConfigurationError("paths disagrees with the batch size of u0")
        c = c.copy()
    projected = dealias_array(g, project_array(g, c))
    scale = max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
    u0_projected = bool(np.max(np.abs(projected - c)) > 1e-12 * scale)
    c = projected
    ops = cfg.operators()
    nsteps = cfg.steps
    times = cfg.times
    nb = cfg.noise.n_modes
    if nb:
        if driver is None:
            driver = BrownianDriver(cfg.seed, cfg.dt, nb)
        if abs(driver.dt - cfg.dt) > 1e-12 * cfg.dt or driver.n_modes != nb:
            raise ConfigurationError("driver step or mode count does not match the configuration")
        inc = sample_increments(driver, nsteps, P)
    else:
        inc = np.zeros((P, nsteps, 0))

    en = np.full((P, nsteps + 1), np.nan)
    ens = np.full((P, nsteps + 1), np.nan)
    keys = [norm_key(s) for s in cfg.norms]
    norms = {k: np.full((P, nsteps + 1), np.nan) for k in keys}
    led = {k: np.full((P, nsteps), np.nan) for k in LEDGER_TERMS} if ledger else None
    snaps = []

    def record(i, cc, alive):
        en[alive, i] = energy(g, cc[alive])
        ens[alive, i] = enstrophy(g, cc[alive])
        for k, s in zip(keys, cfg.norms):
            if np.any(alive):
                norms[k][alive, i] = _eval_norm(g, cc[alive], s)

    alive = np.ones(P, dtype=bool)
    blown = np.zeros(P, dtype=bool)
    sigma = np.full(P, float(times[-1]))
    record(0, c, alive)
    e_start = en[:, 0].copy()
    threshold = cfg.blowup_factor * np.maximum(e_start, 1.0)
    if cfg.snapshot_every:
        snaps.append((0.0, c.copy()))
    with np.errstate(all="ignore"):
        for i in range(nsteps):
            t = float(times[i])
            c_next, terms = ops.step(c, t, inc[:, i], ledger=ledger)
            e1 = energy(g, c_next)
            bad = alive & (~np.isfinite(e1) | (e1 > threshold))
            if np.any(bad):
                blown |= bad
                sigma[bad] = times[i + 1]
                alive &= ~bad
                c_next[bad] = 0.0
            if ledger:
                for k in LEDGER_TERMS:
                    led[k][alive, i] = terms[k][alive]
            c = c_next
            record(i + 1, c, alive)
            if cfg.snapshot_every and (i + 1) % cfg.snapshot_every == 0:
                snaps.append((float(times[i + 1]), c.copy()))
    return TrajectoryRecord(times, en, ens, norms, blown, sigma, led, snaps, c,
                            cfg.config_hash(), cfg.seed, g, u0_projected)


def solve_linear_stokes(cfg: SolverConfig, paths: int = 1, driver: BrownianDriver | None = None,
                        s: float = 0.0, ledger: bool = True) -> TrajectoryRecord:
    """Turbulent Stokes problem with zero data at time ``s`` (the record's clock starts at ``s``)."""
    if cfg.convection:
        cfg = cfg.with_(convection=False)
    if cfg.nonlinearity.kind not in ("zero",) or cfg.nonlinearity.body_force:
        raise ConfigurationError("the linear Stokes problem takes forcing through forcing_f/forcing_g")
    zero = SpectralField(cfg.grid, np.zeros((cfg.grid.dim,) + cfg.grid.shape, dtype=complex))
    if s:
        inner_cfg = cfg.with_(forcing_f=_shift(cfg.forcing_f, s), forcing_g=_shift(cfg.forcing_g, s))
        rec = run_trajectory(zero, inner_cfg, paths=paths, driver=driver, ledger=ledger)
        rec.times = rec.times + s
        rec.sigma = rec.sigma + s
        return rec
    return run_trajectory(zero, cfg, paths=paths, driver=driver, ledger=ledger)


def _shift(fn, s):
    if fn is None:
        return None
    return lambda t: fn(t + s)


# -- initial data -------------------------------------------------------------------

def taylor_green(grid: TorusGrid, amplitude: float = 1.0) -> SpectralField:
    """Taylor-Green vortex; in 3-D the third component vanishes."""
    x = grid.x
    if grid.dim == 2:
        v = np.stack([np.sin(x[0]) * np.cos(x[1]), -np.cos(x[0]) * np.sin(x[1])])
    else:
        v = np.stack([np.sin(x[0]) * np.cos(x[1]) * np.cos(x[2]),
                      -np.cos(x[0]) * np.sin(x[1]) * np.cos(x[2]), np.zeros(grid.shape)])
    return SpectralField(grid, forward_array(grid, amplitude * v), divfree=True)


def _shell(d: int, m: int) -> np.ndarray:
    r = np.arange(-m, m + 1)
    ks = np.stack(np.meshgrid(*([r] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return ks[np.max(np.abs(ks), axis=1) == m]


def rough_initial_data(grid: TorusGrid, alpha: float, amplitude: float = 1.0, seed: int = 0,
                       paths: int | None = None) -> SpectralField:
    """Random divergence-free data with spectrum ``amplitude * |k|^-alpha``.

    Coefficients are drawn shell by shell (``max_j |k_j| = m``) from streams
    seeded by ``(seed, path, m)``, so a finer grid reproduces every mode of a
    coarser one and only adds new shells.
    """
    d = grid.dim
    P = 1 if paths is None else paths
    c = np.zeros((P, d) + grid.shape, dtype=complex)
    mmax = int(grid.n // 3)
    while mmax > 0 and not grid.dealias_mask[(mmax,) + (0,) * (d - 1)]:
        mmax -= 1
    for p in range(P):
        for m in range(1, mmax + 1):
            ks = _shell(d, m)
            rng = np.random.default_rng([seed, p, m])
            z = rng.standard_normal((ks.shape[0], d)) + 1j * rng.standard_normal((ks.shape[0], d))
            amp = np.linalg.norm(ks, axis=1) ** (-alpha)
            idx = tuple((ks % grid.n).T)
            c[(p, slice(None)) + idx] = z * amp[:, None]
    c = 0.5 * (c + np.conj(mirror_index(grid, c)))
    c = amplitude * dealias_array(grid, project_array(grid, c))
    return SpectralField(grid, c[0] if paths is None else c, divfree=True)


__all__ = [
    "SolverConfig", "TrajectoryRecord", "drift", "diffusion", "step_ito", "step_stratonovich",
    "run_trajectory", "solve_linear_stokes", "taylor_green", "rough_initial_data", "norm_key",
    "LEDGER_TERMS",
]
