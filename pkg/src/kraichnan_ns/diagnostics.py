"""Verification harnesses: energy identity and estimate, Serrin monitor,
empirical maximal-regularity constants, scaling invariance, small-data
survival, regularization monitor and the Ito/Stratonovich mean check.

Each harness returns a dataclass with an ``as_dict`` method for reporting.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError
from .noise import BrownianDriver, NoiseFamily, ViscosityTensor, scaled_increments
from .spaces import (SerrinPair, WeightedTimeGrid, bessel_multiplier, bessel_norm, lebesgue_norm_coeffs,
                     scaling_transform, weighted_time_norm)
from .solver import (LEDGER_TERMS, SolverConfig, TrajectoryRecord, norm_key, run_trajectory,
                     solve_linear_stokes)
from .spectral import (SpectralField, TorusGrid, dealias_array, inverse_array, mirror_index,
                       project_array)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class _Report:
    def as_dict(self) -> dict:
        return _jsonable(asdict(self))


def _path_mean(x: np.ndarray) -> float:
    """Mean over paths with a fixed (sorted) reduction order."""
    return float(np.sum(np.sort(np.asarray(x, dtype=float))) / len(x))


# -- energy identity ------------------------------------------------------------------

@dataclass
class EnergyLedger(_Report):
    dt: float
    energy: np.ndarray
    enstrophy: np.ndarray
    terms: dict
    max_residual: float
    residual_over_dt2: float
    max_convective_relative: float
    gronwall_constant: float
    partial: bool = False


def _y_series(rec: TrajectoryRecord) -> np.ndarray:
    """``y(t) = sup_{r<=t} ||u(r)||^2 + int_0^t ||grad u||^2`` per path (left sums)."""
    dt = np.diff(rec.times)
    integral = np.concatenate([np.zeros((rec.paths, 1)),
                               np.cumsum(rec.enstrophy[:, :-1] * dt, axis=1)], axis=1)
    return np.maximum.accumulate(rec.energy, axis=1) + integral


def energy_audit(rec: TrajectoryRecord, cfg: SolverConfig) -> EnergyLedger:
    """Collect the discrete energy identity terms and a Gronwall-type constant
    ``max_t E y(t) / (1 + E||u_0||^2 + int_0^t E y)``."""
    if rec.ledger is None:
        warnings.warn("trajectory carries no ledger; audit is partial", RuntimeWarning)
        terms, partial = {}, True
        max_res = conv_rel = float("nan")
    else:
        terms, partial = rec.ledger, False
        res = np.abs(terms["residual"])
        max_res = float(np.nanmax(res)) if np.any(np.isfinite(res)) else 0.0
        scale = np.sqrt(rec.energy[:, :-1]) * rec.enstrophy[:, :-1] * cfg.dt
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(scale > 0, np.abs(terms["convective"]) / (2.0 * scale), 0.0)
        conv_rel = float(np.nanmax(rel)) if rel.size else 0.0
    y = _y_series(rec)
    ey = np.array([_path_mean(y[:, i]) for i in range(y.shape[1])])
    e0 = _path_mean(rec.energy[:, 0])
    dt = np.diff(rec.times)
    int_ey = np.concatenate([[0.0], np.cumsum(ey[:-1] * dt)])
    gr = float(np.max(ey / (1.0 + e0 + int_ey)))
    return EnergyLedger(cfg.dt, rec.energy, rec.enstrophy, terms, max_res,
                        max_res / cfg.dt**2 if math.isfinite(max_res) else max_res,
                        conv_rel, gr, partial)


def zero_increment_driver(cfg: SolverConfig, paths: int) -> BrownianDriver:
    nb = cfg.noise.n_modes
    return BrownianDriver(cfg.seed, cfg.dt, nb, increments=np.zeros((paths, cfg.steps, nb)))


@dataclass
class ResidualOrderReport(_Report):
    dts: list
    constants: list  # max |residual| / dt^2
    ratio: float
    stable: bool


def energy_residual_order(u0: SpectralField, cfg: SolverConfig, tolerance: float = 1.5) -> ResidualOrderReport:
    """Deterministic runs (all increments zero) at ``dt`` and ``dt/2``; the residual
    constant ``max|r|/dt^2`` must agree within the factor ``tolerance``."""
    consts, dts = [], []
    for c in (cfg, cfg.with_(dt=cfg.dt / 2)):
        paths = u0.coeffs.shape[0] if u0.coeffs.ndim == c.grid.dim + 2 else 1
        rec = run_trajectory(u0, c, driver=zero_increment_driver(c, paths))
        consts.append(energy_audit(rec, c).residual_over_dt2)
        dts.append(c.dt)
    ratio = max(consts) / min(consts) if min(consts) > 0 else float("inf")
    return ResidualOrderReport(dts, consts, ratio, ratio <= tolerance)


# -- energy estimate ----------------------------------------------------------------------

@dataclass
class EnergyEstimateResult(_Report):
    applicable: bool
    lhs: float
    e0: float
    C_T: float | None
    rhs: float | None
    passed: bool | None
    survival: float


def energy_lhs(rec: TrajectoryRecord) -> tuple[float, float]:
    """``E sup_t ||u||^2 + E int_0^T ||grad u||^2`` and ``E ||u_0||^2``.
    Blown-up paths make the left side infinite."""
    if np.any(rec.blown):
        return float("inf"), _path_mean(rec.energy[:, 0])
    dt = np.diff(rec.times)
    sup = np.max(rec.energy, axis=1)
    integ = np.sum(rec.enstrophy[:, :-1] * dt, axis=1)
    return _path_mean(sup) + _path_mean(integ), _path_mean(rec.energy[:, 0])


def calibrate_energy_constant(rec: TrajectoryRecord) -> float:
    """Reference constant ``lhs / E||u_0||^2`` (the homogeneous bound); falls back
    to ``lhs`` when the data vanish."""
    lhs, e0 = energy_lhs(rec)
    return lhs / e0 if e0 > 0 else lhs


def energy_estimate_check(rec: TrajectoryRecord, C_T: float | None = None) -> EnergyEstimateResult:
    """``lhs <= C_T (1 + E||u_0||^2)`` for one ensemble; 2-D only."""
    lhs, e0 = energy_lhs(rec)
    surv = float(np.mean(~rec.blown))
    if rec.grid.dim != 2:
        return EnergyEstimateResult(False, lhs, e0, C_T, None, None, surv)
    if C_T is None:
        C_T = calibrate_energy_constant(rec)
    rhs = C_T * (1.0 + e0)
    return EnergyEstimateResult(True, lhs, e0, C_T, rhs, bool(lhs <= rhs), surv)


@dataclass
class EnergyHarnessReport(_Report):
    amplitudes: list
    results: list
    C_T: float
    passed: bool
    records: list = field(default=None, repr=False)

    def as_dict(self) -> dict:
        d = {"amplitudes": self.amplitudes, "results": [r.as_dict() for r in self.results],
             "C_T": self.C_T, "passed": self.passed}
        return _jsonable(d)


def energy_estimate_harness(u0: SpectralField, cfg: SolverConfig, amplitudes=(1.0, 2.0, 4.0),
                            paths: int = 64, keep_records: bool = False) -> EnergyHarnessReport:
    """Calibrate ``C_T`` on the first amplitude, then check the bound at the others
    with the same Brownian paths."""
    driver = BrownianDriver(cfg.seed, cfg.dt, cfg.noise.n_modes)
    results, recs, C_T = [], [], None
    for amp in amplitudes:
        rec = run_trajectory(SpectralField(u0.grid, amp * u0.coeffs), cfg, paths=paths,
                             driver=driver)
        if C_T is None:
            C_T = calibrate_energy_constant(rec)
        results.append(energy_estimate_check(rec, C_T))
        recs.append(rec)
    passed = all(r.passed for r in results if r.applicable)
    return EnergyHarnessReport(list(amplitudes), results, C_T, passed,
                               recs if keep_records else None)


def coercivity_boundary_sweep(u0: SpectralField, cfg: SolverConfig, thetas, paths: int = 16,
                              C_T: float | None = None) -> list[dict]:
    """Scale the transport fields by ``theta`` toward the parabolicity boundary and
    report the margin and the empirical constant (observation only)."""
    out = []
    for th in thetas:
        c = cfg.with_(noise=cfg.noise.scaled(th), allow_degenerate=True)
        rec = run_trajectory(u0, c, paths=paths)
        lhs, e0 = energy_lhs(rec)
        out.append({"theta": th, "nu_hat": c.nu_hat, "lhs": lhs, "e0": e0,
                    "empirical_C": lhs / (1.0 + e0)})
    return out


# -- Serrin monitor ------------------------------------------------------------------------

@dataclass
class SerrinAccumulator(_Report):
    pair: SerrinPair
    epsilon: float
    times: np.ndarray
    running: np.ndarray  # (P, steps+1)
    finite: np.ndarray  # (P,)
    sigma: np.ndarray
    T: float

    @property
    def violations(self) -> int:
        """Paths that blow up inside ``(epsilon, T)`` with a finite certificate."""
        bad = (self.sigma > self.epsilon) & (self.sigma < self.T) & self.finite
        return int(np.sum(bad))

    @property
    def survival(self) -> float:
        return float(np.mean(self.sigma >= self.T))

    def summary(self) -> dict:
        return _jsonable({"pair": self.pair.as_dict(), "epsilon": self.epsilon,
                          "finite_fraction": float(np.mean(self.finite)),
                          "violations": self.violations, "survival": self.survival,
                          "final": self.running[:, -1],
                          "note": "consistency check only: no path may blow up with a finite certificate"})


def serrin_norm_series(rec: TrajectoryRecord, pair: SerrinPair) -> np.ndarray:
    if pair.q0 == 2 and abs(pair.gamma0 - 1.0) < 1e-12:
        return rec.h1_norm()
    key = norm_key(("bessel", pair.gamma0, pair.q0))
    if key not in rec.norms:
        raise ConfigurationError(f"trajectory lacks the {key} series needed for this pair")
    return rec.norms[key]


def serrin_monitor(rec: TrajectoryRecord, pair: SerrinPair, epsilon: float) -> SerrinAccumulator:
    """Running ``int_eps^t ||u||_{H^{gamma0,q0}}^{p0} ds`` (left sums); a non-finite
    sample makes the accumulator infinite from then on."""
    norms = serrin_norm_series(rec, pair)
    t = rec.times
    dt = np.diff(t)
    use = (t[:-1] >= epsilon - 1e-12)
    with np.errstate(invalid="ignore", over="ignore"):
        vals = np.abs(norms[:, :-1]) ** pair.p0
    bad = ~np.isfinite(norms)
    incr = np.where(use, np.where(np.isfinite(vals), vals, np.inf) * dt, 0.0)
    running = np.concatenate([np.zeros((rec.paths, 1)), np.cumsum(incr, axis=1)], axis=1)
    finite = np.isfinite(running[:, -1]) & ~np.any(bad, axis=1)
    sigma = rec.sigma.copy()
    for p in range(rec.paths):
        if np.any(bad[p]):
            sigma[p] = min(sigma[p], t[np.argmax(bad[p])])
    return SerrinAccumulator(pair, epsilon, t, running, finite, sigma, rec.T)


# -- stochastic maximal regularity ---------------------------------------------------------

def ell2_bessel_norm(grid: TorusGrid, c: np.ndarray, s: float, q: float) -> np.ndarray:
    """``||(J^s g_n)_n||_{L^q(l^2)}`` for coefficients ``(..., N_b, d, *shape)``."""
    v = inverse_array(grid, bessel_multiplier(grid, s) * c)
    pw = np.sqrt(np.sum(v**2, axis=(-grid.dim - 2, -grid.dim - 1)))
    axes = tuple(range(-grid.dim, 0))
    if math.isinf(q):
        return np.max(pw, axis=axes)
    return np.mean(pw**q, axis=axes) ** (1.0 / q)


def _band_modes(d: int, band: int) -> np.ndarray:
    r = np.arange(-band, band + 1)
    ks = np.stack(np.meshgrid(*([r] * d), indexing="ij"), axis=-1).reshape(-1, d)
    nz = np.any(ks != 0, axis=1)
    return ks[nz & (np.linalg.norm(ks, axis=1) <= band)]


def band_limited_forcing(grid: TorusGrid, seed, n_modes: int, band: int = 4,
                         with_f: bool = True, with_g: bool = True):
    """Divergence-free random ``f`` ``(d, *shape)`` and ``g`` ``(N_b, d, *shape)`` on the
    fixed mode set ``|k| <= band``; the draw does not depend on the grid size."""
    d = grid.dim
    ks = _band_modes(d, band)
    rng = np.random.default_rng(seed)
    def draw(lead):
        z = rng.standard_normal(lead + (ks.shape[0], d)) + 1j * rng.standard_normal(lead + (ks.shape[0], d))
        c = np.zeros(lead + (d,) + grid.shape, dtype=complex)
        idx = tuple((ks % grid.n).T)
        c[(Ellipsis, slice(None)) + idx] = np.swapaxes(z, -1, -2)
        c = 0.5 * (c + np.conj(mirror_index(grid, c)))
        return dealias_array(grid, project_array(grid, c))
    f = draw(()) if with_f else np.zeros((d,) + grid.shape, dtype=complex)
    g = draw((n_modes,)) if (with_g and n_modes) else np.zeros((n_modes, d) + grid.shape, dtype=complex)
    return f, g


@dataclass
class SmrReport(_Report):
    p: float
    q: float
    delta: float
    kappa: float
    J: np.ndarray  # per sample
    ratios: dict  # name -> per-sample ratios
    sup: dict
    quantiles: dict
    samples: int
    paths_per_sample: int


def _smr_norm_specs(p, q, delta, kappa):
    specs = {"C_L": ("bessel", 1.0 + delta, q), "C_C": ("bessel", delta, q)}
    if p > 2:
        specs["C3"] = ("besov", 1.0 + delta - 2.0 * (1.0 + kappa) / p, q, p)
        specs["C4"] = ("besov", 1.0 + delta - 2.0 / p, q, p)
    return specs


def smr_estimate(cfg: SolverConfig, samples: int = 64, paths_per_sample: int = 4,
                 p: float = 2.0, q: float = 2.0, delta: float = 0.0, kappa: float = 0.0,
                 s: float = 0.0, epsilon: float | None = None, seed: int = 0, band: int = 4,
                 theta: float = 1.0, with_f: bool = True, with_g: bool = True,
                 forcing=None, chunk: int = 32) -> SmrReport:
    """Empirical ratios ``||u|| / J_{p,q,kappa}(f,g)`` over random band-limited forcings.

    Sample ``i`` uses one ``(f, g)`` draw (seeded by ``(seed, i)``, constant in time)
    and ``paths_per_sample`` Brownian paths for the expectation.  For ``p = q = 2``
    the ratios reported are ``C5`` (``L^2(H^{1+delta})``) and ``C6`` (``C(H^delta)``);
    for ``p > 2`` they are ``C1``, ``C3`` and ``C4``.  ``forcing`` overrides the random
    draw with a fixed ``(f, g)`` pair.
    """
    g = cfg.grid
    nb = cfg.noise.n_modes
    specs = _smr_norm_specs(p, q, delta, kappa)
    names = {"C_L": "C5" if p == 2 else "C1", "C_C": "C6" if p == 2 else None}
    if p > 2:
        names.update({"C3": "C3", "C4": "C4"})
    eps = epsilon if epsilon is not None else 0.25 * (cfg.T)
    run_cfg = cfg.with_(convection=False, norms=tuple(specs.values()))
    steps = run_cfg.steps
    wgrid = WeightedTimeGrid.uniform(s, s + cfg.T, kappa, steps)
    J = np.zeros(samples)
    ratios = {names[k]: np.zeros(samples) for k in specs if names.get(k)}
    for start in range(0, samples, chunk):
        idx = list(range(start, min(samples, start + chunk)))
        fs, gs = [], []
        for i in idx:
            if forcing is not None:
                f_i, g_i = forcing
            else:
                f_i, g_i = band_limited_forcing(g, [seed, i], nb, band, with_f, with_g)
            fs.append(theta * f_i)
            gs.append(theta * g_i)
        F = np.repeat(np.stack(fs), paths_per_sample, axis=0)
        G = np.repeat(np.stack(gs), paths_per_sample, axis=0)
        c = run_cfg.with_(forcing_f=(lambda t, F=F: F), forcing_g=(lambda t, G=G: G) if nb else None,
                          forcing_label="smr-band-limited")
        driver = BrownianDriver(cfg.seed, cfg.dt, nb, path_offset=start * paths_per_sample)
        rec = solve_linear_stokes(c, paths=len(idx) * paths_per_sample, driver=driver, s=s,
                                  ledger=False)
        wsum = float(np.sum(wgrid.weights))
        for j, i in enumerate(idx):
            jf = float(lebesgue_norm_coeffs(g, bessel_multiplier(g, -1.0 + delta) * fs[j], q))
            jg = float(ell2_bessel_norm(g, gs[j], delta, q)) if nb else 0.0
            J[i] = (jf + jg) * wsum ** (1.0 / p)
            sl = slice(j * paths_per_sample, (j + 1) * paths_per_sample)
            for key, spec in specs.items():
                name = names.get(key)
                if not name:
                    continue
                series = rec.norms[norm_key(spec)][sl]
                if key == "C_L":
                    per_path = weighted_time_norm(series[:, 1:], wgrid, p)
                elif key == "C4":
                    per_path = np.max(series[:, rec.times >= s + eps - 1e-12], axis=1)
                else:
                    per_path = np.max(series, axis=1)
                omega = (np.sum(np.sort(per_path**p)) / paths_per_sample) ** (1.0 / p)
                ratios[name][i] = omega / J[i] if J[i] > 0 else np.nan
    keep = J > 0
    sup = {k: float(np.max(v[keep])) for k, v in ratios.items()}
    quant = {k: np.quantile(v[keep], [0.5, 0.9]).tolist() for k, v in ratios.items()}
    return SmrReport(p, q, delta, kappa, J, ratios, sup, quant, samples, paths_per_sample)


def smr_closed_form(k2: float, T: float) -> dict:
    """Exact ``C5`` and ``C6`` ratios for ``a = I``, ``b = g = 0`` and a single
    time-constant forcing mode with ``|k|^2 = k2`` (``p = q = 2``, ``delta = 0``)."""
    lam = k2
    integral = T - 2.0 * (1.0 - math.exp(-lam * T)) / lam + (1.0 - math.exp(-2 * lam * T)) / (2 * lam)
    jf = math.sqrt(T / (1.0 + lam))
    return {"C5": math.sqrt((1.0 + lam) * integral) / lam / jf,
            "C6": (1.0 - math.exp(-lam * T)) / lam / jf}


def smr_sweep(cfg: SolverConfig, thetas, **kw) -> list[dict]:
    """Sup ratios as the transport fields are scaled toward the coercivity boundary."""
    out = []
    for th in thetas:
        c = cfg.with_(noise=cfg.noise.scaled(th), allow_degenerate=True)
        rep = smr_estimate(c, **kw)
        out.append({"theta": th, "nu_hat": c.nu_hat, "sup": rep.sup})
    return out


# -- scaling -------------------------------------------------------------------------------

@dataclass
class ScalingReport(_Report):
    lam: float
    times: np.ndarray  # base-clock times
    rel_error: np.ndarray  # (P, m)
    max_error: float


def _check_scaling_preconditions(cfg: SolverConfig):
    nf, nl = cfg.noise, cfg.nonlinearity
    if nf.n_modes and not nf.is_constant_in_x:
        raise ConfigurationError("scaling check needs transport fields constant in x")
    if nf.time_dependent or nf.has_h:
        raise ConfigurationError("scaling check needs autonomous b and h = 0")
    if not nl.scaling_consistent or nl.body_force or nl.f0_fn or nl.f_fn:
        raise ConfigurationError("nonlinearity is not compatible with the parabolic scaling")
    if cfg.forcing_f is not None or cfg.forcing_g is not None:
        raise ConfigurationError("scaling check takes no external forcing")
    if not cfg.a.is_constant:
        raise ConfigurationError("scaling check needs a constant viscosity tensor")


def scaling_check(u0: SpectralField, cfg: SolverConfig, lam: float, paths: int = 1,
                  driver: BrownianDriver | None = None) -> ScalingReport:
    """Run ``u`` on ``(n, h)`` and ``v`` from ``u_{0,lam}`` on ``(sqrt(lam) n, h/lam)``
    driven by the scaled Brownian motion; compare ``v`` with ``u_lam`` at matched times."""
    _check_scaling_preconditions(cfg)
    nb = cfg.noise.n_modes
    if driver is None:
        driver = BrownianDriver(cfg.seed, cfg.dt, nb)
    v0, _ = scaling_transform(u0, lam)
    fine = cfg.with_(grid=v0.grid, dt=cfg.dt / lam, T=cfg.T / lam, snapshot_every=1)
    base = cfg.with_(snapshot_every=1)
    vdriver = (scaled_increments(driver, lam, fine.dt, fine.steps, paths) if nb
               else BrownianDriver(driver.seed, fine.dt, 0))
    ru = run_trajectory(u0, base, paths=paths, driver=driver, ledger=False)
    rv = run_trajectory(v0, fine, paths=paths, driver=vdriver, ledger=False)
    errs = np.zeros((paths, len(ru.snapshots)))
    for m, ((tu, cu), (tv, cv)) in enumerate(zip(ru.snapshots, rv.snapshots)):
        ul, _ = scaling_transform(SpectralField(cfg.grid, cu), lam)
        diff = np.sqrt(np.sum(np.abs(cv - ul.coeffs) ** 2, axis=tuple(range(1, cv.ndim))))
        ref = np.sqrt(np.sum(np.abs(ul.coeffs) ** 2, axis=tuple(range(1, cv.ndim))))
        errs[:, m] = np.where(ref > 0, diff / np.where(ref > 0, ref, 1.0), diff)
    return ScalingReport(lam, ru.times, errs, float(np.max(errs)))


# -- small data ----------------------------------------------------------------------------

@dataclass
class SurvivalTable(_Report):
    levels: list
    survival: list
    stderr: list
    monotone: bool
    certificate: dict
    paths: int


def small_data_survival(u0: SpectralField, cfg: SolverConfig, levels, paths: int = 64) -> SurvivalTable:
    """Empirical ``P(sigma >= T)`` for data ``level * u0``, shared Brownian paths across
    levels; levels are reported in decreasing order and the survival must not drop
    (within two binomial standard errors) as the level decreases."""
    levels = sorted((float(x) for x in levels), reverse=True)
    driver = BrownianDriver(cfg.seed, cfg.dt, cfg.noise.n_modes)
    surv, se = [], []
    for L in levels:
        rec = run_trajectory(SpectralField(u0.grid, L * u0.coeffs), cfg, paths=paths,
                             driver=driver, ledger=False)
        s = float(np.mean(~rec.blown))
        surv.append(s)
        se.append(math.sqrt(s * (1.0 - s) / paths))
    mono = all(surv[i + 1] >= surv[i] - 2.0 * math.hypot(se[i], se[i + 1])
               for i in range(len(levels) - 1))
    return SurvivalTable(levels, surv, se, mono, cfg.nonlinearity.certificate(cfg.grid), paths)


# -- regularization ------------------------------------------------------------------------

@dataclass
class RegularizationTable(_Report):
    s_ladder: list
    q: float
    times: np.ndarray
    values: np.ndarray  # (len(s), P, m)
    note: str = "resolution-dependent observation on a fixed grid"


def regularization_monitor(rec: TrajectoryRecord, s_ladder, q: float = 2.0) -> RegularizationTable:
    """``||u(t)||_{H^{s,q}}`` at each stored snapshot and each ``s`` in the ladder."""
    if not rec.snapshots:
        raise ConfigurationError("regularization monitor needs snapshots (snapshot_every > 0)")
    times = np.array([t for t, _ in rec.snapshots])
    vals = np.zeros((len(s_ladder), rec.paths, len(times)))
    for m, (_, c) in enumerate(rec.snapshots):
        f = SpectralField(rec.grid, c)
        for i, s in enumerate(s_ladder):
            vals[i, :, m] = bessel_norm(f, s, q)
    return RegularizationTable(list(s_ladder), q, times, vals)


# -- Ito / Stratonovich ---------------------------------------------------------------------

@dataclass
class ItoStratonovichReport(_Report):
    modes: list
    mc_mean: np.ndarray
    exact: np.ndarray
    stderr: np.ndarray
    within_3se: bool
    discrepancy: list  # exact discrete expectation vs closed form at dt, dt/2
    halving_ratio: float
    halving_ok: bool


def ito_stratonovich_consistency(u0: SpectralField, vectors, nu: float = 1.0, T: float = 0.5,
                                 dt: float = 0.01, paths: int = 64, seed: int = 0) -> ItoStratonovichReport:
    """Linear Stratonovich transport with constant ``b``: the ensemble mean of each
    active mode must match ``exp(-k.(a + a_b)k T) u0_hat(k)`` within 3 standard errors,
    and the deterministic bias of the scheme must halve with ``dt``."""
    g = u0.grid
    nf = NoiseFamily.constant(vectors)
    a = ViscosityTensor.isotropic(nu, g.dim)
    cfg = SolverConfig(g, dt, T, mode="stratonovich", a=a, noise=nf, convection=False, seed=seed)
    abar = cfg.effective_viscosity.values
    c0 = u0.coeffs
    active = np.argwhere(np.max(np.abs(c0), axis=0) > 1e-12 * np.max(np.abs(c0)))
    modes = [tuple(int(x) for x in m) for m in active]
    kd = g.kd
    decay = np.exp(-T * np.einsum("i...,ij,j...->...", kd, abar, kd))
    exact_field = decay * c0

    def pick(arr):
        return np.array([arr[(Ellipsis, slice(None)) + m] for m in modes])  # (modes, ..., d)

    rec = run_trajectory(u0, cfg.with_(snapshot_every=cfg.steps), paths=paths, ledger=False)
    final = rec.snapshots[-1][1]  # (P, d, *shape)
    vals = np.stack([final[(slice(None), slice(None)) + m] for m in modes], axis=1)  # (P, M, d)
    mean = vals.mean(axis=0)
    se = np.sqrt(vals.real.var(axis=0, ddof=1) + vals.imag.var(axis=0, ddof=1)) / math.sqrt(paths)
    exact = np.stack([exact_field[(slice(None),) + m] for m in modes])
    within = bool(np.all(np.abs(mean - exact) <= 3.0 * se + 1e-14))
    disc = []
    for c in (cfg, cfg.with_(dt=dt / 2)):
        det = run_trajectory(u0, c.with_(snapshot_every=c.steps), paths=1,
                             driver=zero_increment_driver(c, 1), ledger=False)
        ff = det.snapshots[-1][1][0]
        disc.append(float(max(np.max(np.abs(ff[(slice(None),) + m] - exact_field[(slice(None),) + m]))
                              for m in modes)))
    ratio = disc[0] / disc[1] if disc[1] > 0 else float("inf")
    return ItoStratonovichReport(modes, mean, exact, se, within, disc, ratio, 1.4 <= ratio <= 2.6)


__all__ = [
    "EnergyLedger", "energy_audit", "energy_residual_order", "EnergyEstimateResult",
    "energy_lhs", "calibrate_energy_constant", "energy_estimate_check", "energy_estimate_harness",
    "coercivity_boundary_sweep", "SerrinAccumulator", "serrin_monitor", "SmrReport",
    "smr_estimate", "smr_closed_form", "smr_sweep", "band_limited_forcing", "ell2_bessel_norm",
    "ScalingReport", "scaling_check", "SurvivalTable", "small_data_survival",
    "RegularizationTable", "regularization_monitor", "ItoStratonovichReport",
    "ito_stratonovich_consistency", "zero_increment_driver", "LEDGER_TERMS",
]
