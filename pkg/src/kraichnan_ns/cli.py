"""Command line front end: ``kraichnan-ns <preset> [config.toml] [options]``.

Configuration is a TOML file with the sections below; every key is optional
and missing keys take the listed defaults.  Lengths are in units of the
``2*pi``-periodic torus, times in the solver's time unit.

[grid]          dim = 2, n = 32 (points per direction)
[time]          dt = 0.01, T = 1.0, mode = "ito" | "stratonovich",
                scheme = "semi-implicit" | "exponential"
[viscosity]     nu = 1.0 (isotropic) or matrix = d x d list
[noise]         kind = "none" | "kraichnan" | "constant"; n_fields, zeta, amplitude,
                seed (kraichnan); vectors (constant); h = N_b x d x d list;
                time_dependent, modulation_depth, modulation_freq
[nonlinearity]  kind = "zero" | "linear" | "quadratic"; gamma (scalar or per mode),
                u_cap; body_force = [{k = [..], re = [..], im = [..]}, ...]
[initial]       kind = "zero" | "taylor-green" | "rough"; amplitude, alpha, seed,
                normalize (scale the ensemble-mean energy to amplitude^2)
[parameters]    p, q, delta, kappa (kappa = "critical" uses kappa_c)
[serrin]        p0, q0, delta0, epsilon
[run]           paths, seed, blowup_factor, allow_degenerate, snapshot_every,
                convection, norms = [["bessel", s, q], ["besov", s, q, p], ...]
[harness]       amplitudes, levels, lam, tolerance, samples, paths_per_sample, band,
                s_ladder

Outputs in ``--out``: ``manifest.json`` (spec echo, derived constants, config
hash, version, noise manifest), ``series.tsv`` and ``report.json``; field
snapshots of path 0 as ``snap_XXXXX.knss`` when ``--snapshot-every`` > 0.
Exit codes: 0 pass/complete, 2 validation error, 3 harness failure.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .diagnostics import (_jsonable, energy_estimate_harness, scaling_check, serrin_monitor,
                          small_data_survival, smr_estimate)
from .errors import ConfigurationError
from .noise import (NoiseFamily, NonlinearityPreset, ViscosityTensor, ito_correction,
                    synthesize_kraichnan)
from .solver import SolverConfig, rough_initial_data, run_trajectory, taylor_green
from .spaces import ParameterTuple, kappa_critical, serrin_exponents, validate_parameters
from .spectral import SpectralField, TorusGrid, energy, write_snapshot

PRESETS = ("simulate", "energy-check", "scaling-check", "smr-estimate", "serrin-monitor",
           "small-data", "exponents", "noise-info")

DEFAULTS = {
    "grid": {"dim": 2, "n": 32},
    "time": {"dt": 0.01, "T": 1.0, "mode": "ito", "scheme": "semi-implicit"},
    "viscosity": {"nu": 1.0, "matrix": None},
    "noise": {"kind": "none", "n_fields": 4, "zeta": 1.5, "amplitude": 0.5, "seed": 0,
              "vectors": None, "h": None, "time_dependent": False,
              "modulation_depth": 0.0, "modulation_freq": 1.0},
    "nonlinearity": {"kind": "zero", "gamma": 0.0, "u_cap": math.inf, "body_force": []},
    "initial": {"kind": "zero", "amplitude": 1.0, "alpha": 3.0, "seed": 0, "normalize": False},
    "parameters": {"p": 2.0, "q": 2.0, "delta": 0.0, "kappa": 0.0},
    "serrin": {"p0": 2.0, "q0": 2.0, "delta0": 0.0, "epsilon": 0.1},
    "run": {"paths": 4, "seed": 0, "blowup_factor": 1e6, "allow_degenerate": False,
            "snapshot_every": 0, "convection": True, "norms": []},
    "harness": {"amplitudes": [1.0, 2.0, 4.0], "levels": [4.0, 1.0, 0.25], "lam": 4,
                "tolerance": 5e-3, "samples": 16, "paths_per_sample": 4, "band": 4,
                "s_ladder": [0.0, 1.0, 2.0]},
}

EXIT_OK, EXIT_INVALID, EXIT_FAIL = 0, 2, 3


class SpecError(ConfigurationError):
    """Invalid or unreadable experiment specification."""


@dataclass
class ExperimentSpec:
    preset: str
    config: dict
    out: Path
    solver: SolverConfig | None
    params: ParameterTuple
    derived: dict
    noise_manifest: dict | None = None
    allow_inadmissible: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def paths(self) -> int:
        return int(self.config["run"]["paths"])

    @property
    def seed(self) -> int:
        return int(self.config["run"]["seed"])

    def config_hash(self) -> str:
        blob = json.dumps({"preset": self.preset, "config": _jsonable(self.config)},
                          sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _merge(raw: dict) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    for sec, body in raw.items():
        if sec not in DEFAULTS:
            raise SpecError(f"unknown section [{sec}]")
        if not isinstance(body, dict):
            raise SpecError(f"[{sec}] must be a table")
        for key, val in body.items():
            if key not in DEFAULTS[sec]:
                raise SpecError(f"unknown key '{key}' in [{sec}]")
            cfg[sec][key] = val
    return cfg


def _num(cfg, sec, key, kind=float):
    val = cfg[sec][key]
    try:
        if kind is int:
            if isinstance(val, bool) or int(val) != val:
                raise ValueError
            return int(val)
        return kind(val)
    except (TypeError, ValueError):
        raise SpecError(f"[{sec}] {key} = {val!r} is not a valid {kind.__name__}") from None


def _build_noise(cfg, grid: TorusGrid) -> NoiseFamily:
    sec = cfg["noise"]
    kind = sec["kind"]
    d = grid.dim
    extra = {}
    if sec["time_dependent"]:
        extra = {"time_dependent": True,
                 "modulation": (_num(cfg, "noise", "modulation_depth"),
                                _num(cfg, "noise", "modulation_freq"))}
    if kind == "none":
        nf = NoiseFamily.empty(d)
    elif kind == "kraichnan":
        nf = synthesize_kraichnan(d, _num(cfg, "noise", "n_fields", int), _num(cfg, "noise", "zeta"),
                                  _num(cfg, "noise", "amplitude"), _num(cfg, "noise", "seed", int),
                                  n=grid.n)
    elif kind == "constant":
        if sec["vectors"] is None:
            raise SpecError("[noise] kind = 'constant' needs 'vectors'")
        nf = NoiseFamily.constant(sec["vectors"])
    else:
        raise SpecError(f"[noise] kind = {kind!r} is not one of none, kraichnan, constant")
    if sec["h"] is not None or extra:
        nf = NoiseFamily(nf.wavevectors, nf.alphas, nf.zeta, nf.amplitude, nf.seed,
                         h=sec["h"], **extra)
    return nf


def _build_nonlinearity(cfg, n_modes: int) -> NonlinearityPreset:
    sec = cfg["nonlinearity"]
    gamma = np.broadcast_to(np.asarray(sec["gamma"], dtype=float), (n_modes,)).copy() \
        if np.ndim(sec["gamma"]) == 0 else np.asarray(sec["gamma"], dtype=float)
    body = []
    for item in sec["body_force"]:
        try:
            alpha = np.asarray(item["re"], dtype=float) + 1j * np.asarray(item.get("im", 0.0))
            body.append((tuple(int(x) for x in item["k"]), tuple(alpha)))
        except (KeyError, TypeError) as exc:
            raise SpecError(f"[nonlinearity] body_force entry {item!r}: {exc}") from None
    return NonlinearityPreset(sec["kind"], gamma=gamma if sec["kind"] != "zero" else None,
                              u_cap=_num(cfg, "nonlinearity", "u_cap"), body_force=tuple(body))


def _build_params(cfg, d: int) -> ParameterTuple:
    p, q, delta = (_num(cfg, "parameters", k) for k in ("p", "q", "delta"))
    kap = cfg["parameters"]["kappa"]
    kappa = kappa_critical(d, p, q, delta).value if kap == "critical" else _num(cfg, "parameters", "kappa")
    return ParameterTuple(d, p, q, delta, kappa)


def initial_data(cfg, grid: TorusGrid, paths: int) -> SpectralField:
    sec = cfg["initial"]
    amp = _num(cfg, "initial", "amplitude")
    kind = sec["kind"]
    if kind == "zero":
        return SpectralField(grid, np.zeros((grid.dim,) + grid.shape, dtype=complex), divfree=True)
    if kind == "taylor-green":
        return taylor_green(grid, amp)
    if kind == "rough":
        u = rough_initial_data(grid, _num(cfg, "initial", "alpha"), 1.0,
                               _num(cfg, "initial", "seed", int), paths=paths)
        if sec["normalize"]:
            u = SpectralField(grid, u.coeffs / math.sqrt(float(np.mean(energy(grid, u.coeffs)))))
        return SpectralField(grid, amp * u.coeffs, divfree=True)
    raise SpecError(f"[initial] kind = {kind!r} is not one of zero, taylor-green, rough")


def build_spec(raw: dict, preset: str, out: str | Path = "out", seed: int | None = None,
               paths: int | None = None, allow_inadmissible: bool = False,
               snapshot_every: int | None = None) -> ExperimentSpec:
    """Validate a parsed configuration and compute every derived quantity."""
    if preset not in PRESETS:
        raise SpecError(f"unknown preset {preset!r}")
    cfg = _merge(raw)
    if seed is not None:
        cfg["run"]["seed"] = seed
    if paths is not None:
        cfg["run"]["paths"] = paths
    if snapshot_every is not None:
        cfg["run"]["snapshot_every"] = snapshot_every
    try:
        grid = TorusGrid(_num(cfg, "grid", "dim", int), _num(cfg, "grid", "n", int))
        params = _build_params(cfg, grid.dim)
        report = validate_parameters(params)
        if not report.admissible and not allow_inadmissible:
            raise SpecError("inadmissible parameters (p, q, delta, kappa) = "
                            f"({params.p:g}, {params.q:g}, {params.delta:g}, {params.kappa:g}): "
                            + "; ".join(report.reasons))
        pair = serrin_exponents(grid.dim, _num(cfg, "serrin", "p0"), _num(cfg, "serrin", "q0"),
                                _num(cfg, "serrin", "delta0"))
        derived = {"parameters": report.as_dict(), "serrin": pair.as_dict(),
                   "kappa_c": params.kappa_c}
        if preset == "exponents":
            return ExperimentSpec(preset, cfg, Path(out), None, params, derived,
                                  allow_inadmissible=allow_inadmissible)
        nf = _build_noise(cfg, grid)
        vis = cfg["viscosity"]
        a = (ViscosityTensor(np.asarray(vis["matrix"], dtype=float)) if vis["matrix"] is not None
             else ViscosityTensor.isotropic(_num(cfg, "viscosity", "nu"), grid.dim))
        nl = _build_nonlinearity(cfg, nf.n_modes)
        norms = tuple(tuple(x) for x in cfg["run"]["norms"])
        solver = SolverConfig(
            grid, _num(cfg, "time", "dt"), _num(cfg, "time", "T"), mode=cfg["time"]["mode"],
            scheme=cfg["time"]["scheme"], a=a, noise=nf, nonlinearity=nl,
            convection=bool(cfg["run"]["convection"]),
            blowup_factor=_num(cfg, "run", "blowup_factor"), seed=_num(cfg, "run", "seed", int),
            allow_degenerate=bool(cfg["run"]["allow_degenerate"]), norms=norms,
            snapshot_every=_num(cfg, "run", "snapshot_every", int))
    except SpecError:
        raise
    except ConfigurationError as exc:
        raise SpecError(str(exc)) from exc
    derived.update({"nu_hat": solver.nu_hat, "M": nf.sup_l2_bound(grid),
                    "steps": solver.steps, "solver_hash": solver.config_hash(),
                    "growth_certificate": nl.certificate(grid)})
    return ExperimentSpec(preset, cfg, Path(out), solver, params, derived, nf.manifest(grid),
                          allow_inadmissible)


def load_spec(path: str | Path | None, preset: str, **kw) -> ExperimentSpec:
    """Read a TOML file (or use defaults when ``path`` is None) and validate it."""
    raw = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError:
            raise SpecError(f"{path}: no such file") from None
        except tomllib.TOMLDecodeError as exc:
            raise SpecError(f"{path}: parse error: {exc}") from None
    return build_spec(raw, preset, **kw)


# -- running ------------------------------------------------------------------------------

def _write_series(path: Path, columns: list[str], rows: np.ndarray) -> None:
    lines = ["\t".join(columns)]
    for row in np.atleast_2d(rows):
        lines.append("\t".join("%.17g" % float(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def _manifest(spec: ExperimentSpec) -> dict:
    return _jsonable({
        "software": {"name": "kraichnan_ns", "version": __version__},
        "preset": spec.preset, "config_hash": spec.config_hash(), "spec": spec.config,
        "derived": spec.derived, "noise": spec.noise_manifest,
        "allow_inadmissible": spec.allow_inadmissible,
    })


def _run_preset(spec: ExperimentSpec):
    """Return ``(columns, rows, report, passed, snapshots)``."""
    cfg, h = spec.solver, spec.config["harness"]
    if spec.preset == "exponents":
        d = spec.derived
        cols = ["d", "p", "q", "delta", "kappa", "kappa_c", "trace_smoothness", "admissible",
                "critical", "p0", "q0", "delta0", "gamma0", "classic", "serrin_admissible"]
        pr, sp = spec.params, d["serrin"]
        row = [pr.d, pr.p, pr.q, pr.delta, pr.kappa, pr.kappa_c, pr.trace_smoothness,
               d["parameters"]["admissible"], d["parameters"]["critical"], sp["p0"], sp["q0"],
               sp["delta0"], sp["gamma0"], sp["classic"], sp["admissible"]]
        return cols, np.array([row], dtype=float), d, True, []
    if spec.preset == "noise-info":
        ab = ito_correction(cfg.noise, cfg.grid) if not cfg.noise.time_dependent else None
        rep = {"noise": spec.noise_manifest, "nu_hat": cfg.nu_hat,
               "a_b_max_eigenvalue": None if ab is None else ab.max_eigenvalue()}
        nf = cfg.noise
        rows = np.array([[i, *nf.wavevectors[i], *nf.alphas[i].real, *nf.alphas[i].imag]
                         for i in range(nf.n_modes)], dtype=float).reshape(nf.n_modes, -1)
        d = cfg.grid.dim
        cols = (["mode"] + [f"k{j}" for j in range(d)] + [f"re{j}" for j in range(d)]
                + [f"im{j}" for j in range(d)])
        return cols, rows, rep, True, []
    u0 = initial_data(spec.config, cfg.grid, spec.paths)
    if spec.preset in ("simulate", "serrin-monitor"):
        rec = run_trajectory(u0, cfg, paths=None if u0.coeffs.ndim > cfg.grid.dim + 1 else spec.paths)
        cols, rows = rec.series_table()
        rep = {"survival": float(np.mean(~rec.blown)), "sigma": rec.sigma,
               "u0_projected": rec.u0_projected, "trajectory_hash": rec.config_hash}
        passed = True
        if spec.preset == "serrin-monitor":
            pair = serrin_exponents(cfg.grid.dim, spec.derived["serrin"]["p0"],
                                    spec.derived["serrin"]["q0"], spec.derived["serrin"]["delta0"])
            acc = serrin_monitor(rec, pair, float(spec.config["serrin"]["epsilon"]))
            rep.update(acc.summary())
            cols = cols + ["serrin_running"]
            rows = np.concatenate([rows, acc.running.reshape(-1, 1)], axis=1)
            passed = acc.violations == 0
        snaps = [(t, c[0]) for t, c in rec.snapshots]
        return cols, rows, rep, passed, snaps
    if spec.preset == "energy-check":
        r = energy_estimate_harness(u0, cfg, amplitudes=tuple(h["amplitudes"]), paths=spec.paths)
        rows = np.array([[a, x.lhs, x.e0, x.rhs if x.rhs is not None else np.nan,
                          float(bool(x.passed))] for a, x in zip(r.amplitudes, r.results)])
        applicable = all(x.applicable for x in r.results)
        return (["amplitude", "lhs", "E_u0_sq", "rhs", "pass"], rows, r.as_dict(),
                r.passed or not applicable, [])
    if spec.preset == "scaling-check":
        if u0.coeffs.ndim > cfg.grid.dim + 1:
            u0 = SpectralField(cfg.grid, u0.coeffs[0], divfree=True)
        r = scaling_check(u0, cfg, float(h["lam"]), paths=spec.paths)
        rows = np.column_stack([r.times, r.rel_error.T])
        cols = ["time"] + [f"rel_error_path{p}" for p in range(spec.paths)]
        rep = {"lam": r.lam, "max_error": r.max_error, "tolerance": h["tolerance"]}
        return cols, rows, rep, r.max_error <= float(h["tolerance"]), []
    if spec.preset == "smr-estimate":
        pr = spec.params
        # the random (f, g) draws replace any configured nonlinearity
        r = smr_estimate(cfg.with_(nonlinearity=NonlinearityPreset()),
                         samples=int(h["samples"]), paths_per_sample=int(h["paths_per_sample"]),
                         p=pr.p, q=pr.q, delta=pr.delta, kappa=pr.kappa, seed=spec.seed,
                         band=int(h["band"]))
        names = sorted(r.ratios)
        rows = np.column_stack([np.arange(r.samples), r.J] + [r.ratios[k] for k in names])
        rep = {"sup": r.sup, "quantiles": r.quantiles, "samples": r.samples}
        ok = all(np.all(np.isfinite(v)) for v in r.ratios.values())
        return ["sample", "J"] + names, rows, rep, ok, []
    if spec.preset == "small-data":
        r = small_data_survival(u0, cfg, h["levels"], paths=spec.paths)
        rows = np.column_stack([r.levels, r.survival, r.stderr])
        return ["level", "survival", "stderr"], rows, r.as_dict(), r.monotone, []
    raise SpecError(f"unknown preset {spec.preset!r}")


def run_experiment(spec: ExperimentSpec) -> int:
    """Run the preset and write its artifacts; returns the exit status."""
    spec.out.mkdir(parents=True, exist_ok=True)
    cols, rows, report, passed, snaps = _run_preset(spec)
    manifest = _manifest(spec)
    (spec.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    _write_series(spec.out / "series.tsv", cols, rows)
    for i, (t, c) in enumerate(snaps):
        write_snapshot(spec.out / f"snap_{i:05d}.knss", SpectralField(spec.solver.grid, c))
    full = {"preset": spec.preset, "config_hash": spec.config_hash(), "passed": bool(passed),
            "result": _jsonable(report)}
    (spec.out / "report.json").write_text(json.dumps(full, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kraichnan-ns",
                                 description="Stochastic Navier-Stokes with transport noise: "
                                             "simulations and verification harnesses")
    ap.add_argument("preset", choices=PRESETS)
    ap.add_argument("config", nargs="?", default=None, help="TOML configuration file")
    ap.add_argument("--seed", type=int, default=None, help="override [run] seed")
    ap.add_argument("--paths", type=int, default=None, help="override [run] paths")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--allow-inadmissible", action="store_true",
                    help="run even if (p, q, delta, kappa) violates the admissibility conditions")
    ap.add_argument("--snapshot-every", type=int, default=None,
                    help="store a field snapshot every N steps")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_spec(args.config, args.preset, out=args.out, seed=args.seed, paths=args.paths,
                         allow_inadmissible=args.allow_inadmissible,
                         snapshot_every=args.snapshot_every)
    except ConfigurationError as exc:
        print(f"kraichnan-ns: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(json.dumps(_jsonable({"preset": spec.preset, "config_hash": spec.config_hash(),
                                "derived": spec.derived}), sort_keys=True))
    try:
        status = run_experiment(spec)
    except ConfigurationError as exc:
        print(f"kraichnan-ns: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"kraichnan-ns: {spec.preset} {'passed' if status == EXIT_OK else 'FAILED'}; "
          f"artifacts in {spec.out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
