"""Command-line entry point ``fnls``.

Subcommands::

    fnls simulate      single path: mass CSV, ledger CSV, snapshots
    fnls ensemble      many paths: expected-mass law and moment bounds
    fnls admissible    Strichartz pair and parameter regime for (n, alpha, sigma)
    fnls verify-mass   coupled step-refinement study of the Ito mass ledger
    fnls absorb-probe  pullback absorption into the absorbing ball
    fnls strichartz    mixed space-time norms of a trajectory and its free flow

Exit codes: 0 success, 2 configuration error, 3 blow-up, 4 a checked
bound or identity failed. Every file a command writes is listed in
``manifest.json``, which is written last by atomic rename.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import spectral as sp
from .config import ConfigError, RunConfig, fmt_float, load_config, schema_text
from .diagnostics import (AbsorbingProbe, InitialFamily, expected_mass_check, gauge_contribution,
                          ledger_convergence, linear_entry_time, mass_ledger, moment_bound_check,
                          pullback_absorption_probe, strichartz_norm, strichartz_ratio)
from .diagnostics.strichartz import CoarseScheduleError
from .dynamics import (ForcingSpec, ModelParams, RegimeError, admissible_pair, check_assumptions,
                       excluded_endpoint, radiality_deviation, validate_regime)
from .integrators import BlowupDetected, BlowupGuard, run_ensemble, run_path, snapshot_schedule
from .noise import make_covariance

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_DIAGNOSTIC = 0, 2, 3, 4
MANIFEST = "manifest.json"
COMPLETION_WARN = 0.95


# ---------------------------------------------------------------------------
# model assembly


class Setup:
    """Grid, operators, noise, parameters and initial data built from a config."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.grid = sp.make_grid(cfg["model.n"], cfg["grid.points"], cfg["grid.length"])
        self.cache = sp.make_multiplier(self.grid, cfg["model.alpha"])
        self.cov = make_covariance(self.grid, cfg["noise.scale"], cfg["noise.decay"],
                                   cfg["noise.cutoff"], cfg["noise.include_constant"])
        self.params = ModelParams(cfg["model.n"], cfg["model.alpha"], cfg["model.sigma"],
                                  cfg["model.gamma"], self._forcing())
        self.u0 = self._initial()
        self.guard = BlowupGuard(cfg["guard.mass_threshold"], cfg["guard.relative_factor"])
        self.scheme = cfg["run.scheme"]
        self.t_span = (cfg["run.t0"], cfg["run.t1"])
        self.dt = cfg["run.dt"]

    def _profile(self, path: str) -> np.ndarray:
        f = sp.read_snapshot(path)
        if f.grid != self.grid:
            raise ConfigError(f"profile {path} lives on a different grid")
        return f.to_physical().values

    def _forcing(self) -> ForcingSpec:
        cfg = self.cfg
        family, beta = cfg["forcing.family"], cfg["forcing.beta"]
        if family == "zero":
            return ForcingSpec.zero()
        if cfg["forcing.c_profile"]:
            c = self._profile(cfg["forcing.c_profile"]).real
        elif cfg["forcing.c"] is not None:
            c = cfg["forcing.c"]
        else:
            c = beta if family == "linear_phase" else beta / 2
        if cfg["forcing.g_profile"]:
            g = self._profile(cfg["forcing.g_profile"])
        else:
            g = np.full(self.grid.shape, cfg["forcing.g_amplitude"], dtype=np.complex128)
        if family == "linear_phase":
            return ForcingSpec.linear_phase(beta, c)
        if family == "additive":
            return ForcingSpec.additive(beta, g, cfg["forcing.g_rate"])
        return ForcingSpec.combined(beta, c, g, cfg["forcing.g_rate"])

    def _initial(self) -> sp.SpectralField:
        cfg = self.cfg
        kind = cfg["init.profile"]
        if kind == "gaussian":
            u = sp.gaussian(self.grid, cfg["init.amplitude"], cfg["init.width"])
        elif kind == "plane_wave":
            mode = cfg["init.mode"]
            if len(mode) != self.grid.n:
                raise ConfigError(f"init.mode needs {self.grid.n} integers")
            u = sp.plane_wave(self.grid, mode, cfg["init.amplitude"])
        elif kind == "zero":
            u = sp.zeros(self.grid)
        else:
            u = sp.SpectralField(self.grid, self._profile(cfg["init.file"]))
        if cfg["init.mass"] is not None:
            norm = sp.l2_norm(u)
            if norm == 0:
                raise ConfigError("init.mass cannot rescale a zero profile")
            u = u * (math.sqrt(cfg["init.mass"]) / norm)
        return u

    @property
    def linear_rate(self) -> float | None:
        """``c`` when the forcing is ``i c u`` with constant ``c``."""
        return self.params.forcing.uniform_phase_rate

    @property
    def plateau(self) -> float:
        """Stationary mean mass of the linear model, ``||Phi||^2 / (2 (gamma - c))``."""
        c = self.linear_rate if self.linear_rate is not None else self.params.beta
        return self.cov.hs_norm_squared / (2 * (self.params.gamma - c))


# ---------------------------------------------------------------------------
# output


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return fmt_float(float(x))
    return str(x)


class Output:
    """Tracks every file written into the output directory."""

    def __init__(self, directory: Path, cfg: RunConfig, command: str):
        self.dir = Path(directory)
        self.cfg = cfg
        self.command = command
        self.files: list[str] = []
        self.records: list[dict] = []
        self.warnings: list[str] = []
        self.start = time.perf_counter()
        self._prepare()

    def _prepare(self):
        self.dir.mkdir(parents=True, exist_ok=True)
        old = self.dir / MANIFEST
        if old.exists():
            try:
                listed = json.loads(old.read_text())["files"]
            except (ValueError, KeyError) as exc:
                raise ConfigError(f"unreadable manifest in {self.dir}: {exc}") from exc
            for entry in listed:
                (self.dir / entry["path"]).unlink(missing_ok=True)
            old.unlink()
        leftovers = sorted(p.name for p in self.dir.iterdir())
        if leftovers:
            raise ConfigError(f"output directory {self.dir} holds files not written by fnls: "
                              + ", ".join(leftovers[:5]))

    def _add(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name

    def write_csv(self, name: str, header, rows):
        with open(self._add(name), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])

    def write_snapshot(self, name: str, field: sp.SpectralField):
        sp.write_snapshot(self._add(name), field)

    def write_text(self, name: str, text: str):
        self._add(name).write_text(text, encoding="utf-8")

    def record(self, kind: str, **payload):
        self.records.append({"record": kind, "config_hash": self.cfg.hash, **payload})

    def warn(self, message: str):
        self.warnings.append(message)
        print(f"warning: {message}", file=sys.stderr)
        self.record("warning", message=message)

    def finish(self, exit_code: int, path_status: dict | None = None) -> int:
        with open(self._add("report.jsonl"), "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(_jsonable(rec), sort_keys=True) + "\n")
        entries = []
        for name in self.files:
            data = (self.dir / name).read_bytes()
            entries.append({"path": name, "bytes": len(data),
                            "sha256": hashlib.sha256(data).hexdigest()})
        manifest = {
            "artifact": "fnls",
            "version": __version__,
            "command": self.command,
            "config_hash": self.cfg.hash,
            "seed": self.cfg.seed,
            "exit_code": exit_code,
            "paths": path_status or {},
            "files": entries,
            "warnings": self.warnings,
            "wall_clock_seconds": time.perf_counter() - self.start,
        }
        tmp = self.dir / (MANIFEST + ".tmp")
        tmp.write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
        os.replace(tmp, self.dir / MANIFEST)
        return exit_code


def _open_output(cfg: RunConfig, command: str) -> Output:
    out = Output(cfg.output_dir, cfg, command)
    out.write_text("config.txt", cfg.to_text())
    out.record("run", command=command, version=__version__, seed=cfg.seed)
    return out


def _regime_record(out: Output, setup: Setup):
    reg = setup.params.regime
    out.record("regime", checks=reg.checks, messages=reg.messages,
               well_posed=reg.well_posed, attractor_enabled=reg.attractor_enabled)
    if not reg.well_posed:
        out.warn("parameters outside the global well-posedness regime: " + "; ".join(reg.messages))
    # the local theory assumes radial data on the whole space; both gaps are measured, not enforced
    out.record("initial_data", mass=sp.l2_norm(setup.u0) ** 2,
               radiality_deviation=radiality_deviation(setup.u0),
               boundary_mass_fraction=sp.boundary_mass_fraction(setup.u0))


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: RunConfig) -> int:
    setup = Setup(cfg)
    out = _open_output(cfg, "simulate")
    _regime_record(out, setup)
    t0, t1 = setup.t_span
    sched = snapshot_schedule(t0, t1, cfg["run.snapshots"], cfg["run.snapshot_kind"])
    try:
        traj = run_path(setup.u0, setup.t_span, setup.dt, setup.params, setup.cache, setup.cov,
                        setup.scheme, cfg.seed, 0, setup.guard, snapshot_times=sched,
                        record_gauge=True, raise_on_blowup=False)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out.write_csv("mass.csv", ["time", "mass"], zip(traj.times, traj.mass))
    kept = [(t, snap) for t, snap in zip(traj.snapshot_times, traj.snapshots)
            if traj.t_stop is None or t < traj.t_stop]
    for i, (t, snap) in enumerate(kept):
        out.write_snapshot(f"snapshot_{i:05d}.bin", snap)
        out.record("snapshot", index=i, time=t, file=f"snapshot_{i:05d}.bin")
    status = {"completed": int(traj.status == "ok"), "total": 1, "status": [traj.status]}
    if traj.status != "ok":
        out.record("blowup", t_stop=traj.t_stop, max_mass=float(np.nanmax(traj.mass)))
        print(f"blow-up at t = {fmt_float(traj.t_stop)}")
        return out.finish(EXIT_BLOWUP, status)
    bounds = [check_assumptions(setup.params.forcing, [snap], t=t) for t, snap in kept]
    growth = min(b.margins["growth"] for b in bounds) if bounds else None
    forcing_ok = all(b.passed for b in bounds)
    out.record("forcing_bounds", snapshots=len(bounds), passed=forcing_ok, worst_growth_margin=growth)
    if not forcing_ok:
        out.warn("forcing exceeds its declared bounds on at least one snapshot")
    led = mass_ledger(traj, cfg["diag.ledger_m"])
    out.write_csv("ledger.csv",
                  ["time", "lhs", "rhs", "residual", "damping", "forcing", "martingale",
                   "ito_correction", "quadratic"],
                  zip(led.times, led.lhs, led.rhs, led.residual, led.damping, led.forcing,
                      led.martingale, led.ito_correction, led.quadratic))
    gauge = gauge_contribution(traj)
    out.record("ledger", m=led.m, relative_max=led.relative_max, gauge_contribution=gauge)
    print(f"final mass {fmt_float(traj.mass[-1])}  ledger residual {fmt_float(led.relative_max)}"
          f"  gauge {fmt_float(gauge)}")
    return out.finish(EXIT_OK, status)


def _output_indices(n_steps: int, every: int) -> np.ndarray:
    idx = np.arange(0, n_steps + 1, every)
    return idx if idx[-1] == n_steps else np.append(idx, n_steps)


def cmd_ensemble(cfg: RunConfig) -> int:
    setup = Setup(cfg)
    out = _open_output(cfg, "ensemble")
    _regime_record(out, setup)
    general = setup.linear_rate is None
    try:
        run = run_ensemble(setup.u0, setup.t_span, setup.dt, setup.params, setup.cache, setup.cov,
                           setup.scheme, cfg.seed, cfg.paths, guard=setup.guard,
                           record_forcing=general, chunk_size=cfg["run.chunk_size"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    ok = run.completed
    status = {"completed": int(ok.sum()), "total": cfg.paths,
              "blown_path_indices": run.path_indices[~ok].tolist()}
    out.write_csv("paths.csv", ["path_index", "status", "t_stop", "final_mass"],
                  zip(run.path_indices, run.status, run.t_stop, run.mass[:, -1]))
    if not ok.any():
        out.record("blowup", blown=int((~ok).sum()))
        print("every path blew up")
        return out.finish(EXIT_BLOWUP, status)
    if ok.mean() < COMPLETION_WARN:
        out.warn(f"only {int(ok.sum())} of {cfg.paths} paths completed; reducing over those")
    k = cfg["diag.k"]
    idx = _output_indices(len(run.times) - 1, cfg["run.output_every"])
    times = run.times[idx]
    exit_code = EXIT_OK
    rep = expected_mass_check(run, times, k=k, min_paths=1)
    band = rep.stats.band_enabled
    passed = rep.passed if band else None
    out.record("expected_mass", mode=rep.mode, paths=rep.stats.n_paths, band_enabled=band,
               passed=passed, max_z=rep.max_z if band else None,
               hs_norm_squared=setup.cov.hs_norm_squared)
    se = rep.stats.se
    out.write_csv("ensemble_mass.csv",
                  ["time", "mean", "se", "lo", "hi", "reference"] if rep.mode == "closed_form"
                  else ["time", "mean_residual", "se", "lo", "hi", "reference"],
                  zip(times, rep.stats.mean, se, rep.stats.lo, rep.stats.hi, rep.reference))
    if passed is False:
        exit_code = EXIT_DIAGNOSTIC
    print(f"expected mass ({rep.mode}): {'disabled band' if not band else ('PASS' if passed else 'FAIL')}")
    if setup.params.regime.checks["damping"]:
        rows = []
        for m in cfg["diag.moments"]:
            mb = moment_bound_check(run, m, times=times, k=k)
            mpass = mb.passed if band else None
            out.record("moment_bound", m=m, passed=mpass, min_margin=float(mb.margin.min()),
                       fitted_rate=mb.fitted_rate, predicted_rate=mb.predicted_rate,
                       initial_term="exp(-(gamma-beta) m t) E||u0||^(2m)")
            rows += [(m, t, e, s, b) for t, e, s, b in zip(times, mb.stats.mean, mb.stats.se, mb.bound)]
            if mpass is False:
                exit_code = EXIT_DIAGNOSTIC
            print(f"moment m={m}: {'disabled band' if not band else ('PASS' if mpass else 'FAIL')}")
        out.write_csv("moments.csv", ["m", "time", "mean", "se", "bound"], rows)
    else:
        out.record("moment_bound", disabled=True, reason="gamma <= beta")
        out.record("absorption", disabled=True, reason="gamma <= beta")
        print("moment bounds and absorption disabled: gamma <= beta")
    return out.finish(exit_code, status)


def cmd_admissible(n: int, alpha: float, sigma: float) -> int:
    reg = validate_regime(n, alpha, sigma, 1.0, 0.0)
    try:
        pair = admissible_pair(n, alpha, sigma)
    except RegimeError:
        pair = None
    if pair is None or not reg.well_posed:
        head = f"r={fmt_float(pair.r)} p={fmt_float(pair.p)} " if pair is not None else ""
        print(f"{head}regime=FAIL: " + "; ".join(reg.messages or ["no admissible pair"]))
        return EXIT_CONFIG
    identity_ok = pair.identity_residual <= 1e-12
    endpoint_ok = not pair.endpoint_flag and (pair.r, pair.p) != excluded_endpoint(n)
    print(f"r={fmt_float(pair.r)} p={fmt_float(pair.p)} "
          f"identity={'OK' if identity_ok else 'FAIL'} regime=OK"
          + ("" if endpoint_ok else " endpoint=EXCLUDED"))
    return EXIT_OK if identity_ok and endpoint_ok else EXIT_DIAGNOSTIC


def cmd_verify_mass(cfg: RunConfig) -> int:
    setup = Setup(cfg)
    out = _open_output(cfg, "verify-mass")
    _regime_record(out, setup)
    try:
        study = ledger_convergence(setup.u0, setup.t_span, cfg["diag.refinements"], setup.params,
                                   setup.cache, setup.cov, setup.scheme, cfg.seed, 0,
                                   cfg["diag.ledger_m"], setup.guard)
    except BlowupDetected as exc:
        out.record("blowup", t_stop=exc.t_stop, mass=exc.mass)
        print(str(exc))
        return out.finish(EXIT_BLOWUP, {"completed": 0, "total": 1})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out.write_csv("verify_mass.csv", ["dt", "relative_residual"], zip(study.dts, study.residuals))
    passed = study.passed(cfg["diag.min_order"])
    out.record("ledger_convergence", m=cfg["diag.ledger_m"], monotone=study.monotone,
               pair_orders=study.pair_orders, fitted_order=study.fitted_order, passed=passed)
    for dt, r in zip(study.dts, study.residuals):
        print(f"dt={fmt_float(dt)} residual={fmt_float(r)}")
    print("orders " + " ".join(fmt_float(o) for o in study.pair_orders)
          + f" fitted={fmt_float(study.fitted_order)} {'PASS' if passed else 'FAIL'}")
    return out.finish(EXIT_OK if passed else EXIT_DIAGNOSTIC, {"completed": 1, "total": 1})


def cmd_absorb_probe(cfg: RunConfig) -> int:
    setup = Setup(cfg)
    reg = setup.params.regime
    if not reg.attractor_enabled:
        raise ConfigError("absorption probe disabled: " + "; ".join(reg.messages))
    out = _open_output(cfg, "absorb-probe")
    _regime_record(out, setup)
    step = cfg["probe.t_step"]
    t_grid = step * np.arange(int(round(cfg["probe.t_max"] / step)) + 1)
    mass0 = cfg["probe.mass_factor"] * setup.plateau
    if cfg["probe.family"] == "constant":
        fam = InitialFamily.constant("constant", setup.u0, mass0)
    else:
        fam = InitialFamily.growing_into_past("growing", setup.u0, mass0, cfg["probe.family_rate"])
    probe = AbsorbingProbe(cfg["probe.rho"], list(cfg["probe.varrho"]), list(t_grid), [fam])
    try:
        cells = pullback_absorption_probe(probe, setup.params, setup.cache, setup.cov, setup.dt,
                                          cfg.paths, setup.scheme, cfg.seed, guard=setup.guard,
                                          k=cfg["diag.k"], chunk_size=cfg["run.chunk_size"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    exit_code = EXIT_OK
    linear = setup.params.sigma == 0 and setup.linear_rate is not None and cfg["probe.rho"] == 2
    rows = []
    for c in cells:
        rows += [(c.varrho, c.family, t, e, s, c.radius) for t, e, s in zip(c.t_grid, c.estimate, c.se)]
        rec = dict(varrho=c.varrho, family=c.family, radius=c.radius, entry_time=c.entry_time,
                   monotone_after_entry=c.monotone_after_entry, blown_paths=c.blown_paths,
                   aborted=c.aborted)
        if c.aborted and exit_code == EXIT_OK:
            exit_code = EXIT_BLOWUP
        if not c.monotone_after_entry:
            exit_code = EXIT_DIAGNOSTIC
        if linear and not c.aborted and not fam.start_dependent:
            t_star = linear_entry_time(mass0, setup.cov.hs_norm_squared, setup.params.gamma,
                                       c.radius, setup.linear_rate)
            within = c.entry_time is not None and abs(c.entry_time - t_star) <= 2 * step + 1e-12
            rec.update(analytic_entry_time=t_star, entry_within_two_cells=within)
            if math.isfinite(t_star) and t_star <= t_grid[-1] and not within:
                exit_code = EXIT_DIAGNOSTIC
        out.record("absorption", **rec)
        entry = "not absorbed within horizon" if c.entry_time is None else fmt_float(c.entry_time)
        print(f"varrho={fmt_float(c.varrho)} family={c.family} R={fmt_float(c.radius)} entry={entry}")
    out.write_csv("absorb.csv", ["varrho", "family", "t", "estimate", "se", "radius"], rows)
    blown = sum(c.blown_paths for c in cells)
    return out.finish(exit_code, {"cells": len(cells), "blown_paths": blown})


def cmd_strichartz(cfg: RunConfig) -> int:
    setup = Setup(cfg)
    p = setup.params
    try:
        pair = admissible_pair(p.n, p.alpha, p.sigma)
    except RegimeError as exc:
        raise ConfigError(str(exc)) from exc
    out = _open_output(cfg, "strichartz")
    _regime_record(out, setup)
    t0, t1 = setup.t_span
    sched = snapshot_schedule(t0, t1, cfg["run.snapshots"], cfg["run.snapshot_kind"])
    if len(sched) < 8:
        raise ConfigError("strichartz needs run.snapshots >= 8")
    try:
        traj = run_path(setup.u0, setup.t_span, setup.dt, p, setup.cache, setup.cov, setup.scheme,
                        cfg.seed, 0, setup.guard, snapshot_times=sched, raise_on_blowup=False)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    status = {"completed": int(traj.status == "ok"), "total": 1}
    if traj.status != "ok":
        out.record("blowup", t_stop=traj.t_stop)
        return out.finish(EXIT_BLOWUP, status)
    try:
        norm = strichartz_norm(traj, pair.r, pair.p)
    except CoarseScheduleError as exc:
        raise ConfigError(str(exc)) from exc
    u0_norm = sp.l2_norm(setup.u0)
    free = strichartz_ratio(setup.u0, setup.cache, np.asarray(traj.snapshot_times) - t0, pair.r, pair.p)
    out.write_csv("strichartz.csv", ["time", "lp_norm"],
                  [(t, sp.lp_norm(s, pair.p)) for t, s in zip(traj.snapshot_times, traj.snapshots)])
    out.record("strichartz", r=pair.r, p=pair.p, mixed_norm=norm,
               ratio=norm / u0_norm if u0_norm > 0 else None, free_flow_ratio=free)
    print(f"r={fmt_float(pair.r)} p={fmt_float(pair.p)} norm={fmt_float(norm)} "
          f"free_ratio={fmt_float(free)}")
    return out.finish(EXIT_OK, status)


# ---------------------------------------------------------------------------
# argument handling


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="override noise.seed")
    common.add_argument("--paths", type=int, help="override run.paths")
    common.add_argument("--out", help="override run.output_dir")
    common.add_argument("--dt", type=float, help="override run.dt")
    p = argparse.ArgumentParser(prog="fnls", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"fnls {__version__}")
    p.add_argument("--schema", action="store_true", help="print every config key and exit")
    sub = p.add_subparsers(dest="command")
    for name in ("simulate", "ensemble", "verify-mass", "absorb-probe", "strichartz"):
        sub.add_parser(name, parents=[common])
    adm = sub.add_parser("admissible", help="Strichartz pair for (n, alpha, sigma)")
    adm.add_argument("n", type=int)
    adm.add_argument("alpha", type=float)
    adm.add_argument("sigma", type=float)
    return p


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["noise.seed"] = args.seed
    if args.paths is not None:
        updates["run.paths"] = args.paths
    if args.out is not None:
        updates["run.output_dir"] = args.out
    if args.dt is not None:
        updates["run.dt"] = args.dt
    return cfg.override(**updates) if updates else cfg


COMMANDS = {
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "verify-mass": cmd_verify_mass,
    "absorb-probe": cmd_absorb_probe,
    "strichartz": cmd_strichartz,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.schema:
        sys.stdout.write(schema_text())
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    if args.command == "admissible":
        return cmd_admissible(args.n, args.alpha, args.sigma)
    try:
        cfg = _config_from_args(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, RegimeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # parameter validation inside the model constructors
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
