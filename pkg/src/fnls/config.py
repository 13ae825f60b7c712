"""Flat ``section.key = value`` run configuration.

A config file is a list of ``key = value`` lines with dotted keys
(``model.alpha = 0.75``); ``#`` starts a comment. Every key has a typed
entry in :data:`SCHEMA` with a default and a unit, so a file only needs
the keys it changes. The canonical text form (sorted keys, floats at 17
significant digits) round-trips exactly and is what the config hash is
computed from.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

_SECTION = "fnls"


class ConfigError(ValueError):
    """Unknown key, unparsable value or out-of-range setting."""


def fmt_float(x: float) -> str:
    """17 significant digits: enough to make any change of a double visible."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _parse_opt_float(text: str) -> float | None:
    t = text.strip()
    return None if t in ("", "none", "None") else float(t)


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable[[str], Any]
    default: Any
    unit: str
    doc: str

    def render(self, value: Any) -> str:
        if value is None:
            return "none"
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            return fmt_float(value)
        if isinstance(value, tuple):
            return ",".join(fmt_float(v) if isinstance(v, float) else str(v) for v in value)
        return str(value)


_KEYS = [
    Key("grid.points", int, 64, "1", "grid points per dimension N"),
    Key("grid.length", float, 20.0, "length", "side L of the periodic box"),
    Key("model.n", int, 2, "1", "spatial dimension"),
    Key("model.alpha", float, 0.75, "1", "fractional order of the Laplacian"),
    Key("model.sigma", float, 0.0, "1", "power of the nonlinearity |u|^(2 sigma) u"),
    Key("model.gamma", float, 1.0, "1/time", "linear damping rate"),
    Key("forcing.family", str, "zero", "-", "zero | linear_phase | additive | combined"),
    Key("forcing.beta", float, 0.0, "1/time", "declared growth bound of the forcing"),
    Key("forcing.c", _parse_opt_float, None, "1/time",
        "constant phase rate c in f = i c u (none: beta, or beta/2 for combined)"),
    Key("forcing.c_profile", str, "", "path", "snapshot file holding c(x); overrides forcing.c"),
    Key("forcing.g_profile", str, "", "path", "snapshot file holding the source g0(x)"),
    Key("forcing.g_amplitude", float, 0.0, "mass^(1/2)/length^(n/2)/time",
        "constant source g0 when no profile file is given"),
    Key("forcing.g_rate", float, 0.0, "1/time", "source grows as exp(g_rate t)"),
    Key("noise.scale", float, 0.3, "mass^(1/2)/time^(1/2)", "amplitude a of phi_k"),
    Key("noise.decay", float, 3.0, "1", "decay exponent s of phi_k = a (1 + |xi|^2)^(-s/2)"),
    Key("noise.cutoff", float, 6.0, "1", "largest Euclidean integer mode |m| driven"),
    Key("noise.include_constant", _parse_bool, True, "-", "drive the constant mode"),
    Key("noise.seed", int, 0, "-", "root seed of every noise stream"),
    Key("init.profile", str, "gaussian", "-", "gaussian | plane_wave | zero | file"),
    Key("init.amplitude", float, 1.0, "mass^(1/2)/length^(n/2)", "peak amplitude"),
    Key("init.width", float, 2.0, "length", "gaussian width"),
    Key("init.mode", _parse_ints, (1, 0), "1", "integer wavevector of the plane wave"),
    Key("init.file", str, "", "path", "snapshot file used when init.profile = file"),
    Key("init.mass", _parse_opt_float, None, "mass", "rescale the profile to this mass"),
    Key("run.dt", float, 1e-3, "time", "time step"),
    Key("run.t0", float, 0.0, "time", "start time"),
    Key("run.t1", float, 1.0, "time", "end time"),
    Key("run.scheme", str, "exp_euler", "-", "exp_euler | strang"),
    Key("run.snapshots", int, 11, "1", "snapshot count (simulate, strichartz)"),
    Key("run.snapshot_kind", str, "uniform", "-", "uniform | geometric snapshot spacing"),
    Key("run.paths", int, 100, "1", "number of Monte Carlo paths"),
    Key("run.output_every", int, 100, "steps", "ensemble CSV row spacing"),
    Key("run.chunk_size", int, 50, "1", "paths advanced together"),
    Key("run.output_dir", str, "fnls_out", "path", "output directory"),
    Key("guard.mass_threshold", _parse_opt_float, None, "mass", "blow-up threshold"),
    Key("guard.relative_factor", float, 1e6, "1", "threshold as a multiple of the initial mass"),
    Key("diag.k", float, 3.0, "1", "width of the standard-error band"),
    Key("diag.moments", _parse_ints, (1, 2, 3), "1", "moment orders m for E||u||^(2m)"),
    Key("diag.refinements", _parse_floats, (4e-3, 2e-3, 1e-3), "time", "coupled step sizes"),
    Key("diag.ledger_m", int, 1, "1", "moment order of the pathwise ledger"),
    Key("diag.min_order", float, 0.5, "1", "required observed ledger order"),
    Key("probe.rho", float, 2.0, "1", "moment order rho of the absorbing set"),
    Key("probe.varrho", _parse_floats, (0.0,), "time", "anchor times"),
    Key("probe.t_max", float, 3.0, "time", "largest pullback horizon"),
    Key("probe.t_step", float, 0.05, "time", "spacing of the horizon grid"),
    Key("probe.mass_factor", float, 100.0, "1", "initial mass as a multiple of the linear plateau"),
    Key("probe.family", str, "constant", "-", "constant | growing"),
    Key("probe.family_rate", float, 0.0, "1/time", "growth rate into the past of the growing family"),
]

SCHEMA: dict[str, Key] = {k.name: k for k in _KEYS}


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["noise.seed"]

    @property
    def paths(self) -> int:
        return self.values["run.paths"]

    @property
    def output_dir(self) -> Path:
        return Path(self.values["run.output_dir"])

    def override(self, **updates) -> "RunConfig":
        vals = dict(self.values)
        for k, v in updates.items():
            if k not in SCHEMA:
                raise ConfigError(f"unknown key {k!r}")
            vals[k] = v
        return RunConfig(_validated(vals))

    def to_text(self) -> str:
        return "".join(f"{k} = {SCHEMA[k].render(self.values[k])}\n" for k in sorted(self.values))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def _validated(vals: dict) -> dict:
    checks = [
        (vals["grid.points"] >= 4 and vals["grid.points"] % 2 == 0, "grid.points must be even and >= 4"),
        (vals["grid.length"] > 0, "grid.length must be positive"),
        (vals["model.n"] >= 1, "model.n must be positive"),
        (0 < vals["model.alpha"] <= 1, "model.alpha must lie in (0, 1]"),
        (vals["model.sigma"] >= 0, "model.sigma must be nonnegative"),
        (vals["model.gamma"] >= 0, "model.gamma must be nonnegative"),
        (vals["forcing.family"] in ("zero", "linear_phase", "additive", "combined"),
         "forcing.family must be zero, linear_phase, additive or combined"),
        (vals["noise.scale"] >= 0, "noise.scale must be nonnegative"),
        (vals["init.profile"] in ("gaussian", "plane_wave", "zero", "file"),
         "init.profile must be gaussian, plane_wave, zero or file"),
        (vals["run.dt"] > 0, "run.dt must be positive"),
        (vals["run.t1"] > vals["run.t0"], "run.t1 must exceed run.t0"),
        (vals["run.scheme"] in ("exp_euler", "strang"), "run.scheme must be exp_euler or strang"),
        (vals["run.snapshot_kind"] in ("uniform", "geometric"), "run.snapshot_kind must be uniform or geometric"),
        (vals["run.paths"] >= 1, "run.paths must be at least 1"),
        (vals["run.output_every"] >= 1, "run.output_every must be at least 1"),
        (vals["run.chunk_size"] >= 1, "run.chunk_size must be at least 1"),
        (vals["probe.t_step"] > 0 and vals["probe.t_max"] > 0, "probe horizons must be positive"),
        (vals["probe.family"] in ("constant", "growing"), "probe.family must be constant or growing"),
        (len(vals["diag.refinements"]) >= 2, "diag.refinements needs at least two step sizes"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)
    return vals


def parse_text(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#",), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    vals = {k: spec.default for k, spec in SCHEMA.items()}
    for raw_key, raw in parser.items(_SECTION):
        key = raw_key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{source}: unknown key {key!r}")
        try:
            vals[key] = SCHEMA[key].parse(raw.strip())
        except ValueError as exc:
            raise ConfigError(f"{source}: bad value for {key}: {raw!r} ({exc})") from exc
    return RunConfig(_validated(vals))


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return parse_text("")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_text(text, str(path))


def schema_text() -> str:
    """Human-readable listing of every key with its default and unit."""
    lines = []
    for k in _KEYS:
        lines.append(f"{k.name} = {k.render(k.default)}    # [{k.unit}] {k.doc}")
    return "\n".join(lines) + "\n"
