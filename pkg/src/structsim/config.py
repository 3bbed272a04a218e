"""Plain-text configuration files.

Grammar (line oriented, ``key = value`` inside ``[section]`` headers;
``#`` starts a comment)::

    [population]
    lambda_h = 8.4e5
    lambda_m = 1e7
    theta    = 3.65e4

    [rates]
    mu_h    = constant(0.022)
    mu_m    = constant(20)
    nu_h    = constant(0.1)
    nu_m    = constant(25)
    gamma_h = piecewise(0.1, 0, 50)
    k_h     = piecewise(0.1, 0, 40)
    beta_h  = gauss(0.1, 0.3, 0.1)
    beta_m  = gauss_exp(0.05, 0.2, 0.2, 1.0)

    [grid]            # optional section
    delta     = 0.005
    a_max_h   = 227.25
    a_max_m   = 1.5
    tau_max_h = 0.6
    tau_max_m = 1.5
    eta_max   = 1.0

All eight rates are required; unknown sections, keys, or rate kinds are
errors, reported with their line number.  Scalar rate forms attached to a
two-variable rate (everything except ``mu_h``/``mu_m``) read the second
structural variable (infection or recovery age); ``gauss_exp`` reads both.
``table(path)`` loads two whitespace/comma-separated columns (x, value)
and interpolates linearly.
"""

from __future__ import annotations

import os
import re

from .grids import Grid
from .params import ModelParams
from .rates import Arity, RateSpec

POPULATION_KEYS = ("lambda_h", "lambda_m", "theta")
RATE_KEYS = ("mu_h", "mu_m", "nu_h", "nu_m", "gamma_h", "k_h", "beta_h", "beta_m")
GRID_KEYS = ("delta", "a_max_h", "a_max_m", "tau_max_h", "tau_max_m", "eta_max")

_SCALAR_ARITY = {
    "mu_h": Arity.AGE, "mu_m": Arity.AGE,
    "nu_h": Arity.TAU_ONLY, "nu_m": Arity.TAU_ONLY,
    "gamma_h": Arity.TAU_ONLY, "beta_h": Arity.TAU_ONLY, "beta_m": Arity.TAU_ONLY,
    "k_h": Arity.ETA_ONLY,
}

_CALL_RE = re.compile(r"^\s*([a-z_]+)\s*\(\s*(.*?)\s*\)\s*$")


class ConfigError(ValueError):
    """Malformed configuration document; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _parse_number(text: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}", line) from None


def _parse_rate(name: str, value: str, line: int, base_dir: str) -> RateSpec:
    m = _CALL_RE.match(value)
    if not m:
        raise ConfigError(f"rate {name} must look like kind(args), got {value!r}", line)
    kind, argstr = m.group(1), m.group(2)
    args = [a.strip() for a in argstr.split(",")] if argstr else []
    try:
        if kind == "constant":
            if len(args) != 1:
                raise ConfigError("constant(c) takes one argument", line)
            return RateSpec.constant(_parse_number(args[0], line), _SCALAR_ARITY[name])
        if kind == "piecewise":
            if len(args) != 3:
                raise ConfigError("piecewise(threshold, low, high) takes three arguments", line)
            return RateSpec.piecewise(*(_parse_number(a, line) for a in args),
                                      arity=_SCALAR_ARITY[name])
        if kind == "gauss":
            if len(args) != 3:
                raise ConfigError("gauss(amplitude, center, width) takes three arguments", line)
            return RateSpec.gauss(*(_parse_number(a, line) for a in args),
                                  arity=_SCALAR_ARITY[name])
        if kind == "gauss_exp":
            if len(args) != 4:
                raise ConfigError(
                    "gauss_exp(amplitude, center, width, decay) takes four arguments", line)
            if name != "beta_m":
                raise ConfigError("gauss_exp is only supported for beta_m", line)
            return RateSpec.gauss_exp(*(_parse_number(a, line) for a in args))
        if kind == "table":
            if len(args) != 1:
                raise ConfigError("table(path) takes one argument", line)
            path = os.path.join(base_dir, args[0])
            try:
                xs, ys = [], []
                with open(path) as fh:
                    for raw in fh:
                        raw = raw.strip()
                        if not raw or raw.startswith("#"):
                            continue
                        parts = raw.replace(",", " ").split()
                        xs.append(float(parts[0]))
                        ys.append(float(parts[1]))
            except OSError as exc:
                raise ConfigError(f"cannot read table file {path!r}: {exc}", line) from None
            return RateSpec.table(xs, ys, _SCALAR_ARITY[name])
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), line) from None
    raise ConfigError(f"unknown rate kind {kind!r}", line)


def load_config(text: str, base_dir: str = ".") -> tuple[ModelParams, Grid | None]:
    """Parse a config document into parameters and an optional grid."""
    section = None
    seen: dict[str, dict[str, object]] = {"population": {}, "rates": {}, "grid": {}}
    lines: dict[str, dict[str, int]] = {"population": {}, "rates": {}, "grid": {}}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in seen:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected key = value, got {stripped!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, value = (part.strip() for part in stripped.split("=", 1))
        if section == "population":
            if key not in POPULATION_KEYS:
                raise ConfigError(f"unknown key {key!r} in [population]", lineno)
            seen[section][key] = _parse_number(value, lineno)
        elif section == "rates":
            if key not in RATE_KEYS:
                raise ConfigError(f"unknown key {key!r} in [rates]", lineno)
            seen[section][key] = _parse_rate(key, value, lineno, base_dir)
        else:
            if key not in GRID_KEYS:
                raise ConfigError(f"unknown key {key!r} in [grid]", lineno)
            seen[section][key] = _parse_number(value, lineno)
        if key in seen[section] and key in lines[section]:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        lines[section][key] = lineno

    for key in POPULATION_KEYS:
        if key not in seen["population"]:
            raise ConfigError(f"missing [population] key {key!r}")
        if seen["population"][key] <= 0:
            raise ConfigError(f"negative parameter: {key} must be positive",
                              lines["population"][key])
    for key in RATE_KEYS:
        if key not in seen["rates"]:
            raise ConfigError(f"missing [rates] key {key!r}")

    try:
        params = ModelParams(
            lambda_h=seen["population"]["lambda_h"],
            lambda_m=seen["population"]["lambda_m"],
            theta=seen["population"]["theta"],
            **{k: seen["rates"][k] for k in RATE_KEYS},
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    grid = None
    if seen["grid"]:
        missing = [k for k in GRID_KEYS if k not in seen["grid"]]
        if missing:
            raise ConfigError(f"[grid] section incomplete, missing {missing}")
        try:
            grid = Grid(**{k: seen["grid"][k] for k in GRID_KEYS})
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return params, grid


def parse_config(text: str, base_dir: str = ".") -> ModelParams:
    """Parse a config document; the [grid] section, if present, is validated too."""
    return load_config(text, base_dir)[0]
