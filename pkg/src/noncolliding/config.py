"""Experiment configuration: flat sectioned key=value text files.

Sections and keys (see the shipped presets for complete examples):

    [system]      d, gamma, b, sigma, x0, T
    [experiment]  schemes, k_min, k_max, paths, seed
    [solver]      tol, max_iter            (optional)
    [output]      directory, formats       (optional)

gamma accepts nearest_neighbor(g), full(g), or matrix(r11 r12; r21 r22; ...).
b and sigma take one catalog field name, or d names separated by ';'.
x0 takes an explicit list of d values or arithmetic(start, step).
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace

import numpy as np

from .model import (
    InteractionMatrix,
    ParticleSystem,
    field_from_name,
    full_coupling,
    nearest_neighbor,
    validate_system,
)
from .convergence import ExperimentConfig
from .schemes import Scheme
from .solver import SolverOptions

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "dump_config", "apply_overrides"]


class ConfigError(Exception):
    """Invalid configuration; ``key`` names the offending section.key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    d: int
    gamma: str
    b: str
    sigma: str
    x0: str
    horizon: float
    schemes: tuple[str, ...]
    k_min: int
    k_max: int
    paths: int
    seed: int
    tol: float = 1e-12
    max_iter: int = 100
    out_dir: str = "out"
    formats: tuple[str, ...] = ("csv",)

    # --- builders -----------------------------------------------------------

    def interaction_matrix(self) -> InteractionMatrix:
        spec = self.gamma.strip()
        try:
            if spec.startswith("nearest_neighbor(") and spec.endswith(")"):
                return nearest_neighbor(self.d, float(spec[17:-1]))
            if spec.startswith("full(") and spec.endswith(")"):
                return full_coupling(self.d, float(spec[5:-1]))
            if spec.startswith("matrix(") and spec.endswith(")"):
                rows = [
                    [float(v) for v in row.split()]
                    for row in spec[7:-1].split(";")
                ]
                return InteractionMatrix(self.d, np.array(rows, dtype=float))
        except (ValueError, IndexError) as exc:
            raise ConfigError("system.gamma", str(exc)) from None
        raise ConfigError("system.gamma", f"unrecognized gamma spec {spec!r}")

    def _fields(self, key: str, spec: str):
        parts = [p.strip() for p in spec.split(";")]
        try:
            fields = [field_from_name(p) for p in parts]
        except ValueError as exc:
            raise ConfigError(f"system.{key}", str(exc)) from None
        if len(fields) == 1:
            return tuple(fields) * self.d
        if len(fields) != self.d:
            raise ConfigError(f"system.{key}", f"need 1 or {self.d} fields, got {len(fields)}")
        return tuple(fields)

    def initial_positions(self) -> np.ndarray:
        spec = self.x0.strip()
        if spec.startswith("arithmetic(") and spec.endswith(")"):
            try:
                start, step = (float(v) for v in spec[11:-1].split(","))
            except ValueError:
                raise ConfigError("system.x0", f"bad arithmetic spec {spec!r}") from None
            return start + step * np.arange(self.d, dtype=float)
        try:
            vals = np.array([float(v) for v in spec.replace(",", " ").split()])
        except ValueError:
            raise ConfigError("system.x0", f"unparseable x0 {spec!r}") from None
        if len(vals) != self.d:
            raise ConfigError("system.x0", f"need {self.d} values, got {len(vals)}")
        return vals

    def build_system(self) -> ParticleSystem:
        sys = ParticleSystem(
            d=self.d,
            gamma=self.interaction_matrix(),
            b=self._fields("b", self.b),
            sigma=self._fields("sigma", self.sigma),
            x0=self.initial_positions(),
            horizon=self.horizon,
        )
        violations = validate_system(sys)
        if violations:
            raise ConfigError("system", "; ".join(violations))
        return sys

    def solver_options(self) -> SolverOptions:
        try:
            return SolverOptions(residual_tol=self.tol, max_iter=self.max_iter)
        except ValueError as exc:
            raise ConfigError("solver", str(exc)) from None

    def scheme_kinds(self) -> tuple[Scheme, ...]:
        out = []
        for name in self.schemes:
            try:
                out.append(Scheme(name))
            except ValueError:
                raise ConfigError("experiment.schemes", f"unknown scheme {name!r}") from None
        return tuple(out)

    def experiment_config(self) -> ExperimentConfig:
        try:
            return ExperimentConfig(
                system=self.build_system(),
                schemes=self.scheme_kinds(),
                k_min=self.k_min,
                k_max=self.k_max,
                paths=self.paths,
                master_seed=self.seed,
                solver=self.solver_options(),
            )
        except ValueError as exc:
            raise ConfigError("experiment", str(exc)) from None


def _get(cp, section, key, cast, default=None):
    if not cp.has_option(section, key):
        if default is not None:
            return default
        raise ConfigError(f"{section}.{key}", "missing required key")
    raw = cp.get(section, key)
    try:
        return cast(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}") from None


def _split_names(raw: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in raw.replace(",", " ").split())


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str  # keys are case-exact (T vs t)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", f"parse failure: {exc}") from None
    for section in ("system", "experiment"):
        if not cp.has_section(section):
            raise ConfigError(section, "missing required section")
    cfg = RunConfig(
        d=_get(cp, "system", "d", int),
        gamma=_get(cp, "system", "gamma", str),
        b=_get(cp, "system", "b", str),
        sigma=_get(cp, "system", "sigma", str),
        x0=_get(cp, "system", "x0", str),
        horizon=_get(cp, "system", "T", float),
        schemes=_get(cp, "experiment", "schemes", _split_names),
        k_min=_get(cp, "experiment", "k_min", int),
        k_max=_get(cp, "experiment", "k_max", int),
        paths=_get(cp, "experiment", "paths", int),
        seed=_get(cp, "experiment", "seed", int),
        tol=_get(cp, "solver", "tol", float, 1e-12) if cp.has_section("solver") else 1e-12,
        max_iter=_get(cp, "solver", "max_iter", int, 100) if cp.has_section("solver") else 100,
        out_dir=_get(cp, "output", "directory", str, "out") if cp.has_section("output") else "out",
        formats=(
            _get(cp, "output", "formats", _split_names, ("csv",))
            if cp.has_section("output")
            else ("csv",)
        ),
    )
    for fmt in cfg.formats:
        if fmt != "csv":
            raise ConfigError("output.formats", f"unsupported format {fmt!r}")
    if cfg.seed < 0:
        raise ConfigError("experiment.seed", "seed must be >= 0")
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def dump_config(cfg: RunConfig) -> str:
    """Canonical text form; parse_config(dump_config(c)) == c."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["system"] = {
        "d": str(cfg.d),
        "gamma": cfg.gamma,
        "b": cfg.b,
        "sigma": cfg.sigma,
        "x0": cfg.x0,
        "T": repr(cfg.horizon),
    }
    cp["experiment"] = {
        "schemes": ", ".join(cfg.schemes),
        "k_min": str(cfg.k_min),
        "k_max": str(cfg.k_max),
        "paths": str(cfg.paths),
        "seed": str(cfg.seed),
    }
    cp["solver"] = {"tol": repr(cfg.tol), "max_iter": str(cfg.max_iter)}
    cp["output"] = {"directory": cfg.out_dir, "formats": ", ".join(cfg.formats)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


_OVERRIDE_FIELDS = {
    "system.d": ("d", int),
    "system.gamma": ("gamma", str),
    "system.b": ("b", str),
    "system.sigma": ("sigma", str),
    "system.x0": ("x0", str),
    "system.T": ("horizon", float),
    "experiment.schemes": ("schemes", _split_names),
    "experiment.k_min": ("k_min", int),
    "experiment.k_max": ("k_max", int),
    "experiment.paths": ("paths", int),
    "experiment.seed": ("seed", int),
    "solver.tol": ("tol", float),
    "solver.max_iter": ("max_iter", int),
    "output.directory": ("out_dir", str),
    "output.formats": ("formats", _split_names),
}


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply ``section.key=value`` strings on top of a parsed config."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like section.key=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in _OVERRIDE_FIELDS:
            raise ConfigError(key, "unknown override key")
        field_name, cast = _OVERRIDE_FIELDS[key]
        try:
            cfg = replace(cfg, **{field_name: cast(raw.strip())})
        except (TypeError, ValueError):
            raise ConfigError(key, f"cannot parse {raw!r}") from None
    return cfg
