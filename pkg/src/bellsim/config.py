"""Run configuration: INI files with one section per scenario.

Example::

    [sweep]
    models = PNRD, SlowPNRD
    sweep = eta_d
    eta_d = 0.5:1.0:0.05
    eta_a = 0.8, 1.0
    eta_i = 0.01
    xi = 1e-5

Scalars are plain numbers. Grids are either comma lists or ``start:stop:step``
ranges with both ends included. Keys not given fall back to the defaults of
each scenario.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .detection import DetectorModel
from .errors import ConfigError
from .ideal import SchemeKind

SCENARIOS = ("table1", "sweep", "arrays", "spdc", "validate")
MODES = ("exact", "approx", "both")
NUMERIC = ("float", "exact-rational")
SWEEP_VARS = ("eta_d", "eta_a", "eta_i", "xi")
ALL_MODELS = tuple(m.label for m in DetectorModel)


def parse_grid(text: str) -> tuple[float, ...]:
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0:
                raise ConfigError(f"bad range {text!r}: expected start:stop:step with step > 0")
            start, stop, step = parts
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            vals = tuple(float(round(start + i * step, 12)) for i in range(max(count, 0)))
        else:
            vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad number in {text!r}") from exc
    check_grid(vals, text)
    return vals


def check_grid(vals, name="grid") -> None:
    if not vals:
        raise ConfigError(f"{name}: grid is empty")
    if len(vals) > 1 and not np.all(np.diff(vals) > 0):
        raise ConfigError(f"{name}: grid must be strictly increasing")


def _int_grid(text: str) -> tuple[int, ...]:
    vals = parse_grid(text)
    if any(v != int(v) or v < 1 for v in vals):
        raise ConfigError(f"array sizes must be positive integers, got {text!r}")
    return tuple(int(v) for v in vals)


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    schemes: tuple[str, ...] = ("standard", "enhanced")
    models: tuple[str, ...] = ALL_MODELS
    sweep: str = "eta_d"
    eta_i: tuple[float, ...] = (0.01,)
    eta_a: tuple[float, ...] = (1.0,)
    eta_d: tuple[float, ...] = (1.0,)
    xi: tuple[float, ...] = (1e-5,)
    N: tuple[int, ...] = (1,)
    tau: tuple[float, ...] = (0.67,)
    n_max: int = 10
    exact_n_max: int = 4        # largest enhanced array size simulated exactly
    exact_n_max_standard: int = 16
    mode: str = "both"
    numeric: str = "float"
    bar_tau: float = 0.67       # tau of the plan used for the per-n SPDC bars

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.numeric not in NUMERIC:
            raise ConfigError(f"numeric must be one of {NUMERIC}")
        if self.sweep not in SWEEP_VARS:
            raise ConfigError(f"sweep variable must be one of {SWEEP_VARS}")
        try:
            object.__setattr__(self, "schemes", tuple(SchemeKind.parse(s).value for s in self.schemes))
            object.__setattr__(self, "models", tuple(DetectorModel.parse(m).label for m in self.models))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for name in ("eta_i", "eta_a", "eta_d", "xi", "tau", "N"):
            vals = getattr(self, name)
            check_grid(vals, name)
        for name in ("eta_i", "eta_a", "eta_d"):
            if any(not 0.0 <= v <= 1.0 for v in getattr(self, name)):
                raise ConfigError(f"{name} values must lie in [0, 1]")
        if any(not 0.0 <= v < 1.0 for v in self.xi):
            raise ConfigError("xi values must lie in [0, 1)")
        if any(v < 0 for v in self.tau):
            raise ConfigError("tau values must be >= 0")
        if self.n_max < 0:
            raise ConfigError("n_max must be >= 0")
        if self.numeric == "exact-rational" and not self.is_ideal():
            raise ConfigError("exact-rational output needs ideal parameters (eta = 1, xi = 0)")

    def is_ideal(self) -> bool:
        return (all(v == 1.0 for v in self.eta_i + self.eta_a + self.eta_d)
                and all(v == 0.0 for v in self.xi))

    def echo(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))


_SCALAR_INT = {"n_max", "exact_n_max", "exact_n_max_standard"}
_GRIDS = {"eta_i", "eta_a", "eta_d", "xi", "tau"}
_LISTS = {"schemes", "models"}
_TEXT = {"sweep", "mode", "numeric"}
_SCALAR_FLOAT = {"bar_tau"}

# per-scenario defaults that differ from RunConfig's
DEFAULTS = {
    "table1": dict(eta_i=(1.0,), xi=(0.0,), numeric="exact-rational"),
    "sweep": dict(eta_d=parse_grid("0.5:1.0:0.02"), eta_a=(0.8, 1.0)),
    "arrays": dict(models=("BD", "SlowBD"), N=tuple(range(1, 17)), xi=(1e-6, 1e-5)),
    "spdc": dict(tau=parse_grid("0.0:1.5:0.05"), eta_i=(1.0,), xi=(0.0,)),
    "validate": dict(eta_d=parse_grid("0.5:1.0:0.1"), eta_a=(0.8, 1.0)),
}


def from_mapping(scenario: str, values: dict[str, str]) -> RunConfig:
    kwargs = dict(DEFAULTS.get(scenario, {}))
    for key, raw in values.items():
        key = key.strip()
        if key in _GRIDS:
            kwargs[key] = parse_grid(raw)
        elif key == "N":
            kwargs[key] = _int_grid(raw)
        elif key in _SCALAR_INT:
            try:
                kwargs[key] = int(raw)
            except ValueError as exc:
                raise ConfigError(f"{key} must be an integer") from exc
        elif key in _SCALAR_FLOAT:
            try:
                kwargs[key] = float(raw)
            except ValueError as exc:
                raise ConfigError(f"{key} must be a number") from exc
        elif key in _LISTS:
            kwargs[key] = tuple(x.strip() for x in str(raw).split(",") if x.strip())
        elif key in _TEXT:
            kwargs[key] = str(raw).strip()
        else:
            raise ConfigError(f"unknown key {key!r} in [{scenario}]")
    return RunConfig(scenario, **kwargs)


def load_config(path: str | None, scenario: str, overrides: dict | None = None) -> RunConfig:
    """Section ``[scenario]`` of an INI file (or the defaults), with command-line overrides."""
    values: dict[str, str] = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        if parser.has_section(scenario):
            values.update(parser.items(scenario))
    cfg = from_mapping(scenario, values)
    if overrides:
        try:
            cfg = replace(cfg, **overrides)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
    return cfg
