"""Scenario configuration: YAML files, defaults, validation and presets.

A scenario file is a YAML mapping with the sections ``model``, ``params``,
``grid``, ``outputs``, ``paths`` and ``oracle``.  Every key has a default and
unknown keys are rejected with the line they appear on.
"""
from __future__ import annotations

import dataclasses
import io
import math
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError, DomainError
from .spectra import SystemParams
from .spectral_density import Kind, PhononModel

__all__ = ["ScenarioConfig", "load_config", "parse_config", "dump_config", "PRESETS", "preset"]


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "superohmic_bulk"
    delta: float = 2.0
    n: int | None = None
    omega_b: float = 1.0
    linewidth: float | None = None
    cutoff: float = 20.0

    def build(self) -> PhononModel:
        kind = Kind(self.kind)
        if kind is Kind.OHMIC_EXP:
            return PhononModel.ohmic_exp(self.delta, self.omega_b)
        if kind is Kind.SUPEROHMIC_BULK:
            return PhononModel.superohmic_bulk(self.delta, self.omega_b, self.cutoff)
        if kind is Kind.DELTA:
            return PhononModel.delta_mode(self.delta, self.omega_b)
        return PhononModel.confined(self.n if self.n is not None else 1, self.delta,
                                    self.linewidth, self.omega_b, self.cutoff)


@dataclass(frozen=True)
class ParamsSpec:
    g: float = 0.05
    gamma_c: float = 0.0
    gamma_qd: float | None = None
    detuning: float = 0.0
    T: tuple = (0.0,)

    def build(self, T) -> SystemParams:
        return SystemParams(self.g, self.gamma_c, self.gamma_qd, self.detuning, T)


@dataclass(frozen=True)
class InsetSpec:
    min: float | None = None
    max: float | None = None
    points: int = 2001


@dataclass(frozen=True)
class GridSpec:
    min: float | None = None
    max: float | None = None
    points: int = 4001
    inset: InsetSpec | None = field(default_factory=InsetSpec)


@dataclass(frozen=True)
class OutputsSpec:
    absorption: bool = True
    emission: bool = True
    polaron: bool = True
    resonance_report: bool = True
    oracle_check: bool = False


@dataclass(frozen=True)
class PathsSpec:
    output_dir: str = "polaronqd-out"


@dataclass(frozen=True)
class OracleSpec:
    points: int = 11
    # gamma used by the time-domain cross-check when params give gamma = 0
    gamma: float = 0.01
    half_width: float | None = None
    variant: str = "nonlocal"
    t_final: float | None = None
    polaron_gamma: float = 1e-3


@dataclass(frozen=True)
class ScenarioConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    params: ParamsSpec = field(default_factory=ParamsSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    outputs: OutputsSpec = field(default_factory=OutputsSpec)
    paths: PathsSpec = field(default_factory=PathsSpec)
    oracle: OracleSpec = field(default_factory=OracleSpec)

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["params"]["T"] = list(self.params.T)
        return out


# ---------------------------------------------------------------------------
# parsing


def _where(node, path):
    line = node.start_mark.line + 1 if node is not None else None
    name = ".".join(path) or "<root>"
    return f"line {line}, {name}" if line else name


def _scalar(node, path, kinds, optional=False):
    if not isinstance(node, yaml.ScalarNode):
        raise ConfigError("expected a scalar value", _where(node, path))
    value = yaml.safe_load(node.value) if node.style is None else node.value
    if value is None:
        if optional:
            return None
        raise ConfigError("value may not be null", _where(node, path))
    if bool in kinds:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"expected true/false, got {node.value!r}", _where(node, path))
    if isinstance(value, str) and node.style is None and (float in kinds or int in kinds):
        # YAML 1.1 reads exponents without a dot, such as 1e-4, as strings
        try:
            value = int(value) if int in kinds and float not in kinds else float(value)
        except ValueError:
            pass
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {node.value!r}", _where(node, path))
    if int in kinds and isinstance(value, int):
        return value
    if float in kinds and isinstance(value, (int, float)):
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError("value must be finite", _where(node, path))
        return value
    if str in kinds and isinstance(value, str):
        return value
    names = "/".join(k.__name__ for k in kinds)
    raise ConfigError(f"expected {names}, got {node.value!r}", _where(node, path))


_TYPES = {
    "kind": (str,), "delta": (float,), "n": (int,), "omega_b": (float,), "linewidth": (float,),
    "cutoff": (float,), "g": (float,), "gamma_c": (float,), "gamma_qd": (float,),
    "detuning": (float,), "min": (float,), "max": (float,), "points": (int,),
    "absorption": (bool,), "emission": (bool,), "polaron": (bool,),
    "resonance_report": (bool,), "oracle_check": (bool,), "output_dir": (str,),
    "gamma": (float,), "half_width": (float,), "variant": (str,), "t_final": (float,),
    "polaron_gamma": (float,),
}


def _section(node, cls, path, lines=None):
    if node is None:
        return cls()
    if isinstance(node, yaml.ScalarNode) and yaml.safe_load(node.value) is None:
        return cls()
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError("expected a mapping", _where(node, path))
    fields = {f.name: f for f in dataclasses.fields(cls)}
    values = {}
    for key_node, value_node in node.value:
        key = key_node.value
        sub = path + [key]
        if key not in fields:
            known = ", ".join(sorted(fields))
            raise ConfigError(f"unknown key {key!r} (known: {known})", _where(key_node, sub))
        if key in values:
            raise ConfigError("duplicate key", _where(key_node, sub))
        if lines is not None:
            lines[".".join(sub)] = key_node.start_mark.line + 1
        if cls is GridSpec and key == "inset":
            values[key] = _inset(value_node, sub, lines)
        elif cls is ParamsSpec and key == "T":
            values[key] = _temperatures(value_node, sub)
        else:
            optional = fields[key].default is None
            values[key] = _scalar(value_node, sub, _TYPES[key], optional)
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), _where(node, path)) from None


def _inset(node, path, lines=None):
    if isinstance(node, yaml.ScalarNode):
        value = yaml.safe_load(node.value)
        if value is None or value is False:
            return None
        raise ConfigError("inset must be a mapping, null or false", _where(node, path))
    return _section(node, InsetSpec, path, lines)


def _temperatures(node, path):
    if isinstance(node, yaml.SequenceNode):
        temps = tuple(_scalar(item, path, (float,)) for item in node.value)
        if not temps:
            raise ConfigError("temperature list is empty", _where(node, path))
    else:
        temps = (_scalar(node, path, (float,)),)
    for t in temps:
        if t < 0:
            raise ConfigError(f"temperature must be >= 0, got {t}", _where(node, path))
    return temps


def parse_config(text: str, source="<config>") -> ScenarioConfig:
    """Parse YAML text into a validated ScenarioConfig."""
    try:
        root = yaml.compose(io.StringIO(text))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}, line {mark.line + 1}" if mark else source
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", where) from None
    sections = {
        "model": ModelSpec, "params": ParamsSpec, "grid": GridSpec,
        "outputs": OutputsSpec, "paths": PathsSpec, "oracle": OracleSpec,
    }
    values = {}
    lines = {}
    if root is not None:
        if not isinstance(root, yaml.MappingNode):
            raise ConfigError("top level must be a mapping", _where(root, []))
        for key_node, value_node in root.value:
            key = key_node.value
            if key not in sections:
                known = ", ".join(sections)
                raise ConfigError(f"unknown section {key!r} (known: {known})", _where(key_node, [key]))
            lines[key] = key_node.start_mark.line + 1
            values[key] = _section(value_node, sections[key], [key], lines)
    config = ScenarioConfig(**values)
    _check(config, lines)
    return config


def _locate(lines, path):
    """'line N, path' using the most specific recorded key."""
    parts = path.split(".")
    for i in range(len(parts), 0, -1):
        line = lines.get(".".join(parts[:i]))
        if line is not None:
            return f"line {line}, {path}"
    return path


def _blame(section, cls, message):
    """Field of ``cls`` named first in an error message, else the section."""
    if "Kind" in message:
        return f"{section}.kind"
    for f in dataclasses.fields(cls):
        if message.startswith(f.name) or f" {f.name} " in f" {message} ":
            return f"{section}.{f.name}"
    return section


def _check(config: ScenarioConfig, lines):
    """Semantic checks that need more than one field."""
    try:
        config.model.build()
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc), _locate(lines, _blame("model", ModelSpec, str(exc)))) from None
    for T in config.params.T:
        try:
            config.params.build(T)
        except ValueError as exc:
            raise ConfigError(str(exc), _locate(lines, _blame("params", ParamsSpec, str(exc)))) from None
    grid = config.grid
    if grid.points < 2:
        raise ConfigError("points must be >= 2", _locate(lines, "grid.points"))
    if grid.min is not None and grid.max is not None and grid.min >= grid.max:
        raise ConfigError("min must be below max", _locate(lines, "grid"))
    if grid.inset is not None:
        if grid.inset.points < 2:
            raise ConfigError("points must be >= 2", _locate(lines, "grid.inset.points"))
        if (grid.inset.min is None) != (grid.inset.max is None):
            raise ConfigError("give both min and max, or neither", _locate(lines, "grid.inset"))
        if grid.inset.min is not None and grid.inset.min >= grid.inset.max:
            raise ConfigError("min must be below max", _locate(lines, "grid.inset"))
    if config.oracle.variant not in ("nonlocal", "local"):
        raise ConfigError("variant must be 'nonlocal' or 'local'", _locate(lines, "oracle.variant"))
    if config.oracle.points < 1:
        raise ConfigError("points must be >= 1", _locate(lines, "oracle.points"))
    if config.oracle.gamma <= 0 or config.oracle.polaron_gamma <= 0:
        raise ConfigError("oracle gamma values must be > 0", _locate(lines, "oracle"))


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, str(path))


def dump_config(config: ScenarioConfig) -> str:
    data = config.as_dict()
    if len(data["params"]["T"]) == 1:
        data["params"]["T"] = data["params"]["T"][0]
    return yaml.safe_dump(data, sort_keys=False)


PRESETS = {
    "fig1": ScenarioConfig(
        model=ModelSpec(kind="superohmic_bulk", delta=2.0, omega_b=1.0, cutoff=20.0),
        params=ParamsSpec(g=0.05, gamma_c=0.0, T=(0.1,)),
        grid=GridSpec(min=-3.0, max=6.0, points=4001, inset=InsetSpec(-0.1, 0.1, 2001)),
        paths=PathsSpec("fig1-out"),
    ),
    "fig2_ohmic": ScenarioConfig(
        model=ModelSpec(kind="confined", n=1, delta=3.0, omega_b=1.0, linewidth=0.06, cutoff=20.0),
        params=ParamsSpec(g=3e-3, gamma_c=1e-4, T=(0.0, 0.05)),
        grid=GridSpec(min=-3.0, max=8.0, points=4001, inset=InsetSpec(-0.01, 0.01, 4001)),
        paths=PathsSpec("fig2-out"),
    ),
    "jc": ScenarioConfig(
        model=ModelSpec(kind="ohmic_exp", delta=0.0),
        params=ParamsSpec(g=0.05, gamma_c=0.01, T=(0.0,)),
        grid=GridSpec(min=-0.2, max=0.2, points=2001, inset=None),
        outputs=OutputsSpec(polaron=False),
        paths=PathsSpec("jc-out"),
    ),
}


def preset(name) -> ScenarioConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r} (known: {', '.join(PRESETS)})") from None
