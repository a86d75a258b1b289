"""JSON run configuration: parsing, validation, defaults and sweep expansion."""

from __future__ import annotations

import copy
import dataclasses
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any

from .errors import ConfigError
from .fock import OscillatorSpec
from .herald import SpinSpec
from .phys import LabSetup
from .pfunction import GridConfig
from .pulses import PulseSchedule, nc_from_power_law

__all__ = [
    "OscillatorSection",
    "SpinSection",
    "ScheduleSection",
    "PGridSection",
    "SweepAxis",
    "RunConfig",
    "parse_config",
    "load_config",
    "expand_sweep",
]

ENGINES = ("fock", "pfunction", "cooling_model", "both")
MODES = ("conditioned", "trajectory")
U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class OscillatorSection:
    omega: float = 1.0
    gamma: float = 0.0
    n_thermal: float = 10.0
    dim: int = 256
    gamma_h: float = 0.0

    def build(self) -> OscillatorSpec:
        return OscillatorSpec(self.omega, self.gamma, self.n_thermal, self.dim, self.gamma_h)


@dataclass(frozen=True)
class SpinSection:
    t2: float | None = None
    readout_fidelity: float = 1.0

    def build(self) -> SpinSpec:
        return SpinSpec(math.inf if self.t2 is None else self.t2, self.readout_fidelity)


@dataclass(frozen=True)
class ScheduleSection:
    """Pulse schedule. ``g`` and ``epsilon`` may instead be given relative to omega and g."""

    g: float | None = None
    g_over_omega: float | None = None
    n_c: int | None = None
    epsilon: float | None = None
    epsilon_over_g: float | None = None
    detuning_sign: str = "minus"
    rounds: int = 10
    nc_power_law: dict | None = None
    nc_schedule: dict | None = None

    def coupling(self, omega: float) -> float:
        return self.g if self.g is not None else self.g_over_omega * omega

    def build(self, omega: float) -> PulseSchedule:
        g = self.coupling(omega)
        eps = 0.0
        if self.epsilon is not None:
            eps = self.epsilon
        elif self.epsilon_over_g is not None:
            eps = self.epsilon_over_g * g
        sched = None
        if self.nc_power_law is not None:
            sched = nc_from_power_law(self.rounds, **self.nc_power_law)
        if self.nc_schedule is not None:
            sched = {**(sched or {}), **{int(k): int(v) for k, v in self.nc_schedule.items()}}
        n_c = self.n_c if self.n_c is not None else (sched or {}).get(1)
        return PulseSchedule(n_c=n_c, g=g, epsilon=eps, detuning_sign=self.detuning_sign, rounds_M=self.rounds, nc_schedule=sched)


@dataclass(frozen=True)
class PGridSection:
    extent: float | None = None
    resolution: int = 256
    kernel: str = "exact"

    def build(self) -> GridConfig:
        return GridConfig(self.extent, self.resolution)


@dataclass(frozen=True)
class SweepAxis:
    path: str
    values: tuple


@dataclass(frozen=True)
class RunConfig:
    engine: str
    oscillator: OscillatorSection
    schedule: ScheduleSection
    spin: SpinSection = field(default_factory=SpinSection)
    pgrid: PGridSection = field(default_factory=PGridSection)
    lab: LabSetup | None = None
    mode: str = "conditioned"
    n_trajectories: int = 0
    seed: int | None = None
    output_dir: str = "out"
    strict_truncation: bool = True
    event_rate_reference: float | None = None
    sweep: tuple[SweepAxis, ...] = ()
    raw: dict = field(default_factory=dict, compare=False, repr=False)


_SECTIONS = {
    "oscillator": OscillatorSection,
    "spin": SpinSection,
    "schedule": ScheduleSection,
    "pgrid": PGridSection,
    "lab": LabSetup,
}
_TOP = {
    "engine", "mode", "n_trajectories", "seed", "output_dir", "strict_truncation",
    "event_rate_reference", "sweep", *_SECTIONS,
}


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_type(where: str, value, annotation: str):
    if value is None:
        if "None" in annotation:
            return value
        raise ConfigError(f"{where}: null not allowed")
    if annotation.startswith("int"):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
    elif annotation.startswith("float"):
        if not _is_number(value):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        value = float(value)
    elif annotation.startswith("str"):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
    elif annotation.startswith("bool"):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
    elif annotation.startswith("dict"):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected an object, got {value!r}")
    return value


def _section(name: str, cls, data) -> Any:
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key {name}.{key!s}")
    kwargs = {k: _check_type(f"{name}.{k}", v, str(known[k].type)) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def _validate_schedule(s: ScheduleSection) -> None:
    if (s.g is None) == (s.g_over_omega is None):
        raise ConfigError("schedule: give exactly one of g, g_over_omega")
    if s.epsilon is not None and s.epsilon_over_g is not None:
        raise ConfigError("schedule: give at most one of epsilon, epsilon_over_g")
    if s.n_c is None and s.nc_power_law is None and not s.nc_schedule:
        raise ConfigError("schedule: n_c is required unless nc_power_law or nc_schedule is set")
    if s.nc_power_law is not None:
        extra = set(s.nc_power_law) - {"base", "exponent"}
        if extra:
            raise ConfigError(f"unknown key schedule.nc_power_law.{sorted(extra)[0]}")
    if s.nc_schedule is not None:
        for k, v in s.nc_schedule.items():
            if not str(k).isdigit() or not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"schedule.nc_schedule: bad entry {k!r}: {v!r}")
    if s.rounds < 1:
        raise ConfigError("schedule.rounds must be >= 1")


def _sweep_axes(data) -> tuple[SweepAxis, ...]:
    if not isinstance(data, list):
        raise ConfigError("sweep: expected a list of {path, values}")
    axes = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or set(item) != {"path", "values"}:
            raise ConfigError(f"sweep[{i}]: expected exactly the keys path and values")
        path, values = item["path"], item["values"]
        if not isinstance(path, str) or not isinstance(values, list) or not values:
            raise ConfigError(f"sweep[{i}]: path must be a string and values a non-empty list")
        parts = path.split(".")
        if len(parts) != 2 or parts[0] not in _SECTIONS:
            raise ConfigError(f"sweep[{i}]: path {path!r} must be <section>.<field>")
        names = {f.name for f in dataclasses.fields(_SECTIONS[parts[0]])}
        if parts[1] not in names:
            raise ConfigError(f"sweep[{i}]: unknown parameter path {path!r}")
        axes.append(SweepAxis(path, tuple(values)))
    return tuple(axes)


def _from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object")
    for key in data:
        if key not in _TOP:
            raise ConfigError(f"unknown key {key!s}")
    engine = data.get("engine")
    if engine not in ENGINES:
        raise ConfigError(f"engine: expected one of {', '.join(ENGINES)}, got {engine!r}")
    for required in ("oscillator", "schedule"):
        if required not in data:
            raise ConfigError(f"missing section {required}")
    kw: dict[str, Any] = {"engine": engine}
    for name, cls in _SECTIONS.items():
        if name in data:
            kw[name] = _section(name, cls, data[name])
    _validate_schedule(kw["schedule"])
    if kw.get("pgrid") and kw["pgrid"].kernel not in ("exact", "filter"):
        raise ConfigError("pgrid.kernel: expected 'exact' or 'filter'")
    mode = _check_type("mode", data.get("mode", "conditioned"), "str")
    if mode not in MODES:
        raise ConfigError(f"mode: expected one of {', '.join(MODES)}, got {mode!r}")
    kw["mode"] = mode
    n_traj = _check_type("n_trajectories", data.get("n_trajectories", 0), "int")
    if n_traj < 0:
        raise ConfigError("n_trajectories must be >= 0")
    kw["n_trajectories"] = n_traj
    seed = _check_type("seed", data.get("seed"), "int | None")
    if seed is not None and not 0 <= seed <= U64_MAX:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if n_traj > 0 and seed is None:
        raise ConfigError("seed is required when n_trajectories > 0")
    if mode == "trajectory" and n_traj == 0:
        raise ConfigError("mode 'trajectory' needs n_trajectories > 0")
    kw["seed"] = seed
    kw["output_dir"] = _check_type("output_dir", data.get("output_dir", "out"), "str")
    kw["strict_truncation"] = _check_type("strict_truncation", data.get("strict_truncation", True), "bool")
    ref = _check_type("event_rate_reference", data.get("event_rate_reference"), "float | None")
    if ref is not None and not 0 < ref <= 1:
        raise ConfigError("event_rate_reference must lie in (0, 1]")
    kw["event_rate_reference"] = ref
    kw["sweep"] = _sweep_axes(data["sweep"]) if "sweep" in data else ()
    kw["raw"] = data
    cfg = RunConfig(**kw)
    try:
        cfg.oscillator.build()
        cfg.schedule.build(cfg.oscillator.omega)
        cfg.spin.build()
        cfg.pgrid.build()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and validate a UTF-8 JSON configuration."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return _from_dict(data)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def expand_sweep(cfg: RunConfig) -> list[tuple[dict[str, Any], RunConfig]]:
    """Child configs over the Cartesian product of the sweep axes, in a fixed order."""
    if not cfg.sweep:
        return [({}, cfg)]
    out = []
    for combo in itertools.product(*(ax.values for ax in cfg.sweep)):
        data = copy.deepcopy(cfg.raw)
        data.pop("sweep", None)
        point = {}
        for ax, value in zip(cfg.sweep, combo):
            section, name = ax.path.split(".")
            data.setdefault(section, {})[name] = value
            point[ax.path] = value
        out.append((point, _from_dict(data)))
    return out
