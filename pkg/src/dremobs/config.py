"""Scenario configuration: YAML file, defaults, dotted overrides, validation.

Every field has a default, so an empty file (or no file) is the canonical
scenario.  Unknown sections or keys are reported as errors, which catches
misspelt gain names before a long run.

Example file::

    observer:
      gamma_lambda: 1.0e18
      mode: certainty-equivalence
    simulation:
      duration: 6.0

Overrides use dotted keys, ``observer.gamma_r=1e-3``; the value is parsed
as YAML, so lists such as ``regression.alphas=[5,10,15,20,25,30]`` work.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .electrical import DEFAULT_ALPHAS, check_alphas
from .motor import ControllerGains, MotorParams

MODES = ("ground-truth", "certainty-equivalence")


class ConfigError(ValueError):
    """Invalid scenario configuration; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))
        self.errors = list(errors)


@dataclass
class MotorSection:
    Ls: float = 0.14
    Lr: float = 0.14
    M: float = 0.117
    Rs: float = 1.7
    Rr_true: float = 3.9
    J: float = 1.1e-4
    n_p: int = 1
    # the load is not stated with the machine data; this is a chosen scenario value
    TL_true: float = 0.05


@dataclass
class ControllerSection:
    Kp: float = 100.0
    Ki: float = 100.0
    Klp: float = 10.0
    Kli: float = 100.0
    Kwp: float = 10.0
    Kwi: float = 10.0
    lambda_norm_ref: float = 0.0455
    omega_ref: float = 40.0
    flux_floor: float = 1e-6
    # rotor resistance used inside the flux loop; None means the true value
    Rr_for_control: float | None = None
    # from this time on the inverter output is forced to zero (None: never)
    voltage_cutoff: float | None = None


@dataclass
class ModulationSection:
    """Optional sinusoidal perturbation of the references and of the voltage."""

    flux_depth: float = 0.0
    flux_freq: float = 0.0
    speed_amp: float = 0.0
    speed_freq: float = 0.0
    injection_amp: float = 0.0
    injection_freq: float = 0.0


@dataclass
class RegressionSection:
    alphas: tuple = DEFAULT_ALPHAS
    a: float = 50.0
    # time at which the regression filters start receiving (i, v); zero inputs before
    start: float = 0.0
    filter_ic: float = 0.0


@dataclass
class ObserverSection:
    gamma_lambda: float = 1e-3
    gamma_r: float = 1e-4
    gamma_omega: float = 1e6
    gamma_T: float = 1e6
    enable_time: float = 2.0
    mode: str = "ground-truth"
    # certainty-equivalence gate: open once gamma_lambda * int Delta_e^2 >= decades * ln 10
    ce_gate_decades: float = 3.0


@dataclass
class InitialSection:
    lambda0: tuple = (0.02, 0.0)
    i0: tuple = (0.0, 0.0)
    omega0: float = 0.0
    # rotor angle; no implemented equation uses it, accepted for completeness
    theta0: float = -3.0
    lambda_hat0: tuple = (0.0, 0.0)
    Rr_hat0: float = 0.0
    TL_hat0: float = 0.0
    omega_hat0: float = 0.0


@dataclass
class SimulationSection:
    dt: float = 2e-5
    duration: float = 10.0
    log_every: int = 100
    output: str = "telemetry.csv"


@dataclass
class ScenarioConfig:
    motor: MotorSection = field(default_factory=MotorSection)
    controller: ControllerSection = field(default_factory=ControllerSection)
    modulation: ModulationSection = field(default_factory=ModulationSection)
    regression: RegressionSection = field(default_factory=RegressionSection)
    observer: ObserverSection = field(default_factory=ObserverSection)
    initial: InitialSection = field(default_factory=InitialSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)

    def motor_params(self) -> MotorParams:
        return MotorParams(**dataclasses.asdict(self.motor))

    def controller_gains(self) -> ControllerGains:
        c = self.controller
        return ControllerGains(c.Kp, c.Ki, c.Klp, c.Kli, c.Kwp, c.Kwi,
                               c.lambda_norm_ref, c.omega_ref)

    @property
    def ce_gate(self) -> float:
        """Threshold on int Delta_e^2 that releases the mechanical chain in CE mode."""
        return self.observer.ce_gate_decades * math.log(10.0) / self.observer.gamma_lambda

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def validate(self) -> list[str]:
        errors = self.motor_params().validate() + self.controller_gains().validate()
        c, r, o, s, i, m = (self.controller, self.regression, self.observer,
                            self.simulation, self.initial, self.modulation)
        if not c.lambda_norm_ref > 0:
            errors.append("controller.lambda_norm_ref must be positive")
        if not c.flux_floor > 0:
            errors.append("controller.flux_floor must be positive")
        if c.Rr_for_control is not None and not c.Rr_for_control > 0:
            errors.append("controller.Rr_for_control must be positive or null")
        if c.voltage_cutoff is not None and not c.voltage_cutoff >= 0:
            errors.append("controller.voltage_cutoff must be non-negative or null")
        if not 0.0 <= m.flux_depth < 1.0:
            errors.append("modulation.flux_depth must lie in [0, 1)")
        for name in ("flux_freq", "speed_freq", "injection_freq", "speed_amp", "injection_amp"):
            if not getattr(m, name) >= 0:
                errors.append(f"modulation.{name} must be non-negative")
        errors += [f"regression.alphas: {e}" for e in check_alphas(r.alphas)]
        if not r.a > 0:
            errors.append("regression.a must be positive")
        if not r.start >= 0:
            errors.append("regression.start must be non-negative")
        elif r.start > o.enable_time:
            errors.append("regression.start must not exceed observer.enable_time")
        if not math.isfinite(r.filter_ic):
            errors.append("regression.filter_ic must be finite")
        for name in ("gamma_lambda", "gamma_r", "gamma_omega", "gamma_T"):
            value = getattr(o, name)
            if not (math.isfinite(value) and value > 0):
                errors.append(f"observer.{name} must be a positive finite number, got {value!r}")
        if not o.enable_time >= 0:
            errors.append("observer.enable_time must be non-negative")
        if o.mode not in MODES:
            errors.append(f"observer.mode must be one of {MODES}, got {o.mode!r}")
        if not o.ce_gate_decades >= 0:
            errors.append("observer.ce_gate_decades must be non-negative")
        if not (math.isfinite(s.dt) and s.dt > 0):
            errors.append("simulation.dt must be positive")
        if not (math.isfinite(s.duration) and s.duration > 0):
            errors.append("simulation.duration must be positive")
        elif s.dt > 0 and s.duration < s.dt:
            errors.append("simulation.duration must cover at least one step")
        if s.log_every < 1:
            errors.append("simulation.log_every must be at least 1")
        if not s.output:
            errors.append("simulation.output must be a non-empty path")
        for name in ("lambda0", "i0", "lambda_hat0"):
            vec = getattr(i, name)
            if len(vec) != 2 or not all(math.isfinite(x) for x in vec):
                errors.append(f"initial.{name} must be two finite numbers")
        for name in ("omega0", "theta0", "Rr_hat0", "TL_hat0", "omega_hat0"):
            if not math.isfinite(getattr(i, name)):
                errors.append(f"initial.{name} must be finite")
        return errors

    def warnings(self) -> list[str]:
        notes = []
        if self.simulation.duration <= self.observer.enable_time:
            notes.append("simulation.duration does not exceed observer.enable_time: "
                         "the estimators never run and keep their initial values")
        return notes


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _coerce(default: Any, value: Any, key: str, errors: list[str]):
    """Convert ``value`` to the kind of ``default``; append to ``errors`` on failure."""
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise TypeError
            return int(float(value))
        if isinstance(default, float) or default is None:
            if value is None and default is None:
                return None
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(default, tuple):
            if isinstance(value, (str, bytes)) or not hasattr(value, "__iter__"):
                raise TypeError
            return tuple(float(v) for v in value)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        pass
    kind = "number or null" if default is None else type(default).__name__
    errors.append(f"{key}: expected {kind}, got {value!r}")
    return default


def _section_from(cls, data: Any, name: str, errors: list[str]):
    section = cls()
    if data is None:
        return section
    if not isinstance(data, dict):
        errors.append(f"{name}: expected a mapping, got {type(data).__name__}")
        return section
    known = {f.name for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in known:
            errors.append(f"unknown key {name}.{key}")
            continue
        setattr(section, key, _coerce(getattr(section, key), value, f"{name}.{key}", errors))
    return section


def config_from_dict(data: dict | None) -> ScenarioConfig:
    """Build and validate a config; raises :class:`ConfigError` listing all problems."""
    data = data or {}
    errors: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError([f"top level must be a mapping, got {type(data).__name__}"])
    sections = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
    kwargs = {}
    for key in data:
        if key not in sections:
            errors.append(f"unknown section {key!r}")
    for name, f in sections.items():
        kwargs[name] = _section_from(type(f.default_factory()), data.get(name), name, errors)
    cfg = ScenarioConfig(**kwargs)
    # fields that failed to parse kept their defaults, so validation is still meaningful
    errors += cfg.validate()
    if errors:
        raise ConfigError(errors)
    return cfg


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` strings to a nested dict (returns a new dict)."""
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in (data or {}).items()}
    errors = []
    for item in overrides:
        key, sep, raw = item.partition("=")
        parts = key.strip().split(".")
        if not sep or len(parts) != 2 or not all(parts):
            errors.append(f"override {item!r} is not of the form section.key=value")
            continue
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            errors.append(f"override {item!r}: {exc}")
            continue
        section = out.setdefault(parts[0], {})
        if not isinstance(section, dict):
            errors.append(f"override {item!r}: {parts[0]} is not a section")
            continue
        section[parts[1]] = value
    if errors:
        raise ConfigError(errors)
    return out


def load_config(path: str | Path | None = None, overrides: list[str] | None = None,
                base: dict | None = None) -> ScenarioConfig:
    """Read an optional YAML file on top of ``base`` and apply overrides."""
    data = _merge({}, base or {})
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text())
        except OSError as exc:
            raise ConfigError([f"cannot read {path}: {exc}"]) from exc
        except yaml.YAMLError as exc:
            raise ConfigError([f"{path}: not valid YAML: {exc}"]) from exc
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError([f"{path}: top level must be a mapping"])
        data = _merge(data, loaded or {})
    data = apply_overrides(data, overrides or [])
    return config_from_dict(data)


def _merge(a: dict, b: dict) -> dict:
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in a.items()}
    for k, v in b.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


# Named starting points.  "canonical" is the default machine and protocol;
# "excited" adds a flux-reference modulation strong enough for Delta_e to
# matter and raises the electrical gains to match its tiny magnitude;
# "unexcited" switches the inverter off so every regressor decays.
PRESETS: dict[str, dict] = {
    "canonical": {},
    "excited": {
        "modulation": {"flux_depth": 0.8, "flux_freq": 20.0},
        "observer": {"gamma_lambda": 1e18, "gamma_r": 1e18},
    },
    "unexcited": {
        "controller": {"voltage_cutoff": 1.0},
        "observer": {"gamma_lambda": 1e18, "gamma_r": 1e18},
        "simulation": {"duration": 4.0},
    },
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError([f"unknown preset {name!r}; choose from {sorted(PRESETS)}"])
    return _merge({}, PRESETS[name])
