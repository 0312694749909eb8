"""Scenario configuration: schema, defaults, validation and round-tripping.

Configs are YAML or JSON mappings::

    mode: teleport            # entangle | teleport | qkd | full
    seed: 1                   # 64-bit unsigned
    trials: 10
    source:    {pair_rate_hz, duration_ns, pump_wavelength_nm,
                down_converted_wavelength_nm, emitted_bell_state}
    detectors: {efficiency, jitter_sigma_ns}
    window:    {window_ns}    # ``window_ns`` is also accepted at top level
    channel:   {latency_ns, loss_probability}
    trigger:   {min_coincidences, interval_ns}
    command_table: {"00": {linear_velocity_mps, angular_velocity_radps, duration_s}, ...}
    eve_enabled: false
    output_dir: qtelesim_out

plus the run knobs listed in ``ScenarioConfig``. Omitted keys take the
defaults of the corresponding dataclass.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .autonomy import DEFAULT_DT_S, TriggerConfig, default_command_table, make_command_table
from .channel import ChannelConfig
from .errors import ParseError, ValidationError
from .optics import CoincidenceWindow, DetectorConfig, SourceConfig
from .rng import SEED_MAX

MODES = ("entangle", "teleport", "qkd", "full")


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str = "teleport"
    seed: int = 0
    trials: int = 100
    source: SourceConfig = field(default_factory=SourceConfig)
    detectors: DetectorConfig = field(default_factory=DetectorConfig)
    window: CoincidenceWindow = field(default_factory=CoincidenceWindow)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    command_table: dict = field(default_factory=default_command_table)
    eve_enabled: bool = False
    output_dir: str = "qtelesim_out"
    # run knobs
    trial_spacing_ns: float = 1000.0
    qber_sample_fraction: float = 0.5
    polarizer_deg: Optional[float] = None
    dt_s: float = DEFAULT_DT_S
    max_commands: int = 16
    command_bits: Optional[str] = None
    bit_sources: dict = field(default_factory=lambda: {"Alice": "A", "Bob": "B"})

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"must be one of {MODES}", "mode")
        _require_int(self.seed, "seed", lo=0, hi=SEED_MAX)
        _require_int(self.trials, "trials", lo=1)
        _require_int(self.max_commands, "max_commands", lo=0)
        if not isinstance(self.eve_enabled, bool):
            raise ValidationError("must be a boolean", "eve_enabled")
        if not self.trial_spacing_ns > 0:
            raise ValidationError("must be > 0", "trial_spacing_ns")
        if not 0 < self.qber_sample_fraction <= 1:
            raise ValidationError("must lie in (0, 1]", "qber_sample_fraction")
        if not self.dt_s > 0:
            raise ValidationError("must be > 0", "dt_s")
        if self.command_bits is not None and (
            not isinstance(self.command_bits, str) or set(self.command_bits) - {"0", "1"}
        ):
            raise ValidationError("must be a bit string", "command_bits")
        if set(self.bit_sources) != {"Alice", "Bob"} or set(self.bit_sources.values()) - {"A", "B"}:
            raise ValidationError("must map Alice and Bob to arm 'A' or 'B'", "bit_sources")

    def replace(self, **changes) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)


def _require_int(value, name, lo=None, hi=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError("must be an integer", name)
    if lo is not None and value < lo:
        raise ValidationError(f"must be >= {lo}", name)
    if hi is not None and value > hi:
        raise ValidationError(f"must be <= {hi}", name)


_SECTIONS = {
    "source": SourceConfig,
    "detectors": DetectorConfig,
    "window": CoincidenceWindow,
    "channel": ChannelConfig,
    "trigger": TriggerConfig,
}


def _build_section(name: str, cls, raw) -> Any:
    if not isinstance(raw, dict):
        raise ValidationError("must be a mapping", name)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"unknown keys {sorted(unknown)}", name)
    for key, value in raw.items():
        if key != "emitted_bell_state" and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ValidationError("must be a number", f"{name}.{key}")
    return cls(**raw)


def _opcode_key(key) -> str:
    # YAML 1.1 reads bare 00/01/10/11 as integers 0/1/10/11
    return f"{key:02d}" if isinstance(key, int) and not isinstance(key, bool) else str(key)


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ParseError("top level must be a mapping")
    data = dict(data)
    kwargs = {}
    if "window_ns" in data:
        window = data.setdefault("window", {})
        if not isinstance(window, dict):
            raise ValidationError("must be a mapping", "window")
        data["window"] = {**window, "window_ns": data.pop("window_ns")}
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build_section(name, cls, data.pop(name))
    if "command_table" in data:
        raw = data.pop("command_table")
        if not isinstance(raw, dict):
            raise ValidationError("must be a mapping", "command_table")
        try:
            kwargs["command_table"] = make_command_table({_opcode_key(k): v for k, v in raw.items()})
        except TypeError as exc:
            raise ValidationError(str(exc), "command_table") from None
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown keys {sorted(unknown)}", "config")
    kwargs.update(data)
    try:
        return ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise ValidationError(str(exc), "config") from None


class _Loader(yaml.SafeLoader):
    pass


# YAML 1.1 leaves dotless exponents such as 1e-30 as strings; JSON does not
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)[eE][-+]?[0-9]+$"),
    list("-+0123456789."),
)


def parse_config(text: str) -> ScenarioConfig:
    """Parse YAML/JSON text into a validated :class:`ScenarioConfig`."""
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(str(getattr(exc, "problem", None) or exc),
                         line=mark.line + 1 if mark else None) from None
    if data is None:
        data = {}
    return config_from_dict(data)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in _SECTIONS:
            value = dataclasses.asdict(value)
            if f.name == "source":
                value["emitted_bell_state"] = cfg.source.emitted_bell_state.name
        elif f.name == "command_table":
            value = {k: v.to_dict() for k, v in sorted(value.items())}
        elif f.name == "bit_sources":
            value = dict(sorted(value.items()))
        out[f.name] = value
    return out


def serialize_config(cfg: ScenarioConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True)


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


__all__ = [
    "MODES",
    "ScenarioConfig",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "parse_config",
    "serialize_config",
]
