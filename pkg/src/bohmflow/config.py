"""Run configuration: flat dotted-key text format with strict validation.

The format is line-oriented ``section.key = value`` with ``#`` comments.
Unknown keys, duplicate keys and malformed values are rejected at parse
time; invariant violations (ranges, couplings between keys) are reported
as :class:`ValidationError`.  ``parse_config(serialize_config(cfg))``
round-trips exactly: floats are rendered with 17 significant digits.
"""

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Tuple

from .errors import ParseError, ValidationError
from .ensemble import GridSpec
from .integrate import IntegrationControls
from .models import OscillatorFrequencies, SingleNodeModel, make_two_qubit

SQRT1_2 = math.sqrt(0.5)
SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class ModelConfig:
    type: str = "two_qubit"
    c2: float = SQRT1_2
    a0: float = 2.5
    a: float = 1.0
    b: float = 1.0
    c: float = SQRT1_2
    omega_x: float = 1.0
    omega_y: float = SQRT3


@dataclass(frozen=True)
class AnalysisConfig:
    threshold_d: float = 1.0
    min_gap: float = 0.2
    k_window: int = 51
    class_window: float = 0.0  # 0 = auto (trailing decade)
    class_floor: float = 1e-3


@dataclass(frozen=True)
class EnsembleConfig:
    x_min: float = -4.0
    x_max: float = 4.0
    y_min: float = -4.0
    y_max: float = 4.0
    n_x: int = 20
    n_y: int = 20
    sampling: str = "uniform-grid"
    seed: int = 0
    checkpoints: Tuple[float, ...] = (2500.0, 5000.0, 10000.0)
    c2_values: Tuple[float, ...] = (0.5, 0.6, SQRT1_2)


@dataclass(frozen=True)
class SimulateConfig:
    x0: float = 0.0
    y0: float = 3.0


@dataclass(frozen=True)
class CriticalConfig:
    t: float = 1.5
    k_window: int = 11


@dataclass(frozen=True)
class ColorplotConfig:
    lo: float = -6.0
    hi: float = 6.0
    bin_size: float = 0.05
    sample_dt: float = 0.05


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    format: str = "csv"


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    integration: IntegrationControls = field(
        default_factory=lambda: IntegrationControls(t_final=20.0))
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    critical: CriticalConfig = field(default_factory=CriticalConfig)
    colorplot: ColorplotConfig = field(default_factory=ColorplotConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def build_model(self):
        freq = OscillatorFrequencies(self.model.omega_x, self.model.omega_y)
        if self.model.type == "two_qubit":
            return make_two_qubit(self.model.c2, a0=self.model.a0,
                                  frequencies=freq)
        return SingleNodeModel(self.model.a, self.model.b, self.model.c, freq)

    def build_grid(self):
        e = self.ensemble
        return GridSpec(x_range=(e.x_min, e.x_max), y_range=(e.y_min, e.y_max),
                        n_x=e.n_x, n_y=e.n_y, sampling=e.sampling, seed=e.seed)


_SECTIONS = {
    "model": ModelConfig,
    "integration": IntegrationControls,
    "analysis": AnalysisConfig,
    "ensemble": EnsembleConfig,
    "simulate": SimulateConfig,
    "critical": CriticalConfig,
    "colorplot": ColorplotConfig,
    "output": OutputConfig,
}

_FIELD_TYPES = {
    (sec, f.name): f.type
    for sec, cls in _SECTIONS.items()
    for f in fields(cls)
}


def _format_value(v):
    if isinstance(v, tuple):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _parse_value(text, ftype, key, line_no):
    text = text.strip()
    try:
        if ftype in ("float", float):
            return float(text)
        if ftype in ("int", int):
            return int(text)
        if ftype in ("str", str):
            return text
        # tuple of floats (comma separated)
        if "Tuple[float" in str(ftype):
            if not text:
                return ()
            return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ParseError(f"cannot parse value {text!r}", line=line_no, key=key)
    raise ParseError(f"unsupported field type {ftype!r}", line=line_no, key=key)


def serialize_config(cfg):
    """Render the full configuration, one dotted key per line."""
    lines = []
    for sec in _SECTIONS:
        obj = getattr(cfg, sec)
        for f in fields(obj):
            lines.append(f"{sec}.{f.name} = {_format_value(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def parse_config(text, base=None):
    """Parse dotted key-value text into a validated :class:`RunConfig`.

    Unknown keys, duplicates and malformed numbers raise
    :class:`ParseError`; invariant violations raise
    :class:`ValidationError` naming the offending constraint.
    """
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'section.key = value'", line=line_no)
        key, _, val = line.partition("=")
        key = key.strip()
        if key.count(".") != 1:
            raise ParseError("key must be 'section.name'", line=line_no, key=key)
        sec, name = key.split(".")
        if (sec, name) not in _FIELD_TYPES:
            raise ParseError("unknown key", line=line_no, key=key)
        if key in values:
            raise ParseError("duplicate key", line=line_no, key=key)
        values[key] = _parse_value(val, _FIELD_TYPES[(sec, name)], key, line_no)

    cfg = base if base is not None else RunConfig()
    per_section = {}
    for key, v in values.items():
        sec, name = key.split(".")
        per_section.setdefault(sec, {})[name] = v
    kwargs = {}
    for sec, upd in per_section.items():
        try:
            kwargs[sec] = replace(getattr(cfg, sec), **upd)
        except (ValueError, TypeError) as exc:
            raise ValidationError(f"[{sec}] {exc}") from exc
    cfg = replace(cfg, **kwargs)
    validate_config(cfg)
    return cfg


def apply_overrides(cfg, overrides):
    """Apply ``key=value`` strings (e.g. from --set flags) on top of a config."""
    text = "\n".join(overrides)
    return parse_config(text, base=cfg)


def validate_config(cfg):
    m = cfg.model
    if m.type not in ("two_qubit", "single_node"):
        raise ValidationError(f"model.type must be two_qubit or single_node, "
                              f"got {m.type!r}")
    if m.omega_x <= 0 or m.omega_y <= 0:
        raise ValidationError("model frequencies must be positive")
    if m.type == "two_qubit":
        if not 0.0 <= m.c2 <= 1.0:
            raise ValidationError(f"model.c2 = {m.c2} outside [0, 1]")
        if m.a0 <= 0:
            raise ValidationError("model.a0 must be positive")
    else:
        if m.b == 0 or m.c == 0:
            raise ValidationError("model.b and model.c must be nonzero")
    e = cfg.ensemble
    if e.x_max <= e.x_min or e.y_max <= e.y_min:
        raise ValidationError("ensemble ranges must be increasing")
    if e.n_x < 1 or e.n_y < 1:
        raise ValidationError("ensemble grid counts must be positive")
    if e.sampling not in ("uniform-grid", "uniform-random"):
        raise ValidationError(f"ensemble.sampling {e.sampling!r} unknown")
    if any(c <= 0 for c in e.checkpoints):
        raise ValidationError("checkpoints must be positive")
    if any(not 0.0 <= c <= 1.0 for c in e.c2_values):
        raise ValidationError("ensemble.c2_values must lie in [0, 1]")
    a = cfg.analysis
    if a.threshold_d <= 0 or a.min_gap < 0:
        raise ValidationError("analysis.threshold_d must be positive and "
                              "min_gap nonnegative")
    if a.k_window < 1:
        raise ValidationError("analysis.k_window must be >= 1")
    c = cfg.colorplot
    if c.hi <= c.lo or c.bin_size <= 0 or c.sample_dt <= 0:
        raise ValidationError("colorplot region/bin settings invalid")
    if cfg.output.format not in ("csv",):
        raise ValidationError(f"output.format {cfg.output.format!r} unsupported")
    return cfg
