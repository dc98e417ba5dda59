"""Run configuration: a single strict JSON document per scenario."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .bb84 import ReceiverSpec
from .errors import ConfigurationError
from .fiber import FiberSpec
from .link import CoPropagationSpec, DetectorSpec
from .photon_stats import DEFAULT_BIN_WIDTH_PS, DEFAULT_SPAN_PS, DEFAULT_WINDOW_PS
from .source import SourceSpec

ScenarioType = Literal["hbt", "hom", "bb84_pol", "bb84_timebin", "keyrate", "fiber_report", "coprop_null"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SourceConfig(SourceSpec):
    """Source section; the optional targets replace ``p2`` and ``wavepacket_overlap``."""

    g2_target: float | None = Field(None, ge=0, lt=1)
    hom_visibility_target: float | None = Field(None, ge=0, le=1)


class ReceiverConfig(ReceiverSpec):
    """Receiver section; ``qber_target`` sets the misalignment (polarization) or
    phase error (time-bin), ``sifted_rate_target`` (Hz) sets the coupling efficiency."""

    qber_target: float | None = Field(None, ge=0, le=0.5)
    sifted_rate_target: float | None = Field(None, gt=0)


class ProtocolConfig(_Strict):
    encoding: Literal["polarization", "time_bin"] | None = None
    rounds: int = Field(10_000_000, ge=1)
    z_prob: float | None = Field(None, ge=0, le=1)
    gate_offset_ps: int | None = None


class AnalysisConfig(_Strict):
    num_pulses: int = Field(10_000_000, ge=2)
    bin_width_ps: int = Field(DEFAULT_BIN_WIDTH_PS, gt=0)
    span_ps: int | None = Field(None, gt=0)
    window_ps: int = Field(DEFAULT_WINDOW_PS, gt=0)
    exclude_orders: list[int] | None = None

    @model_validator(mode="after")
    def _grid(self) -> "AnalysisConfig":
        if self.span_ps is not None and self.span_ps % self.bin_width_ps:
            raise ValueError("bin_width_ps must divide span_ps")
        return self


class DistanceScenario(_Strict):
    label: str
    prop_loss_db_per_km: float = Field(gt=0)
    fixed_loss_db: float = Field(0.0, ge=0)


class KeyrateConfig(_Strict):
    gain: float | None = Field(None, gt=0, le=1)
    qber: float | None = Field(None, ge=0, le=0.5)
    p_multi: float | None = Field(None, ge=0, le=1)
    f_ec: float = Field(1.16, ge=1)
    sift_factor: float = Field(0.5, gt=0, le=1)
    loss_start_db: float = 0.0
    loss_stop_db: float = 10.0
    loss_step_db: float = Field(0.25, gt=0)
    prop_losses_db_per_km: list[float] = Field(default_factory=lambda: [0.1, 0.2, 0.4, 0.65, 1.0, 1.7, 2.5])
    scenarios: list[DistanceScenario] = Field(default_factory=list)


class RunConfig(_Strict):
    scenario_name: str = "custom"
    scenario: ScenarioType = "hbt"
    seed: int = Field(1, ge=0, lt=2**64)
    fiber: FiberSpec = Field(default_factory=FiberSpec)
    source: SourceConfig = Field(default_factory=SourceConfig)
    detector: DetectorSpec = Field(default_factory=DetectorSpec)
    receiver: ReceiverConfig = Field(default_factory=ReceiverConfig)
    coprop: CoPropagationSpec = Field(default_factory=CoPropagationSpec)
    protocol: ProtocolConfig = Field(default_factory=ProtocolConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    keyrate: KeyrateConfig = Field(default_factory=KeyrateConfig)
    report_wavelengths_um: list[float] = Field(default_factory=lambda: [0.934, 1.55])

    @model_validator(mode="after")
    def _encoding_matches(self) -> "RunConfig":
        implied = {"bb84_pol": "polarization", "bb84_timebin": "time_bin"}.get(self.scenario)
        enc = self.protocol.encoding
        if implied and enc and enc != implied:
            raise ValueError(f"scenario {self.scenario} conflicts with protocol.encoding={enc}")
        return self

    @property
    def encoding(self) -> str:
        if self.protocol.encoding:
            return self.protocol.encoding
        return "time_bin" if self.scenario == "bb84_timebin" else "polarization"

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def _format_errors(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        parts.append(f"{loc}: {e['msg']}" if loc else e["msg"])
    return "; ".join(parts)


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigurationError(f"invalid configuration: {_format_errors(err)}") from None


def load_config(path) -> RunConfig:
    """Load and validate a JSON run configuration (path or bundled preset name)."""
    path = resolve_config_path(path)
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigurationError(f"cannot parse {path}: {err}") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a JSON object")
    return parse_config(data)


def preset_names() -> list[str]:
    root = resources.files("hcfqkd") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def preset_path(name: str) -> Path:
    name = name.removesuffix(".json")
    p = resources.files("hcfqkd") / "presets" / f"{name}.json"
    if not p.is_file():
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return Path(str(p))


def resolve_config_path(path) -> Path:
    p = Path(path)
    if p.exists():
        return p
    if p.suffix in ("", ".json") and p.parent == Path("."):
        return preset_path(p.name)
    raise ConfigurationError(f"configuration file not found: {path}")
