"""Anti-resonant hollow-core fiber: window placement and channel loss budgets.

Wavelengths are in micrometers, lengths in kilometers, losses in dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import ConfigurationError, InvalidParameterError, OnResonanceError

SILICA_INDEX = 1.45
# Guard band around a resonance, in micrometers (1 nm).
RESONANCE_GUARD_UM = 1e-3


class FiberSpec(BaseModel):
    """Physical description of the hollow-core channel.

    ``window_loss`` maps the anti-resonant window index to a flat attenuation.
    ``interface_loss`` is keyed by band name; ``bands`` gives each band's
    wavelength range so that a wavelength can be mapped to its interface loss.
    ``point_loss`` optionally overrides the flat window value at specific
    wavelengths (matched within the resonance guard band).
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    membrane_thickness_um: float = Field(1.2, gt=0)
    refractive_index: float = Field(SILICA_INDEX, gt=1)
    window_loss: dict[int, float] = Field(default_factory=lambda: {2: 1.9, 3: 0.65})
    window_min_loss: dict[int, float] = Field(default_factory=lambda: {2: 1.5, 3: 0.39, 4: 2.5})
    interface_loss: dict[str, float] = Field(default_factory=lambda: {"quantum": 2.6, "classical": 2.1})
    bands: dict[str, tuple[float, float]] = Field(
        default_factory=lambda: {"quantum": (0.90, 1.00), "classical": (1.50, 1.60)}
    )
    point_loss: dict[float, float] = Field(default_factory=dict)
    length: float = Field(0.34, ge=0)
    num_interfaces: int = Field(2, ge=0)

    @field_validator("window_loss", "window_min_loss")
    @classmethod
    def _windows(cls, v: dict[int, float]) -> dict[int, float]:
        for m, loss in v.items():
            if m < 1:
                raise ValueError(f"window index must be a positive integer, got {m}")
            if loss < 0:
                raise ValueError(f"attenuation must be >= 0, got {loss} for window {m}")
        return v

    @field_validator("interface_loss", "point_loss")
    @classmethod
    def _nonnegative(cls, v: dict) -> dict:
        for k, loss in v.items():
            if loss < 0:
                raise ValueError(f"loss must be >= 0, got {loss} for {k!r}")
        return v

    @model_validator(mode="after")
    def _band_ranges(self) -> "FiberSpec":
        for name, (lo, hi) in self.bands.items():
            if not 0 < lo < hi:
                raise ValueError(f"band {name!r} needs 0 < lo < hi, got ({lo}, {hi})")
        return self


@dataclass(frozen=True)
class LossBudget:
    propagation_db: float
    interface_db: float

    @property
    def total_db(self) -> float:
        return self.propagation_db + self.interface_db

    @property
    def transmittance(self) -> float:
        return db_to_transmittance(self.total_db)

    def __add__(self, other: "LossBudget") -> "LossBudget":
        return LossBudget(self.propagation_db + other.propagation_db, self.interface_db + other.interface_db)


def db_to_transmittance(loss_db: float) -> float:
    return 10.0 ** (-loss_db / 10.0)


def transmittance_to_db(transmittance: float) -> float:
    if not 0 < transmittance <= 1:
        raise InvalidParameterError(f"transmittance must lie in (0, 1], got {transmittance}")
    return -10.0 * math.log10(transmittance)


def _check_membrane(thickness_um: float, index: float) -> None:
    if not thickness_um > 0:
        raise InvalidParameterError(f"membrane thickness must be > 0, got {thickness_um}")
    if not index > 1:
        raise InvalidParameterError(f"refractive index must be > 1, got {index}")


def resonance_wavelengths(thickness_um: float, index: float = SILICA_INDEX, m_max: int = 4) -> list[float]:
    """Membrane resonances ``lambda_m = (2 t / m) sqrt(n^2 - 1)`` for m = 1..m_max."""
    _check_membrane(thickness_um, index)
    if m_max < 1:
        raise InvalidParameterError(f"m_max must be >= 1, got {m_max}")
    first = 2.0 * thickness_um * math.sqrt(index * index - 1.0)
    return [first / m for m in range(1, m_max + 1)]


def window_index(
    wavelength_um: float,
    thickness_um: float,
    index: float = SILICA_INDEX,
    guard_um: float = RESONANCE_GUARD_UM,
) -> int:
    """Index m of the anti-resonant window holding ``wavelength_um``.

    Window m spans ``(lambda_m, lambda_{m-1})`` with ``lambda_0 = inf``, so
    everything longer than the fundamental resonance is window 1.
    """
    _check_membrane(thickness_um, index)
    if not wavelength_um > 0:
        raise InvalidParameterError(f"wavelength must be > 0, got {wavelength_um}")
    first = 2.0 * thickness_um * math.sqrt(index * index - 1.0)
    m = math.floor(first / wavelength_um) + 1
    for neighbour in (m - 1, m):
        if neighbour >= 1 and abs(wavelength_um - first / neighbour) < guard_um:
            raise OnResonanceError(
                f"{wavelength_um} um is within {guard_um * 1e3:g} nm of resonance m={neighbour} "
                f"({first / neighbour:.6g} um)"
            )
    return m


def band_of(spec: FiberSpec, wavelength_um: float) -> str:
    for name, (lo, hi) in spec.bands.items():
        if lo <= wavelength_um <= hi:
            return name
    raise ConfigurationError(f"no band configured for {wavelength_um} um (bands: {dict(spec.bands)})")


def attenuation_db_per_km(spec: FiberSpec, wavelength_um: float) -> float:
    for point, loss in spec.point_loss.items():
        if abs(point - wavelength_um) < RESONANCE_GUARD_UM:
            return loss
    m = window_index(wavelength_um, spec.membrane_thickness_um, spec.refractive_index)
    try:
        return spec.window_loss[m]
    except KeyError:
        raise ConfigurationError(
            f"no attenuation configured for window {m} ({wavelength_um} um)"
        ) from None


def channel_loss(spec: FiberSpec, wavelength_um: float) -> LossBudget:
    """Propagation plus interface loss of the whole link at one wavelength."""
    alpha = attenuation_db_per_km(spec, wavelength_um)
    band = band_of(spec, wavelength_um)
    try:
        per_interface = spec.interface_loss[band]
    except KeyError:
        raise ConfigurationError(f"no interface loss configured for band {band!r}") from None
    return LossBudget(spec.length * alpha, spec.num_interfaces * per_interface)


def improvement_scenario(
    spec: FiberSpec,
    new_prop_loss: float,
    new_interface_loss: float,
    band: str = "quantum",
) -> FiberSpec:
    """Copy of ``spec`` with the given band's window and interface losses replaced."""
    if new_prop_loss < 0 or new_interface_loss < 0:
        raise InvalidParameterError("replacement losses must be >= 0")
    if band not in spec.bands:
        raise ConfigurationError(f"unknown band {band!r}")
    lo, hi = spec.bands[band]
    m = window_index(0.5 * (lo + hi), spec.membrane_thickness_um, spec.refractive_index)
    window_loss = {**spec.window_loss, m: new_prop_loss}
    interface_loss = {**spec.interface_loss, band: new_interface_loss}
    # point overrides inside the band would shadow the new flat value
    point_loss = {w: v for w, v in spec.point_loss.items() if not lo <= w <= hi}
    return spec.model_copy(
        update={"window_loss": window_loss, "interface_loss": interface_loss, "point_loss": point_loss}
    )


def fiber_report(spec: FiberSpec, wavelengths_um) -> list[dict]:
    """Rows of (wavelength_um, window, prop_db, iface_db, total_db, transmittance)."""
    rows = []
    for wl in wavelengths_um:
        budget = channel_loss(spec, wl)
        rows.append(
            {
                "wavelength_um": wl,
                "window": window_index(wl, spec.membrane_thickness_um, spec.refractive_index),
                "prop_db": budget.propagation_db,
                "iface_db": budget.interface_db,
                "total_db": budget.total_db,
                "transmittance": budget.transmittance,
            }
        )
    return rows
