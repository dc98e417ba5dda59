"""Quantum-dot single-photon source: photon-number statistics and emission streams."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import rng
from .errors import InfeasibleError, InvalidParameterError


class SourceSpec(BaseModel):
    """Emitter description at the fiber input.

    ``p1`` and ``p2`` are the per-pulse probabilities of one and two photons
    in the collection fiber. ``wavepacket_overlap`` is the probability that
    two photons are indistinguishable.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    rep_rate: float = Field(80e6, gt=0)
    p1: float = Field(0.253, ge=0, le=1)
    p2: float = Field(0.0, ge=0, le=1)
    wavepacket_overlap: float = Field(1.0, ge=0, le=1)
    pulse_area: float = Field(math.pi, ge=0)
    wavelength_um: float = Field(0.9339, gt=0)

    @model_validator(mode="after")
    def _normalised(self) -> "SourceSpec":
        if self.p1 + self.p2 > 1 + 1e-12:
            raise ValueError(f"p1 + p2 must be <= 1, got {self.p1 + self.p2}")
        return self

    @property
    def p0(self) -> float:
        return max(0.0, 1.0 - self.p1 - self.p2)

    @property
    def rep_period_ps(self) -> int:
        return int(round(1e12 / self.rep_rate))

    def at_pulse_area(self, area: float) -> "SourceSpec":
        """Spec driven at ``area``; p1/p2 are taken as the pi-pulse values."""
        scale = rabi_excitation_probability(area)
        return self.model_copy(update={"p1": self.p1 * scale, "p2": self.p2 * scale, "pulse_area": area})


def rabi_excitation_probability(pulse_area: float) -> float:
    """Ideal two-level inversion after a resonant pulse of the given area."""
    if pulse_area < 0:
        raise InvalidParameterError(f"pulse area must be >= 0, got {pulse_area}")
    return math.sin(pulse_area / 2.0) ** 2


def effective_mu(spec: SourceSpec) -> float:
    return spec.p1 + 2.0 * spec.p2


def target_g2_to_p2(g2_target: float, p1: float) -> float:
    """Two-photon probability giving an ideal-detector HBT ``g2 = 2 p2 / mu^2``.

    Solves ``4 g p2^2 + (4 g p1 - 2) p2 + g p1^2 = 0`` exactly and takes the
    root that vanishes as g -> 0.
    """
    if not 0 <= g2_target < 1:
        raise InvalidParameterError(f"g2 target must lie in [0, 1), got {g2_target}")
    if not 0 <= p1 <= 1:
        raise InvalidParameterError(f"p1 must lie in [0, 1], got {p1}")
    if g2_target == 0:
        return 0.0
    g = g2_target
    disc = 1.0 - 4.0 * g * p1
    if disc < 0:
        raise InfeasibleError(f"no p2 reaches g2={g} with p1={p1}")
    # (1 - 2gp1 - sqrt(1 - 4gp1)) / (4g), written to avoid cancellation
    p2 = g * p1 * p1 / (1.0 - 2.0 * g * p1 + math.sqrt(disc))
    if p2 < 0 or p1 + p2 > 1:
        raise InfeasibleError(f"g2={g} with p1={p1} needs p2={p2:.6g}, leaving p0 < 0")
    return p2


def ideal_g2(spec: SourceSpec) -> float:
    mu = effective_mu(spec)
    return 2.0 * spec.p2 / (mu * mu) if mu > 0 else 0.0


@dataclass(frozen=True)
class EmissionEvent:
    pulse_index: int
    photon_count: int
    qubit_state: object = None
    distinguishability_tags: tuple[int, ...] = ()


@dataclass
class EmissionStream:
    """Photons emitted by pulses ``[start, stop)``.

    Photon-level arrays are sorted by pulse. ``photon_slot`` (0 or 1) is the
    photon's position within its pulse and, together with ``photon_pulse``,
    addresses all of its downstream random draws. ``photon_tag`` is the mode
    label: 0 is the common mode, any other value is unique to one photon.
    ``basis``/``bit`` are per-pulse qubit choices once a protocol has encoded
    the stream.
    """

    start: int
    stop: int
    rep_period_ps: int
    photon_pulse: np.ndarray
    photon_slot: np.ndarray
    photon_tag: np.ndarray
    basis: np.ndarray | None = None
    bit: np.ndarray | None = None
    encoding: str | None = field(default=None)

    @property
    def num_pulses(self) -> int:
        return self.stop - self.start

    @property
    def num_photons(self) -> int:
        return int(self.photon_pulse.size)

    @property
    def photon_count(self) -> np.ndarray:
        """Photons per pulse, indexed from ``start``."""
        return np.bincount(self.photon_pulse - self.start, minlength=self.num_pulses).astype(np.int8)

    def subset(self, keep: np.ndarray) -> "EmissionStream":
        return EmissionStream(
            self.start, self.stop, self.rep_period_ps,
            self.photon_pulse[keep], self.photon_slot[keep], self.photon_tag[keep],
            self.basis, self.bit, self.encoding,
        )

    def events(self) -> Iterator[EmissionEvent]:
        """Per-pulse view; intended for inspection of short streams."""
        counts = self.photon_count
        offsets = np.concatenate(([0], np.cumsum(counts)))
        for i in range(self.num_pulses):
            tags = tuple(int(t) for t in self.photon_tag[offsets[i]:offsets[i + 1]])
            state = None
            if self.basis is not None:
                from .bb84 import QubitState

                state = QubitState(self.encoding or "polarization", "ZX"[self.basis[i]], int(self.bit[i]))
            yield EmissionEvent(self.start + i, int(counts[i]), state, tags)


def _unique_tag(pulse: np.ndarray, slot: np.ndarray) -> np.ndarray:
    return 1 + 2 * pulse + slot


def emit_stream(spec: SourceSpec, num_pulses: int, seed: int, start: int = 0) -> EmissionStream:
    """Draw photon numbers and mode labels for pulses ``[start, start + num_pulses)``.

    Each photon carries the common mode label with probability
    ``sqrt(wavepacket_overlap)``, so that two photons share a label (and
    interfere) with probability ``wavepacket_overlap``.
    """
    if num_pulses < 0:
        raise InvalidParameterError(f"num_pulses must be >= 0, got {num_pulses}")
    stop = start + num_pulses
    u = rng.pulse_uniforms(seed, "emit", start, stop, (3,))
    counts = (u[:, 0] >= spec.p0).astype(np.int64) + (u[:, 0] >= spec.p0 + spec.p1)
    pulses = np.arange(start, stop, dtype=np.int64)
    photon_pulse = np.repeat(pulses, counts)
    # slot 0 for the first photon of a pulse, 1 for the second
    first = np.repeat(np.cumsum(counts) - counts, counts)
    photon_slot = (np.arange(photon_pulse.size) - first).astype(np.int64)
    tag_u = u[photon_pulse - start, 1 + photon_slot]
    common = tag_u < math.sqrt(spec.wavepacket_overlap)
    photon_tag = np.where(common, 0, _unique_tag(photon_pulse, photon_slot))
    return EmissionStream(start, stop, spec.rep_period_ps, photon_pulse, photon_slot, photon_tag)
