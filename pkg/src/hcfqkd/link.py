"""Discrete-event link: loss thinning, detectors, background and time-tag streams.

All times are integer picoseconds.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from . import rng
from .errors import InvalidParameterError, UnsortedInputError
from .source import EmissionStream

# Background processes are generated in fixed time blocks so that any split of
# the time axis reproduces the same records.
BACKGROUND_BLOCK_PS = 1 << 32


class DetectorSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    efficiency: float = Field(0.85, ge=0, le=1)
    dark_count_rate: float = Field(100.0, ge=0)
    dead_time_ns: float = Field(10.0, ge=0)
    jitter_sigma_ps: float = Field(30.0, ge=0)

    @property
    def dead_time_ps(self) -> int:
        return int(round(self.dead_time_ns * 1000))


class CoPropagationSpec(BaseModel):
    """Classical light sharing the fiber; ``crosstalk_rate_per_mw`` is the
    background click rate it adds to every quantum detector, per mW."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    classical_power_mw: float = Field(0.0, ge=0)
    crosstalk_rate_per_mw: float = Field(0.0, ge=0)

    @property
    def rate_hz(self) -> float:
        return self.classical_power_mw * self.crosstalk_rate_per_mw


@dataclass
class TimeTagStream:
    """Detector clicks ordered by (timestamp, channel)."""

    channel: np.ndarray
    timestamp_ps: np.ndarray
    duration_ps: int

    def __post_init__(self):
        self.channel = np.asarray(self.channel, dtype=np.int16)
        self.timestamp_ps = np.asarray(self.timestamp_ps, dtype=np.int64)
        if self.channel.shape != self.timestamp_ps.shape:
            raise InvalidParameterError("channel and timestamp arrays differ in length")

    def __len__(self) -> int:
        return int(self.timestamp_ps.size)

    @property
    def records(self) -> list[tuple[int, int]]:
        return list(zip(self.channel.tolist(), self.timestamp_ps.tolist()))

    @classmethod
    def empty(cls, duration_ps: int) -> "TimeTagStream":
        return cls(np.empty(0, np.int16), np.empty(0, np.int64), duration_ps)

    @classmethod
    def from_unsorted(cls, channel, timestamp_ps, duration_ps: int) -> "TimeTagStream":
        channel = np.asarray(channel, dtype=np.int16)
        timestamp_ps = np.asarray(timestamp_ps, dtype=np.int64)
        order = np.lexsort((channel, timestamp_ps))
        return cls(channel[order], timestamp_ps[order], duration_ps)

    def validate(self) -> None:
        t = self.timestamp_ps
        if t.size and (np.any(np.diff(t) < 0)):
            raise UnsortedInputError("timestamps are not non-decreasing")
        if t.size and (t[0] < 0 or t[-1] > self.duration_ps):
            raise InvalidParameterError("timestamps fall outside [0, duration_ps]")

    def for_channel(self, channel: int) -> np.ndarray:
        return self.timestamp_ps[self.channel == channel]

    def channels(self) -> list[int]:
        return sorted(set(self.channel.tolist()))

    def equals(self, other: "TimeTagStream") -> bool:
        return (
            self.duration_ps == other.duration_ps
            and np.array_equal(self.channel, other.channel)
            and np.array_equal(self.timestamp_ps, other.timestamp_ps)
        )


@dataclass
class PhotonArrivals:
    """Photons reaching detector inputs. ``pulse``/``slot`` identify the
    photon for random-stream addressing."""

    channel: np.ndarray
    time_ps: np.ndarray
    pulse: np.ndarray
    slot: np.ndarray

    @classmethod
    def empty(cls) -> "PhotonArrivals":
        z = np.empty(0, np.int64)
        return cls(z.astype(np.int16), z, z, z)

    def __len__(self) -> int:
        return int(self.time_ps.size)


def propagate(events: EmissionStream, transmittance: float, seed: int) -> EmissionStream:
    """Independent per-photon survival with probability ``transmittance``.

    Draws are addressed by (seed, pulse, slot); chaining two channels needs
    two different seeds for the losses to be independent.
    """
    if not 0 < transmittance <= 1:
        raise InvalidParameterError(f"transmittance must lie in (0, 1], got {transmittance}")
    if transmittance == 1 or events.num_photons == 0:
        return events
    u = rng.pulse_uniforms(seed, "propagate", events.start, events.stop, (2,))
    keep = u[events.photon_pulse - events.start, events.photon_slot] < transmittance
    return events.subset(keep)


def arrivals_at(events: EmissionStream, channel, offset_ps=0) -> PhotonArrivals:
    """Place every photon of ``events`` at its pulse time (plus offset) on ``channel``."""
    n = events.num_photons
    ch = np.broadcast_to(np.asarray(channel, dtype=np.int16), (n,)).copy()
    t = events.photon_pulse * events.rep_period_ps + np.broadcast_to(np.asarray(offset_ps, np.int64), (n,))
    return PhotonArrivals(ch, t, events.photon_pulse.copy(), events.photon_slot.copy())


def _spec_for(specs, channel: int) -> DetectorSpec:
    return specs[channel] if isinstance(specs, Mapping) else specs


def signal_clicks(arrivals: PhotonArrivals, specs, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Efficiency thinning and Gaussian jitter of photon arrivals (no darks, no dead time)."""
    if len(arrivals) == 0:
        return np.empty(0, np.int16), np.empty(0, np.int64)
    lo = int(arrivals.pulse.min())
    hi = int(arrivals.pulse.max()) + 1
    u = rng.pulse_uniforms(seed, "detect", lo, hi, (2,))
    z = rng.pulse_normals(seed, "detect", lo, hi, (2,))
    idx = (arrivals.pulse - lo, arrivals.slot)
    eff = np.empty(len(arrivals))
    jit = np.empty(len(arrivals))
    for ch in np.unique(arrivals.channel):
        sel = arrivals.channel == ch
        spec = _spec_for(specs, int(ch))
        eff[sel] = spec.efficiency
        jit[sel] = spec.jitter_sigma_ps
    keep = u[idx] < eff
    t = arrivals.time_ps + np.rint(jit * z[idx]).astype(np.int64)
    return arrivals.channel[keep], t[keep]


def poisson_background(rate_hz: float, t0_ps: int, t1_ps: int, seed: int, stage: str, sub: int) -> np.ndarray:
    """Sorted Poisson arrival times at ``rate_hz`` inside ``[t0_ps, t1_ps)``."""
    if rate_hz <= 0 or t1_ps <= t0_ps:
        return np.empty(0, np.int64)
    lam = rate_hz * BACKGROUND_BLOCK_PS * 1e-12
    out = []
    for b in range(t0_ps // BACKGROUND_BLOCK_PS, (t1_ps - 1) // BACKGROUND_BLOCK_PS + 1):
        g = rng.stage_rng(seed, stage, b, sub)
        n = g.poisson(lam)
        t = b * BACKGROUND_BLOCK_PS + g.integers(0, BACKGROUND_BLOCK_PS, size=n, dtype=np.int64)
        out.append(t[(t >= t0_ps) & (t < t1_ps)])
    return np.sort(np.concatenate(out))


def dark_counts(specs, channels, t0_ps: int, t1_ps: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    chs, ts = [], []
    for ch in channels:
        t = poisson_background(_spec_for(specs, ch).dark_count_rate, t0_ps, t1_ps, seed, "dark", ch)
        chs.append(np.full(t.size, ch, np.int16))
        ts.append(t)
    return _cat(chs, ts)


def copropagation_background(
    spec: CoPropagationSpec,
    duration_ps: int,
    seed: int,
    channels=(0,),
    t0_ps: int = 0,
) -> TimeTagStream:
    """Crosstalk clicks induced by the classical channel on each quantum detector."""
    chs, ts = [], []
    for ch in channels:
        t = poisson_background(spec.rate_hz, t0_ps, duration_ps, seed, "coprop", ch)
        chs.append(np.full(t.size, ch, np.int16))
        ts.append(t)
    ch, t = _cat(chs, ts)
    return TimeTagStream.from_unsorted(ch, t, duration_ps)


def apply_dead_time(stream: TimeTagStream, specs) -> TimeTagStream:
    """Drop clicks arriving within the dead time of the last kept click on the same channel."""
    keep = np.ones(len(stream), dtype=bool)
    for ch in stream.channels():
        dead = _spec_for(specs, ch).dead_time_ps
        if dead <= 0:
            continue
        idx = np.flatnonzero(stream.channel == ch)
        t = stream.timestamp_ps[idx]
        # a click whose gap to the previous raw click is >= dead is always kept,
        # so only runs of short gaps need sequential resolution
        short = np.flatnonzero(np.diff(t) < dead) + 1
        if short.size == 0:
            continue
        last_kept = None
        prev = -2
        for i in short.tolist():
            if i != prev + 1:
                last_kept = t[i - 1]
            if t[i] - last_kept < dead:
                keep[idx[i]] = False
            else:
                last_kept = t[i]
            prev = i
    return TimeTagStream(stream.channel[keep], stream.timestamp_ps[keep], stream.duration_ps)


def detect(
    arrivals: PhotonArrivals,
    spec,
    duration_ps: int,
    seed: int,
    channels=None,
    coprop: CoPropagationSpec | None = None,
) -> TimeTagStream:
    """Turn photon arrivals into a time-tag stream over ``[0, duration_ps)``.

    ``spec`` is one DetectorSpec for all channels or a mapping channel -> spec.
    Dark counts (and optional crosstalk) are added on every channel listed in
    ``channels`` (default: the channels photons arrive on, or channel 0).
    """
    if channels is None:
        channels = sorted(set(arrivals.channel.tolist())) or [0]
    ch, t = raw_clicks(arrivals, spec, channels, 0, duration_ps, seed, coprop, duration_ps)
    return apply_dead_time(TimeTagStream.from_unsorted(ch, t, duration_ps), spec)


def raw_clicks(arrivals, specs, channels, t0_ps, t1_ps, seed, coprop=None, duration_ps=None):
    """Unsorted clicks before dead time.

    Background is generated inside ``[t0_ps, t1_ps)``; signal clicks are kept
    anywhere in ``[0, duration_ps)`` so that jitter across a window edge does
    not depend on how the time axis was split.
    """
    sc, st = signal_clicks(arrivals, specs, seed)
    inside = (st >= 0) & (st < (t1_ps if duration_ps is None else duration_ps))
    dc, dt = dark_counts(specs, channels, t0_ps, t1_ps, seed)
    parts_c, parts_t = [sc[inside], dc], [st[inside], dt]
    if coprop is not None and coprop.rate_hz > 0:
        bg = copropagation_background(coprop, t1_ps, seed, channels, t0_ps)
        parts_c.append(bg.channel)
        parts_t.append(bg.timestamp_ps)
    return _cat(parts_c, parts_t)


def merge_streams(a: TimeTagStream, b: TimeTagStream) -> TimeTagStream:
    if a.duration_ps != b.duration_ps:
        raise InvalidParameterError(f"duration mismatch: {a.duration_ps} vs {b.duration_ps}")
    return TimeTagStream.from_unsorted(
        np.concatenate((a.channel, b.channel)),
        np.concatenate((a.timestamp_ps, b.timestamp_ps)),
        a.duration_ps,
    )


def _cat(chs, ts):
    if not chs:
        return np.empty(0, np.int16), np.empty(0, np.int64)
    return np.concatenate(chs).astype(np.int16), np.concatenate(ts).astype(np.int64)


# --- CSV interchange: header ``channel,timestamp_ps``, sorted by timestamp ---

def write_time_tags(stream: TimeTagStream, path) -> None:
    Path(path).write_text(time_tags_to_csv(stream))


def time_tags_to_csv(stream: TimeTagStream) -> str:
    buf = io.StringIO()
    buf.write("channel,timestamp_ps\n")
    if len(stream):
        np.savetxt(buf, np.column_stack((stream.channel, stream.timestamp_ps)), fmt="%d", delimiter=",")
    return buf.getvalue()


def read_time_tags(path, duration_ps: int | None = None) -> TimeTagStream:
    """Read a time-tag CSV.

    Without ``duration_ps`` the duration is taken from a ``# duration_ps=N``
    comment line if present, else from the last timestamp.
    """
    text = Path(path).read_text()
    lines = text.splitlines()
    declared = None
    body_start = 0
    for i, line in enumerate(lines):
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key.strip() == "duration_ps":
                declared = int(value)
            continue
        header = next(csv.reader([line]))
        if [h.strip() for h in header] != ["channel", "timestamp_ps"]:
            raise InvalidParameterError(f"expected header 'channel,timestamp_ps', got {line!r}")
        body_start = i + 1
        break
    else:
        raise InvalidParameterError("time-tag file has no header")
    body = "\n".join(lines[body_start:]).strip()
    data = np.loadtxt(io.StringIO(body), delimiter=",", dtype=np.int64, ndmin=2) if body else np.empty((0, 2), np.int64)
    ch, t = data[:, 0], data[:, 1]
    if duration_ps is None:
        duration_ps = declared if declared is not None else (int(t.max()) + 1 if t.size else 0)
    stream = TimeTagStream(ch, t, duration_ps)
    stream.validate()
    return stream
