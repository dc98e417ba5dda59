"""BB84 preparation, passive-basis receiver, gating, sifting and QBER.

Basis codes are 0 = Z, 1 = X. Receiver channel layout:

* polarization: 0 = H, 1 = V, 2 = +, 3 = -
* time-bin: 0 = Z detector (bit read from arrival bin), 1/2 = X outputs for bit 0/1
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from . import rng
from .errors import InvalidParameterError
from .link import PhotonArrivals, TimeTagStream
from .source import EmissionStream

Encoding = Literal["polarization", "time_bin"]

_POL_LABELS = {("Z", 0): "H", ("Z", 1): "V", ("X", 0): "+", ("X", 1): "-"}
_TB_LABELS = {("Z", 0): "early", ("Z", 1): "late", ("X", 0): "early+late", ("X", 1): "early-late"}
STATE_ORDER = (("Z", 0), ("Z", 1), ("X", 0), ("X", 1))


@dataclass(frozen=True)
class QubitState:
    encoding: str
    basis: str
    bit: int

    @property
    def label(self) -> str:
        table = _POL_LABELS if self.encoding == "polarization" else _TB_LABELS
        return table[(self.basis, self.bit)]

    @property
    def amplitudes(self) -> tuple[float, float]:
        """Amplitudes on (H, V) or (early, late)."""
        if self.basis == "Z":
            return (1.0, 0.0) if self.bit == 0 else (0.0, 1.0)
        r = 1 / math.sqrt(2)
        return (r, r) if self.bit == 0 else (r, -r)


def prepare(bit: int, basis: str, encoding: str = "polarization") -> QubitState:
    if bit not in (0, 1) or basis not in ("Z", "X") or encoding not in ("polarization", "time_bin"):
        raise InvalidParameterError(f"invalid state request ({bit}, {basis}, {encoding})")
    return QubitState(encoding, basis, bit)


class ReceiverSpec(BaseModel):
    """Passive-basis receiver.

    ``efficiency`` is the coupling from fiber output to the detector inputs,
    excluding the detectors' own efficiency.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    basis_split: float = Field(0.5, ge=0, le=1)
    efficiency: float = Field(1.0, ge=0, le=1)
    misalignment_angle: float = Field(0.0, ge=0)
    phase_error: float = Field(0.0, ge=0)
    gate_width_ns: float = Field(4.0, gt=0)
    timebin_separation_ns: float = Field(2.0, gt=0)

    def matched_error(self, encoding: str) -> float:
        if encoding == "polarization":
            return math.sin(self.misalignment_angle) ** 2
        return math.sin(self.phase_error / 2) ** 2


def misalignment_for_qber(qber: float) -> float:
    """Receiver angle whose Malus-law matched-basis error is ``qber``."""
    return math.asin(math.sqrt(qber))


def phase_error_for_qber(qber: float) -> float:
    """Interferometer phase error whose matched-basis error ``sin^2(phi/2)`` is ``qber``."""
    return 2 * math.asin(math.sqrt(qber))


def channels_for(encoding: str) -> tuple[int, ...]:
    return (0, 1, 2, 3) if encoding == "polarization" else (0, 1, 2)


def _route(alice_basis, alice_bit, bob_basis, u_err, u_slot, rx: ReceiverSpec, encoding: str):
    """Per-photon detector channel and arrival offset (ps) from the pulse time."""
    err = rx.matched_error(encoding)
    matched = bob_basis == alice_basis
    flip = u_err < err
    random_bit = (u_err < 0.5).astype(np.int64)
    bit = np.where(matched, alice_bit ^ flip, random_bit)
    if encoding == "polarization":
        return (2 * bob_basis + bit).astype(np.int16), np.zeros(bit.shape, np.int64)
    half = int(round(rx.timebin_separation_ns * 500))
    sep = 2 * half
    # Z: early/late bin at -sep/2 / +sep/2 on one detector
    channel = np.where(bob_basis == 0, 0, 1 + bit)
    offset = np.where(bit == 0, -half, half)
    # X: interfering middle slot with prob 1/2, side slots at -+sep otherwise
    interfering = u_slot < 0.5
    side = np.where(u_slot < 0.75, -sep, sep)
    x_channel = np.where(interfering, 1 + bit, 1 + random_bit)
    channel = np.where(bob_basis == 1, x_channel, channel)
    offset = np.where(bob_basis == 1, np.where(interfering, 0, side), offset)
    return channel.astype(np.int16), offset.astype(np.int64)


def receiver_route(events: EmissionStream, rx: ReceiverSpec, seed: int) -> PhotonArrivals:
    """Route every photon of an encoded stream to a receiver detector."""
    if events.basis is None:
        raise InvalidParameterError("stream carries no qubit states; call encode() first")
    encoding = events.encoding or "polarization"
    u = rng.pulse_uniforms(seed, "receiver", events.start, events.stop, (2, 3))
    i = events.photon_pulse - events.start
    s = events.photon_slot
    bob_basis = (u[i, s, 0] >= rx.basis_split).astype(np.int64)
    channel, offset = _route(
        events.basis[i].astype(np.int64), events.bit[i].astype(np.int64), bob_basis,
        u[i, s, 1], u[i, s, 2], rx, encoding,
    )
    t = events.photon_pulse * events.rep_period_ps + offset
    return PhotonArrivals(channel, t, events.photon_pulse.copy(), s.copy())


def alice_choices(seed: int, start: int, stop: int, z_prob: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Per-round basis (0 = Z) and bit for rounds ``[start, stop)``."""
    u = rng.pulse_uniforms(seed, "alice", start, stop, (2,))
    return (u[:, 0] >= z_prob).astype(np.int8), (u[:, 1] >= 0.5).astype(np.int8)


def encode(events: EmissionStream, basis: np.ndarray, bit: np.ndarray, encoding: str) -> EmissionStream:
    return EmissionStream(
        events.start, events.stop, events.rep_period_ps, events.photon_pulse, events.photon_slot,
        events.photon_tag, np.asarray(basis, np.int8), np.asarray(bit, np.int8), encoding,
    )


def measure(
    state: QubitState,
    rx: ReceiverSpec,
    seed: int | np.random.Generator,
    detector_efficiency: float = 1.0,
) -> int | None:
    """Detector channel hit by one photon in ``state``, or None for no click."""
    g = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u_basis, u_err, u_slot, u_eff = g.random(4)
    if u_eff >= rx.efficiency * detector_efficiency:
        return None
    bob_basis = np.array([0 if u_basis < rx.basis_split else 1])
    ch, _ = _route(
        np.array(["ZX".index(state.basis)]), np.array([state.bit]), bob_basis,
        np.array([u_err]), np.array([u_slot]), rx, state.encoding,
    )
    return int(ch[0])


def timebin_roundtrip(
    bit: int,
    basis: str,
    rx: ReceiverSpec,
    seed: int | np.random.Generator,
    measure_basis: str | None = None,
) -> int | None:
    """Encode one time-bin qubit and decode it; None when the X outcome is inconclusive.

    Measures in the preparation basis unless ``measure_basis`` is given.
    """
    g = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u_err, u_slot = g.random(2)
    b = "ZX".index(basis)
    mb = "ZX".index(measure_basis or basis)
    ch, off = _route(np.array([b]), np.array([bit]), np.array([mb]), np.array([u_err]), np.array([u_slot]), rx, "time_bin")
    basis_out, bit_out, valid = _decode(ch, off, rx, "time_bin")
    return int(bit_out[0]) if valid[0] else None


def _decode(channel, delta_ps, rx: ReceiverSpec, encoding: str):
    """Basis, bit and validity of clicks at ``delta_ps`` from their round centre."""
    channel = np.asarray(channel, np.int64)
    if encoding == "polarization":
        return channel // 2, channel % 2, np.ones(channel.shape, bool)
    half = rx.timebin_separation_ns * 500
    is_z = channel == 0
    basis = np.where(is_z, 0, 1)
    bit = np.where(is_z, (delta_ps >= 0).astype(np.int64), channel - 1)
    valid = is_z | (np.abs(delta_ps) < half)
    return basis, bit, valid


# --- gating -----------------------------------------------------------------

def _phase(t: np.ndarray, rep_period_ps: int, offset_ps: int) -> np.ndarray:
    """Signed distance to the nearest signal arrival, in [-T/2, T/2)."""
    return (t - offset_ps + rep_period_ps // 2) % rep_period_ps - rep_period_ps // 2


def calibrate_gate_offset(tags: TimeTagStream, rep_period_ps: int) -> int:
    """Circular mean of click phases within the period."""
    if len(tags) == 0:
        return 0
    angle = 2 * np.pi * (tags.timestamp_ps % rep_period_ps) / rep_period_ps
    mean = math.atan2(float(np.sin(angle).mean()), float(np.cos(angle).mean()))
    return int(round(mean / (2 * np.pi) * rep_period_ps))


def gate(tags: TimeTagStream, gate_width_ns: float, rep_period_ps: int, offset_ps: int = 0) -> TimeTagStream:
    """Keep clicks within +-gate/2 of the expected arrival phase."""
    width = int(round(gate_width_ns * 1000))
    if width > rep_period_ps:
        raise InvalidParameterError(f"gate {width} ps exceeds the period {rep_period_ps} ps")
    keep = np.abs(_phase(tags.timestamp_ps, rep_period_ps, offset_ps)) <= width / 2
    return TimeTagStream(tags.channel[keep], tags.timestamp_ps[keep], tags.duration_ps)


# --- sifting ----------------------------------------------------------------

@dataclass
class BobResults:
    """Valid gated clicks mapped onto rounds."""

    num_rounds: int
    round_index: np.ndarray
    basis: np.ndarray
    bit: np.ndarray


def bob_results(tags: TimeTagStream, rx: ReceiverSpec, encoding: str, rep_period_ps: int,
                num_rounds: int, offset_ps: int = 0) -> BobResults:
    t = tags.timestamp_ps - offset_ps
    rnd = (t + rep_period_ps // 2) // rep_period_ps
    delta = t - rnd * rep_period_ps
    basis, bit, valid = _decode(tags.channel, delta, rx, encoding)
    valid &= (rnd >= 0) & (rnd < num_rounds)
    return BobResults(num_rounds, rnd[valid], basis[valid], bit[valid])


@dataclass(frozen=True)
class SiftedRecord:
    round_index: int
    alice_bit: int
    bob_bit: int
    basis: str


@dataclass
class SiftedKey:
    round_index: np.ndarray
    alice_bit: np.ndarray
    bob_bit: np.ndarray
    basis: np.ndarray
    # rounds with exactly one valid click, before basis comparison
    single_click_rounds: int = 0

    def __len__(self) -> int:
        return int(self.round_index.size)

    @property
    def errors(self) -> int:
        return int(np.count_nonzero(self.alice_bit != self.bob_bit))

    def records(self) -> Iterator[SiftedRecord]:
        for r, a, b, s in zip(self.round_index.tolist(), self.alice_bit.tolist(),
                              self.bob_bit.tolist(), self.basis.tolist()):
            yield SiftedRecord(r, a, b, "ZX"[s])


def sift(alice_basis, alice_bit, bob: BobResults) -> SiftedKey:
    """Keep rounds with exactly one valid click whose basis matches Alice's."""
    alice_basis = np.asarray(alice_basis)
    alice_bit = np.asarray(alice_bit)
    if alice_basis.size != bob.num_rounds or alice_bit.size != bob.num_rounds:
        raise InvalidParameterError(
            f"round count mismatch: alice {alice_basis.size}, bob {bob.num_rounds}"
        )
    clicks = np.bincount(bob.round_index, minlength=bob.num_rounds)
    single = clicks[bob.round_index] == 1
    r = bob.round_index[single]
    basis = bob.basis[single]
    bit = bob.bit[single]
    match = basis == alice_basis[r]
    r, basis, bit = r[match], basis[match], bit[match]
    order = np.argsort(r, kind="stable")
    r, basis, bit = r[order], basis[order], bit[order]
    return SiftedKey(r, alice_bit[r].astype(np.int8), bit.astype(np.int8), basis.astype(np.int8),
                     int(np.count_nonzero(single)))


def qber(key) -> tuple[float, float]:
    """Error fraction and its binomial standard error.

    Accepts a SiftedKey or any iterable of SiftedRecord.
    """
    if isinstance(key, SiftedKey):
        n, e = len(key), key.errors
    else:
        recs = list(key)
        n = len(recs)
        e = sum(r.alice_bit != r.bob_bit for r in recs)
    if n == 0:
        raise InvalidParameterError("QBER of an empty record list")
    q = e / n
    return q, math.sqrt(q * (1 - q) / n)


def per_state_table(alice_basis, alice_bit, key: SiftedKey, encoding: str) -> list[dict]:
    """Rows (state, sent, sifted, errors, qber, qber_sigma) plus an ``all`` row."""
    alice_basis = np.asarray(alice_basis)
    alice_bit = np.asarray(alice_bit)
    labels = _POL_LABELS if encoding == "polarization" else _TB_LABELS
    rows = []
    for basis, bit in STATE_ORDER:
        b = "ZX".index(basis)
        sent = int(np.count_nonzero((alice_basis == b) & (alice_bit == bit)))
        sel = (key.basis == b) & (key.alice_bit == bit)
        n = int(np.count_nonzero(sel))
        e = int(np.count_nonzero(key.alice_bit[sel] != key.bob_bit[sel]))
        rows.append(_row(labels[(basis, bit)], sent, n, e))
    rows.append(_row("all", int(alice_basis.size), len(key), key.errors))
    return rows


def _row(state, sent, n, e):
    q = e / n if n else 0.0
    sigma = math.sqrt(q * (1 - q) / n) if n else 0.0
    return {"state": state, "sent": sent, "sifted": n, "errors": e, "qber": q, "qber_sigma": sigma}


def receiver_efficiency_for_rate(
    target_sifted_rate: float,
    rep_rate: float,
    mu: float,
    transmittance: float,
    detector_efficiency: float,
    sift_fraction: float = 0.5,
) -> float:
    """Receiver coupling giving a target sifted click rate, to first order in mu."""
    eta = target_sifted_rate / (rep_rate * mu * transmittance * detector_efficiency * sift_fraction)
    if not 0 < eta <= 1:
        raise InvalidParameterError(f"target rate needs receiver efficiency {eta:.4g}, outside (0, 1]")
    return eta
