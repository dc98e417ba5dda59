"""Asymptotic GLLP secure key rate and maximum tolerable distance."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InfeasibleError, InvalidParameterError


@dataclass(frozen=True)
class KeyRateParams:
    """Operating point of the link.

    gain_q: probability per pulse that the receiver registers a (single) click.
    qber_e: error rate of the sifted bits.
    p_multi: per-pulse probability that the source emitted more than one photon.
    """

    gain_q: float
    qber_e: float
    p_multi: float = 0.0
    f_ec: float = 1.16
    sift_factor_q: float = 0.5
    rep_rate: float = 80e6

    def __post_init__(self):
        if not 0 < self.gain_q <= 1:
            raise InvalidParameterError(f"gain must lie in (0, 1], got {self.gain_q}")
        if not 0 <= self.qber_e <= 0.5:
            raise InvalidParameterError(f"QBER must lie in [0, 0.5], got {self.qber_e}")
        if not 0 <= self.p_multi <= 1:
            raise InvalidParameterError(f"p_multi must lie in [0, 1], got {self.p_multi}")
        if self.f_ec < 1:
            raise InvalidParameterError(f"f_ec must be >= 1, got {self.f_ec}")
        if not 0 < self.sift_factor_q <= 1:
            raise InvalidParameterError(f"sift factor must lie in (0, 1], got {self.sift_factor_q}")
        if self.rep_rate <= 0:
            raise InvalidParameterError(f"rep_rate must be > 0, got {self.rep_rate}")


@dataclass(frozen=True)
class ChannelScaling:
    """How gain and QBER move when the channel loss changes.

    The base gain splits into a signal part, which scales with transmittance,
    and a fixed background yield ``dark_yield`` (error rate 1/2).
    ``reference_loss_db`` is the channel loss at which the base point was measured.
    """

    dark_yield: float = 0.0
    reference_loss_db: float = 0.0


@dataclass(frozen=True)
class DistanceCurve:
    label: str
    points: list[tuple[float, float]]


def binary_entropy(x: float) -> float:
    if not 0 <= x <= 1:
        raise InvalidParameterError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0 or x == 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def gllp_rate(p: KeyRateParams) -> float:
    """Secret bits per pulse, clamped at zero.

    ``R = q Q [A (1 - H2(E/A)) - f H2(E)]`` with single-photon fraction
    ``A = (Q - p_multi) / Q`` and ``E/A`` capped at 1/2.
    """
    if p.p_multi > p.gain_q:
        raise InfeasibleError(f"p_multi {p.p_multi:.4g} exceeds gain {p.gain_q:.4g}")
    a = (p.gain_q - p.p_multi) / p.gain_q
    if a == 0:
        return 0.0
    e1 = min(p.qber_e / a, 0.5)
    bracket = a * (1 - binary_entropy(e1)) - p.f_ec * binary_entropy(p.qber_e)
    return max(0.0, p.sift_factor_q * p.gain_q * bracket)


def scaled_params(base: KeyRateParams, scaling: ChannelScaling, extra_loss_db: float) -> KeyRateParams | None:
    """Operating point after ``extra_loss_db`` more channel loss (None if the gain
    no longer covers the multi-photon probability)."""
    y0 = scaling.dark_yield
    signal = base.gain_q - y0
    if signal < 0:
        raise InvalidParameterError("dark yield exceeds the base gain")
    # error fraction of the signal part that reproduces the base QBER
    signal_err = (base.qber_e * base.gain_q - 0.5 * y0) / signal if signal > 0 else 0.0
    signal_err = min(max(signal_err, 0.0), 0.5)
    t = 10 ** (-extra_loss_db / 10)
    gain = signal * t + y0
    if gain <= 0:
        return None
    gain = min(gain, 1.0)
    e = (signal_err * signal * t + 0.5 * y0) / (signal * t + y0)
    if base.p_multi > gain:
        return None
    return replace(base, gain_q=gain, qber_e=min(e, 0.5))


def _rate_at(base, scaling, extra_loss_db) -> float:
    p = scaled_params(base, scaling, extra_loss_db)
    return 0.0 if p is None else gllp_rate(p)


def rate_vs_loss(base: KeyRateParams, scaling: ChannelScaling, loss_db) -> list[tuple[float, float]]:
    """(extra loss, bits per pulse) on the given grid of extra channel loss."""
    return [(float(x), _rate_at(base, scaling, float(x))) for x in np.asarray(loss_db, dtype=float)]


def max_distance(
    base: KeyRateParams,
    scaling: ChannelScaling,
    prop_loss_db_per_km: float,
    fixed_losses_db: float = 0.0,
    resolution_km: float = 0.01,
    limit_km: float = 1e6,
) -> float:
    """Longest fiber with a positive key, by bisection to ``resolution_km``."""
    if prop_loss_db_per_km <= 0:
        raise InvalidParameterError("propagation loss must be > 0")

    def rate(d):
        return _rate_at(base, scaling, fixed_losses_db + prop_loss_db_per_km * d - scaling.reference_loss_db)

    if rate(0.0) <= 0:
        raise InfeasibleError("no positive key rate even at zero distance")
    lo, hi = 0.0, 1.0
    while rate(hi) > 0:
        lo, hi = hi, 2 * hi
        if hi > limit_km:
            raise InfeasibleError(f"key rate stays positive beyond {limit_km} km")
    while hi - lo > resolution_km:
        mid = 0.5 * (lo + hi)
        if rate(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo


def distance_curve(
    base: KeyRateParams,
    scaling: ChannelScaling,
    prop_losses_db_per_km,
    fixed_losses_db: float,
    label: str,
) -> DistanceCurve:
    points = [(float(a), max_distance(base, scaling, float(a), fixed_losses_db)) for a in prop_losses_db_per_km]
    return DistanceCurve(label, points)
