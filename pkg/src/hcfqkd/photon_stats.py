"""Coincidence histograms and peak-area estimates of g2(0) and HOM visibility.

Also holds the two interferometers feeding those histograms (HBT split and
paired-pulse HOM) and exact enumeration oracles for their expected outcomes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import brentq

from . import rng
from .errors import InfeasibleError, InvalidParameterError, SpanTooSmallError, UnsortedInputError
from .link import PhotonArrivals
from .source import EmissionStream

DEFAULT_BIN_WIDTH_PS = 100
# 5.5 periods minus half a bin: the +-5 peaks of a 12.5 ns train fit exactly.
DEFAULT_SPAN_PS = 68_700
DEFAULT_WINDOW_PS = 12_500


# --- histograms -------------------------------------------------------------

@dataclass
class CoincidenceHistogram:
    """Start-stop coincidences binned by delay ``t_b - t_a``.

    Bin ``k`` is centred on ``k * bin_width_ps`` for ``|k| <= span_ps / bin_width_ps``.
    """

    bin_width_ps: int
    span_ps: int
    counts: np.ndarray
    rep_period_ps: int

    @property
    def half_bins(self) -> int:
        return self.span_ps // self.bin_width_ps

    @property
    def delays_ps(self) -> np.ndarray:
        return np.arange(-self.half_bins, self.half_bins + 1, dtype=np.int64) * self.bin_width_ps

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def reversed(self) -> "CoincidenceHistogram":
        return CoincidenceHistogram(self.bin_width_ps, self.span_ps, self.counts[::-1].copy(), self.rep_period_ps)

    def __add__(self, other: "CoincidenceHistogram") -> "CoincidenceHistogram":
        if (self.bin_width_ps, self.span_ps, self.rep_period_ps) != (
            other.bin_width_ps, other.span_ps, other.rep_period_ps
        ):
            raise InvalidParameterError("histograms have different geometry")
        return CoincidenceHistogram(self.bin_width_ps, self.span_ps, self.counts + other.counts, self.rep_period_ps)

    def to_csv(self) -> str:
        lines = ["delay_ps,counts"]
        lines += [f"{d},{c}" for d, c in zip(self.delays_ps.tolist(), self.counts.tolist())]
        return "\n".join(lines) + "\n"


def _delay_bins(delay: np.ndarray, bin_width: int) -> np.ndarray:
    # round half away from zero keeps histogram(a, b) the mirror of histogram(b, a)
    return np.sign(delay) * ((2 * np.abs(delay) + bin_width) // (2 * bin_width))


def histogram(
    a_tags,
    b_tags,
    bin_width_ps: int = DEFAULT_BIN_WIDTH_PS,
    span_ps: int = DEFAULT_SPAN_PS,
    rep_period_ps: int = 12_500,
    chunk: int = 1 << 18,
) -> CoincidenceHistogram:
    """Histogram every cross pair (a, b) whose delay falls in the bin grid.

    The starts are processed in chunks; because partial histograms add, any
    chunking gives the same counts.
    """
    if bin_width_ps <= 0 or span_ps <= 0 or span_ps % bin_width_ps:
        raise InvalidParameterError("bin width must be positive and divide the span")
    a = np.asarray(a_tags, dtype=np.int64)
    b = np.asarray(b_tags, dtype=np.int64)
    for name, t in (("a", a), ("b", b)):
        if t.size > 1 and np.any(np.diff(t) < 0):
            raise UnsortedInputError(f"{name} tags are not sorted")
    half = span_ps // bin_width_ps
    counts = np.zeros(2 * half + 1, dtype=np.int64)
    # widest delay that still rounds into the outermost bin
    reach = half * bin_width_ps + (bin_width_ps - 1) // 2
    for lo in range(0, a.size, chunk):
        part = a[lo:lo + chunk]
        first = np.searchsorted(b, part - reach, side="left")
        last = np.searchsorted(b, part + reach, side="right")
        n = last - first
        total = int(n.sum())
        if total == 0:
            continue
        owner = np.repeat(np.arange(part.size), n)
        offset = np.arange(total) - np.repeat(np.cumsum(n) - n, n)
        delay = b[first[owner] + offset] - part[owner]
        k = _delay_bins(delay, bin_width_ps)
        k = k[np.abs(k) <= half]
        counts += np.bincount(k + half, minlength=2 * half + 1)
    return CoincidenceHistogram(bin_width_ps, span_ps, counts, rep_period_ps)


# --- peak areas -------------------------------------------------------------

@dataclass(frozen=True)
class PeakAreas:
    central: int
    sides: dict[int, int] = field(default_factory=dict)
    window_ps: int = DEFAULT_WINDOW_PS


def covered_orders(h: CoincidenceHistogram, window_ps: int) -> int:
    """Largest peak order whose whole integration window lies inside the histogram."""
    edge = h.span_ps + h.bin_width_ps / 2
    return max(-1, math.floor((edge - window_ps / 2) / h.rep_period_ps))


def peak_areas(h: CoincidenceHistogram, window_ps: int = DEFAULT_WINDOW_PS, max_order: int | None = None) -> PeakAreas:
    """Raw counts integrated over ``window_ps`` around each multiple of the period.

    No background is subtracted. A bin belongs to peak ``k`` when its centre
    lies in ``[k T - w/2, k T + w/2)``.
    """
    if not 0 < window_ps <= h.rep_period_ps:
        raise InvalidParameterError(f"window must lie in (0, rep period], got {window_ps}")
    reach = covered_orders(h, window_ps)
    if max_order is None:
        max_order = reach
    if max_order > reach or reach < 0:
        raise SpanTooSmallError(
            f"span +-{h.span_ps} ps covers peaks up to order {reach}, requested {max_order}"
        )
    delays = h.delays_ps
    areas = {}
    for k in range(-max_order, max_order + 1):
        centre = k * h.rep_period_ps
        sel = (delays >= centre - window_ps / 2) & (delays < centre + window_ps / 2)
        areas[k] = int(h.counts[sel].sum())
    central = areas.pop(0)
    return PeakAreas(central, areas, window_ps)


# --- estimators -------------------------------------------------------------

def _included_sides(areas: PeakAreas, exclude_orders: Iterable[int]) -> np.ndarray:
    excluded = set(exclude_orders)
    sides = [v for k, v in sorted(areas.sides.items()) if k not in excluded]
    if not sides:
        raise InvalidParameterError("no side peaks left after exclusion")
    return np.asarray(sides, dtype=float)


def ratio_uncertainty(central: float, sides: np.ndarray) -> float:
    """1-sigma error of ``central / mean(sides)`` with Var(area) = area."""
    total = float(np.sum(sides))
    if total == 0:
        return 0.0 if central == 0 else math.inf
    n = sides.size
    mean = total / n
    # d/dC = 1/mean, d/dS_i = -C / (n mean^2)
    return math.sqrt(central / mean**2 + central**2 * total / (n * n * mean**4))


def poisson_uncertainty(f: Callable[[float, np.ndarray], float], areas: PeakAreas, exclude_orders=()) -> float:
    """First-order propagation of Poisson area errors through any functional ``f(central, sides)``.

    Derivatives are taken by central finite differences, so ``f`` may be any
    smooth combination of the areas.
    """
    central = float(areas.central)
    sides = _included_sides(areas, exclude_orders)
    values = np.concatenate(([central], sides))
    if np.any(values < 0):
        raise InvalidParameterError("areas must be >= 0")
    var = 0.0
    for i, v in enumerate(values):
        if v == 0:
            continue
        h = 1e-4 * v
        up, dn = values.copy(), values.copy()
        up[i] += h
        dn[i] -= h
        grad = (f(up[0], up[1:]) - f(dn[0], dn[1:])) / (2 * h)
        var += grad * grad * v
    return math.sqrt(var)


def _ratio(areas: PeakAreas, exclude_orders) -> tuple[float, float]:
    sides = _included_sides(areas, exclude_orders)
    mean = float(sides.mean())
    if mean == 0:
        if areas.central == 0:
            return 0.0, 0.0
        raise ZeroDivisionError("side peaks are empty but the central peak is not")
    return areas.central / mean, ratio_uncertainty(areas.central, sides)


def g2_zero(areas: PeakAreas, exclude_orders: Iterable[int] = ()) -> tuple[float, float]:
    """Central peak over the mean side peak, with its Poisson 1-sigma error."""
    return _ratio(areas, exclude_orders)


def hom_visibility(areas: PeakAreas, exclude_orders: Iterable[int] = (-1, 1)) -> tuple[float, float]:
    """``1 - central / mean(sides)`` and its Poisson 1-sigma error."""
    r, s = _ratio(areas, exclude_orders)
    return 1.0 - r, s


# --- interferometers --------------------------------------------------------

def hbt_split(events: EmissionStream, seed: int) -> PhotonArrivals:
    """50:50 split of every photon onto channels 0 and 1 at its pulse time."""
    u = rng.pulse_uniforms(seed, "route", events.start, events.stop, (2,))
    out = (u[events.photon_pulse - events.start, events.photon_slot] >= 0.5).astype(np.int16)
    t = events.photon_pulse * events.rep_period_ps
    return PhotonArrivals(out, t, events.photon_pulse.copy(), events.photon_slot.copy())


@lru_cache(maxsize=None)
def beamsplitter_output(n_a: int, n_b: int) -> tuple[float, ...]:
    """Probability of ``k`` photons in output 0 for Fock input ``|n_a, n_b>`` of identical bosons.

    Uses ``a -> (c + d)/sqrt2`` and ``b -> (c - d)/sqrt2`` on the creation
    operators and expands the product.
    """
    n = n_a + n_b
    amp = np.zeros(n + 1)
    for i in range(n_a + 1):
        for j in range(n_b + 1):
            k = i + j  # photons sent to output 0
            amp[k] += math.comb(n_a, i) * math.comb(n_b, j) * (-1) ** (n_b - j)
    norm = 2.0 ** (-n / 2) / math.sqrt(math.factorial(n_a) * math.factorial(n_b))
    probs = [(norm * amp[k]) ** 2 * math.factorial(k) * math.factorial(n - k) for k in range(n + 1)]
    return tuple(probs)


def hom_pair_interference(tag_a: int, tag_b: int, seed: int | np.random.Generator) -> bool:
    """One photon per input port; returns True for a coincidence.

    Matching mode labels bunch (never a coincidence); differing labels
    behave as independent 50:50 choices.
    """
    if tag_a == tag_b:
        return False
    g = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    first, second = g.random(2) < 0.5
    return bool(first != second)


def hom_interfere(events: EmissionStream, seed: int) -> PhotonArrivals:
    """Paired-pulse HOM: pulses (2i, 2i+1) meet on a 50:50 splitter.

    Both photons of pair ``i`` leave at ``(2i + 1) T``, so the output train,
    and its coincidence peaks, repeat every ``2 T``. Common-mode photons of a
    pair are sampled jointly from the bosonic output law; unique-mode photons
    choose an output independently.
    """
    if events.start % 2:
        raise InvalidParameterError("HOM pairing needs an even start pulse")
    pulse, slot, tag = events.photon_pulse, events.photon_slot, events.photon_tag
    paired = pulse < events.start + 2 * (events.num_pulses // 2)
    pulse, slot, tag = pulse[paired], slot[paired], tag[paired]
    u = rng.pulse_uniforms(seed, "route", events.start, events.stop, (3,))
    pair = (pulse - events.start) // 2
    side = (pulse - events.start) % 2
    n_pairs = events.num_pulses // 2
    out = (u[pulse - events.start, 1 + slot] >= 0.5).astype(np.int16)

    common = tag == 0
    ca = np.bincount(pair[common & (side == 0)], minlength=n_pairs)
    cb = np.bincount(pair[common & (side == 1)], minlength=n_pairs)
    k0 = np.zeros(n_pairs, dtype=np.int64)
    draw = u[0::2, 0][:n_pairs]
    for na, nb in itertools.product(range(3), range(3)):
        if na + nb == 0:
            continue
        sel = (ca == na) & (cb == nb)
        if not sel.any():
            continue
        cdf = np.cumsum(beamsplitter_output(na, nb))
        k0[sel] = np.minimum(np.searchsorted(cdf, draw[sel], side="right"), na + nb)
    # the first k0 common photons of each pair (in pulse/slot order) exit port 0
    cidx = np.flatnonzero(common)
    cpair = pair[cidx]
    start_of = np.cumsum(ca + cb) - (ca + cb)
    rank = np.arange(cidx.size) - start_of[cpair]
    out[cidx] = (rank >= k0[cpair]).astype(np.int16)

    t = (2 * (pulse // 2) + 1) * events.rep_period_ps
    return PhotonArrivals(out, t, pulse.copy(), slot.copy())


# --- exact oracles ----------------------------------------------------------

def _pulse_states(p0, p1, p2, eta, s):
    """Distribution over (common, unique) surviving photons of one pulse."""
    states: dict[tuple[int, int], float] = {}
    for n, pn in enumerate((p0, p1, p2)):
        for j in range(n + 1):
            pj = pn * math.comb(n, j) * eta**j * (1 - eta) ** (n - j)
            for c in range(j + 1):
                pc = pj * math.comb(j, c) * s**c * (1 - s) ** (j - c)
                states[(c, j - c)] = states.get((c, j - c), 0.0) + pc
    return states


def expected_hom(p1: float, p2: float, overlap: float, eta: float) -> tuple[float, float]:
    """Exact per-pair probabilities (central coincidence, side coincidence).

    ``eta`` is the total per-photon efficiency (channel times detector);
    detectors are threshold detectors without darks.
    """
    p0 = 1.0 - p1 - p2
    states = _pulse_states(p0, p1, p2, eta, math.sqrt(overlap))
    central = 0.0
    click0 = 0.0
    for ((ca, ua), pa), ((cb, ub), pb) in itertools.product(states.items(), repeat=2):
        w = pa * pb
        c = ca + cb
        u = ua + ub
        if c + u == 0:
            continue
        dist = beamsplitter_output(ca, cb)
        empty0 = dist[0] * 0.5**u
        empty1 = dist[c] * 0.5**u
        central += w * (1 - empty0 - empty1)
        click0 += w * (1 - empty0)
    # both outputs have the same marginal by symmetry
    return central, click0 * click0


def expected_hom_visibility(p1: float, p2: float, overlap: float, eta: float) -> float:
    central, side = expected_hom(p1, p2, overlap, eta)
    return float(1.0 - central / side)


def expected_g2(p1: float, p2: float, eta: float) -> float:
    """Exact HBT peak ratio for threshold detectors with total efficiency ``eta``."""
    both = p2 * 2 * (eta / 2) ** 2
    click = p1 * eta / 2 + p2 * (1 - (1 - eta / 2) ** 2)
    return both / (click * click) if click > 0 else 0.0


def calibrate_overlap(target_visibility: float, p1: float, p2: float, eta: float) -> float:
    """Wave-packet overlap whose expected raw visibility equals the target."""
    lo = expected_hom_visibility(p1, p2, 0.0, eta)
    hi = expected_hom_visibility(p1, p2, 1.0, eta)
    if not lo <= target_visibility <= hi:
        raise InfeasibleError(
            f"visibility {target_visibility} outside the reachable range [{lo:.6g}, {hi:.6g}]"
        )
    if target_visibility == hi:
        return 1.0
    return brentq(lambda m: expected_hom_visibility(p1, p2, m, eta) - target_visibility, 0.0, 1.0, xtol=1e-14)
