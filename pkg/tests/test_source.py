import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from hcfqkd.errors import InfeasibleError, InvalidParameterError
from hcfqkd.rng import BLOCK_PULSES
from hcfqkd.source import (
    SourceSpec,
    effective_mu,
    emit_stream,
    ideal_g2,
    rabi_excitation_probability,
    target_g2_to_p2,
)


def _p2_by_root_find(g, p1):
    # independent route: solve 2 p2 / (p1 + 2 p2)^2 = g on the small-p2 branch
    return brentq(lambda p2: 2 * p2 / (p1 + 2 * p2) ** 2 - g, 0.0, p1 / 2)


@pytest.mark.parametrize("area, p", [(math.pi, 1.0), (0.0, 0.0), (math.pi / 2, 0.5), (2 * math.pi, 0.0)])
def test_rabi(area, p):
    assert rabi_excitation_probability(area) == pytest.approx(p, abs=1e-15)


def test_rabi_rejects_negative_area():
    with pytest.raises(InvalidParameterError):
        rabi_excitation_probability(-0.1)


@pytest.mark.parametrize("p1, p2, mu", [(1.0, 0.0, 1.0), (0.25, 0.0, 0.25), (0.5, 0.25, 1.0)])
def test_effective_mu(p1, p2, mu):
    assert effective_mu(SourceSpec(p1=p1, p2=p2)) == pytest.approx(mu)


def test_g2_target_zero():
    assert target_g2_to_p2(0.0, 0.253) == 0.0


def test_g2_target_matches_root_find():
    p2 = target_g2_to_p2(0.0214, 0.253)
    assert p2 == pytest.approx(_p2_by_root_find(0.0214, 0.253), rel=1e-10)
    assert p2 == pytest.approx(6.924145617840281e-4, rel=1e-12)
    assert 2 * p2 / (0.253 + 2 * p2) ** 2 == pytest.approx(0.0214, rel=1e-12)


@given(st.floats(1e-4, 0.2), st.floats(0.01, 0.9))
def test_g2_target_round_trip(g, p1):
    try:
        p2 = target_g2_to_p2(g, p1)
    except InfeasibleError:
        return
    spec = SourceSpec(p1=p1, p2=p2)
    assert ideal_g2(spec) == pytest.approx(g, rel=1e-9)


def test_g2_target_infeasible():
    with pytest.raises(InfeasibleError):
        target_g2_to_p2(0.9, 1.0)  # no real root
    with pytest.raises(InfeasibleError):
        target_g2_to_p2(0.27, 0.9)  # root exists but p0 < 0
    with pytest.raises(InvalidParameterError):
        target_g2_to_p2(1.0, 0.2)


def test_spec_validation():
    with pytest.raises(ValueError):
        SourceSpec(p1=0.8, p2=0.3)
    with pytest.raises(ValueError):
        SourceSpec(rep_rate=0)
    with pytest.raises(ValueError):
        SourceSpec(wavepacket_overlap=1.2)
    assert SourceSpec().rep_period_ps == 12_500


def test_pulse_area_scaling():
    s = SourceSpec(p1=0.25, p2=0.001).at_pulse_area(math.pi / 2)
    assert s.p1 == pytest.approx(0.125) and s.p2 == pytest.approx(0.0005)


def test_empty_stream():
    ev = emit_stream(SourceSpec(), 0, seed=1)
    assert ev.num_pulses == 0 and ev.num_photons == 0 and list(ev.events()) == []


def test_deterministic_single_photons():
    ev = emit_stream(SourceSpec(p1=1.0, p2=0.0), 1_000_000, seed=3)
    assert ev.num_photons == 1_000_000
    assert np.all(ev.photon_count == 1)


def test_photon_number_frequencies():
    spec = SourceSpec(p1=0.253, p2=0.02)
    n = 1_000_000
    counts = np.bincount(emit_stream(spec, n, seed=11).photon_count, minlength=3)
    for k, p in enumerate((spec.p0, spec.p1, spec.p2)):
        assert abs(counts[k] - n * p) < 5 * math.sqrt(n * p * (1 - p))


def test_stream_is_deterministic():
    a = emit_stream(SourceSpec(p2=0.01, wavepacket_overlap=0.9), 50_000, seed=7)
    b = emit_stream(SourceSpec(p2=0.01, wavepacket_overlap=0.9), 50_000, seed=7)
    c = emit_stream(SourceSpec(p2=0.01, wavepacket_overlap=0.9), 50_000, seed=8)
    assert np.array_equal(a.photon_pulse, b.photon_pulse) and np.array_equal(a.photon_tag, b.photon_tag)
    assert not np.array_equal(a.photon_pulse, c.photon_pulse)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(1, 400), min_size=1, max_size=4))
def test_partitioned_generation_matches_serial(sizes):
    # straddle a block boundary so different Philox blocks are involved
    start = BLOCK_PULSES - 500
    spec = SourceSpec(p2=0.05, wavepacket_overlap=0.7)
    whole = emit_stream(spec, sum(sizes), seed=5, start=start)
    pulses, tags, lo = [], [], start
    for n in sizes:
        part = emit_stream(spec, n, seed=5, start=lo)
        pulses.append(part.photon_pulse)
        tags.append(part.photon_tag)
        lo += n
    assert np.array_equal(whole.photon_pulse, np.concatenate(pulses))
    assert np.array_equal(whole.photon_tag, np.concatenate(tags))


@pytest.mark.parametrize("m", [0.0, 0.5, 0.9296, 1.0])
def test_pairwise_label_match_probability(m):
    ev = emit_stream(SourceSpec(p1=1.0, wavepacket_overlap=m), 400_000, seed=13)
    a, b = ev.photon_tag[0::2], ev.photon_tag[1::2]
    match = np.mean(a == b)
    sigma = math.sqrt(m * (1 - m) / a.size)
    assert abs(match - m) <= 5 * sigma + 1e-12


def test_event_view():
    spec = SourceSpec(p1=0.5, p2=0.5)
    ev = emit_stream(spec, 100, seed=2)
    events = list(ev.events())
    assert [e.pulse_index for e in events] == list(range(100))
    assert all(e.photon_count == len(e.distinguishability_tags) for e in events)
    assert sum(e.photon_count for e in events) == ev.num_photons
