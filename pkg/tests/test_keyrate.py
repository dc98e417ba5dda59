import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hcfqkd.config import load_config
from hcfqkd.errors import InfeasibleError, InvalidParameterError
from hcfqkd.keyrate import (
    ChannelScaling,
    KeyRateParams,
    binary_entropy,
    distance_curve,
    gllp_rate,
    max_distance,
    rate_vs_loss,
    scaled_params,
)
from hcfqkd.scenarios import keyrate_inputs, resolve


def _h2(x):
    # written out independently with natural logs
    return -(x * math.log(x) + (1 - x) * math.log(1 - x)) / math.log(2)


BASE = KeyRateParams(gain_q=0.004525, qber_e=0.0011, p_multi=2 * 6.924145617840281e-4)


@pytest.mark.parametrize("x", [0.0011, 0.01, 0.11, 0.3, 0.5])
def test_binary_entropy_against_log_form(x):
    assert binary_entropy(x) == pytest.approx(_h2(x), rel=1e-14)


def test_binary_entropy_endpoints():
    assert binary_entropy(0) == binary_entropy(1) == 0.0
    assert binary_entropy(0.5) == 1.0
    with pytest.raises(InvalidParameterError):
        binary_entropy(1.2)


@given(st.floats(0, 1))
def test_binary_entropy_symmetry(x):
    assert binary_entropy(x) == pytest.approx(binary_entropy(1 - x), abs=1e-12)


@given(st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_binary_entropy_concave(a, b):
    assert binary_entropy((a + b) / 2) >= (binary_entropy(a) + binary_entropy(b)) / 2 - 1e-12


def test_perfect_channel_gives_sifted_gain():
    p = KeyRateParams(gain_q=0.01, qber_e=0.0)
    assert gllp_rate(p) == pytest.approx(0.5 * 0.01, rel=1e-15)


def test_half_error_gives_nothing():
    assert gllp_rate(KeyRateParams(gain_q=0.01, qber_e=0.5)) == 0.0


@pytest.mark.parametrize("e", [0.001, 0.02, 0.08])
def test_single_photon_source_reduces_to_bb84_bound(e):
    p = KeyRateParams(gain_q=0.02, qber_e=e)
    assert gllp_rate(p) == pytest.approx(0.5 * 0.02 * (1 - 2.16 * _h2(e)), rel=1e-12)


def test_multi_photon_exceeding_gain_is_infeasible():
    with pytest.raises(InfeasibleError):
        gllp_rate(KeyRateParams(gain_q=0.001, qber_e=0.01, p_multi=0.002))


def test_operating_point_rate():
    # independent evaluation of the same operating point
    q, e, pm = 0.004525, 0.0011, 2 * 6.924145617840281e-4
    a = (q - pm) / q
    expect = 0.5 * q * (a * (1 - _h2(e / a)) - 1.16 * _h2(e))
    assert gllp_rate(BASE) == pytest.approx(expect, rel=1e-12)
    assert gllp_rate(BASE) == pytest.approx(0.001511, rel=1e-3)


@given(st.floats(0, 0.2), st.floats(0, 0.2))
def test_rate_non_increasing_in_qber(e1, e2):
    lo, hi = sorted((e1, e2))
    r = lambda e: gllp_rate(KeyRateParams(gain_q=0.01, qber_e=e, p_multi=0.001))
    assert r(hi) <= r(lo) + 1e-15


@given(st.floats(0, 0.004), st.floats(0, 0.004))
def test_rate_non_increasing_in_multi_photon(m1, m2):
    lo, hi = sorted((m1, m2))
    r = lambda m: gllp_rate(KeyRateParams(gain_q=0.005, qber_e=0.01, p_multi=m))
    assert r(hi) <= r(lo) + 1e-15


def test_rate_grows_with_gain():
    rates = [gllp_rate(KeyRateParams(gain_q=q, qber_e=0.01)) for q in (0.001, 0.01, 0.1)]
    assert rates == sorted(rates)


def test_params_validation():
    for kw in ({"gain_q": 0}, {"gain_q": 0.01, "qber_e": 0.6}, {"gain_q": 0.01, "qber_e": 0, "f_ec": 0.9}):
        kw.setdefault("qber_e", 0.0)
        with pytest.raises(InvalidParameterError):
            KeyRateParams(**kw)


# --- loss scans ------------------------------------------------------------------

SCALING = ChannelScaling(dark_yield=1.6e-6, reference_loss_db=5.421)


def test_rate_vs_loss_non_increasing_and_reaches_zero():
    pts = rate_vs_loss(BASE, SCALING, [0.25 * k for k in range(161)])
    rates = [r for _, r in pts]
    assert all(b <= a for a, b in zip(rates, rates[1:]))
    assert rates[0] == gllp_rate(BASE)
    assert rates[-1] == 0.0


def test_zero_extra_loss_keeps_base_point():
    p = scaled_params(BASE, SCALING, 0.0)
    assert p.gain_q == pytest.approx(BASE.gain_q, rel=1e-14)
    assert p.qber_e == pytest.approx(BASE.qber_e, rel=1e-12)


def test_background_floor_sets_qber_at_high_loss():
    p = scaled_params(KeyRateParams(gain_q=0.01, qber_e=0.01), ChannelScaling(1e-5), 80.0)
    assert p.qber_e == pytest.approx(0.5, rel=1e-4)


def test_without_background_rate_scales_with_transmittance():
    base = KeyRateParams(gain_q=0.02, qber_e=0.01)
    r0 = gllp_rate(base)
    r3 = rate_vs_loss(base, ChannelScaling(), [10 * math.log10(2)])[0][1]
    assert r0 / r3 == pytest.approx(2.0, rel=1e-9)


def test_dark_yield_above_gain_rejected():
    with pytest.raises(InvalidParameterError):
        scaled_params(KeyRateParams(gain_q=1e-6, qber_e=0.01), ChannelScaling(1e-5), 1.0)


# --- distance ---------------------------------------------------------------------

def test_max_distance_is_positive_edge():
    d = max_distance(BASE, SCALING, 0.65, 5.2)
    rate = lambda x: rate_vs_loss(BASE, SCALING, [5.2 + 0.65 * x - 5.421])[0][1]
    assert rate(d) > 0
    assert rate(d + 0.01) == 0


def test_halving_propagation_loss_doubles_reach():
    d1 = max_distance(BASE, SCALING, 0.4, 5.421)
    d2 = max_distance(BASE, SCALING, 0.2, 5.421)
    assert d2 / d1 == pytest.approx(2.0, rel=0.01)


def test_distance_ordering_and_preset_values():
    measured = max_distance(BASE, SCALING, 0.65, 5.2)
    improved = max_distance(BASE, SCALING, 0.12, 0.4)
    assert improved > measured
    assert improved / measured > 0.65 / 0.12
    assert measured == pytest.approx(8.07, abs=0.02)
    assert improved == pytest.approx(83.73, abs=0.05)


def test_distance_errors():
    with pytest.raises(InvalidParameterError):
        max_distance(BASE, SCALING, 0.0)
    with pytest.raises(InfeasibleError):
        max_distance(KeyRateParams(gain_q=0.01, qber_e=0.2), ChannelScaling(), 0.2)


def test_distance_curve_points():
    curve = distance_curve(BASE, SCALING, [0.12, 0.65], 0.4, "x")
    assert curve.label == "x" and [a for a, _ in curve.points] == [0.12, 0.65]
    assert curve.points[0][1] > curve.points[1][1]


def test_preset_inputs():
    cfg = load_config("keyrate_reach")
    base, scaling = keyrate_inputs(cfg, resolve(cfg))
    assert base.gain_q == pytest.approx(0.004525, rel=1e-3)
    assert base.p_multi == pytest.approx(2 * 6.924145617840281e-4, rel=1e-9)
    assert scaling.dark_yield == pytest.approx(1.6e-6)
    assert scaling.reference_loss_db == pytest.approx(5.421, abs=1e-12)
