import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hcfqkd.errors import ConfigurationError, InvalidParameterError, OnResonanceError
from hcfqkd.fiber import (
    FiberSpec,
    LossBudget,
    channel_loss,
    db_to_transmittance,
    fiber_report,
    improvement_scenario,
    resonance_wavelengths,
    transmittance_to_db,
    window_index,
)

T_UM, N = 1.2, 1.45


def test_resonances_for_design_membrane():
    assert resonance_wavelengths(T_UM, N, 3) == pytest.approx([2.52, 1.26, 0.84], rel=1e-12)


def test_second_resonance_is_half_the_first():
    lam = resonance_wavelengths(0.77, 1.6, 2)
    assert lam[1] == lam[0] / 2


def test_resonances_collapse_as_index_approaches_one():
    assert max(resonance_wavelengths(T_UM, 1 + 1e-12, 4)) < 1e-5


@pytest.mark.parametrize("t, n", [(0.0, 1.45), (-1.0, 1.45), (1.2, 1.0), (1.2, 0.9)])
def test_resonances_reject_bad_membrane(t, n):
    with pytest.raises(InvalidParameterError):
        resonance_wavelengths(t, n, 3)


def test_resonances_reject_zero_orders():
    with pytest.raises(InvalidParameterError):
        resonance_wavelengths(T_UM, N, 0)


@pytest.mark.parametrize("wl, m", [(1.55, 2), (0.934, 3), (3.0, 1), (0.9339, 3), (0.7, 4)])
def test_window_assignment(wl, m):
    assert window_index(wl, T_UM, N) == m


@pytest.mark.parametrize("wl", [1.26, 2.52, 0.84, 1.2605, 0.8395])
def test_on_resonance_rejected(wl):
    with pytest.raises(OnResonanceError):
        window_index(wl, T_UM, N)


def test_just_outside_guard_band_is_accepted():
    assert window_index(1.2611, T_UM, N) == 2
    assert window_index(1.2589, T_UM, N) == 3


@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0))
def test_window_index_monotone_in_wavelength(a, b):
    lo, hi = sorted((a, b))
    try:
        assert window_index(lo, T_UM, N) >= window_index(hi, T_UM, N)
    except OnResonanceError:
        pass


@given(st.floats(0.1, 5.0), st.floats(1.01, 3.0), st.integers(1, 12))
def test_resonances_scale_as_one_over_m(t, n, m_max):
    lam = resonance_wavelengths(t, n, m_max)
    assert all(a > b for a, b in zip(lam, lam[1:]))
    for m, v in enumerate(lam, 1):
        assert math.isclose(v * m, lam[0], rel_tol=1e-12)


def test_quantum_channel_budget():
    b = channel_loss(FiberSpec(), 0.934)
    assert b.propagation_db == pytest.approx(0.221, abs=1e-12)
    assert b.interface_db == pytest.approx(5.2, abs=1e-12)
    assert b.total_db == pytest.approx(5.421, abs=1e-12)
    # 10 ** (-0.5421) evaluated independently
    assert b.transmittance == pytest.approx(0.28701196364644377, rel=1e-12)


def test_classical_channel_budget():
    assert channel_loss(FiberSpec(), 1.55).total_db == pytest.approx(4.846, abs=1e-12)


def test_identity_channel():
    b = channel_loss(FiberSpec(length=0, num_interfaces=0), 0.934)
    assert b.total_db == 0 and b.transmittance == 1


def test_improved_fiber_budget():
    spec = improvement_scenario(FiberSpec(), 0.12, 0.2)
    assert channel_loss(spec, 0.934).total_db == pytest.approx(0.4408, abs=1e-12)
    # classical band is untouched
    assert channel_loss(spec, 1.55).total_db == pytest.approx(4.846, abs=1e-12)


def test_improvement_leaves_original_unchanged():
    spec = FiberSpec()
    improvement_scenario(spec, 0.12, 0.2)
    assert spec.window_loss[3] == 0.65 and spec.interface_loss["quantum"] == 2.6


def test_identical_replacement_keeps_budget():
    spec = FiberSpec()
    same = improvement_scenario(spec, 0.65, 2.6)
    assert channel_loss(same, 0.934) == channel_loss(spec, 0.934)


def test_single_mode_fiber_comparison():
    smf = FiberSpec(length=0.34, num_interfaces=0, window_loss={3: 1.7})
    assert channel_loss(smf, 0.934).propagation_db == pytest.approx(0.578, abs=1e-12)


def test_window_minimum_recorded_separately():
    spec = FiberSpec()
    assert spec.window_min_loss[3] == 0.39
    assert channel_loss(spec, 0.934).propagation_db == pytest.approx(0.34 * 0.65)


def test_point_override():
    spec = FiberSpec(point_loss={0.95: 0.39})
    assert channel_loss(spec, 0.95).propagation_db == pytest.approx(0.34 * 0.39)
    assert channel_loss(spec, 0.934).propagation_db == pytest.approx(0.34 * 0.65)


def test_missing_window_and_band():
    with pytest.raises(ConfigurationError):
        channel_loss(FiberSpec(window_loss={3: 0.65}), 1.55)
    with pytest.raises(ConfigurationError):
        channel_loss(FiberSpec(), 1.3)


def test_invalid_specs():
    with pytest.raises(ValueError):
        FiberSpec(length=-1)
    with pytest.raises(ValueError):
        FiberSpec(window_loss={0: 1.0})
    with pytest.raises(ValueError):
        FiberSpec(window_loss={3: -0.1})
    with pytest.raises(ValueError):
        FiberSpec(refractive_index=1.0)


@given(st.floats(0, 50), st.floats(0, 50), st.integers(0, 6))
def test_loss_additive_under_concatenation(l1, l2, k):
    spec = FiberSpec()
    whole = channel_loss(spec.model_copy(update={"length": l1 + l2, "num_interfaces": k}), 0.934)
    parts = (
        channel_loss(spec.model_copy(update={"length": l1, "num_interfaces": 0}), 0.934)
        + channel_loss(spec.model_copy(update={"length": l2, "num_interfaces": 0}), 0.934)
        + channel_loss(spec.model_copy(update={"length": 0, "num_interfaces": k}), 0.934)
    )
    assert math.isclose(whole.propagation_db, parts.propagation_db, rel_tol=1e-12, abs_tol=1e-12)
    assert math.isclose(whole.interface_db, parts.interface_db, rel_tol=1e-12, abs_tol=1e-12)


@given(st.floats(0, 100), st.floats(0, 100))
def test_transmittance_composes(a, b):
    assert math.isclose(db_to_transmittance(a) * db_to_transmittance(b), db_to_transmittance(a + b), rel_tol=1e-12)


@given(st.floats(0, 50), st.floats(0, 50))
def test_budget_invariants(p, i):
    b = LossBudget(p, i)
    assert b.total_db == p + i
    assert b.transmittance == 10 ** (-(p + i) / 10)


def test_db_round_trip():
    assert transmittance_to_db(db_to_transmittance(5.421)) == pytest.approx(5.421, abs=1e-12)
    with pytest.raises(InvalidParameterError):
        transmittance_to_db(0)


def test_report_rows():
    rows = fiber_report(FiberSpec(), [0.934, 1.55])
    assert [r["window"] for r in rows] == [3, 2]
    assert set(rows[0]) == {"wavelength_um", "window", "prop_db", "iface_db", "total_db", "transmittance"}
