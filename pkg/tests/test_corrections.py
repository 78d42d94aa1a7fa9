"""Arbitration layer: mapping, saturation, safety clamp, backtrack rate."""

import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sandbench.corrections import (AXES, CommandVector, CorrectionInput, CorrectionMailbox,
                                   SafetyBox, SaturationSet, arbitrate, backtrack_rate,
                                   map_correction)

unit = st.floats(-1.0, 1.0, allow_nan=False)


def test_coupled_zero_gives_zero_delta():
    dx = map_correction(CorrectionInput.coupled_input(0.0), SaturationSet())
    np.testing.assert_array_equal(dx, np.zeros(4))


def test_coupled_full_scale_hand_case():
    # u=1, w=(-0.5, 1, 0.5, 0), sat=(0.5, 10 N, 0.05 rad, 10 mm)
    sat = SaturationSet(feed_scale=0.5, force=10.0, pitch=0.05, lateral_offset=10.0)
    dx = map_correction(CorrectionInput.coupled_input(1.0), sat, coupling=(-0.5, 1.0, 0.5, 0.0))
    np.testing.assert_allclose(dx, [-0.25, 10.0, 0.025, 0.0])


def test_independent_single_axis():
    sat = SaturationSet()
    dx = map_correction(CorrectionInput.independent([0, 0, 0, -1.0]), sat)
    np.testing.assert_allclose(dx, [0, 0, 0, -sat.lateral_offset])


def test_coupling_must_have_unit_infinity_norm():
    with pytest.raises(ValueError):
        map_correction(CorrectionInput.coupled_input(0.5), SaturationSet(),
                       coupling=(0.5, 0.5, 0.1, 0.0))


def test_input_clamped_at_ingest():
    inp = CorrectionInput.coupled_input(4.2)
    assert inp.coupled == 1.0
    inp = CorrectionInput.independent([-3.0, 0.2, 9.0, 0.0])
    assert inp.axes == (-1.0, 0.2, 1.0, 0.0)


def test_input_requires_exactly_one_mode():
    with pytest.raises(ValueError):
        CorrectionInput(coupled=0.1, axes=(0, 0, 0, 0))
    with pytest.raises(ValueError):
        CorrectionInput()


def test_arbitrate_identity_correction():
    x_n = CommandVector(1.0, 15.0, 0.0, 0.0)
    assert arbitrate(x_n, np.zeros(4)) == x_n


def test_arbitrate_direct_sum():
    x_n = CommandVector(1.0, 15.0, 0.0, 0.0)
    x = arbitrate(x_n, np.array([0.2, 5.0, 0.02, -3.0]))
    assert x == CommandVector(1.2, 20.0, 0.02, -3.0)


def test_arbitrate_safety_clamp():
    x_n = CommandVector(1.0, 48.0, 0.0, 0.0)
    x = arbitrate(x_n, np.array([0.0, 10.0, 0.0, 0.0]))
    assert x.force == 50.0


def _bits(v: float) -> bytes:
    return struct.pack("<d", v)


@given(st.floats(-0.9, 2.9), st.floats(0.1, 49.9), st.floats(-0.14, 0.14), st.floats(-29.0, 29.0))
def test_zero_input_neutrality_bit_exact(feed, force, pitch, lateral):
    x_n = CommandVector(feed, force, pitch, lateral)
    x = arbitrate(x_n, np.zeros(4))
    for axis in AXES:
        assert _bits(getattr(x, axis)) == _bits(getattr(x_n, axis))


@given(unit, unit, unit, unit, st.booleans(), unit)
def test_saturation_bound_holds(a0, a1, a2, a3, coupled_mode, u):
    sat = SaturationSet(feed_scale=0.4, force=8.0, pitch=0.04, lateral_offset=9.0)
    # strictly interior nominal: correction magnitude per axis <= sat exactly
    x_n = CommandVector(1.0, 25.0, 0.0, 0.0)
    if coupled_mode:
        inp = CorrectionInput.coupled_input(u)
    else:
        inp = CorrectionInput.independent([a0, a1, a2, a3])
    dx = map_correction(inp, sat)
    x = arbitrate(x_n, dx)
    bounds = sat.as_array()
    deltas = np.abs(x.as_array() - x_n.as_array())
    assert np.all(deltas <= bounds + 1e-12)


@given(unit, unit)
def test_arbitration_monotone_per_axis(u1, u2):
    sat = SaturationSet()
    x_n = CommandVector(1.0, 15.0, 0.0, 0.0)
    lo, hi = sorted((u1, u2))
    x_lo = arbitrate(x_n, map_correction(CorrectionInput.independent([0, lo, 0, 0]), sat))
    x_hi = arbitrate(x_n, map_correction(CorrectionInput.independent([0, hi, 0, 0]), sat))
    assert x_lo.force <= x_hi.force


@given(unit)
def test_arbitration_continuous(u):
    sat = SaturationSet()
    x_n = CommandVector(1.0, 15.0, 0.0, 0.0)
    eps = 1e-6
    a = arbitrate(x_n, map_correction(CorrectionInput.coupled_input(u), sat))
    b = arbitrate(x_n, map_correction(CorrectionInput.coupled_input(min(1.0, u + eps)), sat))
    assert np.all(np.abs(a.as_array() - b.as_array()) < 1e-4)


@given(unit)
def test_coupled_mode_spans_one_dimensional_ray(u):
    sat = SaturationSet()
    dx_u = map_correction(CorrectionInput.coupled_input(u), sat)
    dx_1 = map_correction(CorrectionInput.coupled_input(1.0), sat)
    np.testing.assert_allclose(dx_u, u * dx_1, atol=1e-12)


def test_backtrack_rate_signs():
    assert backtrack_rate(CorrectionInput.idle(), 50.0, feed_scale=1.0) == 50.0
    assert backtrack_rate(CorrectionInput.idle(), 50.0, feed_scale=1.3) == pytest.approx(65.0)
    pressed = CorrectionInput.independent([0, 0, 0, 0], backtrack=True)
    assert backtrack_rate(pressed, 50.0, feed_scale=1.3) == -50.0


def test_mailbox_latest_wins():
    box = CorrectionMailbox()
    assert box.latest() == CorrectionInput.idle()
    a = CorrectionInput.coupled_input(0.3)
    b = CorrectionInput.coupled_input(-0.7)
    box.post(a)
    box.post(b)
    assert box.latest() == b
    # reads do not consume
    assert box.latest() == b
