import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import ipc_area_mil2, ipc_width_mil
from pib.ipc import (SizingError, WidthQuery, check_board_widths, check_segment_width, min_cross_section,
                     min_trace_width, round_half_up)
from pib.units import mil_to_mm

currents = st.floats(min_value=0.01, max_value=50.0)
rises = st.floats(min_value=1.0, max_value=100.0)


def test_external_two_amps():
    area = min_cross_section(WidthQuery(2.0, 10.0, 2.0, "external"))
    assert area == pytest.approx(ipc_area_mil2(2.0, 10.0, 0.048), rel=1e-12)
    assert area == pytest.approx(42.4, abs=0.5)
    width = min_trace_width(WidthQuery(2.0, 10.0, 2.0, "external"))
    assert width == pytest.approx(15.4, abs=0.3)
    assert round_half_up(width) == 15


def test_internal_two_amps():
    q = WidthQuery(2.0, 10.0, 2.0, "internal")
    assert min_cross_section(q) == pytest.approx(110.3, abs=1.0)
    assert min_trace_width(q) == pytest.approx(40.0, abs=0.5)


@given(currents, rises)
def test_matches_oracle(i, dt):
    assert min_trace_width(WidthQuery(i, dt, 1.0)) == pytest.approx(ipc_width_mil(i, dt, 1.0), rel=1e-9)


@given(currents, rises)
def test_doubling_copper_halves_width(i, dt):
    one = min_trace_width(WidthQuery(i, dt, 1.0))
    two = min_trace_width(WidthQuery(i, dt, 2.0))
    assert two == pytest.approx(one / 2, rel=1e-12)


@given(currents, rises)
def test_internal_needs_more(i, dt):
    assert min_trace_width(WidthQuery(i, dt, 1.0, "internal")) > min_trace_width(WidthQuery(i, dt, 1.0))


@given(currents, rises)
def test_monotone(i, dt):
    h = 1e-6
    w = min_trace_width(WidthQuery(i, dt))
    assert min_trace_width(WidthQuery(i * (1 + h), dt)) > w
    assert min_trace_width(WidthQuery(i, dt * (1 + h))) < w


@pytest.mark.parametrize("q", [WidthQuery(0.0), WidthQuery(-1.0), WidthQuery(1.0, 0.0), WidthQuery(1.0, 10, -2),
                               WidthQuery(math.nan), WidthQuery(1.0, layer_class="inner")])
def test_bad_queries(q):
    with pytest.raises(SizingError):
        min_trace_width(q)


def test_headroom_of_wide_trace():
    f = check_segment_width("t", "HT", "top", mil_to_mm(25.0), 2.0, 2.0)
    assert f.status == "pass"
    assert f.headroom == pytest.approx(25.0 / 15.382, abs=0.01)


def test_narrow_trace_violates():
    f = check_segment_width("t", "HT", "top", mil_to_mm(10.0), 2.0, 2.0)
    assert f.status == "violation" and f.severity == "error"
    assert f.headroom < 1


def test_zero_current_passes():
    f = check_segment_width("t", "HT", "top", 0.1, 0.0, 1.0)
    assert f.status == "pass"


def test_unknown_current_is_a_warning():
    f = check_segment_width("t", "HT", "top", 0.1, None, 1.0)
    assert f.status == "unverifiable" and f.severity == "warn"


def test_board_widths_use_net_max_current(example_board):
    findings = {f.feature: f for f in check_board_widths(example_board)}
    # the LED net declares its current; everything else is unknown without a solve
    assert findings["led-run"].status == "pass"
    assert findings["led-run"].current == 0.02
    assert findings["ht-trunk"].status == "unverifiable"
