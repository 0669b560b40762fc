import math

from hypothesis import given, strategies as st

from flexbench.psychro import p_ws, rh_from_w, w_from_rh, w_sat


def test_saturation_pressure_reference_points():
    # Triple point and boiling point sanity, a few percent tolerance.
    assert abs(p_ws(0.0) - 611.0) < 10.0
    assert abs(p_ws(100.0) - 101325.0) / 101325.0 < 0.04
    # 25 C saturation is about 3.17 kPa
    assert abs(p_ws(25.0) - 3170.0) / 3170.0 < 0.01


def test_p_ws_monotone():
    last = 0.0
    for t in range(-20, 61, 5):
        p = p_ws(float(t))
        assert p > last
        last = p


def test_w_from_rh_basics():
    assert w_from_rh(25.0, 0.0) == 0.0
    w50 = w_from_rh(25.0, 50.0)
    w100 = w_from_rh(25.0, 100.0)
    assert 0.0 < w50 < w100
    # ~20 g/kg at saturation, 25 C
    assert 0.018 < w100 < 0.022
    assert abs(w_sat(25.0) - w100) < 1e-15


def test_rh_clamped_to_physical_range():
    assert rh_from_w(25.0, 0.0) == 0.0
    assert rh_from_w(25.0, 1.0) == 100.0


@given(st.floats(min_value=-10.0, max_value=45.0),
       st.floats(min_value=1.0, max_value=99.0))
def test_humidity_round_trip(t, rh):
    w = w_from_rh(t, rh)
    assert abs(rh_from_w(t, w) - rh) < 1e-9


@given(st.floats(min_value=-10.0, max_value=45.0))
def test_w_monotone_in_rh(t):
    ws = [w_from_rh(t, rh) for rh in (10.0, 40.0, 70.0, 100.0)]
    assert ws == sorted(ws)
    assert all(math.isfinite(w) for w in ws)
