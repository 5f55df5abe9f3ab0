import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from puffloc.errors import DomainError, OutOfScopeError, ParameterError
from puffloc.plume import PlumeParams, sensor_concentration
from puffloc.sensor import (
    SCOPE,
    NodeId,
    NoiseModel,
    SensitivityParams,
    SensorGrid,
    concentration_from_voltage,
    fit_sensitivity,
    sensed_voltage,
    sensitivity_forward,
    synthesize_traces,
    voltage_from_concentration,
)

SP = SensitivityParams()


def _voltage_oracle(C):
    rs = 24e3 * (0.0116 * C**-0.5855 - 0.0743)
    return 5.0 * 1e3 / (1e3 + rs)


def test_default_grid_geometry(grid):
    assert len(grid.nodes) == 24
    assert NodeId(3, 3) not in grid.occupied
    assert grid.position(NodeId(1, 1)) == (0.0, 0.0)
    assert grid.position(NodeId(2, 5)) == pytest.approx((0.6, 0.15))
    assert grid.centroid == pytest.approx((0.3, 0.3))
    with pytest.raises(ParameterError):
        grid.position(NodeId(3, 3))


def test_node_labels():
    assert NodeId(4, 2).label == "N42"
    assert NodeId.parse("N15") == NodeId(1, 5)
    with pytest.raises(ParameterError):
        NodeId.parse("X11")


def test_grid_validation():
    with pytest.raises(ParameterError):
        SensorGrid(spacing=0.0)
    with pytest.raises(ParameterError):
        SensorGrid(occupied=frozenset({NodeId(6, 1)}))


def test_sensitivity_examples():
    assert sensitivity_forward(4e-4) == pytest.approx(0.0116 * 4e-4**-0.5855 - 0.0743, rel=1e-14)
    # the 0.2 V anchor means Rs/Ro = 1 exactly; the fitted curve sits within
    # two fit RMSEs (2 * 0.0371) of it
    assert sensitivity_forward(4e-4) == pytest.approx(1.0, abs=2 * 0.0371)
    assert sensitivity_forward(5e-5) > sensitivity_forward(1e-2)
    assert sensitivity_forward(1e-2) == pytest.approx(0.0116 * 0.01**-0.5855 - 0.0743, rel=1e-14)
    with pytest.raises(OutOfScopeError):
        sensitivity_forward(2e-2)
    with pytest.raises(OutOfScopeError):
        sensitivity_forward(1e-5)


def test_voltage_anchor():
    # 0.4 g/m^3 sits at about 0.2 V; the fitted curve's residual allows a
    # few percent of R_s/R_o, i.e. roughly 15 mV here
    v = voltage_from_concentration(4e-4)
    assert v == pytest.approx(_voltage_oracle(4e-4), rel=1e-14)
    assert abs(v - 0.2) <= 0.015


def test_voltage_small_at_low_end():
    assert voltage_from_concentration(5e-5) < voltage_from_concentration(1e-4) < 0.2


def test_concentration_from_voltage_anchor():
    assert concentration_from_voltage(0.2) == pytest.approx(4.4e-4, rel=0.02)


def test_round_trip_identity():
    C = np.logspace(np.log10(SCOPE[0]), np.log10(SCOPE[1]), 1000)
    back = concentration_from_voltage(voltage_from_concentration(C))
    assert np.max(np.abs(back / C - 1)) <= 1e-9


def test_inversion_domain_error_when_base_negative():
    # with d1 > 0 the base turns negative as gamma approaches V_in
    sp = SensitivityParams(d1=0.2)
    with pytest.raises(DomainError):
        concentration_from_voltage(4.9, sp)


def test_table_values_never_hit_domain_error():
    g = np.linspace(1e-6, 5.0 - 1e-6, 1001)
    assert np.all(np.isfinite(concentration_from_voltage(g)))


def test_voltage_range_checked():
    with pytest.raises(ParameterError):
        concentration_from_voltage(0.0)
    with pytest.raises(ParameterError):
        concentration_from_voltage(5.0)


@settings(max_examples=100, deadline=None)
@given(c1=st.floats(SCOPE[0], SCOPE[1]), c2=st.floats(SCOPE[0], SCOPE[1]))
def test_monotonicity(c1, c2):
    if c1 == c2:
        return
    lo, hi = min(c1, c2), max(c1, c2)
    assert sensitivity_forward(lo) > sensitivity_forward(hi)
    assert voltage_from_concentration(lo) < voltage_from_concentration(hi)


def test_sensed_voltage_saturates_and_fades():
    vmax = voltage_from_concentration(SCOPE[1])
    assert sensed_voltage(1.0) == pytest.approx(vmax)
    assert sensed_voltage(0.0) == 0.0
    assert sensed_voltage(SCOPE[0] / 2) == pytest.approx(voltage_from_concentration(SCOPE[0]) / 2)


def test_fit_sensitivity_exact():
    C = np.logspace(np.log10(SCOPE[0]), np.log10(SCOPE[1]), 30)
    pts = np.column_stack([C, 0.0116 * C**-0.5855 - 0.0743])
    sp, rmse = fit_sensitivity(pts)
    assert sp.a1 == pytest.approx(0.0116, rel=1e-6)
    assert sp.b1 == pytest.approx(-0.5855, rel=1e-6)
    assert sp.d1 == pytest.approx(-0.0743, rel=1e-6)
    assert rmse < 1e-9


def test_fit_sensitivity_needs_points():
    with pytest.raises(ParameterError):
        fit_sensitivity([(1e-4, 1.0), (1e-3, 0.5)])


def test_trace_constant_when_no_mass(grid):
    tr = synthesize_traces(grid, PlumeParams(0.0), NoiseModel(noise_scale=0.0, offset=0.1), duration=10)
    for t in tr.values():
        assert len(t) == 100
        assert np.all(t.samples == 0.1)


def test_noiseless_peak_time(grid):
    p = PlumeParams(3e-5, wind=(-0.03, 0.02), sigma=(0.1, 0.1, 0.04))
    tr = synthesize_traces(grid, p, NoiseModel(noise_scale=0.0), duration=60)
    node = NodeId(4, 2)
    t = tr[node].times()
    dense = np.linspace(0.01, 60, 600001)
    c = sensor_concentration(p, grid.position(node), dense)
    t_peak = dense[np.argmax(c)]
    assert t[np.argmax(tr[node].samples)] == pytest.approx(t_peak, abs=0.5 / tr[node].sample_rate + 1e-4)


def test_traces_deterministic_and_bounded(grid):
    p = PlumeParams(3e-5, wind=(-0.03, 0.02), sigma=(0.1, 0.1, 0.04))
    a = synthesize_traces(grid, p, seed=7, duration=30)
    b = synthesize_traces(grid, p, seed=7, duration=30)
    c = synthesize_traces(grid, p, seed=8, duration=30)
    for n in grid.nodes:
        assert np.array_equal(a[n].samples, b[n].samples)
        assert np.all((a[n].samples >= 0) & (a[n].samples <= 5.0))
    assert any(not np.array_equal(a[n].samples, c[n].samples) for n in grid.nodes)


def test_noise_model_validation():
    with pytest.raises(ParameterError):
        NoiseModel(nu=0)
    with pytest.raises(ParameterError):
        NoiseModel(offset=-0.1)
    nm = NoiseModel(offset={NodeId(1, 1): 0.2})
    assert nm.offset_for(NodeId(1, 1)) == 0.2
