import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from puffloc.errors import ParameterError
from puffloc.plume import (
    DEFAULT_SIGMA,
    DiffusivityParams,
    PlumeParams,
    briggs_sigma,
    peak_concentration,
    puff_concentration_3d,
    sensor_concentration,
)


def test_briggs_origin_and_grid_scale():
    assert briggs_sigma(0.0) == (0.0, 0.0)
    sy, sz = briggs_sigma(0.3)
    assert sy == pytest.approx(0.0120, abs=5e-5)
    assert sz == pytest.approx(0.0048, abs=5e-5)


def test_briggs_range_over_node_distances():
    # nearest node 0.15 m, farthest corner 0.3*sqrt(2) m from the source
    lo_y, lo_z = briggs_sigma(0.15)
    hi_y, hi_z = briggs_sigma(0.3 * math.sqrt(2))
    assert lo_y == pytest.approx(0.006, abs=5e-5) and hi_y == pytest.approx(0.017, abs=5e-5)
    assert lo_z == pytest.approx(0.0024, abs=5e-5) and hi_z == pytest.approx(0.0068, abs=5e-5)
    # the fixed widths are the mid-range values
    assert (lo_y + hi_y) / 2 == pytest.approx(0.0115, abs=1e-4)
    assert (lo_z + hi_z) / 2 == pytest.approx(0.0046, abs=1e-4)


def test_briggs_negative_distance():
    with pytest.raises(ParameterError):
        briggs_sigma(-1.0)


def test_briggs_increasing():
    r = np.linspace(0, 1000, 2001)
    sy, sz = np.array([briggs_sigma(v) for v in r]).T
    assert np.all(np.diff(sy) > 0) and np.all(np.diff(sz) > 0)


def test_puff_3d_at_source_both_images():
    p = PlumeParams(1e-6)
    sx, sy, sz = DEFAULT_SIGMA
    c = puff_concentration_3d(p, (0.3, 0.3, 0.0), 1.0)
    assert c == pytest.approx(2e-6 / ((2 * math.pi) ** 1.5 * sx * sy * sz), rel=1e-14)
    # the two image terms at z = 0 give 2/(2 pi)^1.5 = 1/sqrt(2 pi^3): 0.2087 kg/m^3
    assert c == pytest.approx(0.2087, abs=1e-4)


def test_planar_peak_value():
    p = PlumeParams(1e-6, wind=(0.01, -0.02))
    t = 3.0
    c = sensor_concentration(p, (0.3 + 0.01 * t, 0.3 - 0.02 * t), t)
    assert c == pytest.approx(peak_concentration(1e-6), rel=1e-14)
    assert c == pytest.approx(0.2088, abs=1e-4)


def test_zero_mass_is_zero():
    p = PlumeParams(0.0)
    assert puff_concentration_3d(p, (0.1, 0.2, 0.0), 1.0) == 0.0
    assert sensor_concentration(p, (0.1, 0.2), 1.0) == 0.0


def test_far_tail_bound():
    p = PlumeParams(1e-6)
    c = sensor_concentration(p, (0.3 + 10 * DEFAULT_SIGMA[0], 0.3), 1.0)
    assert c < 1e-20 * peak_concentration(1e-6)


def test_nonpositive_time_rejected():
    p = PlumeParams(1e-6)
    with pytest.raises(ParameterError):
        sensor_concentration(p, (0, 0), 0.0)
    with pytest.raises(ParameterError):
        puff_concentration_3d(p, (0, 0, 0), -1.0)


def test_param_validation():
    with pytest.raises(ParameterError):
        PlumeParams(-1.0)
    with pytest.raises(ParameterError):
        PlumeParams(1.0, sigma=(0.1, 0.0, 0.1))
    with pytest.raises(ParameterError):
        DiffusivityParams((1.0, 0.0, 1.0))


def test_diffusivity_widths():
    s = DiffusivityParams((0.5, 2.0, 0.125)).sigma_at(4.0)
    assert s == pytest.approx((2.0, 4.0, 1.0))


@settings(max_examples=100, deadline=None)
@given(
    x=st.floats(0.0, 0.6), y=st.floats(0.0, 0.6), z=st.floats(0.0, 0.05),
    t=st.floats(0.1, 100), ux=st.floats(-0.05, 0.05), uy=st.floats(-0.05, 0.05),
)
def test_planar_form_equals_3d_at_ground(x, y, z, t, ux, uy):
    # ground-level source and receiver: the reflected 3-D puff and the planar form coincide
    p = PlumeParams(1e-6, wind=(ux, uy), sigma=(0.05, 0.05, 0.02))
    c3 = puff_concentration_3d(p, (x, y, 0.0), t)
    c2 = sensor_concentration(p, (x, y), t)
    assert c3 == pytest.approx(c2, rel=1e-12, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(dx=st.floats(0, 0.1), dy=st.floats(0, 0.1), t=st.floats(0.1, 50))
def test_zero_wind_reflection_symmetry(dx, dy, t):
    p = PlumeParams(1e-6, sigma=(0.05, 0.05, 0.02))
    ref = sensor_concentration(p, (0.3 + dx, 0.3 + dy), t)
    for sx, sy in ((-1, 1), (1, -1), (-1, -1)):
        assert sensor_concentration(p, (0.3 + sx * dx, 0.3 + sy * dy), t) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(0.1, 50), ux=st.floats(-0.05, 0.05))
def test_monotone_tail(t, ux):
    p = PlumeParams(1e-6, wind=(ux, 0.0), sigma=(0.05, 0.05, 0.02))
    center = 0.3 + ux * t
    d = np.linspace(0, 0.5, 200)
    c = sensor_concentration(p, (center + d, np.full_like(d, 0.3)), t)
    assert np.all(np.diff(c) <= 0)
