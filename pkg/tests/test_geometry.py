import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmtomo.geometry import (
    RadarGeometry,
    TargetState,
    approx_range_history,
    derived_geometry,
    exact_range_history,
    motion_epsilons,
)

finite = st.floats(-30, 30, allow_nan=False, allow_subnormal=False)


def test_defaults_and_zero_doppler_range(geom):
    assert geom.zero_doppler_range == geom.reference_range == 650_000.0
    assert geom.synthetic_aperture == pytest.approx(32_000.0)
    assert geom.prf == 2 * geom.doppler_bandwidth


@pytest.mark.parametrize("kw", [
    {"wavelength_em": 0.0},
    {"platform_velocity": -1.0},
    {"incidence_angle": 0.0},
    {"incidence_angle": math.pi / 2},
    {"prf": 10e3},
    {"chirp_bandwidth": 0.0},
])
def test_geometry_rejects_invalid(kw):
    with pytest.raises(ValueError):
        RadarGeometry(**kw)


def test_exact_stationary_values(geom):
    assert exact_range_history(TargetState(), geom, 0.0) == 650_000.0
    assert exact_range_history(TargetState(), geom, 1.0) == pytest.approx(650037.6912149017, abs=1e-6)
    assert exact_range_history(TargetState(), geom, 1.0) == pytest.approx(math.hypot(7000, 650000))


def test_exact_vs_approx_range_velocity(geom):
    t = TargetState(v_r=10.0)
    exact = exact_range_history(t, geom, 2.0)
    approx = approx_range_history(t, geom, 2.0 * geom.platform_velocity)
    assert exact == pytest.approx(650130.7563867441, abs=1e-6)
    assert exact - approx < 0.01


def test_approx_values(geom):
    x = np.linspace(-16000, 16000, 7)
    np.testing.assert_allclose(approx_range_history(TargetState(), geom, x), 650000 + x**2 / 1.3e6, rtol=0, atol=1e-9)
    assert approx_range_history(TargetState(v_r=3, a_r=1), geom, 0.0) == 650_000.0
    t7 = TargetState(v_r=7.0)
    approx = approx_range_history(t7, geom, 7000.0)
    assert approx == pytest.approx(650000 - 7 + 7000**2 / 1.3e6, abs=1e-9)
    assert approx == pytest.approx(650030.69, abs=0.005)
    assert abs(approx - exact_range_history(t7, geom, 1.0)) < 0.05


def test_epsilons(geom):
    assert motion_epsilons(TargetState(), geom).as_tuple() == (0.0, 0.0, 0.0)
    assert motion_epsilons(TargetState(v_r=7), geom).eps_r1 == pytest.approx(1e-3, rel=1e-12)
    assert motion_epsilons(TargetState(a_r=0.98), geom).eps_r2 == pytest.approx(0.013, rel=1e-12)
    assert motion_epsilons(TargetState(v_a=14), geom).eps_c1 == pytest.approx(2e-3, rel=1e-12)


def test_epsilons_reject_zero_velocity(geom):
    g = object.__new__(RadarGeometry)
    object.__setattr__(g, "platform_velocity", 0.0)
    object.__setattr__(g, "reference_range", 1.0)
    with pytest.raises(ValueError):
        motion_epsilons(TargetState(v_r=1), g)


def test_taylor_regime_warns_softly(geom):
    with pytest.warns(RuntimeWarning):
        motion_epsilons(TargetState(v_r=200.0), geom)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        motion_epsilons(TargetState(v_r=20.0), geom)


def test_derived_geometry(geom):
    d = derived_geometry(geom)
    assert d.footprint == pytest.approx(3358.3, abs=0.05)
    assert d.synthetic_aperture == 32_000.0
    assert d.doppler_bandwidth_hz == pytest.approx(22233.250620347397, rel=1e-12)
    assert d.doppler_bandwidth * d.azimuth_resolution == pytest.approx(1.0, rel=1e-9)
    d2 = derived_geometry(RadarGeometry(pulse_count=2 * geom.pulse_count))
    assert d2.synthetic_aperture == pytest.approx(2 * d.synthetic_aperture)
    assert d2.azimuth_resolution == pytest.approx(d.azimuth_resolution / 2)


def test_stationary_taylor_remainder(geom):
    R0 = geom.reference_range
    x = np.linspace(-geom.synthetic_aperture / 2, geom.synthetic_aperture / 2, 2001)
    diff = approx_range_history(TargetState(), geom, x) - exact_range_history(TargetState(), geom, x / geom.platform_velocity)
    assert np.all(diff <= x**4 / (8 * R0**3) * 1.1 + 1e-9)


@given(finite, finite, st.floats(-2, 2, allow_subnormal=False))
def test_epsilons_linear(v_r, v_a, a_r):
    g = RadarGeometry()
    t = TargetState(v_r=v_r, v_a=v_a, a_r=a_r)
    e1 = np.array(motion_epsilons(t, g).as_tuple())
    e2 = np.array(motion_epsilons(t.scaled(2.0), g).as_tuple())
    np.testing.assert_allclose(e2, 2 * e1, rtol=1e-12, atol=1e-300)


@settings(max_examples=50)
@given(st.floats(-30, 30), st.floats(0, 14))
def test_exact_time_reversal_symmetry(v_a, t):
    # R depends on (V - v_a) t; reversing t with v_a fixed is the exact symmetry
    g = RadarGeometry()
    a = exact_range_history(TargetState(v_a=v_a), g, t)
    assert a == exact_range_history(TargetState(v_a=v_a), g, -t)


def test_array_input_shape(geom):
    out = exact_range_history(TargetState(), geom, np.zeros((3, 4)))
    assert out.shape == (3, 4)
