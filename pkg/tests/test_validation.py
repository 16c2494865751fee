import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmtomo.tomography import DepthGrid, SonicParams, Tomogram, assemble_tomogram, build_steering, steering_vector, vertical_wavenumbers
from mmtomo.tracking import ShiftSeries
from mmtomo.validation import (
    Ridge,
    TopoProfile,
    VibrationStream,
    bandpass,
    compare_streams,
    surface_ridge,
    topo_overlay_score,
)

FS = 100.0


def vibration(n=4096, seed=0):
    """Gaussian ground motion band-limited to 1-9 Hz."""
    r = np.random.default_rng(seed)
    return bandpass(r.standard_normal(n), FS, (1.0, 9.0))


def test_topo_profile_invariants():
    with pytest.raises(ValueError):
        TopoProfile([0, 0, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        TopoProfile([0, 1], [1, np.inf])
    with pytest.raises(ValueError):
        TopoProfile([0, 1, 2], [1, 2])


def test_stream_invariants():
    with pytest.raises(ValueError):
        VibrationStream(0.0, [1, 2])
    with pytest.raises(ValueError):
        VibrationStream(10.0, [1.0])


def test_ridge_on_known_surface():
    k = 16
    p = SonicParams.synthetic(k)
    kz = vertical_wavenumbers(p)
    probe = build_steering(kz, DepthGrid(0, 1, 2), p.time_scale)
    from mmtomo.tomography import ambiguity_period

    grid = DepthGrid.full_period(0.0, ambiguity_period(probe), k)
    A = build_steering(kz, grid, p.time_scale)
    surface = np.linspace(60.0, 420.0, 30)
    series = [ShiftSeries((0, i), 0.3 * steering_vector(A, z), np.ones(k)) for i, z in enumerate(surface)]
    ridge = surface_ridge(assemble_tomogram(series, A))
    assert np.max(np.abs(ridge.depths - surface)) <= grid.spacing


def test_ridge_flat_and_gap():
    mag = np.zeros((5, 4))
    mag[2, :3] = [1.0, 2.0, 0.5]
    mag[3, :3] = 0.4
    tomo = Tomogram(mag, np.arange(5.0) * 10, np.arange(4.0), "matched")
    r = surface_ridge(tomo)
    np.testing.assert_array_equal(r.depths[:3], [20.0, 20.0, 20.0])
    assert np.isnan(r.depths[3]) and r.gaps.tolist() == [False, False, False, True]


def test_ridge_threshold():
    mag = np.array([[0.3], [0.6], [1.0]])
    tomo = Tomogram(mag, np.array([0.0, 10.0, 20.0]), np.array([0.0]), "matched")
    assert surface_ridge(tomo, 0.5).depths[0] == 10.0
    assert surface_ridge(tomo, 0.2).depths[0] == 0.0
    assert surface_ridge(tomo, 0.9).depths[0] == 20.0


def test_score_examples():
    pos = np.linspace(0, 100, 11)
    h = 50 + 0.3 * pos
    topo = TopoProfile(pos, h)
    assert topo_overlay_score(Ridge(pos, h.copy()), topo) == {"rmse": 0.0, "bias": 0.0, "n": 11}
    s = topo_overlay_score(Ridge(pos, h + 10), topo)
    assert s["rmse"] == pytest.approx(10.0) and s["bias"] == pytest.approx(10.0)
    with pytest.raises(ValueError, match="overlap"):
        topo_overlay_score(Ridge(pos + 500, h), topo)


def test_score_noise_statistics():
    pos = np.linspace(0, 1000, 200)
    topo = TopoProfile(pos, np.zeros_like(pos))
    for seed in range(10):
        noise = np.random.default_rng(seed).normal(0, 5.0, pos.size)
        assert 4.0 <= topo_overlay_score(Ridge(pos, noise), topo)["rmse"] <= 6.0


def test_score_skips_gaps_and_interpolates():
    topo = TopoProfile([0.0, 10.0], [0.0, 100.0])
    s = topo_overlay_score(Ridge(np.array([2.0, 5.0, 8.0]), np.array([20.0, np.nan, 85.0])), topo)
    assert s["n"] == 2 and s["bias"] == pytest.approx(2.5)


@given(st.floats(-1e4, 1e4))
def test_score_translation_consistent(c):
    pos = np.linspace(0, 10, 6)
    topo = TopoProfile(pos, np.sin(pos))
    ridge = Ridge(pos, np.sin(pos) + np.linspace(-1, 2, 6))
    a = topo_overlay_score(ridge, topo)
    b = topo_overlay_score(Ridge(pos, ridge.depths + c), TopoProfile(pos, topo.heights + c))
    assert b["rmse"] == pytest.approx(a["rmse"], abs=1e-8)
    assert b["bias"] == pytest.approx(a["bias"], abs=1e-8)


def test_streams_identity():
    a = VibrationStream(FS, vibration())
    c = compare_streams(a, a, band=(1.0, 10.0))
    assert not c.time_error.any()
    assert np.all(c.in_band((2.0, 8.0)) > 1 - 1e-9)
    np.testing.assert_array_equal(c.spectrum_a, c.spectrum_b)


def test_streams_noise_coherence():
    x = vibration()
    r = np.random.default_rng(7)
    sigma = math.sqrt(np.mean(x**2) / 100.0)
    c = compare_streams(VibrationStream(FS, x), VibrationStream(FS, x + r.normal(0, sigma, x.size)))
    assert np.min(c.in_band((2.0, 8.0))) >= 0.9


def test_streams_error_zero_mean():
    x = vibration()
    for seed in range(5):
        noise = np.random.default_rng(seed).normal(0, 0.1, x.size)
        c = compare_streams(VibrationStream(FS, x), VibrationStream(FS, x + noise))
        assert abs(c.time_error.mean()) < 3 * 0.1 / math.sqrt(x.size)


def test_streams_lag():
    x = vibration(seed=2) + np.random.default_rng(3).normal(0, 0.1, 4096)
    b = np.roll(x, 3)
    c = compare_streams(VibrationStream(FS, x), VibrationStream(FS, b))
    assert c.lag_samples == 3
    c2 = compare_streams(VibrationStream(FS, b), VibrationStream(FS, x))
    assert c2.lag_samples == -3


def test_streams_errors():
    a = VibrationStream(FS, vibration(128))
    with pytest.raises(ValueError, match="sample rates"):
        compare_streams(a, VibrationStream(2 * FS, vibration(128)))
    with pytest.raises(ValueError, match="lengths"):
        compare_streams(a, VibrationStream(FS, vibration(100)))


def test_bandpass_idempotent_in_passband():
    x = vibration()
    once = bandpass(x, FS, (0.3, 30.0))
    twice = bandpass(once, FS, (0.3, 30.0))
    assert np.sum(twice**2) == pytest.approx(np.sum(once**2), rel=0.01)
    with pytest.raises(ValueError):
        bandpass(x, FS, (10.0, 60.0))


def test_csv_loaders(tmp_path):
    p = tmp_path / "topo.csv"
    p.write_text("pos_m,height_m\n0,1\n5,2\n10,4\n")
    t = TopoProfile.from_csv(p)
    np.testing.assert_array_equal(t.heights, [1, 2, 4])
    s = tmp_path / "s.csv"
    s.write_text("t_s,value\n" + "".join(f"{i / 50},{i}\n" for i in range(10)))
    v = VibrationStream.from_csv(s)
    assert v.sample_rate == pytest.approx(50.0) and v.samples.size == 10
    bad = tmp_path / "bad.csv"
    bad.write_text("t_s,value\n0,1\n0.1,2\n0.3,3\n")
    with pytest.raises(ValueError, match="uniform"):
        VibrationStream.from_csv(bad)
