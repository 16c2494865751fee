import numpy as np
import pytest

from mmtomo.mca import SubAperturePlan, SubApertureStack, fourier_shift
from mmtomo.image import ComplexImage
from mmtomo.tracking import NoTextureError, ShiftSeries, TrackConfig, bresenham, coregister_tile, track_pixels


def speckle(rng, shape=(33, 33), band=0.5):
    """Band-limited circular Gaussian texture."""
    x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    keep = (np.abs(np.fft.fftfreq(shape[0]))[:, None] <= band / 2) & (np.abs(np.fft.fftfreq(shape[1]))[None, :] <= band / 2)
    return np.fft.ifft2(np.fft.fft2(x) * keep)


def add_noise(rng, x, snr_db):
    sigma = np.sqrt(np.mean(np.abs(x) ** 2) / 10 ** (snr_db / 10))
    return x + sigma / np.sqrt(2) * (rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape))


def test_config_validation():
    for kw in ({"window_size": 8}, {"window_size": 10}, {"window_size": (33, 8)}, {"window_size": (1, 2, 3)},
               {"oversample_factor": 1}, {"search_radius": 0}, {"peak_fit": "gauss"},
               {"correlation_floor": 1.0}, {"correlation_floor": -0.1}):
        with pytest.raises(ValueError):
            TrackConfig(**kw)
    assert TrackConfig(window_size=[33, 65]).window_shape == (33, 65)
    assert TrackConfig().window_shape == (33, 33)


def test_identical_tiles(rng):
    x = speckle(rng)
    m = coregister_tile(x, x, TrackConfig())
    assert m.dr == pytest.approx(0, abs=1e-9) and m.da == pytest.approx(0, abs=1e-9)
    assert m.peak == pytest.approx(1.0, abs=1e-12)
    assert not m.low_quality


def test_fourier_shift_recovered(rng):
    x = speckle(rng)
    y = fourier_shift(x, 0.25, -0.40)
    m = coregister_tile(add_noise(rng, x, 20), add_noise(rng, y, 20), TrackConfig())
    assert m.dr == pytest.approx(0.25, abs=0.05)
    assert m.da == pytest.approx(-0.40, abs=0.05)


def test_sign_convention(rng):
    x = speckle(rng, (33, 33))
    m = coregister_tile(x, np.roll(x, (2, -1), axis=(0, 1)), TrackConfig())
    assert (round(m.dr), round(m.da)) == (2, -1)


def test_low_snr_flagged():
    flags = 0
    for seed in range(100):
        r = np.random.default_rng(seed)
        x = speckle(r)
        m = coregister_tile(add_noise(r, x, 0), add_noise(r, x, 0), TrackConfig())
        flags += m.low_quality
    assert flags > 90


def test_no_texture():
    x = np.full((33, 33), 2 + 1j)
    with pytest.raises(NoTextureError, match="no texture"):
        coregister_tile(x, x, TrackConfig())


def test_tile_shape_checks(rng):
    with pytest.raises(ValueError):
        coregister_tile(speckle(rng, (33, 33)), speckle(rng, (33, 35)), TrackConfig())
    with pytest.raises(ValueError):
        coregister_tile(speckle(rng, (21, 21)), speckle(rng, (21, 21)), TrackConfig())


def test_antisymmetry(rng):
    x = speckle(rng)
    y = add_noise(rng, fourier_shift(x, 0.3, 0.1), 30)
    a = coregister_tile(x, y, TrackConfig())
    b = coregister_tile(y, x, TrackConfig())
    assert a.dr == pytest.approx(-b.dr, abs=0.01)
    assert a.da == pytest.approx(-b.da, abs=0.01)


@pytest.mark.parametrize("roll", [(1, 0), (0, -2), (2, 3)])
def test_translation_equivariance(rng, roll):
    x = speckle(rng)
    y = fourier_shift(x, 0.2, -0.15)
    base = coregister_tile(x, y, TrackConfig())
    moved = coregister_tile(x, np.roll(y, roll, axis=(0, 1)), TrackConfig())
    assert moved.dr - base.dr == pytest.approx(roll[0], abs=0.01)
    assert moved.da - base.da == pytest.approx(roll[1], abs=0.01)
    assert moved.peak == pytest.approx(base.peak, abs=1e-6)


def test_quality_monotone_under_noise():
    med = []
    for snr in (40, 20, 10, 0):
        peaks = []
        for seed in range(20):
            r = np.random.default_rng(seed)
            x = speckle(r)
            peaks.append(coregister_tile(add_noise(r, x, snr), add_noise(r, x, snr), TrackConfig()).peak)
        med.append(np.median(peaks))
    assert all(a >= b for a, b in zip(med, med[1:]))


def _stacks(rng, k, shape=(64, 64), shift=(0.0, 0.0)):
    plan = SubAperturePlan.from_guard(k, 0.5, 1.0, 1.0)
    base = speckle(rng, shape, 1.0)
    m = [ComplexImage(base, 1, 1) for _ in range(k)]
    s = [ComplexImage(fourier_shift(base, *shift), 1, 1) for _ in range(k)]
    return SubApertureStack(plan, m, "master", (0.0,) * k), SubApertureStack(plan, s, "slave", (0.0,) * k)


def test_track_pixels_shapes_and_border(rng):
    master, slave = _stacks(rng, 3, shift=(0.2, -0.1))
    out = track_pixels(master, slave, [(32, 32), (2, 32), (32, 40)], TrackConfig())
    assert [s.pixel for s in out] == [(32, 32), (2, 32), (32, 40)]
    assert out[0].k == 3 and out[0].error is None
    np.testing.assert_allclose(out[0].shifts, 0.2 - 0.1j, atol=0.02)
    assert out[1].error and np.all(np.isnan(out[1].shifts))


def test_track_single_pair(rng):
    master, slave = _stacks(rng, 1)
    (s,) = track_pixels(master, slave, [(30, 30)], TrackConfig())
    assert s.k == 1


def test_track_workers_same_order(rng):
    master, slave = _stacks(rng, 2, shift=(0.1, 0.3))
    px = [(r, c) for r in range(20, 44, 6) for c in range(20, 44, 6)]
    a = track_pixels(master, slave, px, TrackConfig())
    b = track_pixels(master, slave, px, TrackConfig(), workers=4)
    assert [s.pixel for s in a] == [s.pixel for s in b]
    assert all(np.array_equal(x.shifts, y.shifts) for x, y in zip(a, b))


def test_track_stack_mismatch(rng):
    m3, _ = _stacks(rng, 3)
    _, s2 = _stacks(rng, 2)
    with pytest.raises(ValueError):
        track_pixels(m3, s2, [(32, 32)], TrackConfig())


def test_shift_series_alignment():
    with pytest.raises(ValueError):
        ShiftSeries((0, 0), [1j, 2], [1.0])


def test_bresenham():
    assert bresenham(0, 0, 0, 3) == [(0, 0), (0, 1), (0, 2), (0, 3)]
    assert bresenham(2, 2, 2, 2) == [(2, 2)]
    pts = bresenham(0, 0, 3, 7)
    assert pts[0] == (0, 0) and pts[-1] == (3, 7) and len(pts) == 8
    assert all(abs(a[0] - b[0]) <= 1 and abs(a[1] - b[1]) <= 1 for a, b in zip(pts, pts[1:]))
    assert bresenham(5, 1, 0, 1) == [(5 - i, 1) for i in range(6)]
