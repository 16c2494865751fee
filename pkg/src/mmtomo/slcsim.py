"""Synthetic focused SLC scenes of point scatterers.

Each scatterer is rendered as a separable 2-D sinc carrying the two-way
propagation phase. Vibrating scatterers are rendered with the simulator's
quasi-static sub-aperture model: slow time is split into ``n_sub`` equal
segments, and the Doppler band is split into ``n_sub + 1`` equal chunks, one
per sub-aperture window of a tiling plan. Chunk ``w`` shows the scatterer at
the static position plus the accumulated displacement of the first ``w``
segments, so that adjacent Doppler chunks differ by exactly the displacement
sampled at the middle of one segment.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import RadarGeometry, TargetState, apparent_azimuth_offset
from .image import (
    Canvas,
    ComplexImage,
    azimuth_band_fraction,
    azimuth_frequencies,
    azimuth_sampling_rate,
    band_index,
    range_band_fraction,
)
from .oscillator import Trajectory


@dataclass(frozen=True)
class ScattererSpec:
    """A point scatterer; ``amplitude`` absorbs the 2N tau compression gain.

    ``shift_gain`` converts metres of ground motion into metres of apparent
    image displacement.
    """

    target: TargetState
    amplitude: float = 1.0
    trajectory: Trajectory | None = None
    shift_gain: float = 1.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError("amplitude must be > 0")


def beam_center(spec: ScattererSpec, geom: RadarGeometry, canvas: Canvas) -> tuple[float, float]:
    """(range bin, azimuth bin) of the static focused peak."""
    t = spec.target
    l_cg = t.range_position / canvas.range_spacing
    az = t.azimuth_position
    if t.v_r != 0.0:
        az += apparent_azimuth_offset(t, geom)
    return l_cg, az / canvas.azimuth_spacing


def _check_inside(pos: tuple[float, float], canvas: Canvas) -> None:
    r, a = pos
    if not (0 <= r <= canvas.rows - 1 and 0 <= a <= canvas.cols - 1):
        raise ValueError(
            f"target at (range {r:.3f}, azimuth {a:.3f}) bins lies outside the "
            f"{canvas.rows}x{canvas.cols} canvas"
        )


def _sinc_image(spec: ScattererSpec, geom: RadarGeometry, canvas: Canvas,
                pos: tuple[float, float]) -> np.ndarray:
    _check_inside(pos, canvas)
    b_r = range_band_fraction(geom, canvas.range_spacing)
    b_a = azimuth_band_fraction(geom, canvas.azimuth_spacing)
    if b_r > 1 or b_a > 1:
        raise ValueError("canvas undersamples the signal bandwidth")
    k = np.arange(canvas.rows)
    x = np.arange(canvas.cols)
    # np.sinc(u) = sin(pi u)/(pi u), i.e. sinc[pi B (k - L)] with the sin(u)/u convention
    s_r = np.sinc(b_r * (k - pos[0]))
    s_a = np.sinc(b_a * (x - pos[1]))
    r = geom.zero_doppler_range + spec.target.range_position
    phase = np.exp(-1j * 4.0 * math.pi * r / geom.wavelength_em)
    return spec.amplitude * phase * np.outer(s_r, s_a)


def render_point_target(spec: ScattererSpec, geom: RadarGeometry, canvas: Canvas) -> ComplexImage:
    """Focused response of a (static) point scatterer."""
    px = _sinc_image(spec, geom, canvas, beam_center(spec, geom, canvas))
    return ComplexImage(px, canvas.range_spacing, canvas.azimuth_spacing)


def segment_midpoints(duration: float, n_sub: int) -> np.ndarray:
    return (np.arange(n_sub) + 0.5) * duration / n_sub


def vibrating_target_subimage_positions(spec: ScattererSpec, geom: RadarGeometry, n_sub: int,
                                        canvas: Canvas | None = None) -> np.ndarray:
    """Per-sub-aperture (range bin, azimuth bin) beam centres of a vibrating scatterer.

    Row ``i`` is the static centre plus the trajectory displacement at the
    middle of slow-time segment ``i`` (range component first), scaled by
    ``shift_gain`` and converted to bins.
    """
    if spec.trajectory is None:
        raise ValueError("scatterer has no trajectory")
    if n_sub < 2:
        raise ValueError("n_sub must be >= 2")
    canvas = canvas or Canvas.for_geometry(geom, 1, 1)
    T = geom.acquisition_duration
    traj = spec.trajectory
    if traj.times[0] > 1e-12 or traj.times[-1] < T - 1e-9:
        raise ValueError("trajectory does not cover the acquisition duration")
    disp = traj.sample(segment_midpoints(T, n_sub)) * spec.shift_gain
    static = np.array(beam_center(spec, geom, canvas))
    bins = disp / np.array([canvas.range_spacing, canvas.azimuth_spacing])
    return static + bins


def _vibrating_image(spec: ScattererSpec, geom: RadarGeometry, canvas: Canvas, n_sub: int) -> np.ndarray:
    positions = vibrating_target_subimage_positions(spec, geom, n_sub, canvas)
    static = np.array(beam_center(spec, geom, canvas))
    chunk_pos = static + np.vstack([np.zeros(2), np.cumsum(positions - static, axis=0)])
    fs = azimuth_sampling_rate(geom, canvas.azimuth_spacing)
    B = geom.doppler_bandwidth
    width = B / (n_sub + 1)
    owner = np.clip(band_index(azimuth_frequencies(canvas.cols, fs), -B / 2, width, n_sub + 1), 0, n_sub)
    spectrum = np.zeros((canvas.rows, canvas.cols), dtype=complex)
    for w, pos in enumerate(chunk_pos):
        cols = owner == w
        if not cols.any():
            continue
        img = _sinc_image(spec, geom, canvas, (float(pos[0]), float(pos[1])))
        spectrum[:, cols] = np.fft.fft(img, axis=1)[:, cols]
    return np.fft.ifft(spectrum, axis=1)


def render_scene(specs: list[ScattererSpec], geom: RadarGeometry, canvas: Canvas,
                 noise_snr_db: float | None = None, seed: int = 0, n_sub: int | None = None,
                 workers: int = 1) -> ComplexImage:
    """Sum of scatterer responses plus optional circular Gaussian noise.

    SNR is relative to the mean peak power of the scatterers. Noise comes from
    ``numpy.random.default_rng(seed)`` (PCG64), real parts drawn before
    imaginary parts. ``n_sub`` is required when any scatterer vibrates.
    """
    if not specs:
        raise ValueError("scene has no scatterers")
    if any(s.trajectory is not None for s in specs) and n_sub is None:
        raise ValueError("vibrating scatterers need n_sub (sub-aperture count)")

    def one(spec: ScattererSpec) -> np.ndarray:
        if spec.trajectory is None:
            return _sinc_image(spec, geom, canvas, beam_center(spec, geom, canvas))
        return _vibrating_image(spec, geom, canvas, n_sub)

    acc = np.zeros((canvas.rows, canvas.cols), dtype=complex)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(one, specs))
    else:
        parts = map(one, specs)
    for part in parts:  # summed in spec order regardless of worker count
        acc += part
    if noise_snr_db is not None and math.isfinite(noise_snr_db):
        acc += complex_noise(acc.shape, noise_sigma(specs, noise_snr_db), seed)
    return ComplexImage(acc, canvas.range_spacing, canvas.azimuth_spacing)


def noise_sigma(specs: list[ScattererSpec], snr_db: float) -> float:
    """RMS of the complex noise for an SNR relative to mean scatterer peak power."""
    peak_power = float(np.mean([s.amplitude**2 for s in specs]))
    return math.sqrt(peak_power / 10.0 ** (snr_db / 10.0))


def complex_noise(shape, sigma: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * (sigma / math.sqrt(2.0))
