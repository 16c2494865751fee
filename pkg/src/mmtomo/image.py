"""Complex raster container and shared spectral-axis helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SPEED_OF_LIGHT, RadarGeometry


@dataclass(frozen=True)
class Canvas:
    """Image grid: rows are range bins, columns azimuth bins."""

    rows: int
    cols: int
    range_spacing: float
    azimuth_spacing: float

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("canvas needs at least one row and column")
        if self.range_spacing <= 0 or self.azimuth_spacing <= 0:
            raise ValueError("grid spacings must be > 0")

    @classmethod
    def for_geometry(cls, geom: RadarGeometry, rows: int, cols: int,
                     range_oversampling: float = 2.0) -> "Canvas":
        """Grid sampled at ``range_oversampling`` x chirp bandwidth and at the PRF."""
        dr = SPEED_OF_LIGHT / (2.0 * range_oversampling * geom.chirp_bandwidth)
        da = geom.platform_velocity / geom.prf
        return cls(int(rows), int(cols), dr, da)


@dataclass
class ComplexImage:
    pixels: np.ndarray
    range_spacing: float
    azimuth_spacing: float

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError("pixels must be 2-D")
        if not np.iscomplexobj(px):
            px = px.astype(np.complex128)
        if not np.all(np.isfinite(px)):
            raise ValueError("pixels must be finite")
        self.pixels = px
        if self.range_spacing <= 0 or self.azimuth_spacing <= 0:
            raise ValueError("grid spacings must be > 0")

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    @property
    def cols(self) -> int:
        return self.pixels.shape[1]

    @property
    def canvas(self) -> Canvas:
        return Canvas(self.rows, self.cols, self.range_spacing, self.azimuth_spacing)

    def with_pixels(self, pixels: np.ndarray) -> "ComplexImage":
        return ComplexImage(pixels, self.range_spacing, self.azimuth_spacing)

    def energy(self) -> float:
        return float(np.sum(np.abs(self.pixels) ** 2))


def range_band_fraction(geom: RadarGeometry, range_spacing: float) -> float:
    """Chirp bandwidth in cycles per range bin."""
    return geom.chirp_bandwidth * 2.0 * range_spacing / SPEED_OF_LIGHT


def azimuth_sampling_rate(geom: RadarGeometry, azimuth_spacing: float) -> float:
    """Slow-time sampling rate (Hz) implied by the azimuth bin spacing."""
    return geom.platform_velocity / azimuth_spacing


def azimuth_band_fraction(geom: RadarGeometry, azimuth_spacing: float) -> float:
    """Doppler bandwidth in cycles per azimuth bin."""
    return geom.doppler_bandwidth / azimuth_sampling_rate(geom, azimuth_spacing)


def azimuth_frequencies(cols: int, sampling_rate: float) -> np.ndarray:
    """Doppler frequency (Hz) of each column of an unshifted 2-D DFT."""
    return np.fft.fftfreq(cols) * sampling_rate


def band_index(freqs: np.ndarray, lo: float, width: float, count: int) -> np.ndarray:
    """Index of the half-open band [lo + i w, lo + (i+1) w) holding each frequency.

    Frequencies below ``lo`` map to -1 and at or above the last edge to ``count``.
    A relative slack keeps frequencies that sit on an edge in the upper band.
    """
    pos = (np.asarray(freqs, dtype=float) - lo) / width
    idx = np.floor(pos + 1e-9).astype(int)
    return np.clip(idx, -1, count)
