"""Sub-pixel coregistration of master/slave sub-aperture pairs.

Tiles are compared with a circular, normalized complex cross-correlation.
The integer peak inside the search radius is refined by evaluating the
correlation on an ``oversample_factor`` finer grid through a matrix-product
DFT restricted to a 1.5-pixel neighbourhood, then optionally by a parabolic
vertex fit on that fine grid.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .mca import SubApertureStack

log = logging.getLogger(__name__)


class NoTextureError(ValueError):
    """Raised when a tile has no variation to correlate."""


@dataclass(frozen=True)
class TrackConfig:
    window_size: int | tuple[int, int] = 33
    oversample_factor: int = 32
    search_radius: int = 4
    peak_fit: str = "parabolic"
    correlation_floor: float = 0.8

    def __post_init__(self):
        ws = self.window_size
        if isinstance(ws, (tuple, list)):
            if len(ws) != 2:
                raise ValueError("window_size must be an int or a (range, azimuth) pair")
            object.__setattr__(self, "window_size", (int(ws[0]), int(ws[1])))
        if any(w < 9 or w % 2 == 0 for w in self.window_shape):
            raise ValueError("window_size must be odd and >= 9")
        if self.oversample_factor < 2:
            raise ValueError("oversample_factor must be >= 2")
        if self.search_radius < 1:
            raise ValueError("search_radius must be >= 1")
        if self.peak_fit not in ("parabolic", "none"):
            raise ValueError("peak_fit must be 'parabolic' or 'none'")
        if not 0 <= self.correlation_floor < 1:
            raise ValueError("correlation_floor must lie in [0, 1)")

    @property
    def window_shape(self) -> tuple[int, int]:
        ws = self.window_size
        return (ws, ws) if isinstance(ws, int) else tuple(ws)


@dataclass(frozen=True)
class TileMatch:
    dr: float
    da: float
    peak: float
    low_quality: bool


@dataclass
class ShiftSeries:
    """Complex shifts (range + 1j * azimuth, pixels) of one pixel over k pairs."""

    pixel: tuple[int, int]
    shifts: np.ndarray
    quality: np.ndarray
    error: str | None = None

    def __post_init__(self):
        self.shifts = np.asarray(self.shifts, dtype=complex)
        self.quality = np.asarray(self.quality, dtype=float)
        if self.shifts.shape != self.quality.shape:
            raise ValueError("quality must align with shifts")

    @property
    def k(self) -> int:
        return self.shifts.size


def _upsampled_corr(cross: np.ndarray, center: tuple[float, float], factor: int,
                    half_extent: int) -> np.ndarray:
    """Correlation at lags center + j/factor, |j| <= half_extent, from its spectrum."""
    n0, n1 = cross.shape
    j = np.arange(-half_extent, half_extent + 1) / factor
    f0 = np.fft.fftfreq(n0)
    f1 = np.fft.fftfreq(n1)
    k0 = np.exp(2j * np.pi * np.outer(center[0] + j, f0))
    k1 = np.exp(2j * np.pi * np.outer(f1, center[1] + j))
    return (k0 @ cross @ k1) / (n0 * n1)


def _parabolic(m1: float, c: float, p1: float) -> float:
    den = m1 - 2 * c + p1
    if den >= 0:
        return 0.0
    off = 0.5 * (m1 - p1) / den
    return float(np.clip(off, -0.5, 0.5))


def coregister_tile(master_tile: np.ndarray, slave_tile: np.ndarray, cfg: TrackConfig) -> TileMatch:
    """Offset (dr, da) in pixels of ``slave_tile`` relative to ``master_tile``.

    A positive value means the slave content sits at larger row/column index.
    """
    m = np.asarray(master_tile, dtype=complex)
    s = np.asarray(slave_tile, dtype=complex)
    if m.shape != s.shape:
        raise ValueError("tiles differ in shape")
    if m.shape[0] < cfg.window_shape[0] or m.shape[1] < cfg.window_shape[1]:
        raise ValueError("tiles smaller than the correlation window")
    m = m - m.mean()
    s = s - s.mean()
    norm = math.sqrt(float(np.vdot(m, m).real) * float(np.vdot(s, s).real))
    if norm <= 1e-300 * m.size:
        raise NoTextureError("no texture")
    cross = np.conj(np.fft.fft2(m)) * np.fft.fft2(s)
    corr = np.abs(np.fft.ifft2(cross))
    n0, n1 = corr.shape
    r = cfg.search_radius
    lags0 = np.fft.fftfreq(n0, 1 / n0).astype(int)
    lags1 = np.fft.fftfreq(n1, 1 / n1).astype(int)
    sub = corr.copy()
    sub[np.abs(lags0) > r, :] = -1.0
    sub[:, np.abs(lags1) > r] = -1.0
    i0, i1 = np.unravel_index(np.argmax(sub), sub.shape)
    coarse = (float(lags0[i0]), float(lags1[i1]))

    f = cfg.oversample_factor
    half = int(math.ceil(1.5 * f))
    fine = np.abs(_upsampled_corr(cross, coarse, f, half))
    j0, j1 = np.unravel_index(np.argmax(fine), fine.shape)
    d0 = coarse[0] + (j0 - half) / f
    d1 = coarse[1] + (j1 - half) / f
    peak_val = fine[j0, j1]
    if cfg.peak_fit == "parabolic" and 0 < j0 < fine.shape[0] - 1 and 0 < j1 < fine.shape[1] - 1:
        d0 += _parabolic(fine[j0 - 1, j1], fine[j0, j1], fine[j0 + 1, j1]) / f
        d1 += _parabolic(fine[j0, j1 - 1], fine[j0, j1], fine[j0, j1 + 1]) / f
    peak = float(min(peak_val / norm, 1.0))
    return TileMatch(d0, d1, peak, peak < cfg.correlation_floor)


def _tile(img: np.ndarray, row: int, col: int, shape: tuple[int, int]) -> np.ndarray:
    h0, h1 = shape[0] // 2, shape[1] // 2
    return img[row - h0: row + h0 + 1, col - h1: col + h1 + 1]


def _demodulate(pixels: np.ndarray, center_hz: float, sampling_rate: float) -> np.ndarray:
    col = np.arange(pixels.shape[1])
    return pixels * np.exp(-2j * np.pi * center_hz / sampling_rate * col)[np.newaxis, :]


def track_pixels(master: SubApertureStack, slave: SubApertureStack, pixels, cfg: TrackConfig,
                 workers: int = 1) -> list[ShiftSeries]:
    """Per-pixel shift series across all sub-aperture pairs.

    Each sub-aperture is shifted to baseband (its band centre moved to zero
    Doppler) before correlation. Pixels whose window would cross the image
    border get an error entry with NaN shifts; processing continues.
    """
    if len(master) != len(slave):
        raise ValueError("master and slave stacks differ in length")
    shape = master.images[0].pixels.shape
    if any(im.pixels.shape != shape for im in master.images + slave.images):
        raise ValueError("stack images differ in dimensions")
    fs = master.plan.sampling_rate
    mb = [_demodulate(im.pixels, c, fs) for im, c in zip(master.images, master.centers)]
    sb = [_demodulate(im.pixels, c, fs) for im, c in zip(slave.images, slave.centers)]
    k = len(mb)
    h0, h1 = cfg.window_shape[0] // 2, cfg.window_shape[1] // 2

    def one(px) -> ShiftSeries:
        row, col = int(px[0]), int(px[1])
        if row - h0 < 0 or col - h1 < 0 or row + h0 >= shape[0] or col + h1 >= shape[1]:
            return ShiftSeries((row, col), np.full(k, np.nan + 1j * np.nan), np.zeros(k),
                               error="window crosses image border")
        shifts = np.empty(k, dtype=complex)
        quality = np.empty(k)
        try:
            for i in range(k):
                res = coregister_tile(_tile(mb[i], row, col, cfg.window_shape),
                                      _tile(sb[i], row, col, cfg.window_shape), cfg)
                shifts[i] = complex(res.dr, res.da)
                quality[i] = res.peak
        except NoTextureError as exc:
            return ShiftSeries((row, col), np.full(k, np.nan + 1j * np.nan), np.zeros(k), error=str(exc))
        return ShiftSeries((row, col), shifts, quality)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            out = list(ex.map(one, pixels))
    else:
        out = [one(p) for p in pixels]
    bad = sum(s.error is not None for s in out)
    if bad:
        log.warning("%d of %d pixels could not be tracked", bad, len(out))
    return out


def bresenham(r0: int, c0: int, r1: int, c1: int) -> list[tuple[int, int]]:
    """Integer pixels on the segment from (r0, c0) to (r1, c1), endpoints included."""
    pts = []
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    err = dr - dc
    r, c = r0, c0
    while True:
        pts.append((r, c))
        if r == r1 and c == c1:
            return pts
        e2 = 2 * err
        if e2 > -dc:
            err -= dc
            r += sr
        if e2 < dr:
            err += dr
            c += sc
