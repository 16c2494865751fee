"""Topographic overlay scoring and vibration-stream comparison."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .tomography import Tomogram


@dataclass(frozen=True)
class TopoProfile:
    positions: np.ndarray
    heights: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        h = np.asarray(self.heights, dtype=float)
        if pos.shape != h.shape or pos.ndim != 1:
            raise ValueError("positions and heights must be 1-D and equal length")
        if np.any(np.diff(pos) <= 0):
            raise ValueError("positions must be strictly increasing")
        if not np.all(np.isfinite(h)):
            raise ValueError("heights must be finite")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "heights", h)

    @classmethod
    def from_csv(cls, path) -> "TopoProfile":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


@dataclass(frozen=True)
class VibrationStream:
    sample_rate: float
    samples: np.ndarray
    label: str = ""

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")
        if x.ndim != 1 or x.size < 2:
            raise ValueError("stream needs at least 2 samples")
        object.__setattr__(self, "samples", x)

    @classmethod
    def from_csv(cls, path, label: str = "") -> "VibrationStream":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        dt = np.diff(data[:, 0])
        if dt.size == 0 or np.any(dt <= 0) or not np.allclose(dt, dt[0], rtol=1e-6):
            raise ValueError(f"{path}: timestamps are not uniformly increasing")
        return cls(1.0 / float(np.mean(dt)), data[:, 1], label or str(path))


@dataclass(frozen=True)
class Ridge:
    positions: np.ndarray
    depths: np.ndarray  # NaN marks a gap

    @property
    def gaps(self) -> np.ndarray:
        return np.isnan(self.depths)


def surface_ridge(tomo: Tomogram, threshold: float = 0.5) -> Ridge:
    """Shallowest depth per column whose magnitude reaches threshold x column max."""
    mag = tomo.magnitudes
    if mag.size == 0:
        raise ValueError("empty tomogram")
    order = np.argsort(tomo.depth_axis)
    z = tomo.depth_axis[order]
    mag = mag[order]
    out = np.full(mag.shape[1], np.nan)
    for p in range(mag.shape[1]):
        col = mag[:, p]
        peak = col.max()
        if peak <= 0:
            continue
        out[p] = z[np.argmax(col >= threshold * peak)]
    return Ridge(tomo.track_axis.copy(), out)


def topo_overlay_score(ridge: Ridge, topo: TopoProfile) -> dict:
    """RMSE and mean bias of ridge minus topography, over overlapping non-gap positions."""
    ok = ~ridge.gaps & (ridge.positions >= topo.positions[0]) & (ridge.positions <= topo.positions[-1])
    if not ok.any():
        raise ValueError("ridge and topographic profile do not overlap")
    ref = np.interp(ridge.positions[ok], topo.positions, topo.heights)
    diff = ridge.depths[ok] - ref
    return {"rmse": float(np.sqrt(np.mean(diff**2))), "bias": float(np.mean(diff)),
            "n": int(ok.sum())}


def bandpass(x: np.ndarray, fs: float, band: tuple[float, float], order: int = 4) -> np.ndarray:
    """Zero-phase Butterworth band-pass (forward-backward)."""
    lo, hi = band
    if not 0 < lo < hi < fs / 2:
        raise ValueError(f"band {band} must satisfy 0 < lo < hi < fs/2 = {fs / 2}")
    sos = signal.butter(order, [lo, hi], btype="bandpass", fs=fs, output="sos")
    return signal.sosfiltfilt(sos, x)


@dataclass(frozen=True)
class StreamComparison:
    time_error: np.ndarray
    freqs: np.ndarray
    spectrum_a: np.ndarray
    spectrum_b: np.ndarray
    coherence_freqs: np.ndarray
    coherence: np.ndarray
    lag_samples: int

    def in_band(self, band: tuple[float, float]) -> np.ndarray:
        f = self.coherence_freqs
        return self.coherence[(f >= band[0]) & (f <= band[1])]


def compare_streams(a: VibrationStream, b: VibrationStream, band: tuple[float, float] | None = None,
                    nperseg: int | None = None) -> StreamComparison:
    """Pointwise error, magnitude spectra, Welch coherence and best-alignment lag.

    ``lag_samples`` is positive when ``b`` lags ``a``.
    """
    if not np.isclose(a.sample_rate, b.sample_rate, rtol=1e-9):
        raise ValueError(f"sample rates differ: {a.sample_rate} Hz vs {b.sample_rate} Hz")
    if a.samples.size != b.samples.size:
        raise ValueError(f"stream lengths differ: {a.samples.size} vs {b.samples.size}")
    fs = a.sample_rate
    xa, xb = a.samples, b.samples
    if band is not None:
        xa, xb = bandpass(xa, fs, band), bandpass(xb, fs, band)
    n = xa.size
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    spec_a = np.abs(np.fft.rfft(xa)) / n
    spec_b = np.abs(np.fft.rfft(xb)) / n
    seg = nperseg or min(256, n)
    cf, coh = signal.coherence(xa, xb, fs=fs, nperseg=seg)
    cc = signal.correlate(xb - xb.mean(), xa - xa.mean(), mode="full")
    lags = signal.correlation_lags(n, n, mode="full")
    return StreamComparison(xb - xa, freqs, spec_a, spec_b, cf, coh, int(lags[np.argmax(cc)]))
