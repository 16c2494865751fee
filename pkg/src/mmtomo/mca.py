"""2-D spectral engine and Doppler sub-aperture (multi-chromatic) stacks.

Band layout: the sub-aperture window has width ``(1 - g) B`` for a guard
fraction ``g`` of the Doppler band ``B``. The unprocessed ``g B`` is cut into
``n_sub`` equal steps; master window ``i`` starts ``i`` steps above the lower
band edge and its slave sits ``n_shift`` steps higher. With the default single
step the last slave window ends exactly on the upper band edge.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .image import ComplexImage, azimuth_frequencies, band_index

WINDOWS = ("rect", "hann")


def dft2(img: ComplexImage) -> ComplexImage:
    """Unitary 2-D DFT; the result keeps the source grid metadata."""
    return img.with_pixels(np.fft.fft2(img.pixels, norm="ortho"))


def idft2(spec: ComplexImage) -> ComplexImage:
    return spec.with_pixels(np.fft.ifft2(spec.pixels, norm="ortho"))


@dataclass(frozen=True)
class SubAperturePlan:
    """Doppler sub-band layout, all frequencies in Hz.

    ``sub_band_centers`` are the master window centres; the slave centres are
    offset by ``shift_step * n_shift``.
    """

    n_sub: int
    guard_fraction: float
    sub_band_width: float
    sub_band_centers: tuple[float, ...]
    shift_step: float
    total_band: float
    sampling_rate: float
    window: str = "rect"
    n_shift: int = 1

    def __post_init__(self):
        if self.n_sub < 1:
            raise ValueError("n_sub must be >= 1")
        if not 0 <= self.guard_fraction < 1:
            raise ValueError("guard_fraction must lie in [0, 1)")
        if self.window not in WINDOWS:
            raise ValueError(f"window must be one of {WINDOWS}")
        if len(self.sub_band_centers) != self.n_sub:
            raise ValueError("need one centre per sub-aperture")
        if np.any(np.diff(self.sub_band_centers) <= 0):
            raise ValueError("sub-band centres must be strictly increasing")
        if self.total_band > self.sampling_rate * (1 + 1e-12):
            raise ValueError("Doppler band exceeds the azimuth sampling rate")
        half = self.total_band / 2 * (1 + 1e-9)
        w = self.sub_band_width / 2
        for c in self.sub_band_centers:
            if c - w < -half or c + w > half:
                raise ValueError(f"sub-band centred at {c:.6g} Hz leaves the processed band")

    @classmethod
    def from_guard(cls, n_sub: int, guard_fraction: float, total_band: float,
                   sampling_rate: float, window: str = "rect", n_shift: int = 1) -> "SubAperturePlan":
        if n_sub < 1:
            raise ValueError("n_sub must be >= 1")
        width = (1.0 - guard_fraction) * total_band
        step = guard_fraction * total_band / n_sub
        lo = -total_band / 2 + width / 2
        centers = tuple(lo + i * step for i in range(n_sub))
        return cls(n_sub, guard_fraction, width, centers, step, total_band, sampling_rate,
                   window, n_shift)

    @classmethod
    def tiling(cls, n_sub: int, total_band: float, sampling_rate: float,
               window: str = "rect") -> "SubAperturePlan":
        """Disjoint windows: the band is cut into n_sub + 1 equal sub-bands."""
        return cls.from_guard(n_sub, n_sub / (n_sub + 1), total_band, sampling_rate, window)

    @property
    def slave_offset(self) -> float:
        return self.shift_step * self.n_shift

    @property
    def slave_centers(self) -> tuple[float, ...]:
        return tuple(c + self.slave_offset for c in self.sub_band_centers)

    def check_slave_band(self) -> None:
        top = self.sub_band_centers[-1] + self.slave_offset + self.sub_band_width / 2
        if top > self.total_band / 2 * (1 + 1e-9):
            raise ValueError(
                f"shifted slave band reaches {top:.6g} Hz, beyond the processed band edge "
                f"{self.total_band / 2:.6g} Hz"
            )

    def to_dict(self) -> dict:
        return {
            "n_sub": self.n_sub,
            "guard_fraction": self.guard_fraction,
            "sub_band_width_hz": self.sub_band_width,
            "shift_step_hz": self.shift_step,
            "n_shift": self.n_shift,
            "total_band_hz": self.total_band,
            "sampling_rate_hz": self.sampling_rate,
            "window": self.window,
            "master_centers_hz": list(self.sub_band_centers),
            "slave_centers_hz": list(self.slave_centers),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SubAperturePlan":
        return cls(
            n_sub=int(d["n_sub"]),
            guard_fraction=float(d["guard_fraction"]),
            sub_band_width=float(d["sub_band_width_hz"]),
            sub_band_centers=tuple(float(c) for c in d["master_centers_hz"]),
            shift_step=float(d["shift_step_hz"]),
            total_band=float(d["total_band_hz"]),
            sampling_rate=float(d["sampling_rate_hz"]),
            window=str(d["window"]),
            n_shift=int(d["n_shift"]),
        )


def fourier_shift(pixels: np.ndarray, dr: float, da: float) -> np.ndarray:
    """Circularly translate an array by (dr, da) pixels through the shift theorem."""
    n0, n1 = pixels.shape
    ph = np.exp(-2j * np.pi * (np.fft.fftfreq(n0)[:, None] * dr + np.fft.fftfreq(n1)[None, :] * da))
    return np.fft.ifft2(np.fft.fft2(pixels) * ph)


def band_weights(cols: int, sampling_rate: float, center: float, width: float,
                 window: str = "rect") -> np.ndarray:
    """Per-column spectral weights of one sub-band [center - w/2, center + w/2)."""
    f = azimuth_frequencies(cols, sampling_rate)
    inside = band_index(f, center - width / 2, width, 1) == 0
    if window == "rect":
        return inside.astype(float)
    u = (f - center) / width
    return np.where(inside, np.cos(np.pi * u) ** 2, 0.0)


def _extract_at(slc: ComplexImage, plan: SubAperturePlan, center: float) -> ComplexImage:
    weights = band_weights(slc.cols, plan.sampling_rate, center, plan.sub_band_width, plan.window)
    spec = np.fft.fft2(slc.pixels, norm="ortho") * weights[np.newaxis, :]
    return slc.with_pixels(np.fft.ifft2(spec, norm="ortho"))


def extract_subaperture(slc: ComplexImage, plan: SubAperturePlan, index: int) -> ComplexImage:
    """Band-limited copy of ``slc`` keeping only master sub-band ``index``."""
    if not 0 <= index < plan.n_sub:
        raise IndexError(f"sub-aperture index {index} outside 0..{plan.n_sub - 1}")
    return _extract_at(slc, plan, plan.sub_band_centers[index])


@dataclass
class SubApertureStack:
    plan: SubAperturePlan
    images: list[ComplexImage]
    role: str
    centers: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.role not in ("master", "slave"):
            raise ValueError("role must be 'master' or 'slave'")
        if len(self.images) != self.plan.n_sub:
            raise ValueError("stack length differs from plan n_sub")
        if not self.centers:
            self.centers = self.plan.sub_band_centers if self.role == "master" else self.plan.slave_centers

    def __len__(self) -> int:
        return len(self.images)


def build_stacks(slc: ComplexImage, plan: SubAperturePlan,
                 workers: int = 1) -> tuple[SubApertureStack, SubApertureStack]:
    """Master and slave sub-aperture stacks from a single SLC."""
    plan.check_slave_band()
    spec = np.fft.fft2(slc.pixels, norm="ortho")

    def one(center: float) -> ComplexImage:
        w = band_weights(slc.cols, plan.sampling_rate, center, plan.sub_band_width, plan.window)
        return slc.with_pixels(np.fft.ifft2(spec * w[np.newaxis, :], norm="ortho"))

    centers = list(plan.sub_band_centers) + list(plan.slave_centers)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            images = list(ex.map(one, centers))
    else:
        images = [one(c) for c in centers]
    n = plan.n_sub
    return (SubApertureStack(plan, images[:n], "master"),
            SubApertureStack(plan, images[n:], "slave"))


def out_of_band_fraction(img: ComplexImage, sampling_rate: float, center: float, width: float) -> float:
    """Share of spectral energy outside [center - w/2, center + w/2)."""
    spec = np.abs(np.fft.fft2(img.pixels)) ** 2
    inside = band_weights(img.cols, sampling_rate, center, width) > 0
    total = spec.sum()
    return float(spec[:, ~inside].sum() / total) if total > 0 else 0.0
