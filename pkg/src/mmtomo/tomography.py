"""Depth focusing of per-pixel shift phasors through a steering matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tracking import ShiftSeries

MODES = ("matched", "pinv")

# Quoted propagation speed: "about 3500 km/h (approximately 972 m/s)".
# 3500 km/h is 972.2 m/s, so the wavelength at 200 Hz is 972/200 = 4.86 m;
# dividing the km/h figure by 200 would give 17.5, which matches nothing.
UNIT_NOTE = (
    "wave speed 3500 km/h = 972.2 m/s; sound wavelength uses 972 m/s / 200 Hz = 4.86 m "
    "(3500/200 = 17.5 mixes km/h with m/s)"
)


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class DepthGrid:
    """Inclusive depth axis in metres, positive downward."""

    z_min: float
    z_max: float
    n_bins: int

    def __post_init__(self):
        if not self.z_min < self.z_max:
            raise ValueError("z_min must be below z_max")
        if self.n_bins < 2:
            raise ValueError("need at least 2 depth bins")

    @classmethod
    def full_period(cls, z_min: float, period: float, n_bins: int) -> "DepthGrid":
        """``n_bins`` depths spaced period/n_bins, covering exactly one period."""
        return cls(z_min, z_min + period * (n_bins - 1) / n_bins, n_bins)

    @property
    def depths(self) -> np.ndarray:
        return np.linspace(self.z_min, self.z_max, self.n_bins)

    @property
    def spacing(self) -> float:
        return (self.z_max - self.z_min) / (self.n_bins - 1)

    def nearest_bin(self, z: float) -> int:
        return int(np.argmin(np.abs(self.depths - z)))


@dataclass(frozen=True)
class SonicParams:
    wave_speed: float
    probe_frequency: float
    slant_ranges: tuple[float, ...]
    baselines: tuple[float, ...]
    incidence_angle: float
    time_scale: float

    def __post_init__(self):
        if len(self.slant_ranges) != len(self.baselines):
            raise ValueError(
                f"{len(self.slant_ranges)} slant ranges but {len(self.baselines)} baselines"
            )
        if self.wave_speed <= 0 or self.probe_frequency <= 0 or self.time_scale <= 0:
            raise ValueError("wave_speed, probe_frequency and time_scale must be > 0")
        if min(self.baselines) < 0:
            raise ValueError("baselines must be >= 0")

    @property
    def k(self) -> int:
        return len(self.baselines)

    @property
    def wavelength_sound(self) -> float:
        return self.wave_speed / self.probe_frequency

    @classmethod
    def synthetic(cls, k: int, aperture: float = 42_000.0, slant_range: float = 650_000.0,
                  wave_speed: float = 972.0, probe_frequency: float = 200.0,
                  incidence_angle: float = math.radians(35.0),
                  time_scale: float | None = None) -> "SonicParams":
        """Uniform synthetic baselines i/(k-1) * aperture, i = 0..k-1.

        The default ``time_scale`` is sin(theta)/(2 pi) s, which turns the
        steering phase into 4 pi B z / (lambda r) so that the matched-filter
        depth response has the width of :func:`tomographic_resolution`.
        """
        if k < 2:
            raise ValueError("need k >= 2 sub-apertures")
        if time_scale is None:
            time_scale = math.sin(incidence_angle) / (2.0 * math.pi)
        b = tuple(aperture * i / (k - 1) for i in range(k))
        return cls(wave_speed, probe_frequency, (slant_range,) * k, b, incidence_angle, time_scale)


@dataclass(frozen=True)
class SteeringMatrix:
    entries: np.ndarray  # (k, F)
    kz: np.ndarray
    time_scale: float
    depths: np.ndarray


@dataclass
class Tomogram:
    magnitudes: np.ndarray  # (F, P)
    depth_axis: np.ndarray
    track_axis: np.ndarray
    mode: str

    def __post_init__(self):
        if self.magnitudes.shape != (self.depth_axis.size, self.track_axis.size):
            raise ValueError("tomogram dimensions disagree with its axes")


def sound_wavelength(wave_speed: float, probe_frequency: float) -> float:
    return wave_speed / probe_frequency


def vertical_wavenumbers(p: SonicParams) -> np.ndarray:
    """K_z[i] = 4 pi B_i / (lambda_s r_i sin theta), rad/m."""
    s = math.sin(p.incidence_angle)
    if s <= 0:
        raise ValueError("incidence angle must have positive sine")
    r = np.asarray(p.slant_ranges, dtype=float)
    if np.any(r == 0):
        raise ValueError("zero slant range")
    return 4.0 * math.pi * np.asarray(p.baselines, dtype=float) / (p.wavelength_sound * r * s)


def build_steering(kz, grid: DepthGrid, time_scale: float = 1.0) -> SteeringMatrix:
    """A[i, f] = exp(j 2 pi kz[i] t z_f)."""
    kz = np.asarray(kz, dtype=float)
    if kz.size < 2:
        raise ValueError("need at least two wavenumbers")
    z = grid.depths
    if not np.all(np.isfinite(z)) or np.unique(z).size != z.size:
        raise ValueError("degenerate depth grid")
    a = np.exp(2j * math.pi * time_scale * np.outer(kz, z))
    return SteeringMatrix(a, kz, time_scale, z)


def steering_vector(A: SteeringMatrix, z: float) -> np.ndarray:
    """Phasor signature of a unit source at depth ``z`` (off-grid allowed)."""
    return np.exp(2j * math.pi * A.time_scale * A.kz * z)


def ambiguity_period(A: SteeringMatrix) -> float:
    """Unambiguous depth span for uniformly spaced wavenumbers."""
    dk = np.diff(A.kz)
    if not np.allclose(dk, dk[0], rtol=1e-9):
        raise ValueError("wavenumbers are not uniformly spaced")
    return 1.0 / (A.time_scale * dk[0])


def focus(y, A: SteeringMatrix, mode: str = "matched", tikhonov: float = 1e-6,
          weights=None) -> np.ndarray:
    """Complex depth profile from one phasor vector.

    matched: h = A^H W y / k
    pinv:    h = (A^H W A + tikhonov * tr(A^H W A) / F * I)^-1 A^H W y
    ``weights`` (default all ones) zero out unreliable samples.
    """
    y = np.asarray(y, dtype=complex)
    a = A.entries
    k, F = a.shape
    if y.shape != (k,):
        raise ValueError(f"phasor vector has {y.size} samples but steering matrix has {k} rows")
    w = np.ones(k) if weights is None else np.asarray(weights, dtype=float)
    if mode == "matched":
        return a.conj().T @ (w * y) / k
    if mode != "pinv":
        raise ValueError(f"mode must be one of {MODES}")
    normal = a.conj().T @ (w[:, None] * a)
    reg = tikhonov * np.trace(normal).real / F
    normal = normal + reg * np.eye(F)
    cond = np.linalg.cond(normal)
    if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
        raise SingularSystemError(f"normal matrix is singular (condition estimate {cond:.3g})")
    return np.linalg.solve(normal, a.conj().T @ (w * y))


def tomographic_resolution(p, aperture: float, range_: float) -> float:
    """Depth resolution lambda_s R / (2 A); ``p`` is SonicParams or a wavelength."""
    lam = p.wavelength_sound if isinstance(p, SonicParams) else float(p)
    if aperture <= 0:
        raise ValueError("aperture must be > 0")
    return lam * range_ / (2.0 * aperture)


def depth_phase_step(A: SteeringMatrix, z: float) -> float:
    """Phase advance per sub-aperture of a source at depth z (uniform kz)."""
    return 2.0 * math.pi * z / ambiguity_period(A)


def assemble_tomogram(series: list[ShiftSeries], A: SteeringMatrix, mode: str = "matched",
                      tikhonov: float = 1e-6, correlation_floor: float = 0.0,
                      normalize: bool = False, track_axis=None) -> Tomogram:
    """Focus each pixel's shift vector into one tomogram column.

    Samples whose correlation quality falls below ``correlation_floor`` or are
    not finite get zero weight. Untrackable pixels give an all-zero column.
    """
    if not series:
        raise ValueError("no shift series to focus")
    k, F = A.entries.shape
    cols = np.zeros((F, len(series)))
    for p, s in enumerate(series):
        if s.k != k:
            raise ValueError(f"shift series at {s.pixel} has {s.k} samples, steering matrix expects {k}")
        ok = np.isfinite(s.shifts) & (s.quality >= correlation_floor)
        if not ok.any():
            continue
        y = np.where(ok, s.shifts, 0)
        cols[:, p] = np.abs(focus(y, A, mode, tikhonov, ok.astype(float)))
    if normalize and cols.max() > 0:
        cols /= cols.max()
    if track_axis is None:
        track_axis = np.arange(len(series), dtype=float)
    return Tomogram(cols, A.depths.copy(), np.asarray(track_axis, dtype=float), mode)
