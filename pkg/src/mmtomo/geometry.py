"""Acquisition geometry and the moving-target range-history model."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class RadarGeometry:
    """Spotlight acquisition constants.

    Defaults follow the X-band spotlight acquisition used throughout the
    package: 450 MHz chirp, 22 kHz Doppler band, PRF twice the Doppler band,
    6 m antenna, 14 s dwell, 7 km/s platform and 650 km range. The carrier
    wavelength and incidence angle are not part of that table and are set to
    typical X-band values.

    ``zero_doppler_range`` defaults to ``reference_range`` when left at 0.
    """

    wavelength_em: float = 0.031
    platform_velocity: float = 7000.0
    reference_range: float = 650_000.0
    zero_doppler_range: float = 0.0
    antenna_length: float = 6.0
    sample_spacing_along_track: float = 0.16
    pulse_count: float = 100_000
    incidence_angle: float = math.radians(35.0)
    chirp_bandwidth: float = 450e6
    doppler_bandwidth: float = 22e3
    prf: float = 44e3
    acquisition_duration: float = 14.0

    def __post_init__(self):
        if self.zero_doppler_range == 0.0:
            object.__setattr__(self, "zero_doppler_range", self.reference_range)
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{f.name} must be finite and > 0, got {value!r}")
        if not 0 < self.incidence_angle < math.pi / 2:
            raise ValueError("incidence_angle must lie in (0, pi/2) radians")
        if self.prf < self.doppler_bandwidth:
            raise ValueError(
                f"prf ({self.prf} Hz) below doppler_bandwidth ({self.doppler_bandwidth} Hz)"
            )

    @property
    def synthetic_aperture(self) -> float:
        return 2.0 * self.pulse_count * self.sample_spacing_along_track


@dataclass(frozen=True)
class TargetState:
    """Point target position (m) and bulk kinematics in range/azimuth."""

    range_position: float = 0.0
    azimuth_position: float = 0.0
    v_r: float = 0.0
    v_a: float = 0.0
    a_r: float = 0.0
    a_a: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValueError(f"{f.name} must be finite")

    def scaled(self, factor: float) -> "TargetState":
        """Kinematics multiplied by ``factor``; position unchanged."""
        return TargetState(
            self.range_position,
            self.azimuth_position,
            self.v_r * factor,
            self.v_a * factor,
            self.a_r * factor,
            self.a_a * factor,
        )


@dataclass(frozen=True)
class MotionEpsilons:
    eps_r1: float
    eps_r2: float
    eps_c1: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.eps_r1, self.eps_r2, self.eps_c1)


@dataclass(frozen=True)
class DerivedGeometry:
    footprint: float
    synthetic_aperture: float
    # 4Nd/(lambda r) is a spatial frequency (cycles/m); multiply by V for Hz.
    doppler_bandwidth: float
    doppler_bandwidth_hz: float
    azimuth_resolution: float


# |v|/V above this triggers the Taylor-regime warning
_TAYLOR_WARN_RATIO = 0.01


def _check_taylor_regime(target: TargetState, geom: RadarGeometry) -> None:
    V = geom.platform_velocity
    if max(abs(target.v_r), abs(target.v_a)) > _TAYLOR_WARN_RATIO * V:
        warnings.warn(
            "target velocity is not small against platform velocity; "
            "the quadratic range model may be inaccurate",
            RuntimeWarning,
            stacklevel=3,
        )


def exact_range_history(target: TargetState, geom: RadarGeometry, t):
    """Slant range R(t) from the full kinematic model (accepts scalar or array t)."""
    t = np.asarray(t, dtype=float)
    s_r = target.v_r * t + 0.5 * target.a_r * t**2
    s_a = target.v_a * t + 0.5 * target.a_a * t**2
    V = geom.platform_velocity
    out = np.hypot(V * t - s_a, geom.reference_range - s_r)
    return float(out) if out.ndim == 0 else out


def approx_range_history(target: TargetState, geom: RadarGeometry, x):
    """Quadratic range history in along-track distance ``x = V t``.

    R(x) = R0 - eps_r1 x + [(1 - eps_c1)^2 - eps_r2] x^2 / (2 R0).
    The cubic azimuth-acceleration term is dropped.
    """
    x = np.asarray(x, dtype=float)
    eps = motion_epsilons(target, geom)
    R0 = geom.reference_range
    out = R0 - eps.eps_r1 * x + ((1.0 - eps.eps_c1) ** 2 - eps.eps_r2) * x**2 / (2.0 * R0)
    return float(out) if out.ndim == 0 else out


def motion_epsilons(target: TargetState, geom: RadarGeometry) -> MotionEpsilons:
    V = geom.platform_velocity
    if V == 0:
        raise ValueError("platform velocity must be nonzero")
    _check_taylor_regime(target, geom)
    return MotionEpsilons(
        eps_r1=target.v_r / V,
        eps_r2=target.a_r * geom.reference_range / V**2,
        eps_c1=target.v_a / V,
    )


def apparent_azimuth_offset(target: TargetState, geom: RadarGeometry) -> float:
    """Azimuth displacement (m) of the focused image caused by range velocity."""
    return -motion_epsilons(target, geom).eps_r1 * geom.reference_range


def derived_geometry(geom: RadarGeometry) -> DerivedGeometry:
    lam = geom.wavelength_em
    r = geom.zero_doppler_range
    n_d = geom.pulse_count * geom.sample_spacing_along_track
    l_sa = 2.0 * n_d
    b_cd = 4.0 * n_d / (lam * r)
    return DerivedGeometry(
        footprint=lam * r / geom.antenna_length,
        synthetic_aperture=l_sa,
        doppler_bandwidth=b_cd,
        doppler_bandwidth_hz=b_cd * geom.platform_velocity,
        azimuth_resolution=lam * geom.reference_range / (2.0 * l_sa),
    )
