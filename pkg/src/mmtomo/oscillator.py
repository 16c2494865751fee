"""Spring-mass vibration model driving scatterer micro-motion.

The restoring force of a mass hanging on a tensioned spring is strongly
nonlinear when the spring is barely stretched (``L`` close to ``L0``); for
small transverse displacement it reduces to a Duffing (cubic) oscillator and,
when the cubic term is negligible, to an elliptical linear oscillator.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import signal

Forcing = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class SpringParams:
    """Spring and mass constants.

    ``elastic_k`` is the spring constant (N/m) and ``damping`` the linear
    damping rate (1/s). ``omega0`` and ``nonlin_coeff`` are derived on access.
    """

    mass: float
    length_tensioned: float
    length_rest: float
    elastic_k: float
    damping: float = 0.0

    def __post_init__(self):
        if self.mass <= 0 or self.length_tensioned <= 0 or self.elastic_k <= 0:
            raise ValueError("mass, length_tensioned and elastic_k must be > 0")
        if self.length_rest < 0 or self.length_rest > self.length_tensioned:
            raise ValueError("need 0 <= length_rest <= length_tensioned")
        if self.damping < 0:
            raise ValueError("damping must be >= 0")

    @classmethod
    def from_omega0(cls, omega0: float, damping: float = 0.0, mass: float = 1.0,
                    length_tensioned: float = 1.0, length_rest: float = 0.0) -> "SpringParams":
        """Spring tuned to a target natural frequency (rad/s)."""
        L, L0 = length_tensioned, length_rest
        if L == L0:
            raise ValueError("a linear frequency needs length_tensioned > length_rest")
        k = omega0**2 * mass * L / (4.0 * (L - L0))
        return cls(mass, L, L0, k, damping)

    @property
    def omega0_sq(self) -> float:
        L, L0 = self.length_tensioned, self.length_rest
        return 4.0 * self.elastic_k / self.mass * (L - L0) / L

    @property
    def omega0(self) -> float:
        return math.sqrt(self.omega0_sq)

    @property
    def cubic_stiffness(self) -> float:
        """Coefficient of |r|^2 r in the acceleration (1/(m^2 s^2))."""
        L, L0 = self.length_tensioned, self.length_rest
        return 8.0 * self.elastic_k * L0 / (self.mass * L**3)

    @property
    def nonlin_coeff(self) -> float:
        """Relative cubic coefficient c in omega0^2 (1 + c|r|^2) r; inf when L == L0."""
        L, L0 = self.length_tensioned, self.length_rest
        if L == L0:
            return math.inf
        return 2.0 * L0 / (L**2 * (L - L0))

    @property
    def nonlinearity_dominates(self) -> bool:
        return self.length_tensioned == self.length_rest


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    displacements: np.ndarray  # (n, 2)
    velocities: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        d = np.asarray(self.displacements, dtype=float)
        if d.ndim != 2 or d.shape[1] != 2 or d.shape[0] != t.shape[0]:
            raise ValueError("displacements must be (n, 2) matching times")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "displacements", d)

    def sample(self, t) -> np.ndarray:
        """Linear interpolation of the displacement at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.times[0] - 1e-12) or np.any(t > self.times[-1] + 1e-12):
            raise ValueError("sample time outside trajectory span")
        x = np.interp(t, self.times, self.displacements[:, 0])
        y = np.interp(t, self.times, self.displacements[:, 1])
        return np.stack([x, y], axis=-1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "y"])
            for t, (x, y) in zip(self.times, self.displacements):
                w.writerow([f"{t:.17g}", f"{x:.17g}", f"{y:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1:3])


def exact_force(r, p: SpringParams):
    """Transverse restoring force of the tensioned spring (componentwise in r)."""
    r = np.asarray(r, dtype=float)
    L, L0 = p.length_tensioned, p.length_rest
    out = -4.0 * p.elastic_k * r * (1.0 - L0 / np.sqrt(L**2 + 4.0 * r**2))
    return float(out) if out.ndim == 0 else out


def cubic_force(r, p: SpringParams):
    """Cubic truncation of :func:`exact_force`.

    When ``L == L0`` the linear term vanishes and only the cubic part is
    returned; a RuntimeWarning marks that regime.
    """
    r = np.asarray(r, dtype=float)
    L, L0 = p.length_tensioned, p.length_rest
    if p.nonlinearity_dominates:
        warnings.warn("L == L0: restoring force is purely cubic", RuntimeWarning, stacklevel=2)
    u = r / L
    out = -4.0 * p.elastic_k * (L - L0) * u - 8.0 * p.elastic_k * L0 * u**3
    return float(out) if out.ndim == 0 else out


def zero_forcing(t: float) -> np.ndarray:
    return np.zeros(2)


def sinusoid_forcing(amplitude: float, omega: float, direction=(1.0, 0.0), phase: float = 0.0) -> Forcing:
    d = np.asarray(direction, dtype=float)

    def f(t: float) -> np.ndarray:
        return amplitude * math.cos(omega * t + phase) * d

    return f


def band_limited_noise_forcing(amplitude: float, f_lo: float, f_hi: float, duration: float,
                               dt: float, seed: int = 0) -> Forcing:
    """Seeded Gaussian noise band-passed to [f_lo, f_hi] Hz, both axes independent.

    Generated on a grid of spacing dt/2 (the RK4 half step) with numpy's PCG64
    generator, filtered with a 4th-order zero-phase Butterworth, scaled to the
    requested RMS and linearly interpolated between grid points.
    """
    h = dt / 2.0
    n = int(math.ceil(duration / h)) + 3
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n, 2))
    sos = signal.butter(4, [f_lo, f_hi], btype="bandpass", fs=1.0 / h, output="sos")
    filt = signal.sosfiltfilt(sos, raw, axis=0)
    filt *= amplitude / np.sqrt(np.mean(filt**2))
    grid = np.arange(n) * h

    def f(t: float) -> np.ndarray:
        return np.array([np.interp(t, grid, filt[:, 0]), np.interp(t, grid, filt[:, 1])])

    return f


def integrate_forced(p: SpringParams, forcing: Forcing | None, r0, v0, dt: float, steps: int) -> Trajectory:
    """Fixed-step RK4 integration of the damped, forced Duffing oscillator.

    r'' + damping r' + omega0^2 r + cubic_stiffness |r|^2 r = f(t) / m
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    # rate used for the stability guard; the pure-cubic case has no linear rate
    rate = p.omega0 if p.omega0 > 0 else math.sqrt(p.cubic_stiffness * max(np.dot(r0, r0), 1e-30))
    if dt * rate >= 0.1:
        raise ValueError(f"step size too large: dt*omega0 = {dt * rate:.4g} >= 0.1")
    forcing = forcing or zero_forcing
    k1c, k3c, lam, m = p.omega0_sq, p.cubic_stiffness, p.damping, p.mass

    def accel(t, r, v):
        return forcing(t) / m - lam * v - (k1c + k3c * (r @ r)) * r

    r = np.array(r0, dtype=float)
    v = np.array(v0, dtype=float)
    pos = np.empty((steps + 1, 2))
    vel = np.empty((steps + 1, 2))
    pos[0], vel[0] = r, v
    half = 0.5 * dt
    for i in range(steps):
        t = i * dt
        a1 = accel(t, r, v)
        r2, v2 = r + half * v, v + half * a1
        a2 = accel(t + half, r2, v2)
        r3, v3 = r + half * v2, v + half * a2
        a3 = accel(t + half, r3, v3)
        r4, v4 = r + dt * v3, v + dt * a3
        a4 = accel(t + dt, r4, v4)
        r = r + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        pos[i + 1], vel[i + 1] = r, v
    return Trajectory(np.arange(steps + 1) * dt, pos, vel)


def closed_form_linear(a: float, b: float, p: SpringParams, t):
    """Elliptical linear oscillation (a cos w0 t, b sin w0 t) exp(-damping t / 2)."""
    t = np.asarray(t, dtype=float)
    w = p.omega0
    env = np.exp(-p.damping * t / 2.0)
    return np.stack([a * np.cos(w * t) * env, b * np.sin(w * t) * env], axis=-1)


def linear_trajectory(a: float, b: float, p: SpringParams, duration: float, samples: int) -> Trajectory:
    t = np.linspace(0.0, duration, samples)
    return Trajectory(t, closed_form_linear(a, b, p, t))


def duffing_energy(p: SpringParams, r, v):
    """Energy per unit mass of the undamped system (per sample for stacked inputs)."""
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    r2 = np.sum(r**2, axis=-1)
    return 0.5 * np.sum(v**2, axis=-1) + 0.5 * p.omega0_sq * r2 + 0.25 * p.cubic_stiffness * r2**2
