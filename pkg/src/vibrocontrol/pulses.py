"""Driving fields: sin^2-envelope pulses, Stark-tracking chirp, trains, beams.

The basic pulse is E(t) = E0 cos(phi(t)) sin^2(pi (t-t0)/(N T)), T = 2 pi/omega0,
supported on [t0, t0 + N T] and exactly zero outside. An unchirped pulse has
phi = omega0 (t - t0). A Stark-tracking pulse adds the accumulated intensity
phase,

    phi(t) = omega0 (t - t0) + a * integral of E_unchirped^2 dt',

so that with a = (mu2_ii - mu2_ff)/2 the instantaneous two-photon phase
2 phi(t) follows dE*t + (mu2_ii - mu2_ff) * integral E^2 throughout the pulse.
The phase integral uses the unchirped field as integrand (the chirp-induced
correction to E^2 is second order) and has a closed form, evaluated exactly.

All quantities in atomic units unless a unit is in the name.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

# conversion anchors
INTENSITY_AU = 3.50945e16        # W/cm^2 for E0 = 1 au (cycle-averaged convention)
BOHR_NM = 0.052918               # nm per bohr
C_AU = 137.036                   # speed of light
FS_AU = 41.341374575751          # au of time per femtosecond


def intensity_to_field(intensity_w_cm2: float) -> float:
    """Peak field (au) for a given peak intensity in W/cm^2."""
    if intensity_w_cm2 < 0:
        raise ValueError("intensity must be non-negative")
    return math.sqrt(intensity_w_cm2 / INTENSITY_AU)


def field_to_intensity(field_au: float) -> float:
    return field_au**2 * INTENSITY_AU


def wavelength_to_omega(lambda_nm: float) -> float:
    """Angular carrier frequency (au) of light with vacuum wavelength in nm."""
    if lambda_nm <= 0:
        raise ValueError("wavelength must be positive")
    return 2.0 * math.pi * C_AU / (lambda_nm / BOHR_NM)


def omega_to_wavelength(omega: float) -> float:
    return 2.0 * math.pi * C_AU / omega * BOHR_NM


@dataclass(frozen=True)
class PulseSpec:
    """One sin^2 pulse; chirp_a = 0 means unchirped."""

    E0: float
    omega0: float
    n_cycles: int
    chirp_a: float = 0.0
    t_start: float = 0.0

    def __post_init__(self):
        if self.E0 < 0:
            raise ValueError("E0 must be non-negative")
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if self.n_cycles < 1:
            raise ValueError("n_cycles must be at least 1")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega0

    @property
    def duration(self) -> float:
        return self.n_cycles * self.period

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration


def field_squared_integral(spec: PulseSpec, t) -> np.ndarray:
    """integral_0^tau E_unchirped^2 dt' with tau = t - t_start, clipped to the support.

    E^2 = E0^2 sin^4(a tau) cos^2(w tau) with a = pi/duration expands into a
    finite cosine sum, integrated term by term.
    """
    tau = np.clip(np.asarray(t, dtype=float) - spec.t_start, 0.0, spec.duration)
    a = math.pi / spec.duration
    w = spec.omega0

    def s(c):
        # integral of cos(c t')dt' from 0 to tau
        if abs(c) < 1e-300:
            return tau
        return np.sin(c * tau) / c

    val = (3.0 / 16.0) * tau \
        + (3.0 / 16.0) * s(2 * w) \
        - 0.25 * s(2 * a) \
        + (1.0 / 16.0) * s(4 * a) \
        - 0.125 * (s(2 * a + 2 * w) + s(2 * a - 2 * w)) \
        + (1.0 / 32.0) * (s(4 * a + 2 * w) + s(4 * a - 2 * w))
    return spec.E0**2 * val


def field_at(spec: PulseSpec, t):
    """Field value(s) at time(s) t; exactly 0.0 outside the support."""
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.zeros_like(t)
    inside = (t >= spec.t_start) & (t <= spec.t_end)
    if np.any(inside):
        tau = t[inside] - spec.t_start
        phase = spec.omega0 * tau
        if spec.chirp_a != 0.0:
            phase = phase + spec.chirp_a * field_squared_integral(spec, t[inside])
        env = np.sin(math.pi * tau / spec.duration) ** 2
        out[inside] = spec.E0 * np.cos(phase) * env
    return float(out[0]) if scalar else out


def field_total(pulses, t):
    """Sum of all pulses' fields at time(s) t."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(np.atleast_1d(t), dtype=float)
    for p in pulses:
        out += np.atleast_1d(field_at(p, t))
    return float(out[0]) if t.ndim == 0 else out


def pulses_window(pulses) -> tuple:
    """(earliest start, latest end) over a pulse list."""
    if not pulses:
        raise ValueError("empty pulse list")
    return min(p.t_start for p in pulses), max(p.t_end for p in pulses)


class PhaseLock(Enum):
    FREE = "free"
    LOCKED = "locked"


@dataclass(frozen=True)
class TrainSpec:
    """Pulse train: n_pulses copies separated by gap_cycles of dark time."""

    pulse: PulseSpec
    n_pulses: int
    gap_cycles: float = 1.0
    phase_lock: PhaseLock = PhaseLock.LOCKED

    def __post_init__(self):
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be at least 1")
        if self.gap_cycles < 0:
            raise ValueError("gap_cycles must be non-negative")


def make_train(spec: TrainSpec, delta_E: float):
    """Expand a train into a list of PulseSpec with start offsets.

    locked: the start-to-start delay is raised to the nearest value >= the
    requested one at which the two-level coupling phase advances by an
    integer multiple of 2 pi between pulse starts, so per-pulse transfer
    amplitudes add coherently. That phase advance is

        delta_E * t_delay + 2 * chirp_a * (3/16) E0^2 T_pulse,

    the free two-photon phase plus the Stark phase the state keeps from the
    previous burst (each burst's chirp restarts at zero, but the physical
    integral of E^2 does not). For unchirped pulses this reduces to
    delta_E * t_delay = 2 pi n.
    """
    p = spec.pulse
    delay = p.duration + spec.gap_cycles * p.period
    if spec.phase_lock is PhaseLock.LOCKED:
        if delta_E <= 0:
            raise ValueError("phase locking needs delta_E > 0")
        two_pi = 2.0 * math.pi
        stark = 2.0 * p.chirp_a * float(field_squared_integral(p, p.t_end))
        n = math.ceil((delta_E * delay + stark) / two_pi - 1e-12)
        delay = (n * two_pi - stark) / delta_E
    return [PulseSpec(E0=p.E0, omega0=p.omega0, n_cycles=p.n_cycles,
                      chirp_a=p.chirp_a, t_start=p.t_start + k * delay)
            for k in range(spec.n_pulses)]


@dataclass(frozen=True)
class BeamProfile:
    """Gaussian transverse intensity profile I(r) = I_peak exp(-2 r^2/w0^2)."""

    w0: float
    I_peak: float
    n_rings: int = 24
    r_max_w0: float = 2.5   # sampled radius in units of w0

    def __post_init__(self):
        if self.w0 <= 0:
            raise ValueError("w0 must be positive")
        if self.n_rings < 1:
            raise ValueError("n_rings must be at least 1")

    def intensity(self, r):
        return self.I_peak * np.exp(-2.0 * np.asarray(r, dtype=float) ** 2 / self.w0**2)


def focal_samples(beam: BeamProfile):
    """Annular (intensity, weight) samples for focal averaging.

    Midpoint radii r_i = (i + 1/2) dr; weights are the annulus areas
    2 pi r_i dr, which sum exactly to pi r_max^2.
    """
    r_max = beam.r_max_w0 * beam.w0
    dr = r_max / beam.n_rings
    r = (np.arange(beam.n_rings) + 0.5) * dr
    weights = 2.0 * math.pi * r * dr
    return list(zip(beam.intensity(r).tolist(), weights.tolist(), r.tolist()))
