"""Tunnelling-rate control waveforms and CTAP pulse schedules.

All waveforms are evaluated without truncation: the Gaussian tails at t = 0 and
t = t_max are left in place, so a CTAP3 schedule starts with a residual coupling
of roughly ``exp(-6.1) * omega_max`` on the far link.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np

from .errors import ScheduleError

# integer tags used by the compiled integrator
KIND_GAUSSIAN = 0
KIND_CONSTANT = 1
KIND_ZERO = 2

ENVELOPES = ("gaussian", "constant")


@dataclass(frozen=True)
class Gaussian:
    amplitude: float
    center: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ScheduleError(f"gaussian width must be positive, got {self.width}")
        if not self.amplitude >= 0:
            raise ScheduleError(f"amplitude must be non-negative, got {self.amplitude}")

    def __call__(self, t):
        x = (np.asarray(t, dtype=float) - self.center) / self.width
        return self.amplitude * np.exp(-0.5 * x * x)

    def scaled(self, factor: float) -> "Gaussian":
        return replace(self, amplitude=self.amplitude * factor)

    @property
    def peak(self) -> float:
        return self.amplitude

    def kernel_params(self):
        return KIND_GAUSSIAN, self.amplitude, self.center, self.width


@dataclass(frozen=True)
class Constant:
    amplitude: float

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ScheduleError(f"amplitude must be non-negative, got {self.amplitude}")

    def __call__(self, t):
        return np.full(np.shape(t), self.amplitude, dtype=float)[()]

    def scaled(self, factor: float) -> "Constant":
        return replace(self, amplitude=self.amplitude * factor)

    @property
    def peak(self) -> float:
        return self.amplitude

    def kernel_params(self):
        return KIND_CONSTANT, self.amplitude, 0.0, 1.0


@dataclass(frozen=True)
class Zero:
    def __call__(self, t):
        return np.zeros(np.shape(t), dtype=float)[()]

    def scaled(self, factor: float) -> "Zero":
        return self

    @property
    def peak(self) -> float:
        return 0.0

    def kernel_params(self):
        return KIND_ZERO, 0.0, 0.0, 1.0


Waveform = Union[Gaussian, Constant, Zero]


def gaussian_waveform(amplitude: float, center: float, width: float) -> Gaussian:
    return Gaussian(float(amplitude), float(center), float(width))


@dataclass(frozen=True)
class PulseSchedule:
    """One waveform per chain link, defined on [0, t_max]."""

    t_max: float
    link_waveforms: tuple
    label: str

    def __post_init__(self):
        if not self.t_max > 0:
            raise ScheduleError(f"t_max must be positive, got {self.t_max}")
        object.__setattr__(self, "link_waveforms", tuple(self.link_waveforms))

    @property
    def n_links(self) -> int:
        return len(self.link_waveforms)

    @property
    def peak_amplitude(self) -> float:
        """Largest peak amplitude over all links (sets the integrator step bound)."""
        return max((w.peak for w in self.link_waveforms), default=0.0)

    def scaled(self, factors: Sequence[float]) -> "PulseSchedule":
        """Multiply each link's waveform by a per-link factor; shapes are untouched."""
        factors = list(factors)
        if len(factors) != self.n_links:
            raise ScheduleError(f"expected {self.n_links} link factors, got {len(factors)}")
        if any(f < 0 for f in factors):
            raise ScheduleError("link factors must be non-negative")
        waves = tuple(w.scaled(float(f)) for w, f in zip(self.link_waveforms, factors))
        return replace(self, link_waveforms=waves)

    def amplitudes(self, times) -> np.ndarray:
        """Vectorised evaluation, shape ``(len(times), n_links)``; no range check."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        return np.stack([np.broadcast_to(w(times), times.shape) for w in self.link_waveforms],
                        axis=-1)

    def kernel_arrays(self):
        """(kind, amplitude, center, width) arrays for the compiled integrator."""
        params = [w.kernel_params() for w in self.link_waveforms]
        kind = np.array([p[0] for p in params], dtype=np.int64)
        amp = np.array([p[1] for p in params], dtype=float)
        center = np.array([p[2] for p in params], dtype=float)
        width = np.array([p[3] for p in params], dtype=float)
        return kind, amp, center, width


def _check_positive(**values):
    for name, v in values.items():
        if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v) and v > 0):
            raise ScheduleError(f"{name} must be a positive number, got {v!r}")


def ctap_timing(t_max: float) -> tuple[float, float, float]:
    """Width and the two pulse centres ``(w, t_early, t_late)`` for total time ``t_max``.

    Width equals the delay between the pulses: w = t_max/8, centres at (t_max -+ w)/2.
    """
    w = t_max / 8.0
    return w, (t_max - w) / 2.0, (t_max + w) / 2.0


def _three_site(omega_max: float, t_max: float, counter_intuitive: bool, label: str):
    w, early, late = ctap_timing(t_max)
    t12, t23 = (late, early) if counter_intuitive else (early, late)
    return PulseSchedule(
        t_max=float(t_max),
        link_waveforms=(gaussian_waveform(omega_max, t12, w), gaussian_waveform(omega_max, t23, w)),
        label=label,
    )


def ctap3_schedule(omega_max: float, t_max: float) -> PulseSchedule:
    """Counter-intuitive CTAP3 pair: link (2,3) peaks at (t_max-w)/2, before link (1,2)."""
    _check_positive(omega_max=omega_max, t_max=t_max)
    return _three_site(float(omega_max), float(t_max), True, "ctap3")


def intuitive3_schedule(omega_max: float, t_max: float) -> PulseSchedule:
    """Reference ordering with link (1,2) first."""
    _check_positive(omega_max=omega_max, t_max=t_max)
    return _three_site(float(omega_max), float(t_max), False, "intuitive3")


def ctapn_schedule(n_sites: int, omega_max: float, t_max: float, straddle_ratio: float = 3.0,
                   envelope: str = "gaussian") -> PulseSchedule:
    """Straddling schedule for an odd chain of ``n_sites >= 5``.

    The end links carry the CTAP3 counter-intuitive pair; every interior link
    carries the same straddle waveform of peak ``straddle_ratio * omega_max``,
    either constant or a Gaussian centred at t_max/2 with width 2w.
    """
    if not isinstance(n_sites, (int, np.integer)) or n_sites < 5 or n_sites % 2 == 0:
        raise ScheduleError(f"straddle scheme needs an odd n_sites >= 5, got {n_sites}")
    _check_positive(omega_max=omega_max, t_max=t_max)
    if not straddle_ratio >= 1:
        raise ScheduleError(f"straddle_ratio must be >= 1, got {straddle_ratio}")
    if envelope not in ENVELOPES:
        raise ScheduleError(f"envelope must be one of {ENVELOPES}, got {envelope!r}")
    w, early, late = ctap_timing(float(t_max))
    peak = float(straddle_ratio) * float(omega_max)
    if envelope == "constant":
        straddle = Constant(peak)
    else:
        straddle = gaussian_waveform(peak, t_max / 2.0, 2.0 * w)
    waves = ((gaussian_waveform(omega_max, late, w),)
             + (straddle,) * (n_sites - 3)
             + (gaussian_waveform(omega_max, early, w),))
    return PulseSchedule(t_max=float(t_max), link_waveforms=waves, label="ctapn_straddle")


def zero_schedule(n_links: int, t_max: float) -> PulseSchedule:
    """All controls off (the identity evolution at zero detuning)."""
    return PulseSchedule(t_max=float(t_max), link_waveforms=(Zero(),) * n_links, label="identity")


def sample_schedule(schedule: PulseSchedule, t: float) -> np.ndarray:
    """Per-link amplitudes at time ``t`` in [0, t_max]."""
    t = float(t)
    if not 0.0 <= t <= schedule.t_max:
        raise ScheduleError(f"t={t} outside [0, {schedule.t_max}]")
    return np.array([float(w(t)) for w in schedule.link_waveforms])
