"""Dressed states, numerical dark-state tracking and the adiabaticity metric."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import ChainSpec
from .errors import ChainValidationError, DegenerateSpectrumError
from .hamiltonian import charge_hamiltonian
from .pulses import PulseSchedule

DEGENERACY_RTOL = 1e-9
MIN_PROFILE_SAMPLES = 100


@dataclass(frozen=True)
class DressedStates3:
    theta1: float
    theta2: float
    d_plus: np.ndarray
    d_minus: np.ndarray
    d_zero: np.ndarray
    e_plus: float
    e_zero: float
    e_minus: float

    def as_matrix(self) -> np.ndarray:
        """Columns (D+, D0, D-)."""
        return np.column_stack([self.d_plus, self.d_zero, self.d_minus])


def analytic_ctap3_states(omega12: float, omega23: float, delta: float = 0.0) -> DressedStates3:
    """Closed-form eigenstates of the three-site Hamiltonian.

    The textbook vectors are written for ``+Omega`` tunnelling; here the site-2
    components of D+ and D- are sign-flipped so that they diagonalise the
    ``-Omega`` matrix built by :func:`charge_hamiltonian`.  D0 is unaffected.
    """
    if omega12 == 0 and omega23 == 0:
        raise DegenerateSpectrumError("dressed basis undefined when both tunnelling rates vanish")
    theta1 = math.atan2(omega12, omega23)
    rms = math.hypot(omega12, omega23)
    theta2 = math.pi / 4 if delta == 0 else math.atan(2.0 * rms / delta) / 2.0
    s1, c1 = math.sin(theta1), math.cos(theta1)
    s2, c2 = math.sin(theta2), math.cos(theta2)
    d_plus = np.array([s1 * s2, -c2, c1 * s2])
    d_minus = np.array([s1 * c2, s2, c1 * c2])
    d_zero = np.array([c1, 0.0, -s1])
    h = np.array([[0.0, -omega12, 0.0], [-omega12, delta, -omega23], [0.0, -omega23, 0.0]])
    rq = lambda v: float(v @ h @ v)
    return DressedStates3(theta1, theta2, d_plus, d_minus, d_zero, rq(d_plus), rq(d_zero), rq(d_minus))


def _require_transport_chain(spec: ChainSpec) -> ChainSpec:
    spec = spec.charge_view()
    if spec.n_sites % 2 == 0:
        raise ChainValidationError("a zero-energy dark state needs an odd number of sites")
    if any(x != 0 for x in spec.detunings):
        raise ChainValidationError("dark-state analysis assumes zero detunings")
    return spec


def fix_gauge(v: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component real and positive (first one on ties)."""
    mag = np.abs(v)
    k = int(np.flatnonzero(mag >= mag.max() * (1 - 1e-12))[0])
    return v * (np.conj(v[k]) / mag[k])


def _dark_index(evals: np.ndarray, time: float | None = None) -> int:
    i0 = int(np.argmin(np.abs(evals)))
    scale = float(np.max(np.abs(evals)))
    others = np.delete(evals, i0)
    gap = float(np.min(np.abs(others - evals[i0])))
    if scale == 0 or gap < DEGENERACY_RTOL * scale:
        where = "" if time is None else f" at t={time:.6g} ns"
        raise DegenerateSpectrumError(
            f"eigenvalue nearest zero is degenerate{where}: gap {gap:.3e}, |H| {scale:.3e}")
    return i0


def dark_state(spec: ChainSpec, amplitudes) -> np.ndarray:
    """Zero-energy eigenvector of the charge Hamiltonian, gauge fixed."""
    spec = _require_transport_chain(spec)
    evals, evecs = np.linalg.eigh(charge_hamiltonian(spec, amplitudes))
    return fix_gauge(evecs[:, _dark_index(evals)])


def _track(spec: ChainSpec, schedule: PulseSchedule, times: np.ndarray):
    spec = _require_transport_chain(spec)
    n = len(times)
    evals, evecs = np.linalg.eigh(charge_hamiltonian(spec, schedule.amplitudes(times)))
    idx = np.array([_dark_index(evals[k], times[k]) for k in range(n)])
    dark = evecs[np.arange(n), :, idx]
    dark[0] = fix_gauge(dark[0])
    # sequential pass: continuity gauge
    for k in range(1, n):
        if dark[k] @ dark[k - 1] < 0:
            dark[k] = -dark[k]
    return evals, evecs, idx, dark


def track_dark_state(spec: ChainSpec, schedule: PulseSchedule, times) -> np.ndarray:
    """Dark state at each of ``times``, shape (len(times), n_sites).

    The first sample is gauge fixed; every later one takes the sign that gives a
    positive overlap with its predecessor, so the path is continuous.
    """
    return _track(spec, schedule, np.asarray(times, dtype=float))[3]


@dataclass(frozen=True)
class AdiabaticityProfile:
    times: np.ndarray
    metric: np.ndarray

    @property
    def max_metric(self) -> float:
        return float(np.max(self.metric))

    def is_adiabatic(self, threshold: float = 0.01) -> bool:
        return self.max_metric < threshold


def adiabaticity_profile(spec: ChainSpec, schedule: PulseSchedule,
                         n_samples: int = 2001) -> AdiabaticityProfile:
    """Non-adiabatic coupling of the dark state relative to its energy gaps.

    metric(t) = max_k |<dD0/dt | k>| / |E0 - E_k| over every other eigenstate k.
    The dark state is followed continuously (each sample's sign chosen to keep a
    positive overlap with the previous one) and differentiated with second-order
    central differences, one-sided at the ends.
    """
    if n_samples < MIN_PROFILE_SAMPLES:
        raise ValueError(f"need at least {MIN_PROFILE_SAMPLES} samples, got {n_samples}")
    times = np.linspace(0.0, schedule.t_max, n_samples)
    evals, evecs, idx, dark = _track(spec, schedule, times)
    ddark = np.gradient(dark, times, axis=0, edge_order=2)
    coupling = np.abs(np.einsum("kis,ki->ks", evecs, ddark))
    gaps = np.abs(evals - evals[np.arange(n_samples), idx][:, None])
    gaps[np.arange(n_samples), idx] = np.inf
    metric = np.max(coupling / gaps, axis=1)
    return AdiabaticityProfile(times=times, metric=metric)
