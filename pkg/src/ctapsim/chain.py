"""Static description of an N-donor chain and its basis conventions.

Units are hbar = 1, time in ns and energies / tunnelling rates in rad/ns.
Sites are numbered 1..n in the public API; array indices are 0-based.  In
``site_spin`` mode the basis index of (site, spin) is ``2*(site-1) + spin`` with
spin down = 0 and spin up = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import LengthMismatchError, NegativeAmplitudeError, TooFewSitesError, ChainValidationError

SPIN_DOWN = 0
SPIN_UP = 1


class SpinMode(str, Enum):
    CHARGE_ONLY = "charge_only"
    SITE_SPIN = "site_spin"


@dataclass(frozen=True)
class ChainSpec:
    """Immutable N-donor chain.

    ``detunings`` are site energies relative to the end sites, ``base_amplitudes``
    the nominal peak tunnelling rate of each of the ``n_sites - 1`` links and
    ``spin_splittings`` per-site ``(E_down, E_up)`` offsets (zero field by default).
    """

    n_sites: int
    detunings: tuple[float, ...]
    base_amplitudes: tuple[float, ...]
    spin_mode: SpinMode = SpinMode.CHARGE_ONLY
    spin_splittings: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if not isinstance(self.n_sites, (int, np.integer)) or isinstance(self.n_sites, bool):
            raise ChainValidationError(f"n_sites must be an integer, got {self.n_sites!r}")
        if self.n_sites < 3:
            raise TooFewSitesError(f"n_sites must be >= 3, got {self.n_sites}")
        if len(self.detunings) != self.n_sites:
            raise LengthMismatchError(
                f"expected {self.n_sites} detunings, got {len(self.detunings)}")
        if len(self.base_amplitudes) != self.n_sites - 1:
            raise LengthMismatchError(
                f"expected {self.n_sites - 1} link amplitudes, got {len(self.base_amplitudes)}")
        if any(not math.isfinite(x) for x in self.detunings):
            raise ChainValidationError("detunings must be finite")
        if any(not math.isfinite(a) for a in self.base_amplitudes):
            raise ChainValidationError("link amplitudes must be finite")
        if any(a < 0 for a in self.base_amplitudes):
            raise NegativeAmplitudeError(
                f"link amplitudes must be non-negative, got {list(self.base_amplitudes)}")
        object.__setattr__(self, "spin_mode", SpinMode(self.spin_mode))
        if not self.spin_splittings:
            object.__setattr__(self, "spin_splittings", ((0.0, 0.0),) * self.n_sites)
        elif len(self.spin_splittings) != self.n_sites:
            raise LengthMismatchError(
                f"expected {self.n_sites} spin splitting pairs, got {len(self.spin_splittings)}")

    @property
    def dim(self) -> int:
        return self.n_sites * (2 if self.spin_mode is SpinMode.SITE_SPIN else 1)

    @property
    def n_links(self) -> int:
        return self.n_sites - 1

    @property
    def spin_states(self) -> int:
        return 2 if self.spin_mode is SpinMode.SITE_SPIN else 1

    def index(self, site: int, spin: int = SPIN_DOWN) -> int:
        """Basis index of a 1-based ``site`` (and ``spin`` in site_spin mode)."""
        if not 1 <= site <= self.n_sites:
            raise IndexError(f"site {site} outside 1..{self.n_sites}")
        if self.spin_mode is SpinMode.CHARGE_ONLY:
            return site - 1
        if spin not in (SPIN_DOWN, SPIN_UP):
            raise IndexError(f"spin must be 0 (down) or 1 (up), got {spin}")
        return 2 * (site - 1) + spin

    def site_of(self) -> np.ndarray:
        """0-based site label of every basis index."""
        return np.arange(self.dim) // self.spin_states

    def diagonal_energies(self) -> np.ndarray:
        """On-site energies in basis order (detuning plus spin splitting)."""
        det = np.asarray(self.detunings, dtype=float)
        if self.spin_mode is SpinMode.CHARGE_ONLY:
            return det.copy()
        split = np.asarray(self.spin_splittings, dtype=float)
        return (det[:, None] + split).reshape(-1)

    def charge_view(self) -> "ChainSpec":
        """The same chain with spin dropped."""
        if self.spin_mode is SpinMode.CHARGE_ONLY:
            return self
        return ChainSpec(self.n_sites, self.detunings, self.base_amplitudes)

    def with_spin_mode(self, spin_mode) -> "ChainSpec":
        return ChainSpec(self.n_sites, self.detunings, self.base_amplitudes,
                         SpinMode(spin_mode), self.spin_splittings)


def make_chain(n_sites: int, detunings: Sequence[float], base_amplitudes: Sequence[float],
               spin_mode: SpinMode | str = SpinMode.CHARGE_ONLY) -> ChainSpec:
    """Validated chain with zero spin splittings."""
    return ChainSpec(
        n_sites=n_sites,
        detunings=tuple(float(x) for x in detunings),
        base_amplitudes=tuple(float(a) for a in base_amplitudes),
        spin_mode=SpinMode(spin_mode),
    )


def uniform_chain(n_sites: int, amplitude: float = 1.0,
                  spin_mode: SpinMode | str = SpinMode.CHARGE_ONLY) -> ChainSpec:
    return make_chain(n_sites, [0.0] * n_sites, [amplitude] * (n_sites - 1), spin_mode)


def dimension(spec: ChainSpec) -> int:
    return spec.dim
