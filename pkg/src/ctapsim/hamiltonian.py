"""Instantaneous one-electron Hamiltonians of a donor chain.

Nearest-neighbour tunnelling enters with a minus sign, ``H[i, i+1] = -Omega_i``,
in both the charge and the site x spin basis.  Only the global sign of the
tunnelling differs from the alternative convention, and it is removed by the
gauge ``|k> -> (-1)^k |k>``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .chain import ChainSpec, SpinMode
from .errors import ChainValidationError, LengthMismatchError


def _amplitudes(spec: ChainSpec, amplitudes) -> np.ndarray:
    amps = np.asarray(amplitudes, dtype=float)
    if amps.shape[-1:] != (spec.n_links,):
        raise LengthMismatchError(
            f"expected {spec.n_links} link amplitudes, got shape {amps.shape}")
    return amps


def charge_hamiltonian(spec: ChainSpec, amplitudes: Sequence[float]) -> np.ndarray:
    """Tridiagonal charge-basis Hamiltonian (real symmetric, rad/ns).

    ``amplitudes`` may carry leading batch dimensions, giving a stack of matrices.
    """
    if spec.spin_mode is not SpinMode.CHARGE_ONLY:
        raise ChainValidationError("charge_hamiltonian needs a charge_only chain")
    amps = _amplitudes(spec, amplitudes)
    n = spec.n_sites
    h = np.zeros(amps.shape[:-1] + (n, n))
    idx = np.arange(n)
    h[..., idx, idx] = np.asarray(spec.detunings, dtype=float)
    k = np.arange(n - 1)
    h[..., k, k + 1] = -amps
    h[..., k + 1, k] = -amps
    return h


def spin_site_hamiltonian(spec: ChainSpec, amplitudes: Sequence[float]) -> np.ndarray:
    """One-electron Hamiltonian on site x spin, index ``2*(site-1) + spin``.

    Tunnelling is spin conserving, so with zero spin splittings the result is
    ``charge_hamiltonian (x) identity_2``.
    """
    if spec.spin_mode is not SpinMode.SITE_SPIN:
        raise ChainValidationError("spin_site_hamiltonian needs a site_spin chain")
    amps = _amplitudes(spec, amplitudes)
    d = spec.dim
    h = np.zeros(amps.shape[:-1] + (d, d))
    idx = np.arange(d)
    h[..., idx, idx] = spec.diagonal_energies()
    for spin in (0, 1):
        a = 2 * np.arange(spec.n_links) + spin
        h[..., a, a + 2] = -amps
        h[..., a + 2, a] = -amps
    return h


def hamiltonian(spec: ChainSpec, amplitudes: Sequence[float]) -> np.ndarray:
    if spec.spin_mode is SpinMode.SITE_SPIN:
        return spin_site_hamiltonian(spec, amplitudes)
    return charge_hamiltonian(spec, amplitudes)


def is_hermitian(h: np.ndarray, atol: float = 1e-12) -> bool:
    return bool(np.all(np.abs(h - np.conj(np.swapaxes(h, -1, -2))) <= atol))
