"""Coherent tunnelling adiabatic passage (CTAP) along donor chains, with dephasing."""

__version__ = "0.1.0"

from .chain import ChainSpec, SpinMode, dimension, make_chain, uniform_chain
from .errors import (ChainValidationError, ConfigError, CtapError, DegenerateSpectrumError,
                     InvariantViolation, LengthMismatchError, NegativeAmplitudeError,
                     ScheduleError, TooFewSitesError)
from .pulses import (PulseSchedule, ctap3_schedule, ctapn_schedule, gaussian_waveform,
                     intuitive3_schedule, sample_schedule, zero_schedule)
from .hamiltonian import charge_hamiltonian, spin_site_hamiltonian
from .spectra import adiabaticity_profile, analytic_ctap3_states, dark_state, track_dark_state
from .dynamics import (IntegratorConfig, Trajectory, evolve, evolve_ensemble, propagate_oracle,
                       transfer_error)
from .experiments import (DisorderConfig, SweepConfig, compare_orderings, disorder_monte_carlo,
                          run_transport, simulate_transport, sweep_error_surface)

import types as _types

__all__ = [name for name, obj in list(globals().items())
           if not name.startswith("_") and not isinstance(obj, _types.ModuleType)]
