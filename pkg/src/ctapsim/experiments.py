"""Transport runs, dephasing/time sweeps, ordering comparison and disorder trials."""

from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import __version__
from .chain import ChainSpec, SpinMode, make_chain
from .dynamics import (IntegratorConfig, Trajectory, density, evolve, evolve_ensemble, rk4_step_bound,
                       site_state, transfer_error)
from .errors import ConfigError, CtapError, DegenerateSpectrumError
from .pulses import (ENVELOPES, PulseSchedule, _three_site, ctap3_schedule, ctapn_schedule,
                     intuitive3_schedule)
from .spectra import adiabaticity_profile

SCHEMES = ("ctap3", "ctapn", "intuitive3")
DEFAULT_OMEGA_MAX = 20 * math.pi       # 10 GHz tunnelling, in rad/ns
ADIABATIC_THRESHOLD = 0.01
GEOMETRY_NOTE = "30 nm end-donor spacing, 20 nm between central donors (not used quantitatively)"


def _strictly_increasing(name, values):
    values = tuple(float(v) for v in values)
    if not values:
        raise ConfigError(f"{name}: grid must not be empty")
    if any(not math.isfinite(v) for v in values):
        raise ConfigError(f"{name}: grid values must be finite")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{name}: grid must be strictly increasing")
    return values


@dataclass(frozen=True)
class SweepConfig:
    """One transport experiment over a (gamma, t_max) grid; a 1x1 grid is a single run."""

    scheme: str = "ctap3"
    n_sites: int = 3
    omega_max: float = DEFAULT_OMEGA_MAX
    gamma_grid: tuple = (0.0,)
    t_max_grid: tuple = (80.0,)
    spin_mode: SpinMode = SpinMode.CHARGE_ONLY
    alpha: complex = 1.0
    beta: complex = 0.0
    straddle_ratio: float = 3.0
    envelope: str = "gaussian"
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    adiabaticity_samples: int = 2001
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme: must be one of {SCHEMES}, got {self.scheme!r}")
        if self.scheme == "ctapn":
            if self.n_sites < 5 or self.n_sites % 2 == 0:
                raise ConfigError(f"n_sites: must be odd and >= 5 for ctapn, got {self.n_sites}")
        elif self.n_sites != 3:
            raise ConfigError(f"n_sites: {self.scheme} is a three-site scheme, got {self.n_sites}")
        if not (math.isfinite(self.omega_max) and self.omega_max > 0):
            raise ConfigError(f"omega_max: must be positive, got {self.omega_max}")
        gammas = _strictly_increasing("gamma_grid", self.gamma_grid)
        if gammas[0] < 0:
            raise ConfigError("gamma_grid: dephasing rates must be non-negative")
        times = _strictly_increasing("t_max_grid", self.t_max_grid)
        if times[0] <= 0:
            raise ConfigError("t_max_grid: transfer times must be positive")
        object.__setattr__(self, "gamma_grid", gammas)
        object.__setattr__(self, "t_max_grid", times)
        try:
            object.__setattr__(self, "spin_mode", SpinMode(self.spin_mode))
        except ValueError:
            raise ConfigError(f"spin_mode: unknown value {self.spin_mode!r}") from None
        alpha, beta = complex(self.alpha), complex(self.beta)
        if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > 1e-12:
            raise ConfigError("alpha, beta: |alpha|^2 + |beta|^2 must equal 1")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        if not self.straddle_ratio >= 1:
            raise ConfigError(f"straddle_ratio: must be >= 1, got {self.straddle_ratio}")
        if self.envelope not in ENVELOPES:
            raise ConfigError(f"envelope: must be one of {ENVELOPES}, got {self.envelope!r}")
        if self.adiabaticity_samples < 100:
            raise ConfigError("adiabaticity_samples: must be >= 100")

    @property
    def n_points(self) -> int:
        return len(self.gamma_grid) * len(self.t_max_grid)

    def at(self, gamma: float, t_max: float) -> "SweepConfig":
        return replace(self, gamma_grid=(gamma,), t_max_grid=(t_max,))

    def schedule(self, t_max: float) -> PulseSchedule:
        if self.scheme == "ctap3":
            return ctap3_schedule(self.omega_max, t_max)
        if self.scheme == "intuitive3":
            return intuitive3_schedule(self.omega_max, t_max)
        return ctapn_schedule(self.n_sites, self.omega_max, t_max, self.straddle_ratio, self.envelope)

    def chain(self) -> ChainSpec:
        peaks = [w.peak for w in self.schedule(self.t_max_grid[0]).link_waveforms]
        return make_chain(self.n_sites, [0.0] * self.n_sites, peaks, self.spin_mode)


# ---------------------------------------------------------------- single runs

@dataclass
class RunResult:
    gamma: float
    t_max: float
    trajectory: Trajectory
    transfer_error: float
    max_mid_population: float
    max_adiabaticity: float
    spin_phase: float | None = None
    initial_spin_phase: float | None = None

    @property
    def adiabatic(self) -> bool:
        return self.max_adiabaticity < ADIABATIC_THRESHOLD


# The intuitive ordering drives real Rabi oscillation through the middle site;
# at the full RK4 step bound the non-positivity of the RK4 map accumulates past
# the -1e-8 eigenvalue tolerance by t_max ~ 10 ns.  Half the bound is 16x better.
INTUITIVE_STEP_FRACTION = 0.5


def integrator_for(schedule: PulseSchedule, cfg: IntegratorConfig | None) -> IntegratorConfig:
    """Integrator settings for ``schedule``: picks a finer automatic step for intuitive3."""
    cfg = cfg or IntegratorConfig()
    if cfg.method == "rk4_fixed" and cfg.step is None and schedule.label == "intuitive3":
        bound = rk4_step_bound(schedule.t_max, schedule.peak_amplitude)
        cfg = replace(cfg, step=INTUITIVE_STEP_FRACTION * bound)
    return cfg


def _max_adiabaticity(chain: ChainSpec, schedule: PulseSchedule, n_samples: int) -> float:
    try:
        return adiabaticity_profile(chain, schedule, n_samples).max_metric
    except DegenerateSpectrumError:
        return math.inf


def _spin_phase(rho: np.ndarray, chain: ChainSpec, site: int) -> float:
    return cmath.phase(rho[chain.index(site, 0), chain.index(site, 1)])


def _max_mid(traj: Trajectory, n_sites: int) -> float:
    # running max over every step when the integrator tracked it, else over samples
    if traj.max_site_populations is not None:
        return float(np.max(traj.max_site_populations[1:n_sites - 1]))
    return float(np.max(traj.populations[:, 1:n_sites - 1]))


def _finish(traj: Trajectory, chain: ChainSpec, target: np.ndarray, t_max: float,
            max_adiab: float, alpha: complex, beta: complex) -> RunResult:
    n = chain.n_sites
    spin = chain.spin_mode is SpinMode.SITE_SPIN
    return RunResult(
        gamma=traj.gamma,
        t_max=t_max,
        trajectory=traj,
        transfer_error=transfer_error(traj.final, target),
        max_mid_population=_max_mid(traj, n),
        max_adiabaticity=max_adiab,
        spin_phase=_spin_phase(traj.final, chain, n) if spin else None,
        initial_spin_phase=cmath.phase(alpha * beta.conjugate()) if spin else None,
    )


def simulate_transport(chain: ChainSpec, schedule: PulseSchedule, gamma: float,
                       alpha: complex = 1.0, beta: complex = 0.0,
                       integrator: IntegratorConfig | None = None,
                       adiabaticity_samples: int = 2001) -> RunResult:
    """Start on donor 1 (spin alpha|down> + beta|up>) and score arrival on the last donor."""
    spin = (alpha, beta)
    rho0 = density(site_state(chain, 1, spin))
    target = site_state(chain, chain.n_sites, spin)
    traj = evolve(chain, schedule, rho0, gamma, integrator_for(schedule, integrator))
    adiab = _max_adiabaticity(chain, schedule, adiabaticity_samples)
    return _finish(traj, chain, target, schedule.t_max, adiab, complex(alpha), complex(beta))


def run_transport(config: SweepConfig) -> RunResult:
    if config.n_points != 1:
        raise ConfigError("run_transport needs a single (gamma, t_max) point")
    t_max = config.t_max_grid[0]
    return simulate_transport(config.chain(), config.schedule(t_max), config.gamma_grid[0],
                              config.alpha, config.beta, config.integrator,
                              config.adiabaticity_samples)


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepRecord:
    gamma: float
    t_max: float
    error: float
    max_mid_pop: float
    max_adiab: float
    failure: str | None = None

    @property
    def adiabatic(self) -> bool:
        return self.max_adiab < ADIABATIC_THRESHOLD


@dataclass
class SweepResult:
    config: SweepConfig
    records: list
    metadata: dict

    def grid(self, attr: str = "error") -> np.ndarray:
        """Record attribute as an array of shape (n_gamma, n_t_max)."""
        values = [getattr(r, attr) for r in self.records]
        return np.array(values).reshape(len(self.config.gamma_grid), len(self.config.t_max_grid))

    @property
    def failures(self) -> list:
        return [r for r in self.records if r.failure is not None]


class _OrderedEmitter:
    """Hands records to ``sink`` strictly in index order as they complete."""

    def __init__(self, sink: Callable | None):
        self.sink = sink
        self.pending = {}
        self.next = 0

    def put(self, index: int, record) -> None:
        self.pending[index] = record
        while self.next in self.pending:
            rec = self.pending.pop(self.next)
            if self.sink is not None:
                self.sink(rec)
            self.next += 1


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("CTAP_SIM_THREADS", "0") or 0)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def _try_evolve(chain, schedule, rho0, gamma, cfg):
    try:
        return evolve(chain, schedule, rho0, gamma, cfg)
    except CtapError as exc:
        return exc


def _sweep_column(config: SweepConfig, t_max: float) -> list[SweepRecord]:
    gammas = config.gamma_grid
    try:
        schedule = config.schedule(t_max)
        chain = config.chain()
        spin = (config.alpha, config.beta)
        rho0 = density(site_state(chain, 1, spin))
        target = site_state(chain, chain.n_sites, spin)
        adiab = _max_adiabaticity(chain, schedule, config.adiabaticity_samples)
        cfg = integrator_for(schedule, config.integrator)
        if cfg.method == "rk4_fixed":
            trajs = evolve_ensemble(chain, schedule, rho0, gammas, cfg=cfg, check=False)
        else:
            trajs = [_try_evolve(chain, schedule, rho0, g, cfg) for g in gammas]
    except (CtapError, ValueError) as exc:
        return [SweepRecord(g, t_max, math.nan, math.nan, math.nan, f"{type(exc).__name__}: {exc}")
                for g in gammas]
    out = []
    for g, traj in zip(gammas, trajs):
        if isinstance(traj, Exception):
            out.append(SweepRecord(g, t_max, math.nan, math.nan, adiab,
                                   f"{type(traj).__name__}: {traj}"))
            continue
        problems = traj.violations()
        if problems:
            msg, t = problems[0]
            where = "" if t is None else f" at t={t:.6g} ns"
            out.append(SweepRecord(traj.gamma, t_max, math.nan, math.nan, adiab,
                                   f"InvariantViolation: {msg}{where}"))
            continue
        res = _finish(traj, chain, target, t_max, adiab, config.alpha, config.beta)
        out.append(SweepRecord(traj.gamma, t_max, res.transfer_error, res.max_mid_population, adiab))
    return out


def sweep_metadata(config: SweepConfig) -> dict:
    return {
        "scheme": config.scheme,
        "n_sites": config.n_sites,
        "omega_max": config.omega_max,
        "seed": config.seed,
        "version": __version__,
        "geometry": GEOMETRY_NOTE,
    }


def sweep_error_surface(config: SweepConfig, threads: int | None = None,
                        on_record: Callable[[SweepRecord], None] | None = None,
                        progress: Callable[[int, int], None] | None = None) -> SweepResult:
    """Transfer error over the (gamma, t_max) grid.

    Every t_max column is integrated as one batch over all gamma values.  Records
    are ordered gamma-major and passed to ``on_record`` in that order as soon as
    all earlier records exist.  Failed points carry NaN and a failure message.
    """
    n_g, n_t = len(config.gamma_grid), len(config.t_max_grid)
    emitter = _OrderedEmitter(on_record)
    records = [None] * (n_g * n_t)
    done = 0

    def finish(j: int, column: list[SweepRecord]) -> None:
        nonlocal done
        for i, rec in enumerate(column):
            records[i * n_t + j] = rec
        done += 1
        if progress is not None:
            progress(done, n_t)
        # flush the gamma-major prefix that is now complete
        while emitter.next < len(records) and records[emitter.next] is not None:
            emitter.put(emitter.next, records[emitter.next])

    workers = min(resolve_threads(threads), n_t)
    if workers <= 1:
        for j, t_max in enumerate(config.t_max_grid):
            finish(j, _sweep_column(config, t_max))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_sweep_column, config, t) for t in config.t_max_grid]
            for j, fut in enumerate(futures):
                finish(j, fut.result())
    return SweepResult(config=config, records=records, metadata=sweep_metadata(config))


# ---------------------------------------------------------------- orderings

@dataclass
class OrderingComparison:
    ctap3: RunResult
    intuitive3: RunResult

    def as_dict(self) -> dict:
        return {
            "ctap3_error": self.ctap3.transfer_error,
            "intuitive3_error": self.intuitive3.transfer_error,
            "ctap3_max_site2": self.ctap3.max_mid_population,
            "intuitive3_max_site2": self.intuitive3.max_mid_population,
        }


def compare_orderings(omega_max: float, t_max: float, gamma: float,
                      integrator: IntegratorConfig | None = None,
                      adiabaticity_samples: int = 2001) -> OrderingComparison:
    """Counter-intuitive versus intuitive ordering on CTAP3 from |1>."""
    if not omega_max >= 0:
        raise ValueError(f"omega_max must be non-negative, got {omega_max}")
    chain = make_chain(3, [0, 0, 0], [omega_max, omega_max])
    runs = {}
    for label, counter in (("ctap3", True), ("intuitive3", False)):
        sched = _three_site(float(omega_max), float(t_max), counter, label)
        runs[label] = simulate_transport(chain, sched, gamma, integrator=integrator,
                                         adiabaticity_samples=adiabaticity_samples)
    return OrderingComparison(**runs)


# ---------------------------------------------------------------- disorder

@dataclass(frozen=True)
class DisorderConfig:
    sigma: float
    trials: int
    seed: int
    base: SweepConfig

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and 0 <= self.sigma < 1):
            raise ConfigError(f"sigma: must lie in [0, 1), got {self.sigma}")
        if self.trials < 1:
            raise ConfigError(f"trials: must be >= 1, got {self.trials}")
        if self.base.n_points != 1:
            raise ConfigError("base: disorder runs use a single (gamma, t_max) point")

    def link_factors(self, trial: int) -> np.ndarray:
        """Per-link multipliers of trial ``trial``, uniform on [1-sigma, 1+sigma]."""
        rng = np.random.default_rng([int(self.seed) & (2**64 - 1), trial])
        return rng.uniform(1 - self.sigma, 1 + self.sigma, self.base.n_sites - 1)


@dataclass(frozen=True)
class DisorderTrial:
    trial: int
    factors: tuple
    error: float
    max_mid_pop: float
    max_adiab: float
    failure: str | None = None


@dataclass
class DisorderResult:
    config: DisorderConfig
    trials: list

    @property
    def errors(self) -> np.ndarray:
        return np.array([t.error for t in self.trials])

    @property
    def mean(self) -> float:
        return float(np.nanmean(self.errors))

    @property
    def max(self) -> float:
        return float(np.nanmax(self.errors))

    @property
    def std(self) -> float:
        return float(np.nanstd(self.errors))


def disorder_monte_carlo(config: DisorderConfig, batch_size: int = 100,
                         threads: int | None = None) -> DisorderResult:
    """Transfer error under random per-link tunnelling-rate factors.

    All trials use one common RK4 step (the bound for the largest possible peak
    amplitude), so a trial's result does not depend on how trials are batched.
    """
    base = config.base
    t_max, gamma = base.t_max_grid[0], base.gamma_grid[0]
    schedule = base.schedule(t_max)
    chain = base.chain()
    spin = (base.alpha, base.beta)
    rho0 = density(site_state(chain, 1, spin))
    target = site_state(chain, chain.n_sites, spin)
    factors = np.array([config.link_factors(k) for k in range(config.trials)])

    cfg = base.integrator
    if cfg.step is None:
        cfg = replace(cfg, step=rk4_step_bound(t_max, schedule.peak_amplitude * (1 + config.sigma)))

    def run_batch(lo: int, hi: int) -> list[DisorderTrial]:
        f = factors[lo:hi]
        trajs = evolve_ensemble(chain, schedule, rho0, [gamma] * (hi - lo), link_factors=f,
                                cfg=cfg, check=False)
        out = []
        for k, traj in zip(range(lo, hi), trajs):
            adiab = _max_adiabaticity(chain, schedule.scaled(factors[k]), base.adiabaticity_samples)
            problems = traj.violations()
            if problems:
                out.append(DisorderTrial(k, tuple(factors[k]), math.nan, math.nan, adiab,
                                         f"InvariantViolation: {problems[0][0]}"))
                continue
            res = _finish(traj, chain, target, t_max, adiab, base.alpha, base.beta)
            out.append(DisorderTrial(k, tuple(factors[k]), res.transfer_error,
                                     res.max_mid_population, adiab))
        return out

    bounds = [(lo, min(config.trials, lo + batch_size))
              for lo in range(0, config.trials, batch_size)]
    workers = min(resolve_threads(threads), len(bounds))
    if workers <= 1:
        chunks = [run_batch(lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda b: run_batch(*b), bounds))
    return DisorderResult(config=config, trials=[t for chunk in chunks for t in chunk])
