"""Density-matrix evolution with charge dephasing, plus an independent oracle.

The master equation is

    d rho / dt = -i [H(t), rho] - gamma * C o rho

where ``C[i, j] = 1`` when basis states i and j sit on different donors and 0
otherwise.  Coherences between the two spin states of one donor are not damped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import _kernel
from .chain import ChainSpec
from .errors import InvariantViolation
from .hamiltonian import hamiltonian
from .pulses import PulseSchedule

RK4_RATE_FACTOR = 0.01     # step <= 0.01 / largest peak amplitude
RK4_MIN_STEPS = 5000       # step <= t_max / 5000
DEFAULT_RECORDS = 1000
MIN_ORACLE_SUBSTEPS = 10

TRACE_TOL = 1e-9
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = -1e-8
PURITY_STEP_TOL = 1e-8

METHODS = ("rk4_fixed", "oracle_expm")


@dataclass(frozen=True)
class IntegratorConfig:
    """How to integrate.

    rk4_fixed: ``step`` is the RK4 step in ns (None picks the largest allowed
    step) and ``record_every`` the number of steps between stored samples.
    oracle_expm: ``step`` is the number of exponential sub-steps per sample,
    ``oracle_samples`` the number of samples.
    """

    method: str = "rk4_fixed"
    step: float | None = None
    record_every: int | None = None
    oracle_samples: int = 200

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.step is not None and not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if self.record_every is not None and self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")
        if self.oracle_samples < 1:
            raise ValueError("oracle_samples must be >= 1")


def rk4_step_bound(t_max: float, peak_amplitude: float) -> float:
    bound = t_max / RK4_MIN_STEPS
    if peak_amplitude > 0:
        bound = min(bound, RK4_RATE_FACTOR / peak_amplitude)
    return bound


def _rk4_plan(t_max: float, peak: float, cfg: IntegratorConfig) -> tuple[float, int, int]:
    bound = rk4_step_bound(t_max, peak)
    if cfg.step is not None and cfg.step > bound * (1 + 1e-12):
        raise ValueError(f"rk4 step {cfg.step} ns exceeds the bound {bound:.6g} ns "
                         f"(0.01/{peak:.6g} rad/ns and t_max/{RK4_MIN_STEPS})")
    nsteps = math.ceil(t_max / (cfg.step if cfg.step is not None else bound) - 1e-9)
    nsteps = max(nsteps, 1)
    record_every = cfg.record_every or max(1, math.ceil(nsteps / DEFAULT_RECORDS))
    return t_max / nsteps, nsteps, record_every


# ---------------------------------------------------------------- states

def dephasing_mask(spec: ChainSpec) -> np.ndarray:
    site = spec.site_of()
    return (site[:, None] != site[None, :]).astype(float)


def density(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def site_state(spec: ChainSpec, site: int, spin_amplitudes: Sequence[complex] = (1.0, 0.0)) -> np.ndarray:
    """|site> (charge mode) or |site> (x) (a|down> + b|up>) as a state vector."""
    psi = np.zeros(spec.dim, dtype=complex)
    if spec.spin_states == 1:
        psi[spec.index(site)] = 1.0
    else:
        a, b = spin_amplitudes
        psi[spec.index(site, 0)] = a
        psi[spec.index(site, 1)] = b
    return psi


def check_density_matrix(rho: np.ndarray, what: str = "rho") -> None:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got shape {rho.shape}")
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > HERMITIAN_TOL:
        raise ValueError(f"{what} is not Hermitian (max deviation {herm:.3e})")
    tr = float(np.real(np.trace(rho)))
    if abs(tr - 1) > TRACE_TOL:
        raise ValueError(f"{what} has trace {tr!r}")
    lam = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
    if lam < POSITIVITY_TOL:
        raise ValueError(f"{what} has negative eigenvalue {lam:.3e}")


def purity(rho: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("...ij,...ji->...", rho, rho))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = np.asarray(a) - np.asarray(b)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def transfer_error(rho_final: np.ndarray, target) -> float:
    """1 - <target| rho |target>."""
    target = np.asarray(target, dtype=complex)
    rho_final = np.asarray(rho_final)
    if target.shape != (rho_final.shape[0],):
        raise ValueError(f"target shape {target.shape} does not match rho {rho_final.shape}")
    norm = float(np.linalg.norm(target))
    if abs(norm - 1) > 1e-10:
        raise ValueError(f"target must be a unit vector, norm={norm!r}")
    overlap = complex(target.conj() @ rho_final @ target)
    if abs(overlap.imag) >= 1e-10:
        raise ValueError(f"<target|rho|target> has imaginary part {overlap.imag:.3e}")
    return 1.0 - overlap.real


def lindblad_rhs(H: np.ndarray, rho: np.ndarray, gamma: float, spec: ChainSpec) -> np.ndarray:
    if gamma < 0:
        raise ValueError(f"dephasing rate must be non-negative, got {gamma}")
    if H.shape != rho.shape or H.shape != (spec.dim, spec.dim):
        raise ValueError(f"shape mismatch: H {H.shape}, rho {rho.shape}, dim {spec.dim}")
    return -1j * (H @ rho - rho @ H) - gamma * dephasing_mask(spec) * rho


# ---------------------------------------------------------------- trajectories

@dataclass
class Trajectory:
    """Sampled evolution of one density matrix."""

    spec: ChainSpec
    gamma: float
    times: np.ndarray
    states: np.ndarray
    step: float | None = None
    max_site_populations: np.ndarray | None = None   # over every integration step
    diagnostics: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def populations(self) -> np.ndarray:
        """Site populations, shape (n_times, n_sites); spin summed."""
        diag = np.real(np.diagonal(self.states, axis1=1, axis2=2))
        return diag.reshape(len(self.times), self.spec.n_sites, self.spec.spin_states).sum(axis=2)

    @property
    def purity(self) -> np.ndarray:
        return purity(self.states)

    def violations(self) -> list[tuple[str, float | None]]:
        """Broken invariants as (message, time) pairs; empty when healthy."""
        out = []
        diag = self.diagnostics
        if diag.get("trace_fail_step"):
            out.append((f"trace deviated by more than {TRACE_TOL:g} before renormalisation",
                        diag["trace_fail_step"] * self.step))
        if abs(diag.get("log_trace_correction", 0.0)) > TRACE_TOL:
            out.append((f"cumulative trace correction {diag['log_trace_correction']:.3e} "
                        f"exceeds {TRACE_TOL:g}", None))
        if diag.get("purity_fail_step"):
            out.append((f"purity rose by more than {PURITY_STEP_TOL:g} in one step",
                        diag["purity_fail_step"] * self.step))
        rho = self.states
        herm = np.max(np.abs(rho - np.conj(np.swapaxes(rho, 1, 2))), axis=(1, 2))
        tr = np.abs(np.real(np.trace(rho, axis1=1, axis2=2)) - 1)
        lam = np.linalg.eigvalsh(0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2))))[:, 0]
        for bad, msg in ((herm > HERMITIAN_TOL, "not Hermitian"),
                         (tr > TRACE_TOL, "trace off"),
                         (lam < POSITIVITY_TOL, "negative eigenvalue")):
            if np.any(bad):
                k = int(np.argmax(bad))
                out.append((f"state {msg}", float(self.times[k])))
        return out

    def check_invariants(self) -> None:
        problems = self.violations()
        if problems:
            msg, t = problems[0]
            raise InvariantViolation(msg, t)


def _as_batch(rho0s, d: int) -> np.ndarray:
    rho0s = np.asarray(rho0s, dtype=complex)
    if rho0s.ndim == 2:
        rho0s = rho0s[None]
    if rho0s.shape[1:] != (d, d):
        raise ValueError(f"initial states must be {d}x{d}, got {rho0s.shape[1:]}")
    for k, rho in enumerate(rho0s):
        check_density_matrix(rho, f"rho0[{k}]")
    return rho0s


def evolve_ensemble(spec: ChainSpec, schedule: PulseSchedule, rho0s, gammas: Sequence[float],
                    link_factors=None, cfg: IntegratorConfig | None = None,
                    check: bool = True) -> list[Trajectory]:
    """RK4-integrate a batch of trajectories sharing one time grid.

    Member g starts from ``rho0s[g]`` (or one shared state), dephases at
    ``gammas[g]`` and has every link amplitude multiplied by
    ``link_factors[g]`` (shape (G, n_links); default all ones).  With
    ``check=False`` invariant violations are left in each trajectory's
    ``violations()`` instead of being raised.
    """
    cfg = cfg or IntegratorConfig()
    if cfg.method != "rk4_fixed":
        raise ValueError("evolve_ensemble integrates with rk4_fixed only")
    if schedule.n_links != spec.n_links:
        raise ValueError(f"schedule has {schedule.n_links} links, chain has {spec.n_links}")
    gammas = np.asarray(gammas, dtype=float).reshape(-1)
    if np.any(gammas < 0) or not np.all(np.isfinite(gammas)):
        raise ValueError(f"dephasing rates must be finite and non-negative, got {gammas}")
    G = len(gammas)
    d = spec.dim
    rho0s = _as_batch(rho0s, d)
    if len(rho0s) == 1 and G > 1:
        rho0s = np.broadcast_to(rho0s, (G, d, d))
    if len(rho0s) != G:
        raise ValueError(f"{len(rho0s)} initial states for {G} dephasing rates")

    kind, amp, center, width = schedule.kernel_arrays()
    factors = np.ones((G, spec.n_links)) if link_factors is None else np.asarray(link_factors, float)
    if factors.shape != (G, spec.n_links):
        raise ValueError(f"link_factors must have shape {(G, spec.n_links)}, got {factors.shape}")
    if np.any(factors < 0):
        raise ValueError("link factors must be non-negative")
    amps = np.ascontiguousarray((amp[None, :] * factors).T)     # (n_links, G)
    peak = float(amps.max(initial=0.0))
    h, nsteps, record_every = _rk4_plan(schedule.t_max, peak, cfg)

    s = spec.spin_states
    P = d + 2 * s
    inner = slice(s, s + d)
    X = np.zeros((P, P, G))
    Y = np.zeros((P, P, G))
    sym = 0.5 * (rho0s + np.conj(np.swapaxes(rho0s, 1, 2)))
    X[inner, inner] = np.moveaxis(sym.real, 0, -1)
    Y[inner, inner] = np.moveaxis(sym.imag, 0, -1)
    gm = np.zeros((P, P, G))
    gm[inner, inner] = dephasing_mask(spec)[:, :, None] * gammas[None, None, :]
    e = np.zeros(P)
    e[inner] = spec.diagonal_energies()

    nrec = nsteps // record_every + 1 + (1 if nsteps % record_every else 0)
    rec_x = np.zeros((nrec, P, P, G))
    rec_y = np.zeros((nrec, P, P, G))
    pops0 = np.real(np.diagonal(rho0s, axis1=1, axis2=2)).reshape(G, spec.n_sites, s).sum(axis=2)
    max_pop = np.ascontiguousarray(pops0.T)
    trace_dev = np.zeros(G)
    log_trace = np.zeros(G)
    trace_fail = np.zeros(G, dtype=np.int64)
    purity_inc = np.full(G, -np.inf)
    purity_fail = np.zeros(G, dtype=np.int64)

    r = _kernel.integrate(e, s, d, kind, center, width, amps, X, Y, gm, h, nsteps, record_every,
                          rec_x, rec_y, max_pop, trace_dev, log_trace, trace_fail,
                          purity_inc, purity_fail, TRACE_TOL, PURITY_STEP_TOL)
    assert r == nrec
    steps_taken = np.minimum(np.arange(nrec) * record_every, nsteps)
    times = steps_taken * h
    times[-1] = schedule.t_max

    out = []
    for g in range(G):
        states = rec_x[:, inner, inner, g] + 1j * rec_y[:, inner, inner, g]
        traj = Trajectory(
            spec=spec, gamma=float(gammas[g]), times=times.copy(), states=states, step=h,
            max_site_populations=max_pop[:, g].copy(),
            diagnostics={
                "nsteps": nsteps,
                "max_trace_deviation": float(trace_dev[g]),
                "log_trace_correction": float(log_trace[g]),
                "trace_fail_step": int(trace_fail[g]),
                "max_purity_increase": float(purity_inc[g]),
                "purity_fail_step": int(purity_fail[g]),
            },
        )
        if check:
            traj.check_invariants()
        out.append(traj)
    return out


def evolve(spec: ChainSpec, schedule: PulseSchedule, rho0: np.ndarray, gamma: float,
           cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate one trajectory; ``cfg.method`` selects RK4 or the expm oracle."""
    cfg = cfg or IntegratorConfig()
    if cfg.method == "oracle_expm":
        substeps = int(cfg.step) if cfg.step is not None else 50
        return propagate_oracle(spec, schedule, rho0, gamma, substeps, cfg.oracle_samples,
                                record_every=cfg.record_every or 1)
    return evolve_ensemble(spec, schedule, rho0, [gamma], cfg=cfg)[0]


# ---------------------------------------------------------------- oracle

def liouvillian(H: np.ndarray, gamma: float, mask: np.ndarray) -> np.ndarray:
    """Generator acting on row-major vec(rho); batched over leading axes of H."""
    d = H.shape[-1]
    eye = np.eye(d)
    left = np.einsum("...ij,ab->...iajb", H, eye).reshape(H.shape[:-2] + (d * d, d * d))
    right = np.einsum("ij,...ba->...iajb", eye, H).reshape(H.shape[:-2] + (d * d, d * d))
    return -1j * (left - right) - gamma * np.diag(mask.reshape(-1))


def propagate_oracle(spec: ChainSpec, schedule: PulseSchedule, rho0: np.ndarray, gamma: float,
                     substeps: int, n_samples: int = 200, record_every: int = 1) -> Trajectory:
    """Piecewise-constant propagation with exact exponentials of the generator.

    The interval is cut into ``n_samples * substeps`` equal pieces; on each, H
    is frozen at the midpoint and vec(rho) is multiplied by expm(L h), computed
    by scaling and squaring on the full d^2 x d^2 superoperator.
    """
    if substeps < MIN_ORACLE_SUBSTEPS:
        raise ValueError(f"oracle needs >= {MIN_ORACLE_SUBSTEPS} substeps per sample, got {substeps}")
    if gamma < 0:
        raise ValueError(f"dephasing rate must be non-negative, got {gamma}")
    if schedule.n_links != spec.n_links:
        raise ValueError(f"schedule has {schedule.n_links} links, chain has {spec.n_links}")
    d = spec.dim
    rho0 = _as_batch(rho0, d)[0]
    mask = dephasing_mask(spec)
    total = n_samples * substeps
    h = schedule.t_max / total
    chunk = max(1, (1 << 26) // (16 * d ** 4))

    vec = rho0.reshape(-1).copy()
    times = [0.0]
    states = [rho0.copy()]
    for start in range(0, total, chunk):
        k = np.arange(start, min(total, start + chunk))
        H = hamiltonian(spec, schedule.amplitudes((k + 0.5) * h))
        U = expm(liouvillian(H, gamma, mask) * h)
        for j, kk in enumerate(k):
            vec = U[j] @ vec
            done = kk + 1
            if done % substeps == 0 and ((done // substeps) % record_every == 0 or done == total):
                times.append(done * h)
                states.append(vec.reshape(d, d).copy())
    times = np.array(times)
    times[-1] = schedule.t_max
    traj = Trajectory(spec=spec, gamma=float(gamma), times=times, states=np.array(states), step=h,
                      diagnostics={"substeps": substeps, "n_samples": n_samples})
    traj.check_invariants()
    return traj
