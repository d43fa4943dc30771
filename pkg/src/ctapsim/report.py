"""CSV writers and static SVG figures for experiment results.

Every CSV starts with ``#`` comment lines: tool version, experiment summary
and the full JSON config, which is enough to re-run it.  Floats are written
with 17 significant digits so values round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .experiments import GEOMETRY_NOTE, ADIABATIC_THRESHOLD, SweepRecord

SWEEP_HEADER = ("gamma", "t_max", "error", "max_mid_pop", "max_adiab", "adiabatic_flag")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def metadata_lines(config_dict: dict, extra: dict | None = None) -> list[str]:
    sw = config_dict
    lines = [
        f"# ctapsim {__version__}",
        f"# kind={sw['kind']}",
        f"# scheme={sw['scheme']}",
        f"# n_sites={sw['n_sites']}",
        f"# omega_max={fmt(sw['omega_max'])}",
        f"# seed={sw['seed']}",
        f"# version={__version__}",
        f"# geometry={GEOMETRY_NOTE}",
    ]
    for key, value in (extra or {}).items():
        lines.append(f"# {key}={value}")
    lines.append("# config=" + json.dumps(config_dict, sort_keys=True))
    return lines


def _row(values: Iterable) -> str:
    return ",".join(fmt(v) for v in values)


class SweepWriter:
    """Appends sweep records to a CSV as they arrive (callers pass them in order)."""

    def __init__(self, stream: io.TextIOBase, config_dict: dict):
        self.stream = stream
        for line in metadata_lines(config_dict):
            stream.write(line + "\n")
        stream.write(",".join(SWEEP_HEADER) + "\n")
        stream.flush()

    def __call__(self, rec: SweepRecord) -> None:
        if rec.failure is not None:
            # NaN sentinel row, preceded by the reason
            msg = rec.failure.replace("\n", " ")
            self.stream.write(f"# failed gamma={fmt(rec.gamma)} t_max={fmt(rec.t_max)}: {msg}\n")
        self.stream.write(_row((rec.gamma, rec.t_max, rec.error, rec.max_mid_pop, rec.max_adiab,
                                rec.adiabatic)) + "\n")
        self.stream.flush()


def read_sweep_csv(path) -> dict:
    """Columns of a sweep CSV as float arrays keyed by header name."""
    with open(path, newline="") as f:
        rows = list(csv.reader(line for line in f if not line.startswith("#")))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def write_trajectory_csv(path, run, config_dict: dict, adiabaticity=None) -> None:
    traj = run.trajectory
    pops = traj.populations
    pur = traj.purity
    n = pops.shape[1]
    header = ["t"] + [f"p{k}" for k in range(1, n + 1)] + ["purity"]
    if adiabaticity is not None:
        header.append("adiabaticity")
    extra = {"error": fmt(run.transfer_error), "max_mid_pop": fmt(run.max_mid_population),
             "max_adiab": fmt(run.max_adiabaticity)}
    if run.spin_phase is not None:
        extra["spin_phase"] = fmt(run.spin_phase)
        extra["initial_spin_phase"] = fmt(run.initial_spin_phase)
    with open(path, "w") as f:
        f.write("\n".join(metadata_lines(config_dict, extra)) + "\n")
        f.write(",".join(header) + "\n")
        for k, t in enumerate(traj.times):
            row = [t, *pops[k], pur[k]]
            if adiabaticity is not None:
                row.append(adiabaticity[k])
            f.write(_row(row) + "\n")


def write_disorder_csv(path, result, config_dict: dict) -> None:
    n_links = len(result.trials[0].factors)
    header = (["trial"] + [f"factor{k}" for k in range(1, n_links + 1)]
              + ["error", "max_mid_pop", "max_adiab", "adiabatic_flag"])
    extra = {"mean_error": fmt(result.mean), "max_error": fmt(result.max),
             "std_error": fmt(result.std)}
    with open(path, "w") as f:
        f.write("\n".join(metadata_lines(config_dict, extra)) + "\n")
        f.write(",".join(header) + "\n")
        for tr in result.trials:
            if tr.failure is not None:
                f.write(f"# failed trial={tr.trial}: {tr.failure}\n")
            f.write(_row([tr.trial, *tr.factors, tr.error, tr.max_mid_pop, tr.max_adiab,
                          tr.max_adiab < ADIABATIC_THRESHOLD]) + "\n")


def write_compare_csv(path, comparison, config_dict: dict) -> None:
    with open(path, "w") as f:
        f.write("\n".join(metadata_lines(config_dict)) + "\n")
        f.write("ordering,error,max_mid_pop,max_adiab,adiabatic_flag\n")
        for name in ("ctap3", "intuitive3"):
            r = getattr(comparison, name)
            f.write(name + "," + _row((r.transfer_error, r.max_mid_population,
                                       r.max_adiabaticity, r.adiabatic)) + "\n")


def write_spectra_csv(path, times, amplitudes, energies, metric, config_dict: dict) -> None:
    n_links = amplitudes.shape[1]
    header = (["t"] + [f"omega{k}" for k in range(1, n_links + 1)]
              + [f"e{k}" for k in range(1, energies.shape[1] + 1)] + ["adiabaticity"])
    with open(path, "w") as f:
        f.write("\n".join(metadata_lines(config_dict, {"max_adiab": fmt(np.max(metric))})) + "\n")
        f.write(",".join(header) + "\n")
        for k, t in enumerate(times):
            f.write(_row([t, *amplitudes[k], *energies[k], metric[k]]) + "\n")


# ---------------------------------------------------------------- figures

def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    # reproducible SVG output
    matplotlib.rcParams["svg.hashsalt"] = "ctapsim"
    return plt


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    fig.clear()
    import matplotlib.pyplot as plt
    plt.close(fig)


def plot_sweep(path, result) -> None:
    """One error-versus-t_max curve per dephasing rate."""
    plt = _pyplot()
    err = result.grid("error")
    t = np.array(result.config.t_max_grid)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for i, g in enumerate(result.config.gamma_grid):
        ax.plot(t, np.clip(err[i], 1e-16, None), marker="o", ms=3, label=f"Γ = {g:.3g} rad/ns")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("total transfer time t_max (ns)")
    ax.set_ylabel("transfer error")
    ax.set_title(f"{result.config.scheme} n={result.config.n_sites}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)


def plot_trajectory(path, run) -> None:
    plt = _pyplot()
    traj = run.trajectory
    fig, ax = plt.subplots(figsize=(6, 4))
    for k in range(traj.populations.shape[1]):
        ax.plot(traj.times, traj.populations[:, k], label=f"site {k + 1}")
    ax.set_xlabel("t (ns)")
    ax.set_ylabel("population")
    ax.set_title(f"Γ = {run.gamma:.3g} rad/ns, error = {run.transfer_error:.3g}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_compare(path, comparison) -> None:
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharey=True)
    for ax, name in zip(axes, ("ctap3", "intuitive3")):
        traj = getattr(comparison, name).trajectory
        for k in range(traj.populations.shape[1]):
            ax.plot(traj.times, traj.populations[:, k], label=f"site {k + 1}")
        ax.set_title(name)
        ax.set_xlabel("t (ns)")
    axes[0].set_ylabel("population")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_disorder(path, result) -> None:
    plt = _pyplot()
    err = result.errors[np.isfinite(result.errors)]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(np.log10(np.clip(err, 1e-16, None)), bins=20)
    ax.set_xlabel("log10 transfer error")
    ax.set_ylabel("trials")
    ax.set_title(f"σ = {result.config.sigma:g}, {result.config.trials} trials")
    fig.tight_layout()
    _save(fig, path)


def plot_spectra(path, times, energies, metric) -> None:
    plt = _pyplot()
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    a1.plot(times, energies)
    a1.set_ylabel("energy (rad/ns)")
    a2.semilogy(times, metric)
    a2.axhline(ADIABATIC_THRESHOLD, color="k", lw=0.8, ls="--")
    a2.set_ylabel("adiabaticity metric")
    a2.set_xlabel("t (ns)")
    fig.tight_layout()
    _save(fig, path)


def ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
