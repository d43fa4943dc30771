"""``sim`` command line: run experiments from JSON configs, write CSV (and SVG)."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from . import report
from .config import ExperimentConfig, config_to_dict, parse_config
from .errors import ConfigError, CtapError
from .experiments import (compare_orderings, disorder_monte_carlo, resolve_threads, run_transport,
                          sweep_error_surface)
from .hamiltonian import charge_hamiltonian
from .spectra import adiabaticity_profile, analytic_ctap3_states

EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # one-line errors instead of argparse's usage dump
    def error(self, message):
        raise _UsageError(message)


def _fail(code: int, kind: str, message) -> int:
    text = " ".join(str(message).split())
    print(f"error: code={code} kind={kind} message={text}", file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", required=True, metavar="PATH", help="JSON experiment config")
    common.add_argument("--plot", action="store_true", help="also write SVG figures")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    common.add_argument("--seed", type=int, metavar="N", help="overrides the config seed")
    common.add_argument("--threads", type=int, metavar="N",
                        help="worker threads, 0 = auto (fallback: CTAP_SIM_THREADS)")

    p = _Parser(prog="sim", description="CTAP transport simulations on donor chains.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("run", parents=[common], help="single transport run, trajectory CSV")
    sub.add_parser("sweep", parents=[common], help="error surface over (gamma, t_max)")
    sub.add_parser("disorder", parents=[common], help="tunnelling-rate disorder Monte Carlo")
    sub.add_parser("compare", parents=[common], help="counter-intuitive vs intuitive ordering")
    sub.add_parser("spectra", parents=[common], help="instantaneous spectrum and adiabaticity")
    ds = sub.add_parser("darkstate", help="closed-form three-site dressed states")
    ds.add_argument("--o12", type=float, required=True, help="tunnelling rate 1-2 (rad/ns)")
    ds.add_argument("--o23", type=float, required=True, help="tunnelling rate 2-3 (rad/ns)")
    ds.add_argument("--delta", type=float, default=0.0, help="middle-site detuning (rad/ns)")
    sub.add_parser("version", help="print the version")
    return p


def _vec(v) -> str:
    return "(" + ", ".join(f"{x:.10g}" for x in np.asarray(v, dtype=float)) + ")"


def cmd_darkstate(args) -> int:
    st = analytic_ctap3_states(args.o12, args.o23, args.delta)
    print(f"theta1={st.theta1:.10g}")
    print(f"theta2={st.theta2:.10g}")
    print(f"D+={_vec(st.d_plus)} E+={st.e_plus:.10g}")
    print(f"D0={_vec(st.d_zero)} E0={st.e_zero:.10g}")
    print(f"D-={_vec(st.d_minus)} E-={st.e_minus:.10g}")
    return 0


def _progress(done: int, total: int) -> None:
    print(f"[{done}/{total}]", file=sys.stderr)


def cmd_run(cfg: ExperimentConfig, out, cdict) -> int:
    run = run_transport(cfg.sweep)
    adiab = None
    if cfg.trajectory_adiabaticity:
        chain = cfg.sweep.chain()
        prof = adiabaticity_profile(chain, cfg.sweep.schedule(cfg.t_max),
                                    cfg.sweep.adiabaticity_samples)
        adiab = np.interp(run.trajectory.times, prof.times, prof.metric)
    report.write_trajectory_csv(out / "trajectory.csv", run, cdict, adiab)
    if cfg.plot:
        report.plot_trajectory(out / "trajectory.svg", run)
    line = (f"error={report.fmt(run.transfer_error)} max_mid_pop={report.fmt(run.max_mid_population)}"
            f" max_adiab={report.fmt(run.max_adiabaticity)}")
    if run.spin_phase is not None:
        line += f" spin_phase={report.fmt(run.spin_phase)}"
    print(line)
    return 0


def cmd_sweep(cfg: ExperimentConfig, out, cdict, threads) -> int:
    n_t = len(cfg.sweep.t_max_grid)
    n_g = len(cfg.sweep.gamma_grid)
    with open(out / "sweep.csv", "w") as f:
        writer = report.SweepWriter(f, cdict)
        result = sweep_error_surface(
            cfg.sweep, threads=threads, on_record=writer,
            progress=lambda done, total: _progress(done * n_g, n_t * n_g))
    if cfg.plot:
        report.plot_sweep(out / "sweep.svg", result)
    print(f"points={len(result.records)} failed={len(result.failures)}")
    return 0


def cmd_disorder(cfg: ExperimentConfig, out, cdict, threads) -> int:
    result = disorder_monte_carlo(cfg.disorder(), threads=threads)
    report.write_disorder_csv(out / "disorder.csv", result, cdict)
    if cfg.plot:
        report.plot_disorder(out / "disorder.svg", result)
    print(f"mean={report.fmt(result.mean)} max={report.fmt(result.max)} std={report.fmt(result.std)}")
    return 0


def cmd_compare(cfg: ExperimentConfig, out, cdict) -> int:
    sw = cfg.sweep
    comp = compare_orderings(sw.omega_max, cfg.t_max, cfg.gamma, sw.integrator,
                             sw.adiabaticity_samples)
    report.write_compare_csv(out / "compare.csv", comp, cdict)
    if cfg.plot:
        report.plot_compare(out / "compare.svg", comp)
    print(" ".join(f"{k}={report.fmt(v)}" for k, v in comp.as_dict().items()))
    return 0


def cmd_spectra(cfg: ExperimentConfig, out, cdict) -> int:
    sw = cfg.sweep
    chain = sw.chain().charge_view()
    sched = sw.schedule(cfg.t_max)
    prof = adiabaticity_profile(chain, sched, sw.adiabaticity_samples)
    amps = sched.amplitudes(prof.times)
    energies = np.linalg.eigvalsh(charge_hamiltonian(chain, amps))
    report.write_spectra_csv(out / "spectra.csv", prof.times, amps, energies, prof.metric, cdict)
    if cfg.plot:
        report.plot_spectra(out / "spectra.svg", prof.times, energies, prof.metric)
    print(f"max_adiab={report.fmt(prof.max_metric)} adiabatic={int(prof.is_adiabatic())}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except SystemExit as exc:      # --help
        return int(exc.code or 0)

    if args.command == "version":
        print(f"ctapsim {__version__}")
        return 0
    try:
        if args.command == "darkstate":
            return cmd_darkstate(args)
        cfg = parse_config(args.config).with_overrides(args.seed, args.out, args.plot)
        if args.command != cfg.kind:
            raise ConfigError(f"kind: config is a {cfg.kind!r} experiment, "
                              f"not {args.command!r}")
        if args.threads is not None and args.threads < 0:
            raise ConfigError("--threads: must be >= 0")
        threads = resolve_threads(args.threads)
        out = report.ensure_dir(cfg.output_dir)
        # the plot flag is left out of the echo so --plot never changes CSV bytes
        cdict = {k: v for k, v in config_to_dict(cfg).items() if k != "plot"}
        if cfg.kind == "run":
            return cmd_run(cfg, out, cdict)
        if cfg.kind == "sweep":
            return cmd_sweep(cfg, out, cdict, threads)
        if cfg.kind == "disorder":
            return cmd_disorder(cfg, out, cdict, threads)
        if cfg.kind == "compare":
            return cmd_compare(cfg, out, cdict)
        return cmd_spectra(cfg, out, cdict)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except (CtapError, ValueError) as exc:
        return _fail(EXIT_RUNTIME, type(exc).__name__, exc)
    except OSError as exc:
        return _fail(EXIT_RUNTIME, "io", exc)


if __name__ == "__main__":
    raise SystemExit(main())
