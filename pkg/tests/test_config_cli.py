import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctapsim import __version__
from ctapsim.cli import main
from ctapsim.config import (config_from_dict, config_to_dict, parse_config, parse_text,
                            serialize)
from ctapsim.errors import ConfigError
from ctapsim.report import read_sweep_csv


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return p


def test_minimal_run_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, {"kind": "run", "scheme": "ctap3", "t_max_ns": 80}))
    sw = cfg.sweep
    assert sw.omega_max == 20 * math.pi
    assert sw.straddle_ratio == 3.0
    assert sw.gamma_grid == (0.0,) and sw.t_max_grid == (80.0,)
    assert sw.integrator.method == "rk4_fixed" and sw.integrator.step is None
    assert sw.schedule(80.0).link_waveforms[0].width == 10.0
    assert cfg.plot is False and cfg.output_dir == "."


def test_even_ctapn_rejected():
    with pytest.raises(ConfigError, match="n_sites.*odd"):
        config_from_dict({"kind": "run", "scheme": "ctapn", "n_sites": 4})


def test_sweep_plan_size():
    cfg = config_from_dict({"kind": "sweep", "scheme": "ctapn", "n_sites": 7,
                            "gamma_grid": {"start": 0, "stop": 1, "num": 20},
                            "t_max_grid": {"start": 10, "stop": 100, "num": 30, "scale": "log"}})
    assert cfg.n_points == 600


@pytest.mark.parametrize("obj, where", [
    ({"kind": "run", "gama": 0.1}, "gama"),
    ({"kind": "run", "integrator": {"metod": "rk4_fixed"}}, "integrator.metod"),
    ({"kind": "run", "integrator": {"step": -1}}, "integrator"),
    ({"kind": "run", "t_max_ns": "80"}, "t_max_ns"),
    ({"kind": "run", "alpha": [1, 0, 0]}, "alpha"),
    ({"kind": "sweep", "gamma_grid": [0, 1]}, "t_max_grid"),
    ({"kind": "sweep", "gamma_grid": [1, 0], "t_max_grid": [1]}, "gamma_grid"),
    ({"kind": "sweep", "gamma_grid": {"start": 0, "stop": 1}, "t_max_grid": [1]}, "gamma_grid.num"),
    ({"kind": "disorder"}, "sigma"),
    ({"kind": "disorder", "sigma": 0.1, "trials": 0}, "trials"),
    ({"kind": "run", "gamma_grid": [0]}, "gamma_grid"),
    ({"kind": "explode"}, "kind"),
    ({"scheme": "ctap3"}, "kind"),
    ({"kind": "run", "seed": -1}, "seed"),
    ({"kind": "compare", "scheme": "ctapn"}, "scheme"),
    ({"kind": "run", "plot": 1}, "plot"),
])
def test_schema_errors_name_the_field(obj, where):
    with pytest.raises(ConfigError) as info:
        config_from_dict(obj)
    assert str(info.value).startswith(where)


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="no such file"):
        parse_config(tmp_path / "missing.json")
    with pytest.raises(ConfigError, match="malformed JSON"):
        parse_config(write(tmp_path, "{oops"))
    with pytest.raises(ConfigError, match="top level"):
        parse_text("[1, 2]")


cfg_dicts = st.one_of(
    st.fixed_dictionaries({
        "kind": st.just("run"),
        "t_max_ns": st.floats(0.1, 1e3),
        "gamma": st.floats(0, 10),
        "omega_max": st.floats(0.1, 1e3),
        "spin_mode": st.sampled_from(["charge_only", "site_spin"]),
        "trajectory_adiabaticity": st.booleans(),
    }),
    st.fixed_dictionaries({
        "kind": st.just("sweep"),
        "scheme": st.just("ctapn"),
        "n_sites": st.sampled_from([5, 7, 9]),
        "straddle_ratio": st.floats(1, 10),
        "envelope": st.sampled_from(["gaussian", "constant"]),
        "gamma_grid": st.lists(st.floats(0, 10), min_size=1, max_size=5, unique=True).map(sorted),
        "t_max_grid": st.lists(st.floats(0.1, 500), min_size=1, max_size=5, unique=True).map(sorted),
        "seed": st.integers(0, 2**64 - 1),
        "integrator": st.fixed_dictionaries({"step": st.floats(1e-6, 1e-3),
                                             "record_every": st.integers(1, 50)}),
    }),
    st.fixed_dictionaries({
        "kind": st.just("disorder"),
        "sigma": st.floats(0, 0.99),
        "trials": st.integers(1, 1000),
        "alpha": st.just([0.6, 0.0]),
        "beta": st.just([0.0, 0.8]),
        "output_dir": st.text("abc/", min_size=1, max_size=8),
    }),
)


@settings(max_examples=80, deadline=None)
@given(cfg_dicts)
def test_round_trip(obj):
    cfg = config_from_dict(obj)
    text = serialize(cfg)
    again = parse_text(text)
    assert again == cfg
    assert serialize(again) == text
    assert config_to_dict(again) == json.loads(text)


# ---------------------------------------------------------------- cli


def test_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == f"ctapsim {__version__}"


def test_darkstate(capsys):
    assert main(["darkstate", "--o12", "3", "--o23", "4", "--delta", "0"]) == 0
    out = capsys.readouterr().out
    assert "theta1=0.6435011088" in out
    assert "D0=(0.8, 0, -0.6)" in out
    assert "E+=5" in out.replace("E+=5.0", "E+=5")


def test_unknown_subcommand(capsys):
    assert main(["launch"]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error: code=2")


def test_config_error_exit(tmp_path, capsys):
    p = write(tmp_path, {"kind": "run", "scheme": "ctapn", "n_sites": 4})
    assert main(["run", "-c", str(p)]) == 3
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "kind=config" in err[0] and "n_sites" in err[0]


def test_kind_mismatch(tmp_path):
    p = write(tmp_path, {"kind": "run"})
    assert main(["sweep", "-c", str(p)]) == 3


def test_degenerate_darkstate_is_runtime_error(capsys):
    assert main(["darkstate", "--o12", "0", "--o23", "0"]) == 4
    assert "DegenerateSpectrumError" in capsys.readouterr().err


def test_run_writes_csv(tmp_path, capsys):
    p = write(tmp_path, {"kind": "run", "t_max_ns": 2.0, "trajectory_adiabaticity": True})
    out = tmp_path / "o"
    assert main(["run", "-c", str(p), "--out", str(out)]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("error=")
    text = (out / "trajectory.csv").read_text().splitlines()
    assert text[0].startswith("# ctapsim")
    assert any(t.startswith("# config=") for t in text)
    header = next(t for t in text if not t.startswith("#"))
    assert header == "t,p1,p2,p3,purity,adiabaticity"
    # echoed config re-runs the same experiment
    echo = json.loads(next(t for t in text if t.startswith("# config="))[len("# config="):])
    assert config_from_dict(echo).sweep == parse_config(p).sweep


def test_sweep_plot_is_additive(tmp_path, capsys):
    cfg = {"kind": "sweep", "scheme": "ctapn", "n_sites": 5, "omega_max": 10.0,
           "gamma_grid": [0.0, 0.5], "t_max_grid": [2.0, 3.0], "adiabaticity_samples": 200}
    p = write(tmp_path, cfg)
    out = tmp_path / "s"
    assert main(["sweep", "-c", str(p), "--out", str(out), "--threads", "2"]) == 0
    first = (out / "sweep.csv").read_bytes()
    assert not (out / "sweep.svg").exists()
    assert main(["sweep", "-c", str(p), "--out", str(out), "--plot", "--threads", "1"]) == 0
    assert (out / "sweep.csv").read_bytes() == first
    svg = (out / "sweep.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg
    cols = read_sweep_csv(out / "sweep.csv")
    assert list(cols) == ["gamma", "t_max", "error", "max_mid_pop", "max_adiab", "adiabatic_flag"]
    assert list(cols["gamma"]) == [0.0, 0.0, 0.5, 0.5]
    assert "[4/4]" in capsys.readouterr().err


def test_seed_override_and_env_threads(tmp_path, monkeypatch, capsys):
    cfg = {"kind": "disorder", "scheme": "ctapn", "n_sites": 5, "omega_max": 10.0,
           "t_max_ns": 2.0, "sigma": 0.2, "trials": 3, "seed": 1, "adiabaticity_samples": 200}
    p = write(tmp_path, cfg)
    monkeypatch.setenv("CTAP_SIM_THREADS", "2")
    assert main(["disorder", "-c", str(p), "--out", str(tmp_path / "a")]) == 0
    assert main(["disorder", "-c", str(p), "--out", str(tmp_path / "b"), "--seed", "9",
                 "--plot"]) == 0
    a = (tmp_path / "a" / "disorder.csv").read_text()
    b = (tmp_path / "b" / "disorder.csv").read_text()
    assert "# seed=1" in a and "# seed=9" in b
    assert a.splitlines()[-1] != b.splitlines()[-1]
    assert (tmp_path / "b" / "disorder.svg").exists()


def test_compare_and_spectra(tmp_path, capsys):
    p = write(tmp_path, {"kind": "compare", "t_max_ns": 5.0, "gamma": 0.02})
    assert main(["compare", "-c", str(p), "--out", str(tmp_path), "--plot"]) == 0
    assert "ctap3_error=" in capsys.readouterr().out
    rows = (tmp_path / "compare.csv").read_text().splitlines()
    assert rows[-2].startswith("ctap3,") and rows[-1].startswith("intuitive3,")
    p = write(tmp_path, {"kind": "spectra", "scheme": "ctapn", "n_sites": 5, "t_max_ns": 40.0},
              "sp.json")
    assert main(["spectra", "-c", str(p), "--out", str(tmp_path), "--plot"]) == 0
    assert (tmp_path / "spectra.svg").exists()
    header = [r for r in (tmp_path / "spectra.csv").read_text().splitlines()
              if not r.startswith("#")][0]
    assert header.startswith("t,omega1,omega2,omega3,omega4,e1,")
