import cmath
import math

import numpy as np
import pytest

from ctapsim.chain import uniform_chain
from ctapsim.dynamics import IntegratorConfig
from ctapsim.errors import ConfigError
from ctapsim.experiments import (DisorderConfig, SweepConfig, compare_orderings,
                                 disorder_monte_carlo, run_transport, simulate_transport,
                                 sweep_error_surface)
from ctapsim.pulses import zero_schedule

OMEGA = 20 * math.pi
H = 2 ** -0.5


def test_adiabatic_ctap3_run():
    res = run_transport(SweepConfig())
    assert res.transfer_error < 1e-3
    assert res.max_mid_population < 0.01
    assert res.adiabatic
    assert res.spin_phase is None


def test_spin_phase_preserved():
    cfg = SweepConfig(spin_mode="site_spin", alpha=H, beta=1j * H)
    res = run_transport(cfg)
    assert res.transfer_error < 1e-3
    assert res.initial_spin_phase == pytest.approx(-math.pi / 2)
    assert abs(cmath.phase(cmath.exp(1j * (res.spin_phase - res.initial_spin_phase)))) < 1e-3


def test_identity_schedule_never_moves():
    chain = uniform_chain(3, OMEGA, "site_spin")
    res = simulate_transport(chain, zero_schedule(2, 10.0), 0.0, H, H)
    assert res.transfer_error == 1.0
    assert res.max_adiabaticity == math.inf
    assert not res.adiabatic


def test_oracle_method_run():
    cfg = SweepConfig(t_max_grid=(2.0,), gamma_grid=(0.5,),
                      integrator=IntegratorConfig(method="oracle_expm", step=20, oracle_samples=100))
    ref = run_transport(SweepConfig(t_max_grid=(2.0,), gamma_grid=(0.5,)))
    res = run_transport(cfg)
    assert abs(res.transfer_error - ref.transfer_error) < 1e-6


def test_run_needs_single_point():
    with pytest.raises(ConfigError):
        run_transport(SweepConfig(gamma_grid=(0.0, 1.0)))


@pytest.mark.parametrize("kw", [
    dict(scheme="ctap4"), dict(scheme="ctapn", n_sites=4), dict(scheme="ctap3", n_sites=5),
    dict(gamma_grid=()), dict(gamma_grid=(0.1, 0.1)), dict(gamma_grid=(-1.0, 0.0)),
    dict(t_max_grid=(0.0,)), dict(alpha=1.0, beta=0.1), dict(straddle_ratio=0.5),
    dict(omega_max=0.0), dict(envelope="box"), dict(spin_mode="quantum"),
])
def test_sweep_config_validation(kw):
    with pytest.raises(ConfigError):
        SweepConfig(**kw)


def small_sweep(**kw):
    base = dict(scheme="ctapn", n_sites=5, omega_max=10.0, gamma_grid=(0.0, 0.1, 1.0),
                t_max_grid=(2.0, 4.0), adiabaticity_samples=200)
    base.update(kw)
    return SweepConfig(**base)


def test_sweep_ordering_and_completeness():
    cfg = small_sweep()
    seen = []
    res = sweep_error_surface(cfg, threads=2, on_record=seen.append)
    assert len(res.records) == 6
    assert seen == res.records
    assert [(r.gamma, r.t_max) for r in res.records] == [
        (g, t) for g in cfg.gamma_grid for t in cfg.t_max_grid]
    assert all(0 <= r.error <= 1 for r in res.records)
    assert res.metadata["scheme"] == "ctapn" and res.metadata["version"] == "0.1.0"
    err = res.grid("error")
    assert err.shape == (3, 2)
    assert np.all(np.diff(err, axis=0) > 0)


def test_sweep_is_deterministic_across_threads():
    cfg = small_sweep()
    a = sweep_error_surface(cfg, threads=1)
    b = sweep_error_surface(cfg, threads=3)
    assert a.records == b.records


def test_sweep_failure_rows():
    # a fixed step that is too coarse for the short column only
    cfg = small_sweep(t_max_grid=(0.5, 4.0), integrator=IntegratorConfig(step=2e-4))
    res = sweep_error_surface(cfg, threads=1)
    bad = [r for r in res.records if r.t_max == 0.5]
    good = [r for r in res.records if r.t_max == 4.0]
    assert all(math.isnan(r.error) and "bound" in r.failure for r in bad)
    assert all(r.failure is None and r.error < 1 for r in good)
    assert len(res.failures) == 3


def test_intuitive_gets_finer_step():
    from ctapsim.experiments import integrator_for
    from ctapsim.pulses import ctap3_schedule, intuitive3_schedule
    s = intuitive3_schedule(OMEGA, 80.0)
    assert integrator_for(s, None).step == pytest.approx(0.5 * 0.01 / OMEGA)
    assert integrator_for(ctap3_schedule(OMEGA, 80.0), None).step is None
    assert integrator_for(s, IntegratorConfig(step=1e-5)).step == 1e-5


def test_compare_orderings_zero_coupling():
    comp = compare_orderings(0.0, 5.0, 0.0)
    assert comp.ctap3.transfer_error == 1.0
    assert comp.intuitive3.transfer_error == 1.0


def test_compare_orderings_site2():
    comp = compare_orderings(OMEGA, 40.0, 0.0)
    assert comp.ctap3.max_mid_population < 0.01
    assert comp.intuitive3.max_mid_population > 0.1
    d = comp.as_dict()
    assert set(d) == {"ctap3_error", "intuitive3_error", "ctap3_max_site2", "intuitive3_max_site2"}


def disorder(sigma, trials, seed=3):
    base = SweepConfig(scheme="ctapn", n_sites=5, omega_max=10.0, t_max_grid=(3.0,),
                       adiabaticity_samples=200)
    return DisorderConfig(sigma=sigma, trials=trials, seed=seed, base=base)


def test_disorder_sigma_zero_identical():
    res = disorder_monte_carlo(disorder(0.0, 4))
    errs = res.errors
    assert np.all(errs == errs[0])
    assert all(t.factors == (1.0,) * 4 for t in res.trials)
    assert res.std == 0.0


def test_disorder_single_trial_std():
    assert disorder_monte_carlo(disorder(0.2, 1)).std == 0.0


def test_disorder_deterministic_and_batch_independent():
    cfg = disorder(0.3, 5)
    a = disorder_monte_carlo(cfg, batch_size=5)
    b = disorder_monte_carlo(cfg, batch_size=2, threads=2)
    assert a.trials == b.trials
    assert (a.mean, a.max, a.std) == (b.mean, b.max, b.std)
    other = disorder_monte_carlo(disorder(0.3, 5, seed=4))
    assert other.trials[0].factors != a.trials[0].factors


def test_disorder_factor_range():
    cfg = disorder(0.2, 50)
    f = np.array([cfg.link_factors(k) for k in range(50)])
    assert f.min() >= 0.8 and f.max() <= 1.2
    assert np.array_equal(cfg.link_factors(7), cfg.link_factors(7))


@pytest.mark.parametrize("kw", [dict(sigma=-0.1), dict(sigma=1.0), dict(trials=0)])
def test_disorder_validation(kw):
    args = dict(sigma=0.1, trials=2, seed=0, base=SweepConfig())
    args.update(kw)
    with pytest.raises(ConfigError):
        DisorderConfig(**args)
