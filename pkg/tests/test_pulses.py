import math

import numpy as np
import pytest

from ctapsim.errors import ScheduleError
from ctapsim.pulses import (ctap3_schedule, ctap_timing, ctapn_schedule, gaussian_waveform,
                            intuitive3_schedule, sample_schedule, zero_schedule)

OMEGA = 20 * math.pi


def test_gaussian_values():
    g = gaussian_waveform(2.0, 5.0, 1.5)
    assert g(5.0) == 2.0
    assert g(6.5) == pytest.approx(2.0 * math.exp(-0.5), rel=1e-15)
    assert g(5.0 - 6.0) == pytest.approx(2.0 * math.exp(-8), rel=1e-14)
    with pytest.raises(ScheduleError):
        gaussian_waveform(1.0, 0.0, 0.0)
    with pytest.raises(ScheduleError):
        gaussian_waveform(-1.0, 0.0, 1.0)


def test_ctap3_timing_80ns():
    w, early, late = ctap_timing(80.0)
    assert (w, early, late) == (10.0, 35.0, 45.0)
    s = ctap3_schedule(OMEGA, 80.0)
    o12, o23 = s.link_waveforms
    assert (o12.center, o23.center, o12.width, o23.width) == (45.0, 35.0, 10.0, 10.0)
    assert sample_schedule(s, 45.0)[0] == OMEGA
    assert s.label == "ctap3"


@pytest.mark.parametrize("t_max", [1e-3, 0.7, 80.0, 1234.5])
def test_counter_intuitive_order_and_separation(t_max):
    o12, o23 = ctap3_schedule(1.0, t_max).link_waveforms
    assert o23.center < o12.center
    assert o12.center - o23.center == pytest.approx(t_max / 8, rel=1e-15)


def test_intuitive_is_mirror():
    s = intuitive3_schedule(OMEGA, 80.0)
    assert s.label == "intuitive3"
    assert [w.center for w in s.link_waveforms] == [35.0, 45.0]
    assert sample_schedule(s, 35.0)[0] == OMEGA


def test_boundary_tails():
    # frozen from the pulse formula: link (2,3) is 3.5 w from t=0, link (1,2) 4.5 w
    amps = sample_schedule(ctap3_schedule(OMEGA, 80.0), 0.0)
    assert amps[0] == pytest.approx(OMEGA * math.exp(-10.125), rel=1e-13)
    assert amps[1] == pytest.approx(OMEGA * math.exp(-6.125), rel=1e-13)
    assert amps[0] < OMEGA * math.exp(-8)


def test_midpoint_crossing():
    amps = sample_schedule(ctap3_schedule(OMEGA, 80.0), 40.0)
    assert amps == pytest.approx([OMEGA * math.exp(-1 / 8)] * 2, rel=1e-14)


def test_time_reversal_symmetry():
    s = ctap3_schedule(3.0, 17.0)
    t = np.linspace(0, 17.0, 101)
    fwd = s.amplitudes(t)
    rev = s.amplitudes(17.0 - t)[:, ::-1]
    assert np.allclose(fwd, rev, rtol=1e-13, atol=0)


def test_sample_range_and_zero():
    s = zero_schedule(4, 10.0)
    assert list(sample_schedule(s, 3.0)) == [0.0] * 4
    with pytest.raises(ScheduleError):
        sample_schedule(s, 10.5)
    with pytest.raises(ScheduleError):
        sample_schedule(s, -1e-9)


def test_ctapn_straddle():
    s = ctapn_schedule(5, OMEGA, 80.0)
    end1, a, b, end2 = s.link_waveforms
    assert a == b
    assert (a.amplitude, a.center, a.width) == (3 * OMEGA, 40.0, 20.0)
    assert (end1.center, end2.center) == (45.0, 35.0)
    assert s.label == "ctapn_straddle"
    t = np.linspace(0, 80, 33)
    amps = s.amplitudes(t)
    assert np.array_equal(amps[:, 1], amps[:, 2])
    s9 = ctapn_schedule(9, OMEGA, 80.0, envelope="constant")
    assert s9.n_links == 8
    assert len(set(s9.link_waveforms[1:-1])) == 1
    assert sample_schedule(s9, 0.0)[3] == 3 * OMEGA


@pytest.mark.parametrize("n", [3, 4, 6])
def test_ctapn_rejects_bad_sizes(n):
    with pytest.raises(ScheduleError):
        ctapn_schedule(n, 1.0, 10.0)


def test_ctapn_rejects_bad_ratio():
    with pytest.raises(ScheduleError):
        ctapn_schedule(5, 1.0, 10.0, straddle_ratio=0.5)
    with pytest.raises(ScheduleError):
        ctapn_schedule(5, 1.0, 10.0, envelope="square")


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_ctap3_rejects_bad_inputs(bad):
    with pytest.raises(ScheduleError):
        ctap3_schedule(bad, 10.0)
    with pytest.raises(ScheduleError):
        ctap3_schedule(1.0, bad)


def test_scaled_multiplies_pointwise():
    s = ctapn_schedule(5, 2.0, 10.0)
    f = [0.9, 1.1, 1.0, 1.2]
    t = np.linspace(0, 10, 7)
    assert np.allclose(s.scaled(f).amplitudes(t), s.amplitudes(t) * f, rtol=1e-15)
    with pytest.raises(ScheduleError):
        s.scaled([1.0])
