import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psnn.calibration import preset_rates, probe_input
from psnn.chatter import (
    DEFAULT_CHATTER,
    HIGH,
    LOW,
    MEDIUM,
    ChatterConstants,
    ExtendedParams,
    ExtendedState,
    PatternLabel,
    classify_pattern,
    constant_current,
    preset,
    simulate_extended,
    slow_rate,
    split_bursts,
    steady_rate,
    step_extended,
    switch_fraction,
)
from psnn.errors import DomainError, UnclassifiableError
from psnn.neuron import DEFAULT_DT, STANDARD, NeuronParams, photocurrent, run
from psnn.waveform import Waveform

I_IN = 0.2e-3
DURATION = 2e-6
SETTLE = 0.5e-6


@pytest.fixture(scope="module")
def rates():
    return preset_rates(amps=I_IN, duration=DURATION, settle=SETTLE)


@pytest.fixture(scope="module")
def chatter_spikes():
    return simulate_extended(constant_current(I_IN, DURATION), preset("Chattering")).spike_times


def test_uniform_100ns_isi_is_regular():
    assert classify_pattern(np.arange(20) * 100e-9) is PatternLabel.REGULAR


def test_uniform_10ns_isi_is_fast():
    assert classify_pattern(np.arange(50) * 10e-9) is PatternLabel.FAST


def test_bursts_of_five_are_chattering():
    bursts = [t0 + np.arange(5) * 10e-9 for t0 in np.arange(4) * 540e-9]
    s = np.concatenate(bursts)
    assert classify_pattern(s) is PatternLabel.CHATTERING
    assert [b.size for b in split_bursts(s)] == [5, 5, 5, 5]


def test_fewer_than_two_spikes_unclassifiable():
    with pytest.raises(UnclassifiableError):
        classify_pattern([1e-9])
    with pytest.raises(UnclassifiableError):
        classify_pattern([1e-9, 2e-9], window=(0.0, 1.5e-9))


@given(st.floats(2e-9, 500e-9), st.integers(3, 40))
def test_uniform_trains_never_chatter(isi, n):
    label = classify_pattern(np.arange(n) * isi)
    assert label is (PatternLabel.FAST if 1 / isi >= 50e6 else PatternLabel.REGULAR)


def test_preset_levels():
    r = preset("Regular")
    assert (r.base.v_th, r.base.v_leak_m, r.base.v_leak_r, r.base.v_p, r.v_c, r.v_sw) == (LOW,) * 6
    f = preset(PatternLabel.FAST)
    assert (f.base.v_th, f.base.v_leak_m, f.v_sw) == (HIGH, HIGH, HIGH)
    assert (f.base.v_leak_r, f.base.v_p, f.v_c) == (LOW, LOW, LOW)
    c = preset("Chattering")
    assert (c.base.v_th, c.base.v_p, c.v_c) == (MEDIUM, MEDIUM, MEDIUM)
    assert (c.base.v_leak_m, c.base.v_leak_r, c.v_sw) == (HIGH, HIGH, HIGH)


def test_preset_scales_with_vdd():
    assert preset("Fast", vdd=2.0).v_sw == pytest.approx(1.6)


def test_bias_outside_rail_rejected():
    with pytest.raises(DomainError):
        ExtendedParams(STANDARD, v_c=1.5)
    with pytest.raises(DomainError):
        ExtendedParams(STANDARD, v_sw=-0.1)


def test_params_dict_round_trip():
    p = preset("Chattering")
    d = p.as_dict()
    d["pattern"] = "Chattering"
    assert ExtendedParams.from_dict(d) == p


def test_constants_validated():
    with pytest.raises(DomainError):
        ChatterConstants(g_slow0=0.0)
    with pytest.raises(DomainError):
        ChatterConstants(switch_on=0.8, switch_full=0.5)


def test_switch_fraction_shape():
    assert switch_fraction(0.0, 1.0) == 0.0
    assert switch_fraction(LOW, 1.0) == 0.0
    assert switch_fraction(HIGH, 1.0) == 1.0
    xs = [switch_fraction(v, 1.0) for v in np.linspace(0, 1, 101)]
    assert all(a <= b for a, b in zip(xs, xs[1:]))


def test_slow_rate_falls_with_v_c():
    rs = [slow_rate(v, 1.0) for v in np.linspace(0, 1, 21)]
    assert rs[0] == pytest.approx(DEFAULT_CHATTER.slow_rate0)
    assert rs[-1] == 0.0
    assert all(a > b for a, b in zip(rs, rs[1:]))


@pytest.mark.parametrize("label", list(PatternLabel))
def test_zero_input_never_fires(label):
    tr = simulate_extended(constant_current(0.0, 1e-6), preset(label))
    assert tr.spike_times.size == 0
    assert not tr.v_slow_trace.samples.any()


def test_regular_near_10mhz(rates):
    rate, _ = rates[PatternLabel.REGULAR]
    assert 8e6 <= rate <= 12e6


def test_fast_near_100mhz(rates):
    rate, _ = rates[PatternLabel.FAST]
    assert 80e6 <= rate <= 120e6


@pytest.mark.parametrize("label", list(PatternLabel))
def test_each_preset_classifies_as_itself(rates, label):
    assert rates[label][1] is label


def test_fast_at_least_five_times_regular(rates):
    assert rates[PatternLabel.FAST][0] >= 5 * rates[PatternLabel.REGULAR][0]


def test_chattering_structure(chatter_spikes):
    bursts = split_bursts(chatter_spikes[chatter_spikes >= SETTLE])
    assert len(bursts) >= 2
    assert all(b.size >= 2 for b in bursts[:-1])


def test_switch_off_matches_core_neuron():
    inp = probe_input()
    for overrides in ({}, {"v_th": 0.5}, {"v_p": 0.7}):
        base = STANDARD.with_(**overrides)
        core = run(inp, params=base).spike_times
        ext = simulate_extended(photocurrent(inp, Waveform.zeros(len(inp), inp.dt)), ExtendedParams(base, v_c=0.3, v_sw=0.0))
        assert ext.spike_times.size == core.size
        assert np.abs(ext.spike_times - core).max() <= DEFAULT_DT


@settings(max_examples=10)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_v_slow_stays_on_rail(v_c, v_sw):
    tr = simulate_extended(constant_current(I_IN, 0.5e-6), ExtendedParams(NeuronParams(), v_c=v_c, v_sw=v_sw))
    vs = tr.v_slow_trace.samples
    assert vs.min() >= 0.0 and vs.max() <= 1.0


def test_step_matches_simulate():
    p = preset("Fast")
    cur = constant_current(I_IN, 40e-9)
    state = ExtendedState()
    # trace sample k holds the state before step k
    for i in cur.samples[:-1]:
        state = step_extended(state, p, i_in=i)
    tr = simulate_extended(cur, p)
    assert state.core.v_m == tr.trace.v_m_trace.samples[-1]
    assert state.v_slow == tr.v_slow_trace.samples[-1]


def test_steady_rate_arithmetic():
    assert steady_rate(np.arange(11) * 10e-9) == pytest.approx(100e6)
    assert steady_rate([1e-9]) == 0.0
