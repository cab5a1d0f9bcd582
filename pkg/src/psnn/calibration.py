"""Scripted calibration of the default model constants.

The shipped ``DEFAULT_CONSTANTS`` / ``DEFAULT_CHATTER`` were produced by
``python -m psnn.calibration``:

1. threshold map: bracket the membrane peak after k pulses of the 1 GSpike/s
   probe train (refractory and threshold disabled) and place ``theta`` for
   ``v_th = 0.2`` between the 1- and 2-pulse peaks, ``theta`` for ``v_th = 0``
   between the 4- and 5-pulse peaks;
2. refractory loop and feedback: grid search over the refractory time
   constant at the standard bias, the per-spike refractory current and
   ``alpha0``, keeping points that pass every tuning-figure property and
   ranking them by the Regular preset's distance from 10 MHz;
3. slow loop: grid search over ``g_slow0`` and ``slow_rate0`` keeping points
   where the three presets classify to their own label, ranked by the Fast
   preset's distance from 100 MHz.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .chatter import (
    DEFAULT_CHATTER,
    ChatterConstants,
    PatternLabel,
    classify_pattern,
    constant_current,
    preset,
    simulate_extended,
    steady_rate,
)
from .errors import UnclassifiableError
from .neuron import DEFAULT_CONSTANTS, DEFAULT_DT, STANDARD, ModelConstants, run, spike_counts_in
from .waveform import pulse_train

PEAK_POWER = 0.2e-3
PULSE_WIDTH = 1e-9

# probe pattern: one isolated pulse, a 1 ns pair, then a 16-pulse burst
PROBE_SINGLE = 5e-9
PROBE_PAIR = (45e-9, 46e-9)
PROBE_TRAIN_START = 85e-9
PROBE_TRAIN_LEN = 16
PROBE_DURATION = 140e-9
PROBE_WINDOWS = ((0.0, 40e-9), (40e-9, 80e-9), (80e-9, PROBE_DURATION))

TUNING_OVERRIDES = {
    "a": {},
    "b": {"v_th": 0.5},
    "c": {"v_th": 0.0},
    "d": {"v_leak_m": 0.35},
    "e": {"v_leak_r": 0.35},
    "f": {"v_p": 0.7},
}


def probe_starts():
    train = [PROBE_TRAIN_START + i * PULSE_WIDTH for i in range(PROBE_TRAIN_LEN)]
    return [PROBE_SINGLE, *PROBE_PAIR, *train]


def probe_input(dt: float = DEFAULT_DT):
    n = int(round(PROBE_DURATION / dt))
    return pulse_train(probe_starts(), n=n, dt=dt, peak=PEAK_POWER, width=PULSE_WIDTH)


def membrane_peaks(constants: ModelConstants = DEFAULT_CONSTANTS, n_pulses: int = 6, dt: float = DEFAULT_DT):
    """Peak ``v_m`` after each of ``n_pulses`` back-to-back probe pulses, no firing."""
    silent = constants.with_(theta0=10.0, theta_slope=1e-9)
    n = int(round((n_pulses + 1) * PULSE_WIDTH / dt))
    starts = [i * PULSE_WIDTH for i in range(n_pulses)]
    trace = run(pulse_train(starts, n=n, dt=dt, peak=PEAK_POWER, width=PULSE_WIDTH), params=STANDARD, constants=silent)
    vm = trace.v_m_trace.samples
    per = int(round(PULSE_WIDTH / dt))
    return np.array([vm[i * per : (i + 1) * per + 1].max() for i in range(n_pulses)])


def threshold_map(constants: ModelConstants = DEFAULT_CONSTANTS, frac_std: float = 0.9, frac_zero: float = 0.5):
    """(theta0, theta_slope) placing theta(0.2) and theta(0) inside their brackets.

    ``frac_*`` is the position inside each bracket (1 = at the upper peak).
    """
    p = membrane_peaks(constants)
    theta_std = p[0] + frac_std * (p[1] - p[0])
    theta_zero = p[3] + frac_zero * (p[4] - p[3])
    return theta_zero, (theta_zero - theta_std) / STANDARD.v_th


@dataclass(frozen=True)
class TuningResult:
    counts: dict
    train_times: dict
    checks: dict

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def tuning_checks(constants: ModelConstants = DEFAULT_CONSTANTS, dt: float = DEFAULT_DT) -> TuningResult:
    """Run the six tuning scenarios on the probe input and check their properties."""
    inp = probe_input(dt)
    counts, times = {}, {}
    for key, overrides in TUNING_OVERRIDES.items():
        trace = run(inp, params=STANDARD.with_(**overrides), constants=constants)
        counts[key] = spike_counts_in(trace, PROBE_WINDOWS)
        s = trace.spike_times
        times[key] = s[s >= PROBE_TRAIN_START] - PROBE_TRAIN_START
    n = {k: len(v) for k, v in times.items()}
    checks = {
        "coincidence": counts["a"][:2] == [0, 1],
        "threshold_order": n["b"] > n["a"] > n["c"],
        "five_inputs": n["c"] >= 1 and times["c"][0] >= 4 * PULSE_WIDTH and n["c"] <= PROBE_TRAIN_LEN // 5,
        "membrane_leak": n["d"] > n["a"],
        "refractory_leak": n["e"] <= 1,
        "feedback_first_spike": n["f"] >= 1 and n["a"] >= 1 and abs(times["f"][0] - times["a"][0]) <= dt,
        "feedback_faster": n["f"] > n["a"],
    }
    return TuningResult(counts, times, checks)


def preset_rates(constants=DEFAULT_CONSTANTS, chatter=DEFAULT_CHATTER, amps=0.2e-3, duration=2e-6, settle=0.5e-6):
    """{label: (steady rate, classified label or None)} for the three presets."""
    out = {}
    current = constant_current(amps, duration)
    for label in PatternLabel:
        s = simulate_extended(current, preset(label), constants, chatter).spike_times
        try:
            got = classify_pattern(s, (settle, duration))
        except UnclassifiableError:
            got = None
        out[label] = (steady_rate(s, settle), got)
    return out


def _tau_to_g0_r(tau: float, k: ModelConstants, v_bias: float = 0.5) -> float:
    shape = math.expm1(v_bias / k.leak_slope_r) / math.expm1(1.0 / k.leak_slope_r)
    return k.c_r / tau / shape


def calibrate_core(
    base: ModelConstants = DEFAULT_CONSTANTS,
    taus=(0.7e-9, 0.8e-9, 0.9e-9),
    refractory_currents=(0.3e-3, 0.35e-3),
    alphas=(0.2e-3, 0.25e-3, 0.3e-3),
) -> ModelConstants:
    theta0, slope = threshold_map(base)
    best = None
    for tau, x, a0 in itertools.product(taus, refractory_currents, alphas):
        k = base.with_(
            theta0=round(theta0, 4),
            theta_slope=round(slope, 4),
            g0_r=float(f"{_tau_to_g0_r(tau, base):.3g}"),
            g_couple=x / base.delta_r,
            alpha0=a0,
        )
        if not tuning_checks(k).ok:
            continue
        reg = preset_rates(k, DEFAULT_CHATTER)[PatternLabel.REGULAR][0]
        err = abs(reg - 10e6)
        if best is None or err < best[0]:
            best = (err, k)
    if best is None:
        raise RuntimeError("no grid point satisfies the tuning properties")
    return best[1]


def calibrate_chatter(
    constants: ModelConstants = DEFAULT_CONSTANTS,
    base: ChatterConstants = DEFAULT_CHATTER,
    gains=(1.5e-3, 1.75e-3, 2e-3),
    rates=(2e8, 4e8),
) -> ChatterConstants:
    best = None
    for g, r in itertools.product(gains, rates):
        cc = base.with_(g_slow0=g, slow_rate0=r)
        res = preset_rates(constants, cc)
        if any(res[label][1] is not label for label in PatternLabel):
            continue
        err = abs(res[PatternLabel.FAST][0] - 100e6)
        if best is None or err < best[0]:
            best = (err, cc)
    if best is None:
        raise RuntimeError("no grid point reproduces the three patterns")
    return best[1]


def main():
    k = calibrate_core()
    cc = calibrate_chatter(k)
    print("ModelConstants:")
    for name, value in k.as_dict().items():
        print(f"  {name} = {value:.6g}")
    print("ChatterConstants:")
    for name, value in cc.as_dict().items():
        print(f"  {name} = {value:.6g}")


if __name__ == "__main__":
    main()
