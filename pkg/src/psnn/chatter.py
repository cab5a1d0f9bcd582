"""Extended neuron with the pattern-switching circuit.

Two extra biases act on the core neuron:

* ``v_c`` sets how fast a slow node ``v_slow`` follows the output drive
  (a low-pass copy of recent spiking activity);
* ``v_sw`` is a switch that steers the membrane's negative feedback away from
  the refractory node and onto ``v_slow``.

With ``v_sw`` low the neuron is the core neuron.  With ``v_sw`` high the fast
refractory brake is replaced by the slow one.  A quick slow loop (low ``v_c``)
brakes after every spike and gives tonic fast spiking.  A sluggish loop
(medium ``v_c``) together with medium positive feedback gives bursts: each
burst is self-sustained by the feedback until ``v_slow`` has charged enough to
quench it, and restarts once ``v_slow`` has drained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DomainError, NumericError, UnclassifiableError
from .neuron import (
    DEFAULT_CONSTANTS,
    DEFAULT_DT,
    REST,
    ModelConstants,
    NeuronParams,
    NeuronState,
    SpikeTrace,
    _advance,
    _check_finite,
    _Coeffs,
)
from .waveform import Unit, Waveform


class PatternLabel(str, Enum):
    REGULAR = "Regular"
    FAST = "Fast"
    CHATTERING = "Chattering"


LOW, MEDIUM, HIGH = 0.2, 0.5, 0.8


@dataclass(frozen=True)
class ExtendedParams:
    base: NeuronParams = NeuronParams()
    v_c: float = 0.0
    v_sw: float = 0.0

    def __post_init__(self):
        vdd = self.base.vdd
        for name in ("v_c", "v_sw"):
            value = getattr(self, name)
            if not 0.0 <= value <= vdd:
                raise DomainError(f"{name}={value!r} outside [0, {vdd}]")

    def as_dict(self) -> dict:
        d = self.base.as_dict()
        d.update(v_c=self.v_c, v_sw=self.v_sw)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExtendedParams":
        d = dict(d)
        v_c = d.pop("v_c", 0.0)
        v_sw = d.pop("v_sw", 0.0)
        d.pop("pattern", None)
        return cls(NeuronParams(**d), v_c, v_sw)


@dataclass(frozen=True)
class ChatterConstants:
    """Component values of the switching circuit (calibrated defaults)."""

    g_slow0: float = 1.75e-3
    slow_rate0: float = 4e8
    slow_slope: float = 0.1
    switch_on: float = 0.25
    switch_full: float = 0.75

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"chatter constant {f.name} must be positive, got {value!r}")
        if not self.switch_on < self.switch_full <= 1.0:
            raise DomainError("need switch_on < switch_full <= 1")


    def with_(self, **changes) -> "ChatterConstants":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


DEFAULT_CHATTER = ChatterConstants()


@dataclass(frozen=True)
class ExtendedState:
    core: NeuronState = REST
    v_slow: float = 0.0


def switch_fraction(v_sw: float, vdd: float, cc: ChatterConstants = DEFAULT_CHATTER) -> float:
    """Share of negative feedback routed through the slow node (smoothstep)."""
    x = (v_sw / vdd - cc.switch_on) / (cc.switch_full - cc.switch_on)
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    return x * x * (3.0 - 2.0 * x)


def slow_rate(v_c: float, vdd: float, cc: ChatterConstants = DEFAULT_CHATTER) -> float:
    """Rate (1/s) at which ``v_slow`` tracks the output drive.

    Falls off exponentially with ``v_c`` (0 at ``v_c = vdd``), so a higher
    ``v_c`` gives a longer-memory slow loop.
    """
    return cc.slow_rate0 * math.expm1((vdd - v_c) / cc.slow_slope) / math.expm1(vdd / cc.slow_slope)


@dataclass(frozen=True)
class _Slow:
    sigma: float
    g_slow: float
    rate: float
    vdd: float

    @classmethod
    def build(cls, params: ExtendedParams, cc: ChatterConstants):
        vdd = params.base.vdd
        sigma = switch_fraction(params.v_sw, vdd, cc)
        return cls(sigma, cc.g_slow0 * sigma, slow_rate(params.v_c, vdd, cc), vdd)


def _advance_ext(t, v_m, v_r, drive, last, v_slow, i_in, c, s, dt):
    t, v_m, v_r, drive_new, last, fired = _advance(t, v_m, v_r, drive, last, i_in - s.g_slow * v_slow, c)
    v_slow += s.rate * (s.vdd * drive - v_slow) * dt
    v_slow = 0.0 if v_slow < 0.0 else (s.vdd if v_slow > s.vdd else v_slow)
    return t, v_m, v_r, drive_new, last, v_slow, fired


def step_extended(
    state: ExtendedState,
    params: ExtendedParams,
    constants: ModelConstants = DEFAULT_CONSTANTS,
    i_in: float = 0.0,
    dt: float = DEFAULT_DT,
    chatter: ChatterConstants = DEFAULT_CHATTER,
) -> ExtendedState:
    core = state.core
    _check_finite(core.t, core.v_m, core.v_r, core.drive, core.last_spike_time, state.v_slow, i_in)
    s = _Slow.build(params, chatter)
    c = _Coeffs.build(params.base, constants, dt, couple_scale=1.0 - s.sigma)
    t, v_m, v_r, drive, last, v_slow, _ = _advance_ext(
        core.t, core.v_m, core.v_r, core.drive, core.last_spike_time, state.v_slow, float(i_in), c, s, dt
    )
    return ExtendedState(NeuronState(t, v_m, v_r, drive, last), v_slow)


@dataclass(frozen=True, eq=False)
class ExtendedTrace:
    trace: SpikeTrace
    v_slow_trace: Waveform

    @property
    def spike_times(self) -> np.ndarray:
        return self.trace.spike_times


def simulate_extended(
    i_in: Waveform,
    params: ExtendedParams,
    constants: ModelConstants = DEFAULT_CONSTANTS,
    chatter: ChatterConstants = DEFAULT_CHATTER,
    state: ExtendedState = ExtendedState(),
) -> ExtendedTrace:
    dt = i_in.dt
    s = _Slow.build(params, chatter)
    c = _Coeffs.build(params.base, constants, dt, couple_scale=1.0 - s.sigma)
    cur = i_in.samples
    if cur.size and not np.all(np.isfinite(cur)):
        raise NumericError("input current contains non-finite samples")
    n = cur.size
    vm, vr, out, vs = np.empty(n), np.empty(n), np.empty(n), np.empty(n)
    spikes = []
    core = state.core
    t, v_m, v_r, drive, last = core.t, core.v_m, core.v_r, core.drive, core.last_spike_time
    v_slow = state.v_slow
    for k, i_k in enumerate(cur.tolist()):
        vm[k], vr[k], out[k], vs[k] = v_m, v_r, drive * c.vdd, v_slow
        t, v_m, v_r, drive, last, v_slow, fired = _advance_ext(t, v_m, v_r, drive, last, v_slow, i_k, c, s, dt)
        if fired:
            spikes.append(last)
    if not (math.isfinite(v_m) and math.isfinite(v_r) and math.isfinite(v_slow)):
        raise NumericError("extended neuron state diverged")
    trace = SpikeTrace(
        Waveform(dt, vm, Unit.VOLTS),
        Waveform(dt, vr, Unit.VOLTS),
        Waveform(dt, out, Unit.VOLTS),
        np.array([x for x in spikes if x < n * dt]),
    )
    return ExtendedTrace(trace, Waveform(dt, vs, Unit.VOLTS))


def constant_current(amps: float, duration: float, dt: float = DEFAULT_DT) -> Waveform:
    return Waveform(dt, np.full(int(round(duration / dt)), float(amps)), Unit.AMPS)


# -- pattern presets and classification ----------------------------------

_LEVELS = {
    PatternLabel.REGULAR: dict(v_th=LOW, v_leak_m=LOW, v_leak_r=LOW, v_p=LOW, v_c=LOW, v_sw=LOW),
    PatternLabel.FAST: dict(v_th=HIGH, v_leak_m=HIGH, v_leak_r=LOW, v_p=LOW, v_c=LOW, v_sw=HIGH),
    PatternLabel.CHATTERING: dict(v_th=MEDIUM, v_leak_m=HIGH, v_leak_r=HIGH, v_p=MEDIUM, v_c=MEDIUM, v_sw=HIGH),
}


def preset(label, vdd: float = 1.0) -> ExtendedParams:
    """Bias assignment for one of the three output patterns (levels scale with vdd)."""
    levels = {k: v * vdd for k, v in _LEVELS[PatternLabel(label)].items()}
    v_c = levels.pop("v_c")
    v_sw = levels.pop("v_sw")
    return ExtendedParams(NeuronParams(vdd=vdd, **levels), v_c=v_c, v_sw=v_sw)


def split_bursts(spike_times, gap_ratio: float = 5.0):
    """Group spikes into bursts.

    ISIs are split at the largest jump in sorted order; if the jump is at
    least ``gap_ratio``, the long ISIs separate bursts.  Returns a list of
    arrays (one per burst); a single list entry means no burst structure.
    """
    s = np.asarray(spike_times, dtype=float)
    if s.size < 3:
        return [s]
    isi = np.diff(s)
    order = np.sort(isi)
    ratios = order[1:] / order[:-1]
    j = int(np.argmax(ratios))
    if ratios[j] < gap_ratio:
        return [s]
    cut = order[j]
    breaks = np.nonzero(isi > cut)[0]
    return np.split(s, breaks + 1)


def classify_pattern(spike_times, window: Optional[tuple] = None, gap_ratio: float = 5.0, fast_hz: float = 50e6):
    """Label a spike train Regular, Fast or Chattering.

    Chattering when the ISI distribution splits into short intra-burst and
    long inter-burst intervals at least ``gap_ratio`` apart and bursts hold at
    least two spikes; otherwise Fast when the mean rate reaches ``fast_hz``.
    """
    s = np.asarray(spike_times, dtype=float)
    if window is not None:
        s = s[(s >= window[0]) & (s < window[1])]
    if s.size < 2:
        raise UnclassifiableError(f"need at least 2 spikes to classify, got {s.size}")
    bursts = split_bursts(s, gap_ratio)
    if len(bursts) > 1 and np.mean([b.size for b in bursts]) >= 2:
        return PatternLabel.CHATTERING
    rate = 1.0 / float(np.mean(np.diff(s)))
    return PatternLabel.FAST if rate >= fast_hz else PatternLabel.REGULAR


def steady_rate(spike_times, settle: float = 0.0) -> float:
    """Mean firing rate from the ISIs after ``settle`` seconds (0 if < 2 spikes)."""
    s = np.asarray(spike_times, dtype=float)
    s = s[s >= settle]
    if s.size < 2:
        return 0.0
    return (s.size - 1) / (s[-1] - s[0])
