"""Behavioural model of the programmable optoelectronic spiking neuron.

The circuit is reduced to two coupled state variables integrated with forward
Euler::

    C_m dv_m/dt = i_in - g_m(V_leak_M) v_m - g_couple v_r + alpha(V_p) drive
    C_r dv_r/dt = -g_r(V_leak_R) v_r

When ``v_m`` reaches the effective threshold set by ``V_th`` the neuron fires:
``v_m`` is pulled to ground, ``v_r`` jumps by ``delta_r`` and the output drive
is held at 1 for one pulse width before decaying.  A higher ``V_th`` bias gives
a *lower* threshold, as in the fabricated circuit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, NumericError
from .waveform import Unit, Waveform

DEFAULT_DT = 0.05e-9


@dataclass(frozen=True)
class NeuronParams:
    """Supply and the four tunable bias voltages of one neuron."""

    vdd: float = 1.0
    v_th: float = 0.2
    v_leak_m: float = 0.5
    v_leak_r: float = 0.5
    v_p: float = 0.35

    BIASES = ("v_th", "v_leak_m", "v_leak_r", "v_p")

    def __post_init__(self):
        if not (self.vdd > 0 and math.isfinite(self.vdd)):
            raise DomainError(f"vdd must be positive, got {self.vdd!r}")
        for name in self.BIASES:
            value = getattr(self, name)
            if not (0.0 <= value <= self.vdd):
                raise DomainError(f"{name}={value!r} outside [0, {self.vdd}]")

    def with_(self, **changes) -> "NeuronParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


STANDARD = NeuronParams()


@dataclass(frozen=True)
class ModelConstants:
    """Component values of the behavioural model.

    The defaults are the calibrated profile (see ``psnn.calibration``); they
    make the standard bias set act as a two-spike coincidence detector for
    0.2 mW / 1 ns optical pulses at 1 GSpike/s.
    """

    c_m: float = 901e-15
    c_r: float = 100e-15
    g0_m: float = 1.5e-3
    g0_r: float = 0.244
    leak_slope_r: float = 0.065
    g_couple: float = 0.75e-3
    alpha0: float = 0.25e-3
    delta_r: float = 0.4
    theta0: float = 0.1473
    theta_slope: float = 0.148
    responsivity: float = 1.0
    pulse_width: float = 1e-9
    drive_decay: float = 5e9
    detect_level: float = 0.075

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"model constant {f.name} must be positive, got {value!r}")

    def with_(self, **changes) -> "ModelConstants":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


DEFAULT_CONSTANTS = ModelConstants()


@dataclass(frozen=True)
class NeuronState:
    t: float = 0.0
    v_m: float = 0.0
    v_r: float = 0.0
    drive: float = 0.0
    last_spike_time: Optional[float] = None


REST = NeuronState()


@dataclass(frozen=True, eq=False)
class SpikeTrace:
    v_m_trace: Waveform
    v_r_trace: Waveform
    output: Waveform
    spike_times: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        times = np.asarray(self.spike_times, dtype=float)
        times.flags.writeable = False
        object.__setattr__(self, "spike_times", times)

    def __eq__(self, other):
        if not isinstance(other, SpikeTrace):
            return NotImplemented
        return (
            self.v_m_trace == other.v_m_trace
            and self.v_r_trace == other.v_r_trace
            and self.output == other.output
            and np.array_equal(self.spike_times, other.spike_times)
        )

    @property
    def n_spikes(self) -> int:
        return int(self.spike_times.size)

    @property
    def dt(self) -> float:
        return self.output.dt

    @property
    def duration(self) -> float:
        return self.output.duration

    def isis(self) -> np.ndarray:
        return np.diff(self.spike_times)


# -- parameter maps -------------------------------------------------------


def photocurrent(p_exc: Waveform, p_inh: Waveform, responsivity: float = 1.0) -> Waveform:
    """Net photodetector current; negative samples mean net inhibition."""
    p_exc.check_aligned(p_inh)
    if not responsivity > 0:
        raise DomainError(f"responsivity must be positive, got {responsivity!r}")
    return Waveform(p_exc.dt, responsivity * (p_exc.samples - p_inh.samples), Unit.AMPS)


def effective_threshold(v_th: float, constants: ModelConstants = DEFAULT_CONSTANTS, vdd: float = 1.0) -> float:
    """Membrane voltage at which the neuron fires; decreasing in the V_th bias."""
    if not 0.0 <= v_th <= vdd:
        raise DomainError(f"v_th={v_th!r} outside [0, {vdd}]")
    theta = constants.theta0 - constants.theta_slope * v_th
    # keep strictly positive so a resting neuron never fires
    return min(max(theta, 1e-6 * vdd), vdd)


def leak_conductance(v_bias: float, g0: float, vdd: float = 1.0, slope: Optional[float] = None) -> float:
    """Leak conductance of an NMOS whose gate sits at ``v_bias``.

    Linear ``g0 * v_bias / vdd`` by default.  With ``slope`` (volts) the map is
    the subthreshold-like ``g0 * (exp(v/slope) - 1) / (exp(vdd/slope) - 1)``,
    which still gives 0 at zero bias and ``g0`` at ``vdd``.
    """
    if not (0.0 <= v_bias <= vdd):
        raise DomainError(f"leak bias {v_bias!r} outside [0, {vdd}]")
    if slope is None:
        return g0 * v_bias / vdd
    return g0 * math.expm1(v_bias / slope) / math.expm1(vdd / slope)


def feedback_strength(v_p: float, constants: ModelConstants = DEFAULT_CONSTANTS, vdd: float = 1.0) -> float:
    if not 0.0 <= v_p <= vdd:
        raise DomainError(f"v_p={v_p!r} outside [0, {vdd}]")
    return constants.alpha0 * v_p / vdd


# -- integration ----------------------------------------------------------


@dataclass(frozen=True)
class _Coeffs:
    """Per-run constants of the Euler update, resolved from params once."""

    dt: float
    inv_cm: float
    g_m: float
    g_c: float
    r_keep: float
    alpha: float
    theta: float
    vdd: float
    delta_r: float
    pulse_width: float
    drive_keep: float
    rearm: float

    @classmethod
    def build(cls, params: NeuronParams, k: ModelConstants, dt: float, couple_scale: float = 1.0):
        if not (dt > 0 and math.isfinite(dt)):
            raise DomainError(f"dt must be positive, got {dt!r}")
        if dt > k.pulse_width / 10 * (1 + 1e-9):
            raise DomainError(f"dt={dt!r} exceeds pulse_width/10={k.pulse_width / 10!r}")
        vdd = params.vdd
        g_r = leak_conductance(params.v_leak_r, k.g0_r, vdd, k.leak_slope_r)
        return cls(
            dt=dt,
            inv_cm=1.0 / k.c_m,
            g_m=leak_conductance(params.v_leak_m, k.g0_m, vdd),
            g_c=k.g_couple * couple_scale,
            # a refractory node faster than dt is fully discharged in one step
            r_keep=max(0.0, 1.0 - g_r / k.c_r * dt),
            alpha=feedback_strength(params.v_p, k, vdd),
            theta=effective_threshold(params.v_th, k, vdd),
            vdd=vdd,
            delta_r=k.delta_r,
            pulse_width=k.pulse_width,
            drive_keep=max(0.0, 1.0 - k.drive_decay * dt),
            rearm=k.detect_level / vdd,
        )


def _advance(t, v_m, v_r, drive, last, i_in, c: _Coeffs):
    """One Euler step.  Returns (t, v_m, v_r, drive, last, fired)."""
    dt = c.dt
    dv_m = (i_in - c.g_m * v_m - c.g_c * v_r + c.alpha * drive) * c.inv_cm * dt
    v_r_new = v_r * c.r_keep
    v_m_raw = v_m + dv_m
    t_new = t + dt
    if last is not None and t_new - last < c.pulse_width:
        drive_new = 1.0
    else:
        drive_new = drive * c.drive_keep

    fired = False
    if v_m_raw >= c.theta and drive_new < c.rearm:
        # interpolate the crossing only if the output was already armed at t;
        # a neuron held above theta while disarmed fires on the re-arm sample
        if v_m < c.theta and drive < c.rearm:
            last = t + dt * (c.theta - v_m) / (v_m_raw - v_m)
        else:
            last = t_new
        fired = True
        v_m_raw = 0.0
        v_r_new += c.delta_r
        drive_new = 1.0

    v_m_new = 0.0 if v_m_raw < 0.0 else (c.vdd if v_m_raw > c.vdd else v_m_raw)
    if v_r_new > c.vdd:
        v_r_new = c.vdd
    elif v_r_new < 0.0:
        v_r_new = 0.0
    return t_new, v_m_new, v_r_new, drive_new, last, fired


def _check_finite(*values):
    for v in values:
        if v is not None and not math.isfinite(v):
            raise NumericError(f"non-finite value in neuron simulation: {v!r}")


def step(
    state: NeuronState,
    params: NeuronParams,
    constants: ModelConstants,
    i_in: float,
    dt: float = DEFAULT_DT,
) -> NeuronState:
    """Advance ``state`` by one timestep under input current ``i_in`` (amps)."""
    _check_finite(state.t, state.v_m, state.v_r, state.drive, state.last_spike_time, i_in)
    c = _Coeffs.build(params, constants, dt)
    t, v_m, v_r, drive, last, _ = _advance(
        state.t, state.v_m, state.v_r, state.drive, state.last_spike_time, float(i_in), c
    )
    _check_finite(v_m, v_r)
    return NeuronState(t, v_m, v_r, drive, last)


def simulate_current(
    i_in: Waveform,
    params: NeuronParams = STANDARD,
    constants: ModelConstants = DEFAULT_CONSTANTS,
    state: NeuronState = REST,
) -> SpikeTrace:
    """Integrate the neuron over a current waveform.

    Sample ``k`` of every output trace is the state at time ``k * dt``; input
    sample ``k`` acts over the interval ``[k dt, (k+1) dt)``.
    """
    c = _Coeffs.build(params, constants, i_in.dt)
    currents = i_in.samples
    if currents.size and not np.all(np.isfinite(currents)):
        raise NumericError("input current contains non-finite samples")
    n = currents.size
    vm = np.empty(n)
    vr = np.empty(n)
    out = np.empty(n)
    spikes = []
    t, v_m, v_r, drive, last = state.t, state.v_m, state.v_r, state.drive, state.last_spike_time
    _check_finite(t, v_m, v_r, drive, last)
    cur = currents.tolist()
    for k in range(n):
        vm[k] = v_m
        vr[k] = v_r
        out[k] = drive * c.vdd
        t, v_m, v_r, drive, last, fired = _advance(t, v_m, v_r, drive, last, cur[k], c)
        if fired:
            spikes.append(last)
    if not (math.isfinite(v_m) and math.isfinite(v_r)):
        raise NumericError("neuron state diverged")
    dt = i_in.dt
    return SpikeTrace(
        Waveform(dt, vm, Unit.VOLTS),
        Waveform(dt, vr, Unit.VOLTS),
        Waveform(dt, out, Unit.VOLTS),
        np.array([s for s in spikes if s < n * dt]),
    )


def run(
    p_exc: Waveform,
    p_inh: Optional[Waveform] = None,
    params: NeuronParams = STANDARD,
    constants: ModelConstants = DEFAULT_CONSTANTS,
    dt: Optional[float] = None,
) -> SpikeTrace:
    """Simulate the neuron driven by excitatory and inhibitory optical power."""
    if p_inh is None:
        p_inh = Waveform.zeros(len(p_exc), p_exc.dt)
    if dt is not None and not math.isclose(dt, p_exc.dt, rel_tol=1e-12):
        raise DomainError(f"requested dt={dt!r} but waveforms are sampled at {p_exc.dt!r}")
    return simulate_current(photocurrent(p_exc, p_inh, constants.responsivity), params, constants)


def firing_rate(trace_or_times, window: float, t0: float = 0.0) -> float:
    """Spikes per second in ``[t0, t0 + window)``."""
    if not window > 0:
        raise DomainError(f"window must be positive, got {window!r}")
    times = trace_or_times.spike_times if isinstance(trace_or_times, SpikeTrace) else np.asarray(trace_or_times)
    n = int(np.count_nonzero((times >= t0) & (times < t0 + window)))
    return n / window


def first_spike_time(trace: SpikeTrace) -> Optional[float]:
    return float(trace.spike_times[0]) if trace.n_spikes else None


def spike_counts_in(trace: SpikeTrace, windows: Sequence[tuple]) -> list:
    """Number of output spikes inside each ``(t0, t1)`` window."""
    s = trace.spike_times
    return [int(np.count_nonzero((s >= a) & (s < b))) for a, b in windows]
