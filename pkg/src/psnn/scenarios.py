"""Built-in experiment scenarios, their property checks and run records.

Each scenario is a set of config overrides plus a runner that writes
CSV/JSON artifacts and evaluates the scenario's expected properties.  A
``RunRecord`` keeps the full config snapshot, so a run can be replayed and
its artifacts compared byte for byte.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .calibration import PROBE_TRAIN_LEN, PROBE_TRAIN_START, PROBE_WINDOWS, probe_starts
from .chatter import PatternLabel, classify_pattern, preset, simulate_extended, split_bursts, steady_rate
from .codec import load_dataset
from .config import (
    build_chatter,
    build_constants,
    build_params,
    build_pipeline,
    default_config,
    merge,
    validate,
)
from .errors import DomainError, UnclassifiableError
from .mesh import CROSS, DUMMY, EXC, IDENTITY, INH, PortMap, delivered_fractions, propagate_waveforms
from .neuron import SpikeTrace, photocurrent, run, spike_counts_in
from .trainer import demo_indices, run_iris
from .waveform import Unit, Waveform, pulse_train

SWEEP_PARAMS = ("amplitude", "v_th", "v_leak_m", "v_leak_r", "v_p", "v_c", "v_sw")
RATE_TOLERANCE = 0.2
PATTERN_AMPS = 0.2e-3
PATTERN_DURATION = 2e-6
PATTERN_SETTLE = 0.5e-6
DETOUR_MZI = 2  # MZI on modes (1, 2) in the second column
IRIS_MIN_ACCURACY = 0.85


@dataclass(frozen=True)
class Scenario:
    name: str
    figure: str
    targets: tuple
    overrides: dict
    input_desc: str
    properties: tuple
    kind: str

    def config(self, user: Optional[dict] = None) -> dict:
        return validate(merge(default_config(), user or {}, self.overrides))


def _probe_scenario(name, overrides, properties, desc):
    return Scenario(
        name,
        f"tuning {name[-1]}",
        ("neuron-core",),
        {"input": {"kind": "probe", "duration": 140e-9}, **overrides},
        "probe train: single pulse, 1 ns pair, 16 pulses at 1 GSpike/s; 0.2 mW peak, 1 ns pulses",
        properties,
        "probe",
    )


SCENARIOS = {
    s.name: s
    for s in (
        _probe_scenario("fig2a", {}, ("coincidence",), "standard bias"),
        _probe_scenario("fig2b", {"neuron": {"v_th": 0.5}}, ("threshold_order",), "higher V_th"),
        _probe_scenario("fig2c", {"neuron": {"v_th": 0.0}}, ("threshold_order", "five_inputs"), "V_th = 0"),
        _probe_scenario("fig2d", {"neuron": {"v_leak_m": 0.35}}, ("membrane_leak",), "weaker membrane leak"),
        _probe_scenario("fig2e", {"neuron": {"v_leak_r": 0.35}}, ("refractory_leak",), "weaker refractory leak"),
        _probe_scenario("fig2f", {"neuron": {"v_p": 0.7}}, ("feedback_first_spike", "feedback_faster"), "more feedback"),
        Scenario(
            "fig3",
            "rate curves",
            ("neuron-core",),
            {"sweep": {"param": "amplitude", "start": 0.0, "stop": 0.4e-3, "num": 41, "v_th_values": [0.2, 0.5, 0.7]}},
            "constant optical input 0 to 0.4 mW in 41 steps, 1 us per point, V_th in {0.2, 0.5, 0.7}",
            ("rate_monotone", "smoothest_at_low_vth"),
            "sweep",
        ),
        Scenario(
            "fig5",
            "output patterns",
            ("neuron-chatter",),
            {"input": {"kind": "constant", "amplitude": PATTERN_AMPS, "duration": PATTERN_DURATION}},
            "0.2 mA constant current for 2 us, each of the Regular / Fast / Chattering presets",
            ("regular_rate", "fast_rate", "chattering_pattern"),
            "patterns",
        ),
        Scenario(
            "fig6",
            "inhibition",
            ("mzi-mesh", "neuron-core"),
            {"input": {"kind": "probe", "duration": 140e-9}},
            "probe train on mesh input 0 (excitatory) and the same train on input 1 (inhibitory path)",
            ("detour_dark", "detour_standard", "direct_silent"),
            "inhibition",
        ),
        Scenario(
            "fig9",
            "Iris classification",
            ("spike-codec", "trainer", "mzi-mesh", "neuron-core"),
            {},
            "150-sample Iris, 4 rate-coded features, 400 ns frames with a 50 ns header",
            ("iris_accuracy", "setosa_recall", "demo_errors"),
            "iris",
        ),
    )
}


# -- records ------------------------------------------------------------------


def sha256_of(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunRecord:
    scenario: str
    config: dict
    seed: int
    artifacts: dict = field(default_factory=dict)
    properties: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    timestamp: str = ""
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(self.properties.values())

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "timestamp": self.timestamp,
            "version": self.version,
            "passed": self.passed,
            "properties": self.properties,
            "summary": self.summary,
            "artifacts": self.artifacts,
            "config": self.config,
        }

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def read(cls, path) -> "RunRecord":
        d = json.loads(Path(path).read_text())
        return cls(
            d["scenario"],
            d["config"],
            d["seed"],
            d.get("artifacts", {}),
            d.get("properties", {}),
            d.get("summary", {}),
            d.get("timestamp", ""),
            d.get("version", ""),
        )


class _Writer:
    """Collects artifact paths and hashes for one run directory."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.artifacts = {}

    def csv(self, name: str, header, rows) -> Path:
        path = self.out_dir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        self._add(name, path)
        return path

    def json(self, name: str, data) -> Path:
        path = self.out_dir / name
        path.write_text(json.dumps(data, indent=2) + "\n")
        self._add(name, path)
        return path

    def add(self, name: str, path: Path) -> None:
        self._add(name, path)

    def _add(self, name, path):
        self.artifacts[name] = {"path": str(path), "sha256": sha256_of(path)}


def _g(x: float) -> str:
    return f"{x:.9g}"


# -- inputs and neuron runs ----------------------------------------------------


def build_input(config: dict) -> Waveform:
    """Excitatory optical power waveform described by ``config['input']``."""
    inp = config["input"]
    dt = config["dt"]
    n = int(round(inp["duration"] / dt))
    kind = inp["kind"]
    if kind == "none":
        return Waveform.zeros(n, dt)
    if kind == "constant":
        return Waveform(dt, np.full(n, float(inp["amplitude"])), Unit.WATTS)
    starts = probe_starts() if kind == "probe" else [float(t) for t in inp["starts"]]
    # the probe pattern is laid out in 1 ns slots; the pulse width follows the config
    return pulse_train(starts, n=n, dt=dt, peak=inp["peak_power"], width=inp["pulse_width"])


def run_neuron(config: dict, p_exc: Waveform, p_inh: Optional[Waveform] = None) -> SpikeTrace:
    """Core neuron, or the extended neuron when the switch or slow-loop bias is set."""
    params = build_params(config)
    constants = build_constants(config)
    if params.v_sw > 0 or params.v_c > 0:
        p_inh = p_inh if p_inh is not None else Waveform.zeros(len(p_exc), p_exc.dt)
        current = photocurrent(p_exc, p_inh, constants.responsivity)
        return simulate_extended(current, params, constants, build_chatter(config)).trace
    return run(p_exc, p_inh, params.base, constants)


def _train_times(trace: SpikeTrace) -> np.ndarray:
    s = trace.spike_times
    return s[s >= PROBE_TRAIN_START] - PROBE_TRAIN_START


def _write_trace(w: _Writer, prefix: str, trace: SpikeTrace, p_exc: Waveform, p_inh: Optional[Waveform] = None):
    t = p_exc.times
    inh = p_inh.samples if p_inh is not None else np.zeros(len(p_exc))
    rows = (
        (_g(t[k] * 1e9), _g(p_exc.samples[k]), _g(inh[k]), _g(trace.v_m_trace.samples[k]),
         _g(trace.v_r_trace.samples[k]), _g(trace.output.samples[k]))
        for k in range(len(p_exc))
    )
    w.csv(f"{prefix}trace.csv", ["t_ns", "p_exc_w", "p_inh_w", "v_m_v", "v_r_v", "out_v"], rows)
    w.csv(f"{prefix}spikes.csv", ["spike_time_ns"], ((_g(x * 1e9),) for x in trace.spike_times))


# -- property checks -------------------------------------------------------------


def probe_properties(name: str, config: dict, trace: SpikeTrace, reference: Callable) -> dict:
    """Property results for a tuning scenario.  ``reference(other)`` runs
    another tuning scenario on the same base config."""
    dt = config["dt"]
    counts = spike_counts_in(trace, PROBE_WINDOWS)
    n = len(_train_times(trace))
    out = {}
    for prop in SCENARIOS[name].properties:
        if prop == "coincidence":
            out[prop] = counts[:2] == [0, 1]
        elif prop == "threshold_order":
            n_a = len(_train_times(reference("fig2a")))
            if name == "fig2b":
                out[prop] = n > n_a
            else:
                out[prop] = n < n_a
        elif prop == "five_inputs":
            tt = _train_times(trace)
            out[prop] = bool(n >= 1 and tt[0] >= 4e-9 and n <= PROBE_TRAIN_LEN // 5)
        elif prop == "membrane_leak":
            out[prop] = n > len(_train_times(reference("fig2a")))
        elif prop == "refractory_leak":
            out[prop] = n <= 1
        elif prop == "feedback_first_spike":
            ta = _train_times(reference("fig2a"))
            tf = _train_times(trace)
            out[prop] = bool(len(ta) and len(tf) and abs(tf[0] - ta[0]) <= dt)
        elif prop == "feedback_faster":
            out[prop] = n > len(_train_times(reference("fig2a")))
    return out


def second_difference_max(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.max(np.abs(np.diff(v, n=2)))) if v.size >= 3 else 0.0


def sweep_values(config: dict) -> np.ndarray:
    sw = config["sweep"]
    return np.linspace(float(sw["start"]), float(sw["stop"]), int(sw["num"]))


def sweep_point(config: dict, param: str, value: float) -> tuple:
    """(firing rate in Hz, spike count) for one sweep point."""
    if param not in SWEEP_PARAMS:
        raise DomainError(f"unknown sweep parameter {param!r}; valid: {', '.join(SWEEP_PARAMS)}")
    duration = float(config["sweep"]["duration"])
    cfg = config
    if param == "amplitude":
        amps = value
    else:
        section = "extended" if param in ("v_c", "v_sw") else "neuron"
        cfg = merge(config, {section: {param: float(value)}})
        amps = config["input"]["amplitude"]
    n = int(round(duration / cfg["dt"]))
    trace = run_neuron(cfg, Waveform(cfg["dt"], np.full(n, float(amps)), Unit.WATTS))
    return trace.n_spikes / duration, trace.n_spikes


def rate_curves(config: dict) -> dict:
    """{v_th: (amplitudes, rates, counts)} for the amplitude sweep."""
    amps = sweep_values(config)
    out = {}
    for v in config["sweep"]["v_th_values"]:
        cfg = merge(config, {"neuron": {"v_th": float(v)}})
        pts = [sweep_point(cfg, "amplitude", a) for a in amps]
        out[float(v)] = (amps, np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))
    return out


def rate_properties(curves: dict) -> dict:
    mono = all(bool(np.all(np.diff(r) >= 0)) for _, r, _ in curves.values())
    d2 = {v: second_difference_max(r) for v, (_, r, _) in curves.items()}
    low = min(d2)
    others = [d for v, d in d2.items() if v != low]
    return {"rate_monotone": mono, "smoothest_at_low_vth": all(d2[low] < d for d in others)}, d2


def pattern_runs(config: dict) -> dict:
    """{label: (spike times, steady rate, classified label or None, bursts)} for the presets."""
    constants = build_constants(config)
    chatter = build_chatter(config)
    dt = config["dt"]
    duration = float(config["input"]["duration"])
    current = Waveform(dt, np.full(int(round(duration / dt)), float(config["input"]["amplitude"])), Unit.AMPS)
    settle = min(PATTERN_SETTLE, duration / 4)
    out = {}
    for label in PatternLabel:
        s = simulate_extended(current, preset(label, config["neuron"]["vdd"]), constants, chatter).spike_times
        try:
            got = classify_pattern(s, (settle, duration))
        except UnclassifiableError:
            got = None
        steady = s[s >= settle]
        out[label] = (s, steady_rate(s, settle), got, len(split_bursts(steady)))
    return out


def pattern_properties(runs: dict) -> dict:
    def within(rate, target):
        return abs(rate - target) <= RATE_TOLERANCE * target

    return {
        "regular_rate": within(runs[PatternLabel.REGULAR][1], 10e6),
        "fast_rate": within(runs[PatternLabel.FAST][1], 100e6),
        "chattering_pattern": runs[PatternLabel.CHATTERING][2] is PatternLabel.CHATTERING,
    }


def inhibition_mesh(route: str) -> tuple:
    """(MeshConfig, PortMap) for the inhibition experiment.

    Input 0 always reaches the excitatory detector on output 0.  Input 1
    reaches the inhibitory detector on output 1 (``direct``) or is sent by
    a cross-state MZI to dummy output 2 (``detour``).
    """
    pm = PortMap((EXC, INH, DUMMY, DUMMY))
    if route == "detour":
        return IDENTITY.with_setting(DETOUR_MZI, CROSS), pm
    if route == "direct":
        return IDENTITY, pm
    raise DomainError(f"route must be 'detour' or 'direct', got {route!r}")


def inhibition_run(config: dict, route: str) -> tuple:
    probe = build_input(config)
    mesh, pm = inhibition_mesh(route)
    outs = propagate_waveforms([probe, probe, None, None], mesh)
    p_exc, p_inh = pm.detector_powers(outs)
    return run_neuron(config, p_exc, p_inh), p_exc, p_inh, (mesh, pm)


# -- running scenarios ---------------------------------------------------------


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run_scenario(name: str, user_config: Optional[dict] = None, out_dir=None, seed: Optional[int] = None) -> RunRecord:
    """Run a built-in scenario (or ``custom``) and write its artifacts under ``out_dir``."""
    if name == "custom":
        config = validate(merge(default_config(), user_config or {}))
    elif name in SCENARIOS:
        config = SCENARIOS[name].config(user_config)
    else:
        raise DomainError(f"unknown scenario {name!r}; valid: {', '.join(['custom', *SCENARIOS])}")
    if seed is not None:
        config["seed"] = int(seed)
    return run_config(name, config, out_dir)


def run_config(name: str, config: dict, out_dir=None) -> RunRecord:
    """Run scenario ``name`` with an already complete ``config`` snapshot."""
    out_dir = Path(out_dir if out_dir is not None else ".") / name
    w = _Writer(out_dir)
    kind = "custom" if name == "custom" else SCENARIOS[name].kind
    props, summary = {}, {}

    if kind in ("custom", "probe"):
        route = config["inhibition"]["route"]
        if route == "none":
            p_exc = build_input(config)
            trace = run_neuron(config, p_exc)
            p_inh = None
        else:
            trace, p_exc, p_inh, _ = inhibition_run(config, route)
        _write_trace(w, "", trace, p_exc, p_inh)
        summary = {"n_spikes": trace.n_spikes, "window_counts": spike_counts_in(trace, PROBE_WINDOWS)}
        if kind == "probe":
            base = merge(config, {"neuron": _base_biases(config, name)})

            def reference(other):
                cfg = merge(base, SCENARIOS[other].overrides)
                return run_neuron(cfg, build_input(cfg))

            props = probe_properties(name, config, trace, reference)
        elif trace.n_spikes == 0 and not np.any(p_exc.samples):
            props = {"rest": bool(np.all(trace.v_m_trace.samples == 0) and np.all(trace.v_r_trace.samples == 0))}

    elif kind == "sweep":
        curves = rate_curves(config)
        rows = []
        for v, (amps, rates, counts) in curves.items():
            rows += [(_g(v), _g(a), _g(r), int(c)) for a, r, c in zip(amps, rates, counts)]
        w.csv("rates.csv", ["v_th", "amplitude_w", "rate_hz", "spike_count"], rows)
        props, d2 = rate_properties(curves)
        summary = {"max_second_difference_hz": {f"{k:g}": v for k, v in d2.items()}}

    elif kind == "patterns":
        runs = pattern_runs(config)
        rows = []
        for label, (s, rate, got, nb) in runs.items():
            rows += [(label.value, _g(t * 1e9)) for t in s]
            summary[label.value] = {
                "steady_rate_hz": rate,
                "classified": got.value if got is not None else None,
                "n_spikes": int(s.size),
                "n_bursts": nb,
            }
        w.csv("spikes.csv", ["preset", "spike_time_ns"], rows)
        props = pattern_properties(runs)

    elif kind == "inhibition":
        ref_cfg = merge(config, {"neuron": _base_biases(config, name)})
        ref = run_neuron(ref_cfg, build_input(ref_cfg))
        for route in ("detour", "direct"):
            trace, p_exc, p_inh, (mesh, pm) = inhibition_run(config, route)
            _write_trace(w, f"{route}_", trace, p_exc, p_inh)
            w.json(f"{route}_mesh.json", {**mesh.to_record(), "port_roles": list(pm.roles)})
            summary[route] = {"n_spikes": trace.n_spikes, "window_counts": spike_counts_in(trace, PROBE_WINDOWS)}
            if route == "detour":
                _, inh_frac = delivered_fractions(mesh, pm)
                props["detour_dark"] = bool(inh_frac[1] == 0.0 and not np.any(p_inh.samples))
                props["detour_standard"] = bool(
                    trace.n_spikes == ref.n_spikes and np.allclose(trace.spike_times, ref.spike_times, atol=config["dt"])
                )
            else:
                props["direct_silent"] = trace.n_spikes == 0

    elif kind == "iris":
        ir = config["iris"]
        dataset = load_dataset(ir["dataset"])
        result = run_iris(dataset, ir["mode"], build_pipeline(config), config["seed"], ir["test_fraction"])
        rep = result.report
        for fname, writer in (
            ("eval.json", rep.write_json),
            ("eval.csv", rep.write_csv),
            ("confusion.csv", rep.write_confusion_csv),
            ("raster.csv", rep.write_raster_csv),
        ):
            writer(out_dir / fname)
            w.add(fname, out_dir / fname)
        result.mesh.to_json(out_dir / "mesh.json")
        w.add("mesh.json", out_dir / "mesh.json")
        by_id = {r.sample_id: r for r in rep.records}
        demo = [by_id[i] for i in demo_indices(dataset.labels, ir["demo_per_class"]) if i in by_id]
        w.csv(
            "demo_raster.csv",
            ["sample_id", "true", "predicted", "spike_time_ns"],
            ((r.sample_id, r.true, r.predicted, _g(t * 1e9)) for r in demo for t in r.spike_times),
        )
        rec = rep.recalls
        demo_err = sum(r.true != r.predicted for r in demo)
        props = {
            "iris_accuracy": rep.accuracy >= IRIS_MIN_ACCURACY,
            "setosa_recall": rec[2] >= rec[0] and rec[2] >= rec[1],
        }
        if ir["mode"] == "paper":
            props["demo_errors"] = demo_err <= 2
        summary = {
            "accuracy": rep.accuracy,
            "recalls": rec,
            "weights": [float(x) for x in result.weights],
            "v_th": rep.v_th,
            "class_bounds": list(rep.decode.class_bounds),
            "demo_misclassified": demo_err,
        }

    props = {k: bool(v) for k, v in props.items()}
    record = RunRecord(name, config, int(config["seed"]), w.artifacts, props, summary, _now())
    record.write(out_dir / "run_record.json")
    return record


def _base_biases(config: dict, name: str) -> dict:
    """Neuron biases of ``config`` with the scenario's own overrides undone."""
    own = SCENARIOS[name].overrides.get("neuron", {})
    base = default_config()["neuron"]
    return {k: base[k] for k in own}


def replay(record: RunRecord, out_dir) -> tuple:
    """Re-run ``record`` from its config snapshot into ``out_dir``.

    Returns ``(new_record, mismatched_artifact_names)``.
    """
    new = run_config(record.scenario, record.config, out_dir)
    bad = [
        name
        for name, art in record.artifacts.items()
        if name not in new.artifacts or new.artifacts[name]["sha256"] != art["sha256"]
    ]
    return new, bad
