"""Offline weight training and simulator-in-the-loop evaluation of the Iris pipeline.

Training fits a rate-domain surrogate (firing rate ~ max(0, gain * w.x + offset))
over the weight vectors the mesh can realise; the spiking simulator is only
used afterwards, to pick the neuron bias and the spike-count class bounds.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .codec import (
    CLASS_NAMES,
    Dataset,
    DecodeSpec,
    EncodingSpec,
    count_spikes,
    decode_class,
    encode_sample,
)
from .errors import DomainError, TrainingError
from .mesh import MeshConfig, PortMap, program_weights, propagate_waveforms
from .neuron import DEFAULT_CONSTANTS, STANDARD, ModelConstants, NeuronParams, run

DEFAULT_BOUNDS = (1, 3)
N_CLASSES = 3


# -- surrogate training -----------------------------------------------------


def ordinal_accuracy(scores, labels) -> float:
    """Best accuracy of ``score -> class`` with two increasing cut points."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    order = np.argsort(s, kind="stable")
    s, y = s[order], y[order]
    # cut positions are indices into the sorted array where the score changes
    cuts = [0] + [i for i in range(1, s.size) if s[i] > s[i - 1]] + [s.size]
    onehot = np.eye(N_CLASSES, dtype=int)[y]
    cum = np.vstack([np.zeros(N_CLASSES, dtype=int), np.cumsum(onehot, axis=0)])[cuts]
    # hits(a, b) = cum[a,0] - cum[a,1] + cum[b,1] - cum[b,2] + total_2, best over a <= b
    lead = np.maximum.accumulate(cum[:, 0] - cum[:, 1])
    hits = lead + cum[:, 1] - cum[:, 2] + cum[-1, 2]
    return int(hits.max()) / s.size


def class_separation(scores, labels) -> float:
    """Smallest gap between consecutive class means over the pooled spread."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    present = [k for k in range(N_CLASSES) if np.any(y == k)]
    means = [s[y == k].mean() for k in present]
    spread = math.sqrt(np.mean([s[y == k].var() for k in present])) or 1.0
    return min(b - a for a, b in zip(means, means[1:])) / spread


@dataclass(frozen=True)
class Surrogate:
    """Rate-domain readout: rate = max(0, gain * (w . x) + offset)."""

    weights: np.ndarray
    gain: float
    offset: float
    accuracy: float
    separation: float

    def rate(self, x) -> np.ndarray:
        return np.maximum(0.0, self.gain * (np.asarray(x, dtype=float) @ self.weights) + self.offset)


def sign_pattern(train_set: Dataset) -> np.ndarray:
    """Signs of a least-squares linear fit of the class index (with intercept)."""
    z = train_set.normalized()
    a = np.column_stack([z, np.ones(len(train_set))])
    coef = np.linalg.lstsq(a, train_set.labels.astype(float), rcond=None)[0][:-1]
    return np.sign(coef).astype(int)


def _simplex(n: int, total: float, step: float):
    """Grid points of ``n`` values in [step, 1] summing to ``total``."""
    k = int(round(total / step))
    for parts in itertools.product(range(1, int(round(1 / step)) + 1), repeat=n - 1):
        last = k - sum(parts)
        if 1 <= last <= round(1 / step):
            yield np.array([*parts, last]) * step


def feasible_candidates(signs, step: float = 0.05):
    """Weight vectors with the given sign pattern the mesh can realise.

    With every input lit, the powers reaching the excitatory (inhibitory)
    detectors add up to a whole number of output ports, so the positive and
    negative weights must each sum to an integer.
    """
    signs = np.asarray(signs, dtype=int)
    pos, neg = np.nonzero(signs > 0)[0], np.nonzero(signs < 0)[0]
    pos_totals = range(1, pos.size + 1) if pos.size else [0]
    neg_totals = range(1, neg.size + 1) if neg.size else [0]
    for p_total, n_total in itertools.product(pos_totals, neg_totals):
        p_grid = list(_simplex(pos.size, p_total, step)) if pos.size else [np.zeros(0)]
        n_grid = list(_simplex(neg.size, n_total, step)) if neg.size else [np.zeros(0)]
        for p, q in itertools.product(p_grid, n_grid):
            w = np.zeros(signs.size)
            w[pos], w[neg] = p, -q
            yield np.round(w, 10)


def fit_surrogate(train_set: Dataset, step: float = 0.05) -> Surrogate:
    if len(train_set) == 0:
        raise TrainingError("training split is empty")
    if np.unique(train_set.labels).size < 2:
        raise TrainingError("training split holds a single class")
    signs = sign_pattern(train_set)
    n_pos, n_neg = int(np.sum(signs > 0)), int(np.sum(signs < 0))
    if (n_pos, n_neg) != (2, 2):
        warnings.warn(f"surrogate sign pattern is {n_pos} positive / {n_neg} negative, not 2 / 2", stacklevel=2)
    z = train_set.normalized()
    y = train_set.labels
    best = None
    for w in feasible_candidates(signs, step):
        s = z @ w
        key = (ordinal_accuracy(s, y), class_separation(s, y))
        if best is None or key > best[0]:
            best = (key, w)
    if best is None:
        raise TrainingError("no feasible weight vector for the fitted sign pattern")
    (acc, sep), w = best
    s = z @ w
    gain, offset = np.polyfit(s, y.astype(float), 1)
    return Surrogate(w, float(gain), float(offset), acc, sep)


def train_surrogate(train_set: Dataset, step: float = 0.05) -> np.ndarray:
    """Signed weights in [-1, 1], realisable by the mesh, from the rate surrogate."""
    return fit_surrogate(train_set, step).weights


# -- simulator-in-the-loop evaluation -------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the per-sample simulation needs besides the weights."""

    encoding: EncodingSpec = EncodingSpec()
    decode: DecodeSpec = DecodeSpec()
    params: NeuronParams = STANDARD
    constants: ModelConstants = DEFAULT_CONSTANTS
    v_th_grid: tuple = (0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75)
    tune_bounds: bool = True

    @property
    def payload_window(self) -> tuple:
        return (self.encoding.payload_start, self.encoding.window)


@dataclass(frozen=True)
class SampleRecord:
    sample_id: int
    true: int
    predicted: int
    spike_count: int
    spike_times: tuple = ()


@dataclass(frozen=True, eq=False)
class EvalReport:
    records: tuple
    decode: DecodeSpec
    weights: np.ndarray
    v_th: float
    seed: int
    mode: str = "paper"
    meta: dict = field(default_factory=dict)

    @property
    def confusion(self) -> np.ndarray:
        """Rows are true classes, columns predicted classes."""
        m = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
        for r in self.records:
            m[r.true, r.predicted] += 1
        return m

    @property
    def accuracy(self) -> float:
        m = self.confusion
        return float(np.trace(m) / m.sum()) if m.sum() else 0.0

    @property
    def recalls(self) -> list:
        m = self.confusion
        return [float(m[k, k] / m[k].sum()) if m[k].sum() else float("nan") for k in range(N_CLASSES)]

    @property
    def counts(self) -> np.ndarray:
        return np.array([r.spike_count for r in self.records], dtype=int)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.true for r in self.records], dtype=int)

    def redecode(self, decode: DecodeSpec) -> "EvalReport":
        recs = tuple(replace(r, predicted=decode_class(r.spike_count, decode)) for r in self.records)
        return replace(self, records=recs, decode=decode)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "accuracy": self.accuracy,
            "recalls": self.recalls,
            "confusion": self.confusion.tolist(),
            "class_names": [CLASS_NAMES[k] for k in range(N_CLASSES)],
            "weights": [float(x) for x in self.weights],
            "v_th": self.v_th,
            "class_bounds": list(self.decode.class_bounds),
            "count_threshold_volts": self.decode.count_threshold_volts,
            "meta": self.meta,
            "samples": [
                {"sample_id": r.sample_id, "true": r.true, "predicted": r.predicted, "spike_count": r.spike_count}
                for r in self.records
            ],
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sample_id", "true", "predicted", "spike_count"])
            for r in self.records:
                w.writerow([r.sample_id, r.true, r.predicted, r.spike_count])

    def write_confusion_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["true\\predicted", *(CLASS_NAMES[k] for k in range(N_CLASSES))])
            for k, row in enumerate(self.confusion):
                w.writerow([CLASS_NAMES[k], *row.tolist()])

    def write_raster_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sample_id", "spike_time_ns"])
            for r in self.records:
                for t in r.spike_times:
                    w.writerow([r.sample_id, f"{t * 1e9:.4f}"])


def simulate_sample(values, config: MeshConfig, port_map: PortMap, pipeline: PipelineConfig, polarity: int = 1):
    """Spike count and payload spike times for one normalized feature row.

    ``polarity=-1`` wires the excitatory ports to the inhibitory photodiode
    and vice versa.
    """
    frames = encode_sample(values, pipeline.encoding)
    outputs = propagate_waveforms(frames, config)
    p_exc, p_inh = port_map.detector_powers(outputs)
    if polarity < 0:
        p_exc, p_inh = p_inh, p_exc
    trace = run(p_exc, p_inh, pipeline.params, pipeline.constants)
    t0, t1 = pipeline.payload_window
    n = count_spikes(trace.output, pipeline.decode, (t0, t1))
    s = trace.spike_times
    return n, tuple(float(x) for x in s[(s >= t0) & (s < t1)])


def evaluate(
    weights,
    eval_set: Dataset,
    pipeline: PipelineConfig = PipelineConfig(),
    *,
    seed: int = 0,
    programmed: Optional[tuple] = None,
    polarity: int = 1,
    sample_ids: Optional[Sequence[int]] = None,
    mode: str = "paper",
) -> EvalReport:
    """Encode, propagate, spike and decode every sample of ``eval_set``.

    ``programmed`` supplies a ready ``(MeshConfig, PortMap)``; otherwise the
    weights are programmed here (deterministically, from ``seed``).
    """
    w = np.asarray(weights, dtype=float)
    config, port_map = programmed if programmed is not None else program_weights(w, seed=seed)
    z = eval_set.normalized()
    ids = list(range(len(eval_set))) if sample_ids is None else list(sample_ids)
    if len(ids) != len(eval_set):
        raise DomainError("sample_ids must match the evaluation set length")
    records = []
    for sid, row, label in zip(ids, z, eval_set.labels):
        n, times = simulate_sample(row, config, port_map, pipeline, polarity)
        records.append(SampleRecord(int(sid), int(label), decode_class(n, pipeline.decode), n, times))
    return EvalReport(tuple(records), pipeline.decode, w, pipeline.params.v_th, seed, mode)


def tune_decode_bounds(reports, grid_max: Optional[int] = None) -> DecodeSpec:
    """Class bounds maximizing accuracy over the pooled reports.

    Every ``1 <= b1 < b2 <= grid_max`` is tried; ties go to the bounds
    closest to the default 0 | 1-2 | >=3 rule, then to the smallest bounds.
    """
    reports = [reports] if isinstance(reports, EvalReport) else list(reports)
    counts = np.concatenate([r.counts for r in reports]) if reports else np.zeros(0, dtype=int)
    labels = np.concatenate([r.labels for r in reports]) if reports else np.zeros(0, dtype=int)
    if counts.size == 0:
        raise DomainError("validation split is empty")
    base = reports[0].decode
    top = int(counts.max()) + 1 if grid_max is None else int(grid_max)
    top = max(top, DEFAULT_BOUNDS[1])
    best = None
    for b1 in range(1, top):
        for b2 in range(b1 + 1, top + 1):
            pred = np.where(counts < b1, 0, np.where(counts < b2, 1, 2))
            hits = int(np.count_nonzero(pred == labels))
            dist = abs(b1 - DEFAULT_BOUNDS[0]) + abs(b2 - DEFAULT_BOUNDS[1])
            key = (-hits, dist, b1, b2)
            if best is None or key < best:
                best = key
    return DecodeSpec(base.count_threshold_volts, (best[2], best[3]))


# -- complete runs ----------------------------------------------------------


def split_indices(labels, test_fraction: float = 0.2, seed: int = 0) -> tuple:
    """Stratified, seeded (train, test) index arrays."""
    if not 0.0 < test_fraction < 1.0:
        raise DomainError(f"test fraction must be in (0, 1), got {test_fraction!r}")
    y = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for k in np.unique(y):
        idx = rng.permutation(np.nonzero(y == k)[0])
        n_test = int(round(test_fraction * idx.size))
        test += idx[:n_test].tolist()
        train += idx[n_test:].tolist()
    return np.array(sorted(train), dtype=int), np.array(sorted(test), dtype=int)


def demo_indices(labels, per_class: int = 5) -> np.ndarray:
    """``per_class`` evenly spaced samples of each class, grouped by class."""
    y = np.asarray(labels, dtype=int)
    out = []
    for k in range(N_CLASSES):
        idx = np.nonzero(y == k)[0]
        if idx.size < per_class:
            raise DomainError(f"class {k} has only {idx.size} samples")
        pick = np.linspace(0, idx.size - 1, per_class).round().astype(int)
        out += idx[pick].tolist()
    return np.array(out, dtype=int)


@dataclass(frozen=True, eq=False)
class IrisRun:
    weights: np.ndarray
    surrogate: Surrogate
    mesh: MeshConfig
    port_map: PortMap
    report: EvalReport
    tuning: dict


def tune_pipeline(weights, train_set: Dataset, pipeline: PipelineConfig, programmed: tuple, seed: int = 0):
    """Pick the neuron bias and class bounds on the training split.

    Returns ``(pipeline, report_on_train, table)`` where ``table`` maps each
    tried ``v_th`` to its tuned accuracy.
    """
    grid = pipeline.v_th_grid or (pipeline.params.v_th,)
    best, table = None, {}
    for v in grid:
        p = replace(pipeline, params=pipeline.params.with_(v_th=float(v)))
        rep = evaluate(weights, train_set, p, seed=seed, programmed=programmed)
        if pipeline.tune_bounds:
            rep = rep.redecode(tune_decode_bounds(rep))
            p = replace(p, decode=rep.decode)
        table[float(v)] = rep.accuracy
        if best is None or rep.accuracy > best[2].accuracy:
            best = (v, p, rep)
    return best[1], best[2], table


def run_iris(
    dataset: Dataset,
    mode: str = "paper",
    pipeline: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    test_fraction: float = 0.2,
) -> IrisRun:
    """Train, program the mesh, tune on the training split and evaluate.

    ``paper`` trains, tunes and evaluates on all samples; ``split`` uses a
    stratified seeded split with normalization taken from the training part.
    """
    if mode == "paper":
        train_set = dataset
        eval_set, eval_ids = dataset, np.arange(len(dataset))
    elif mode == "split":
        tr, te = split_indices(dataset.labels, test_fraction, seed)
        base = Dataset(dataset.features[tr], dataset.labels[tr], names=dataset.names)
        train_set = base
        eval_set, eval_ids = dataset.subset(te).with_range_of(base), te
    else:
        raise DomainError(f"mode must be 'paper' or 'split', got {mode!r}")
    sur = fit_surrogate(train_set)
    programmed = program_weights(sur.weights, seed=seed)
    tuned, train_rep, table = tune_pipeline(sur.weights, train_set, pipeline, programmed, seed)
    if mode == "paper":
        rep = replace(train_rep, mode=mode)
    else:
        rep = evaluate(sur.weights, eval_set, tuned, seed=seed, programmed=programmed, sample_ids=eval_ids, mode=mode)
    meta = {
        "n_train": len(train_set),
        "n_eval": len(eval_set),
        "port_roles": list(programmed[1].roles),
        "v_th_accuracy": {f"{k:g}": v for k, v in table.items()},
        "surrogate": {"gain": sur.gain, "offset": sur.offset, "accuracy": sur.accuracy},
    }
    rep = replace(rep, meta=meta)
    return IrisRun(sur.weights, sur, programmed[0], programmed[1], rep, table)
