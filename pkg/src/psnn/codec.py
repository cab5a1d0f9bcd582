"""Rate coding of feature values, header framing, spike counting and class decoding."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, ParseError, SchemaError
from .neuron import DEFAULT_DT
from .waveform import Waveform, pulse_train

FEATURES = ("sepal_length", "sepal_width", "petal_length", "petal_width")
LABEL = "label"
CLASS_NAMES = {0: "virginica", 1: "versicolor", 2: "setosa"}


@dataclass(frozen=True)
class EncodingSpec:
    """Framing of one sample: a header slot followed by the rate-coded payload.

    ``window`` is the full frame (header included); the payload occupies
    ``[header_length, window)`` when ``header`` is on.
    """

    window: float = 400e-9
    pulse_width: float = 1e-9
    peak_power: float = 0.2e-3
    max_rate: float = 1e9
    header: bool = True
    header_length: float = 50e-9
    dt: float = DEFAULT_DT

    def __post_init__(self):
        for name in ("window", "pulse_width", "peak_power", "max_rate", "header_length", "dt"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be positive, got {value!r}")
        if self.pulse_width * self.max_rate > 1.0 + 1e-9:
            raise DomainError("pulse_width * max_rate must not exceed 1")
        if self.window < 10 * self.pulse_width:
            raise DomainError("window must hold at least 10 pulse widths")
        if self.header and self.header_length >= self.window:
            raise DomainError("header must be shorter than the window")

    @property
    def payload_start(self) -> float:
        return self.header_length if self.header else 0.0

    @property
    def payload_duration(self) -> float:
        return self.window - self.payload_start

    @property
    def n_samples(self) -> int:
        return int(round(self.window / self.dt))


def pulse_count(value: float, spec: EncodingSpec) -> int:
    """Number of payload pulses that encode ``value``."""
    return int(round(value * spec.max_rate * spec.payload_duration))


def rate_encode(value: float, spec: EncodingSpec = EncodingSpec()) -> Waveform:
    """Evenly spaced pulses at ``value * max_rate`` over the payload duration.

    The result spans the payload only (starts at t = 0); ``add_header`` moves
    it into the frame.
    """
    if not (0.0 <= value <= 1.0):
        raise DomainError(f"value must be normalized to [0, 1], got {value!r}")
    n = int(round(spec.payload_duration / spec.dt))
    count = pulse_count(value, spec)
    if count == 0:
        return Waveform.zeros(n, spec.dt)
    period = 1.0 / (value * spec.max_rate)
    starts = [i * period for i in range(count)]
    return pulse_train(starts, n=n, dt=spec.dt, peak=spec.peak_power, width=spec.pulse_width)


def header_waveform(spec: EncodingSpec = EncodingSpec()) -> Waveform:
    """The header slot: one marker pulse at its start."""
    n = int(round(spec.header_length / spec.dt))
    return pulse_train([0.0], n=n, dt=spec.dt, peak=spec.peak_power, width=spec.pulse_width)


def add_header(w: Waveform, spec: EncodingSpec = EncodingSpec()) -> Waveform:
    if not spec.header:
        raise DomainError("add_header called with header disabled in the encoding spec")
    return header_waveform(spec).concat(w)


def encode_frame(value: float, spec: EncodingSpec = EncodingSpec()) -> Waveform:
    """One complete frame: header (if enabled) plus payload, ``window`` long."""
    payload = rate_encode(value, spec)
    return add_header(payload, spec) if spec.header else payload


@dataclass(frozen=True)
class DecodeSpec:
    """Detection level for counting output spikes and class boundaries.

    ``class_bounds = (b1, b2)``: count < b1 gives class 0, b1 <= count < b2
    gives class 1, otherwise class 2.  The default is 0 | 1-2 | >=3.
    """

    count_threshold_volts: float = 0.075
    class_bounds: tuple = (1, 3)

    def __post_init__(self):
        b = tuple(int(x) for x in self.class_bounds)
        if len(b) != 2 or not 0 < b[0] < b[1]:
            raise DomainError(f"class bounds must be two strictly increasing positive counts, got {self.class_bounds!r}")
        object.__setattr__(self, "class_bounds", b)
        if not self.count_threshold_volts > 0:
            raise DomainError("count threshold must be positive")


def count_spikes(out: Waveform, spec: DecodeSpec = DecodeSpec(), window: Optional[tuple] = None) -> int:
    """Upward crossings of the detection level in ``[t0, t1)``.

    A crossing happens between samples k-1 and k when sample k-1 is below the
    level and sample k is at or above it; it is counted at time ``k * dt``.
    """
    x = out.samples
    t0, t1 = (0.0, out.duration) if window is None else window
    if not t1 > t0:
        raise DomainError(f"window end must exceed start, got {window!r}")
    level = spec.count_threshold_volts
    k = np.nonzero((x[1:] >= level) & (x[:-1] < level))[0] + 1
    if x.size and x[0] >= level:
        k = np.concatenate([[0], k])
    t = k * out.dt
    return int(np.count_nonzero((t >= t0 - 1e-15) & (t < t1 - 1e-15)))


def decode_class(count: int, spec: DecodeSpec = DecodeSpec()) -> int:
    if count < 0:
        raise DomainError(f"spike count must be non-negative, got {count!r}")
    b1, b2 = spec.class_bounds
    return 0 if count < b1 else (1 if count < b2 else 2)


# -- datasets -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature rows, integer labels and per-feature min/max for normalization."""

    features: np.ndarray
    labels: np.ndarray
    feature_range: tuple = field(default=None)
    names: tuple = FEATURES

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=int)
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise SchemaError(f"features {x.shape} and labels {y.shape} do not line up")
        if np.any((y < 0) | (y > 2)):
            raise SchemaError("labels must be 0, 1 or 2")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        if self.feature_range is None and x.shape[0]:
            object.__setattr__(self, "feature_range", (x.min(axis=0), x.max(axis=0)))

    def __len__(self) -> int:
        return int(self.labels.size)

    def subset(self, idx) -> "Dataset":
        """Rows ``idx``; the normalization range is kept from the parent."""
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.features[idx], self.labels[idx], self.feature_range, self.names)

    def with_range_of(self, other: "Dataset") -> "Dataset":
        return Dataset(self.features, self.labels, other.feature_range, self.names)

    def normalized(self) -> np.ndarray:
        """Features min-max scaled to [0, 1]; constant columns map to 0."""
        lo, hi = self.feature_range
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        z = np.where(span > 0, (self.features - lo) / safe, 0.0)
        return np.clip(z, 0.0, 1.0)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=3)


def load_dataset(path=None) -> Dataset:
    """Read a CSV with four feature columns and a ``label`` column.

    ``path=None`` loads the bundled Iris copy (0 = virginica, 1 = versicolor,
    2 = setosa).
    """
    if path is None:
        with resources.as_file(resources.files("psnn.data") / "iris.csv") as p:
            return load_dataset(p)
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if len(header) != len(FEATURES) + 1:
            raise SchemaError(f"{path}: expected {len(FEATURES) + 1} columns, got {len(header)}")
        if header[-1] != LABEL:
            raise SchemaError(f"{path}: last column must be {LABEL!r}, got {header[-1]!r}")
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}: line {lineno} has {len(row)} columns, expected {len(header)}")
            try:
                rows.append([float(c) for c in row[:-1]])
                label = float(row[-1])
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from None
            if label not in (0.0, 1.0, 2.0):
                raise ParseError(f"label must be 0, 1 or 2, got {row[-1]!r}", path=path, line=lineno)
            if not all(math.isfinite(v) for v in rows[-1]):
                raise ParseError("non-finite feature value", path=path, line=lineno)
            labels.append(int(label))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return Dataset(np.array(rows), np.array(labels), names=tuple(header[:-1]))


def encode_sample(values: Sequence[float], spec: EncodingSpec = EncodingSpec()) -> list:
    """One framed waveform per normalized feature value."""
    return [encode_frame(float(v), spec) for v in values]
