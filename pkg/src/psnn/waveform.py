"""Uniformly sampled analog signals and their CSV / JSON forms."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DomainError, ParseError, SchemaError, ShapeError


class Unit(str, Enum):
    WATTS = "watts"
    VOLTS = "volts"
    AMPS = "amps"


@dataclass(frozen=True, eq=False)
class Waveform:
    """A signal sampled every ``dt`` seconds starting at t = 0.

    ``samples`` is stored as a read-only float64 array so a Waveform can be
    shared between runs without copying.
    """

    dt: float
    samples: np.ndarray
    unit: Unit = Unit.WATTS

    def __post_init__(self):
        unit = Unit(self.unit)
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError(f"dt must be positive and finite, got {self.dt!r}")
        arr = np.array(self.samples, dtype=float).reshape(-1)
        if unit is Unit.WATTS and arr.size and arr.min() < 0:
            raise DomainError("optical power samples must be non-negative")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "unit", unit)

    @classmethod
    def zeros(cls, n: int, dt: float, unit: Unit = Unit.WATTS) -> "Waveform":
        return cls(dt, np.zeros(n), unit)

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return (
            self.dt == other.dt
            and self.unit == other.unit
            and np.array_equal(self.samples, other.samples)
        )

    @property
    def duration(self) -> float:
        return len(self) * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.dt

    def check_aligned(self, other: "Waveform") -> None:
        if len(self) != len(other) or not math.isclose(self.dt, other.dt, rel_tol=1e-12):
            raise ShapeError(
                f"waveforms not aligned: {len(self)} samples @ {self.dt!r} s "
                f"vs {len(other)} samples @ {other.dt!r} s"
            )

    def scaled(self, factor: float) -> "Waveform":
        return Waveform(self.dt, self.samples * factor, self.unit)

    def padded(self, n: int) -> "Waveform":
        """Zero-extend (or truncate) to exactly ``n`` samples."""
        out = np.zeros(n)
        m = min(n, len(self))
        out[:m] = self.samples[:m]
        return Waveform(self.dt, out, self.unit)

    def concat(self, other: "Waveform") -> "Waveform":
        if self.unit != other.unit or not math.isclose(self.dt, other.dt, rel_tol=1e-12):
            raise ShapeError("cannot concatenate waveforms with different dt or unit")
        return Waveform(self.dt, np.concatenate([self.samples, other.samples]), self.unit)

    def __add__(self, other: "Waveform") -> "Waveform":
        self.check_aligned(other)
        if self.unit != other.unit:
            raise ShapeError("cannot add waveforms with different units")
        return Waveform(self.dt, self.samples + other.samples, self.unit)

    # -- serialisation -------------------------------------------------

    def to_record(self) -> dict:
        return {"dt": self.dt, "unit": self.unit.value, "samples": self.samples.tolist()}

    @classmethod
    def from_record(cls, record: dict) -> "Waveform":
        missing = {"dt", "unit", "samples"} - set(record)
        if missing:
            raise SchemaError(f"run record missing keys: {sorted(missing)}")
        return cls(float(record["dt"]), np.asarray(record["samples"], dtype=float), Unit(record["unit"]))

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_record()))

    @classmethod
    def from_json(cls, path) -> "Waveform":
        return cls.from_record(json.loads(Path(path).read_text()))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "value"])
            for t, v in zip(self.times, self.samples):
                w.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, unit: Unit = Unit.WATTS) -> "Waveform":
        times, values = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["time_s", "value"]:
                raise SchemaError(f"{path}: expected header time_s,value, got {header}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    t, v = (float(x) for x in row)
                except ValueError as exc:
                    raise ParseError(str(exc), path=path, line=lineno) from None
                times.append(t)
                values.append(v)
        if len(times) < 2:
            raise SchemaError(f"{path}: need at least two samples to infer dt")
        dt = times[1] - times[0]
        return cls(dt, np.array(values), unit)


def pulse_train(
    starts,
    *,
    n: int,
    dt: float,
    peak: float,
    width: float,
    unit: Unit = Unit.WATTS,
) -> Waveform:
    """Sum of raised-cosine (sin^2) pulses of base ``width`` starting at ``starts``.

    Each pulse is zero at both ends of its slot, so pulses packed back to back
    at a period equal to ``width`` remain separable by an upward-crossing count.
    """
    samples = np.zeros(n)
    k = np.arange(int(round(width / dt)) + 1)
    shape = peak * np.sin(np.pi * k / (k.size - 1)) ** 2
    for t0 in starts:
        i0 = int(round(t0 / dt))
        lo, hi = max(i0, 0), min(i0 + shape.size, n)
        if hi > lo:
            samples[lo:hi] += shape[lo - i0 : hi - i0]
    return Waveform(dt, samples, unit)
