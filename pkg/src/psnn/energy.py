"""Per-spike energy accounting over technology profiles."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .chatter import ExtendedTrace, PatternLabel, classify_pattern, split_bursts
from .errors import ProfileError, SchemaError, UnclassifiableError
from .neuron import SpikeTrace

CHATTER_KEYS = ("regular", "fast", "chatter_group")


@dataclass(frozen=True)
class TechnologyProfile:
    name: str
    node_nm: float
    max_rate: float
    spike_width: float
    input_capacitance: float
    energy_per_spike: float
    chatter_energies: Optional[dict] = None

    def __post_init__(self):
        for key in ("node_nm", "max_rate", "spike_width", "input_capacitance", "energy_per_spike"):
            value = getattr(self, key)
            if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
                raise ProfileError(f"profile {self.name!r}: {key} must be positive, got {value!r}")
        if self.chatter_energies is not None:
            missing = [k for k in CHATTER_KEYS if k not in self.chatter_energies]
            if missing:
                raise ProfileError(f"profile {self.name!r}: chatter_energies lacks {missing}")
            for k in CHATTER_KEYS:
                v = self.chatter_energies[k]
                if not (isinstance(v, (int, float)) and v > 0):
                    raise ProfileError(f"profile {self.name!r}: chatter energy {k} must be positive")

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "node_nm": self.node_nm,
            "max_rate": self.max_rate,
            "spike_width": self.spike_width,
            "input_capacitance": self.input_capacitance,
            "energy_per_spike": self.energy_per_spike,
        }
        if self.chatter_energies is not None:
            d["chatter_energies"] = dict(self.chatter_energies)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TechnologyProfile":
        if not isinstance(d, dict):
            raise ProfileError("profile must be a JSON object")
        required = ("name", "node_nm", "max_rate", "spike_width", "input_capacitance", "energy_per_spike")
        missing = [k for k in required if k not in d]
        if missing:
            raise ProfileError(f"profile is missing {missing}")
        unknown = set(d) - set(required) - {"chatter_energies"}
        if unknown:
            raise ProfileError(f"profile has unknown keys {sorted(unknown)}")
        return cls(**{k: d[k] for k in required}, chatter_energies=d.get("chatter_energies"))


FOUNDRY45 = TechnologyProfile(
    name="Foundry45",
    node_nm=45,
    max_rate=1e9,
    spike_width=1e-9,
    input_capacitance=901e-15,
    energy_per_spike=1.18e-12,
    chatter_energies={"regular": 12.84e-12, "fast": 4.28e-12, "chatter_group": 2.38e-12},
)

ASAP7 = TechnologyProfile(
    name="ASAP7",
    node_nm=7,
    max_rate=5e9,
    spike_width=0.2e-9,
    input_capacitance=0.128e-15,
    energy_per_spike=36.84e-15,
)


def builtin_profiles() -> list:
    return [FOUNDRY45, ASAP7]


def load_profile(path) -> TechnologyProfile:
    """One profile (a JSON object) or the first of a JSON list."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(data, list):
        if not data:
            raise ProfileError(f"{path}: empty profile list")
        data = data[0]
    return TechnologyProfile.from_dict(data)


def get_profile(name_or_path) -> TechnologyProfile:
    """A built-in profile by (case-insensitive) name, or a profile JSON file."""
    for p in builtin_profiles():
        if str(name_or_path).lower() == p.name.lower():
            return p
    path = Path(name_or_path)
    if path.suffix == ".json" or path.exists():
        return load_profile(path)
    names = ", ".join(p.name for p in builtin_profiles())
    raise ProfileError(f"unknown profile {name_or_path!r} (built-ins: {names})")


# -- accounting -------------------------------------------------------------


@dataclass(frozen=True)
class PatternSummary:
    """Spike count, burst count and pattern label of one neuron's output."""

    label: PatternLabel
    n_spikes: int
    n_groups: int = 0

    @classmethod
    def from_spikes(cls, spike_times, label: Optional[PatternLabel] = None) -> "PatternSummary":
        s = np.asarray(spike_times, dtype=float)
        if label is None:
            try:
                label = classify_pattern(s)
            except UnclassifiableError:
                # fewer than two spikes carry no pattern; bill them as regular
                label = PatternLabel.REGULAR
        groups = len(split_bursts(s)) if s.size else 0
        return cls(PatternLabel(label), int(s.size), groups)


@dataclass(frozen=True)
class EnergyReport:
    profile: str
    mode: str
    breakdown: dict
    spike_counts: dict
    patterns: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return math.fsum(self.breakdown.values())

    def to_dict(self) -> dict:
        return {
            "profile": self.profile,
            "mode": self.mode,
            "total_j": self.total,
            "breakdown_j": dict(self.breakdown),
            "spike_counts": dict(self.spike_counts),
            "patterns": dict(self.patterns),
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["item", "pattern", "spikes", "energy_j"])
            for key, e in self.breakdown.items():
                w.writerow([key, self.patterns.get(key, ""), self.spike_counts.get(key, ""), repr(e)])
            w.writerow(["total", "", sum(self.spike_counts.values()), repr(self.total)])


def _spikes_of(source):
    if isinstance(source, ExtendedTrace):
        return source.spike_times, source.trace.duration
    if isinstance(source, SpikeTrace):
        return source.spike_times, source.duration
    if isinstance(source, (int, np.integer)):
        if source < 0:
            raise SchemaError(f"spike count must be non-negative, got {source!r}")
        return int(source), None
    return np.asarray(source, dtype=float), None


def energy_of_run(
    sources,
    profile: TechnologyProfile,
    mode: str = "standard",
    *,
    baseline_power: float = 0.0,
    duration: Optional[float] = None,
) -> EnergyReport:
    """Bill spikes against ``profile``.

    ``sources`` is one item, a list (one per neuron) or a ``{name: item}``
    dict of SpikeTrace, ExtendedTrace, spike-time array, spike count or
    PatternSummary.
    ``standard`` bills every spike at ``energy_per_spike``; ``extended``
    bills Regular and Fast spikes at their own per-spike energies and
    Chattering output per burst.  ``baseline_power`` (W) times the run
    duration is added as a separate line; it defaults to zero.
    """
    if mode not in ("standard", "extended"):
        raise SchemaError(f"mode must be 'standard' or 'extended', got {mode!r}")
    if mode == "extended" and profile.chatter_energies is None:
        raise ProfileError(f"profile {profile.name!r} has no chatter energies for extended mode")
    if baseline_power < 0:
        raise SchemaError("baseline power must be non-negative")
    if isinstance(sources, dict):
        items = list(sources.items())
    else:
        seq = list(sources) if isinstance(sources, (list, tuple)) else [sources]
        items = [(f"neuron{i}", src) for i, src in enumerate(seq)]
    breakdown, counts, patterns = {}, {}, {}
    longest = 0.0
    for key, src in items:
        if isinstance(src, PatternSummary):
            summary, dur = src, None
        else:
            spikes, dur = _spikes_of(src)
            if isinstance(spikes, int):
                summary = PatternSummary(PatternLabel.REGULAR, spikes, 0)
                if mode == "extended":
                    raise SchemaError("extended mode needs spike times or a PatternSummary, not a bare count")
            else:
                summary = PatternSummary.from_spikes(spikes) if mode == "extended" else PatternSummary(
                    PatternLabel.REGULAR, int(spikes.size), 0
                )
        longest = max(longest, dur or 0.0)
        counts[key] = summary.n_spikes
        if mode == "standard":
            breakdown[key] = summary.n_spikes * profile.energy_per_spike
        else:
            ce = profile.chatter_energies
            patterns[key] = summary.label.value
            if summary.label is PatternLabel.CHATTERING:
                breakdown[key] = summary.n_groups * ce["chatter_group"]
            elif summary.label is PatternLabel.FAST:
                breakdown[key] = summary.n_spikes * ce["fast"]
            else:
                breakdown[key] = summary.n_spikes * ce["regular"]
    if baseline_power > 0:
        span = duration if duration is not None else longest
        breakdown["baseline"] = baseline_power * span
    return EnergyReport(profile.name, mode, breakdown, counts, patterns)


# -- comparison table --------------------------------------------------------

_PREFIXES = ((1e-15, "f"), (1e-12, "p"), (1e-9, "n"), (1e-6, "u"), (1e-3, "m"), (1.0, ""), (1e9, "G"))


def format_si(value: float, unit: str) -> str:
    """``901e-15, 'F'`` -> ``'901 fF'``; mantissa kept to 9 significant digits."""
    if value == 0:
        return f"0 {unit}"
    scale, prefix = _PREFIXES[0]
    for s, p in _PREFIXES:
        if abs(value) >= s:
            scale, prefix = s, p
    return f"{float(f'{value / scale:.9g}'):g} {prefix}{unit}"


def format_fixed(value: float, scale: float, unit: str) -> str:
    """``0.2e-9, 1e-9, 'ns'`` -> ``'0.2 ns'``."""
    return f"{float(f'{value / scale:.9g}'):g} {unit}"


@dataclass(frozen=True)
class ProfileComparison:
    spike_count: int
    profiles: tuple
    totals: tuple

    @property
    def ratio(self) -> float:
        """First profile's per-spike energy over the second's."""
        return self.profiles[0].energy_per_spike / self.profiles[1].energy_per_spike

    def rows(self) -> list:
        """(quantity, value per profile...) rows of the comparison table."""
        ps = self.profiles
        return [
            ("technology", *(f"{p.node_nm:g} nm" for p in ps)),
            ("max spike rate", *(format_si(p.max_rate, "Spike/s") for p in ps)),
            ("spike width", *(format_fixed(p.spike_width, 1e-9, "ns") for p in ps)),
            ("input capacitance", *(format_fixed(p.input_capacitance, 1e-15, "fF") for p in ps)),
            ("energy/spike", *(format_si(p.energy_per_spike, "J") for p in ps)),
            (f"total for {self.spike_count} spikes", *(format_si(t, "J") for t in self.totals)),
        ]

    def to_text(self) -> str:
        header = ("quantity", *(p.name for p in self.profiles))
        table = [header, *self.rows()]
        widths = [max(len(str(r[i])) for r in table) for i in range(len(header))]
        lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in table]
        lines.append(f"energy ratio {self.profiles[0].name}/{self.profiles[1].name}: {self.ratio:.1f}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "spike_count": self.spike_count,
            "profiles": [p.to_dict() for p in self.profiles],
            "totals_j": list(self.totals),
            "ratio": self.ratio,
        }


def compare_profiles(spike_count: int = 1, profiles: Optional[Sequence[TechnologyProfile]] = None) -> ProfileComparison:
    if spike_count < 0:
        raise SchemaError(f"spike count must be non-negative, got {spike_count!r}")
    ps = tuple(profiles) if profiles is not None else tuple(builtin_profiles())
    if len(ps) < 2:
        raise ProfileError("comparison needs at least two profiles")
    totals = tuple(energy_of_run(int(spike_count), p).total for p in ps)
    return ProfileComparison(int(spike_count), ps, totals)
