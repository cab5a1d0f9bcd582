"""4x4 MZI synaptic mesh: transfer matrices, propagation and weight programming.

Layout ``rect4`` is the rectangular (Clements) arrangement of six MZIs.  Each
MZI couples modes ``(row, row + 1)``; columns alternate between the pairs
(0,1)+(2,3) and (1,2)::

    col:   0       1       2       3
         (0,1)           (0,1)
                 (1,2)           (1,2)
         (2,3)           (2,3)

Inputs from independent lasers add in power (``|U|^2 p``); coherent field
propagation is provided for completeness.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, ParseError, ProgrammingError, SchemaError, ShapeError
from .waveform import Unit, Waveform

N_MODES = 4
LAYOUT = "rect4"
# (row, col) of every MZI, in the order light meets them
POSITIONS = ((0, 0), (2, 0), (1, 1), (0, 2), (2, 2), (1, 3))
TWO_PI = 2.0 * math.pi

@dataclass(frozen=True)
class MZISetting:
    """Internal phase ``theta`` and external phase ``phi`` (radians, mod 2 pi)."""

    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        for name in ("theta", "phi"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value % TWO_PI)


BAR = MZISetting(0.0, 0.0)
CROSS = MZISetting(math.pi, 0.0)


def mzi_transfer(s: MZISetting) -> np.ndarray:
    """2x2 transfer matrix: phase ``phi`` on port 0, coupler, ``theta``, coupler.

    The second coupler is the adjoint of the first so that ``theta = 0`` is the
    bar state: ``|t_bar|^2 = cos^2(theta/2)``.
    """
    # closed form of coupler . diag(e^{i theta}, 1) . coupler^H
    c, t = math.cos(s.theta / 2.0), math.sin(s.theta / 2.0)
    # exact zeros at the bar and cross endpoints (cos(pi/2) is 6e-17 in floats)
    c = 0.0 if abs(c) < 1e-15 else c
    t = 0.0 if abs(t) < 1e-15 else t
    core = np.exp(0.5j * s.theta) * np.array([[c, t], [-t, c]])
    return core @ np.diag([np.exp(1j * s.phi), 1.0])


@dataclass(frozen=True)
class MeshConfig:
    """Phase settings of the six MZIs plus an optional uniform power loss per MZI."""

    settings: tuple = tuple(BAR for _ in POSITIONS)
    loss: float = 0.0
    layout: str = LAYOUT

    def __post_init__(self):
        if self.layout != LAYOUT:
            raise SchemaError(f"unknown mesh layout {self.layout!r}; only {LAYOUT!r} is supported")
        settings = tuple(s if isinstance(s, MZISetting) else MZISetting(*s) for s in self.settings)
        if len(settings) != len(POSITIONS):
            raise ShapeError(f"{LAYOUT} needs {len(POSITIONS)} MZI settings, got {len(settings)}")
        if not 0.0 <= self.loss < 1.0:
            raise DomainError(f"loss must be in [0, 1), got {self.loss!r}")
        object.__setattr__(self, "settings", settings)

    @classmethod
    def from_phases(cls, thetas: Sequence[float], phis: Sequence[float], loss: float = 0.0) -> "MeshConfig":
        return cls(tuple(MZISetting(t, p) for t, p in zip(thetas, phis)), loss)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "MeshConfig":
        return cls.from_phases(rng.uniform(0, TWO_PI, len(POSITIONS)), rng.uniform(0, TWO_PI, len(POSITIONS)))

    def with_setting(self, index: int, setting: MZISetting) -> "MeshConfig":
        settings = list(self.settings)
        settings[index] = setting
        return MeshConfig(tuple(settings), self.loss)

    def to_record(self) -> dict:
        mzis = [
            {"row": r, "col": c, "theta": s.theta, "phi": s.phi}
            for (r, c), s in zip(POSITIONS, self.settings)
        ]
        return {"layout": self.layout, "loss": self.loss, "mzis": mzis}

    @classmethod
    def from_record(cls, record: dict) -> "MeshConfig":
        if record.get("layout") != LAYOUT:
            raise SchemaError(f"unknown mesh layout {record.get('layout')!r}")
        try:
            by_pos = {(int(m["row"]), int(m["col"])): MZISetting(float(m["theta"]), float(m["phi"])) for m in record["mzis"]}
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad MZI entry in mesh config: {exc}") from None
        if set(by_pos) != set(POSITIONS):
            raise SchemaError(f"mesh config must list MZIs at {sorted(POSITIONS)}")
        return cls(tuple(by_pos[p] for p in POSITIONS), float(record.get("loss", 0.0)))

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_record(), indent=2))

    @classmethod
    def from_json(cls, path) -> "MeshConfig":
        return cls.from_record(json.loads(Path(path).read_text()))


IDENTITY = MeshConfig()


def mesh_unitary(config: MeshConfig) -> np.ndarray:
    """4x4 transfer matrix (unitary when ``loss == 0``)."""
    u = np.eye(N_MODES, dtype=complex)
    amp = math.sqrt(1.0 - config.loss)
    for (row, _), s in zip(POSITIONS, config.settings):
        m = np.eye(N_MODES, dtype=complex)
        m[row : row + 2, row : row + 2] = amp * mzi_transfer(s)
        u = m @ u
    return u


def power_matrix(config: MeshConfig) -> np.ndarray:
    return np.abs(mesh_unitary(config)) ** 2


def propagate_incoherent(powers_in, config: MeshConfig) -> np.ndarray:
    p = np.asarray(powers_in, dtype=float)
    if p.shape[0] != N_MODES:
        raise ShapeError(f"expected {N_MODES} input powers, got shape {p.shape}")
    if np.any(p < 0):
        raise DomainError("input powers must be non-negative")
    return power_matrix(config) @ p


def propagate_coherent(fields_in, config: MeshConfig) -> np.ndarray:
    e = np.asarray(fields_in, dtype=complex)
    if e.shape[0] != N_MODES:
        raise ShapeError(f"expected {N_MODES} input fields, got shape {e.shape}")
    return mesh_unitary(config) @ e


def propagate_waveforms(inputs: Sequence[Optional[Waveform]], config: MeshConfig) -> list:
    """Route four optical power waveforms (``None`` = dark port) through the mesh."""
    if len(inputs) != N_MODES:
        raise ShapeError(f"expected {N_MODES} input waveforms, got {len(inputs)}")
    ref = next((w for w in inputs if w is not None), None)
    if ref is None:
        raise ShapeError("at least one input waveform is required")
    for w in inputs:
        if w is not None:
            ref.check_aligned(w)
    stack = np.vstack([w.samples if w is not None else np.zeros(len(ref)) for w in inputs])
    out = propagate_incoherent(stack, config)
    return [Waveform(ref.dt, np.clip(row, 0.0, None), Unit.WATTS) for row in out]


# -- output-port roles and weight programming ------------------------------

EXC, INH, DUMMY = "exc", "inh", "dummy"


@dataclass(frozen=True)
class PortMap:
    """Role of each output port: excitatory detector, inhibitory detector or dummy."""

    roles: tuple = (EXC, INH, DUMMY, DUMMY)

    def __post_init__(self):
        roles = tuple(self.roles)
        if len(roles) != N_MODES or any(r not in (EXC, INH, DUMMY) for r in roles):
            raise SchemaError(f"port map needs {N_MODES} roles from exc/inh/dummy, got {roles!r}")
        object.__setattr__(self, "roles", roles)

    @property
    def exc(self) -> list:
        return [i for i, r in enumerate(self.roles) if r == EXC]

    @property
    def inh(self) -> list:
        return [i for i, r in enumerate(self.roles) if r == INH]

    def swapped(self) -> "PortMap":
        flip = {EXC: INH, INH: EXC, DUMMY: DUMMY}
        return PortMap(tuple(flip[r] for r in self.roles))

    def detector_powers(self, outputs: Sequence[Waveform]) -> tuple:
        """(p_exc, p_inh) waveforms summed over the ports of each role."""
        zero = Waveform.zeros(len(outputs[0]), outputs[0].dt)
        exc = sum((outputs[i] for i in self.exc), zero)
        inh = sum((outputs[i] for i in self.inh), zero)
        return exc, inh


def delivered_fractions(config: MeshConfig, port_map: PortMap) -> tuple:
    """Per-input power fractions reaching the excitatory and inhibitory detectors."""
    p = power_matrix(config)
    return p[port_map.exc].sum(axis=0), p[port_map.inh].sum(axis=0)


def _capacity_ok(w: np.ndarray, roles: tuple) -> bool:
    n_exc, n_inh = roles.count(EXC), roles.count(INH)
    n_dummy = N_MODES - n_exc - n_inh
    pos, neg = w[w > 0], -w[w < 0]
    if pos.size and not n_exc or neg.size and not n_inh:
        return False
    slack = (
        n_exc - pos.sum(),
        n_inh - neg.sum(),
        n_dummy - (1 - pos).sum() - (1 - neg).sum(),
    )
    return min(slack) > -1e-9


def candidate_port_maps(weights) -> list:
    """Port maps whose detector capacities can hold ``weights`` (unitarity bookkeeping).

    Every output row of ``|U|^2`` sums to one, so the excitatory ports must
    absorb exactly the positive weights plus whatever zero-weight (dark)
    inputs send there; likewise for the inhibitory and dummy ports.
    """
    w = np.asarray(weights, dtype=float)
    maps = []
    for roles in itertools.product((EXC, INH, DUMMY), repeat=N_MODES):
        if _capacity_ok(w, roles):
            maps.append(PortMap(roles))
    # prefer few detector ports, then low port indices for the detectors
    maps.sort(key=lambda m: (len(m.exc) + len(m.inh), m.exc + m.inh))
    return maps


def _residuals(x, w, port_map):
    cfg = MeshConfig.from_phases(x[: len(POSITIONS)], x[len(POSITIONS) :])
    exc, inh = delivered_fractions(cfg, port_map)
    res = []
    for i, wi in enumerate(w):
        if wi > 0:
            res += [exc[i] - wi, inh[i]]
        elif wi < 0:
            res += [inh[i] + wi, exc[i]]
    return np.array(res)


def program_weights(
    target,
    port_map: Optional[PortMap] = None,
    *,
    tol: float = 1e-6,
    restarts: int = 24,
    seed: int = 0,
) -> tuple:
    """Find phases so input ``i`` delivers ``|w_i|`` of its power to its detector.

    Positive weights go to the excitatory port(s), negative ones to the
    inhibitory port(s); zero weights mark dark inputs and are unconstrained.
    Returns ``(MeshConfig, PortMap)``; raises ProgrammingError if no phase
    setting within ``tol`` exists for any admissible port map.
    """
    w = np.asarray(target, dtype=float)
    if w.shape != (N_MODES,):
        raise ShapeError(f"expected {N_MODES} weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(np.abs(w) > 1.0 + 1e-12):
        raise DomainError(f"weights must lie in [-1, 1], got {w.tolist()}")
    maps = [port_map] if port_map is not None else candidate_port_maps(w)
    if not np.any(w):
        return IDENTITY, maps[0] if maps else PortMap()
    rng = np.random.default_rng(seed)
    starts = [np.zeros(2 * len(POSITIONS)), np.full(2 * len(POSITIONS), math.pi / 2)]
    starts += [rng.uniform(0, TWO_PI, 2 * len(POSITIONS)) for _ in range(restarts)]
    best_err = math.inf
    for pm in maps:
        if not _capacity_ok(w, pm.roles):
            continue
        for x0 in starts:
            sol = least_squares(_residuals, x0, args=(w, pm), xtol=1e-15, ftol=1e-15, gtol=1e-15)
            err = float(np.max(np.abs(sol.fun)))
            best_err = min(best_err, err)
            if err <= tol:
                return MeshConfig.from_phases(sol.x[: len(POSITIONS)], sol.x[len(POSITIONS) :]), pm
    raise ProgrammingError(
        f"weights {w.tolist()} cannot be realised by the {LAYOUT} mesh "
        f"(best residual {best_err:.3g}); the excitatory and inhibitory ports "
        "must be able to absorb the positive and negative weight sums"
    )


# -- weight files ----------------------------------------------------------


def save_weights(path, weights) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["input_index", "weight"])
        for i, wi in enumerate(weights):
            writer.writerow([i, repr(float(wi))])


def load_weights(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["input_index", "weight"]:
            raise SchemaError(f"{path}: expected header input_index,weight, got {header}")
        found = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise SchemaError(f"{path}: line {lineno} has {len(row)} columns, expected 2")
            try:
                found[int(row[0])] = float(row[1])
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from None
    if sorted(found) != list(range(N_MODES)):
        raise SchemaError(f"{path}: need weights for inputs 0..{N_MODES - 1}, got {sorted(found)}")
    return np.array([found[i] for i in range(N_MODES)])
