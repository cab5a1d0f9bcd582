"""Run configuration: nested defaults, YAML loading and validation.

A config is a plain nested dict.  Every key a user may set appears in
``default_config()``; unknown keys and values of the wrong type are rejected
with the dotted key path in the message.
"""

from __future__ import annotations

import copy
from pathlib import Path

import yaml

from .chatter import DEFAULT_CHATTER, ExtendedParams
from .codec import DecodeSpec, EncodingSpec
from .errors import ConfigError
from .neuron import DEFAULT_CONSTANTS, DEFAULT_DT, STANDARD, ModelConstants, NeuronParams
from .trainer import PipelineConfig

DEFAULT_SEED = 0
OUT_DIR_ENV = "PSNN_OUT_DIR"
DEFAULT_OUT_DIR = "psnn_runs"

# keys whose default is None accept these types
_NULLABLE = {"iris.dataset": (str,)}


def default_config() -> dict:
    return {
        "seed": DEFAULT_SEED,
        "dt": DEFAULT_DT,
        "neuron": STANDARD.as_dict(),
        "extended": {"v_c": 0.0, "v_sw": 0.0},
        "constants": DEFAULT_CONSTANTS.as_dict(),
        "chatter": DEFAULT_CHATTER.as_dict(),
        "input": {
            "kind": "probe",
            "peak_power": 0.2e-3,
            "pulse_width": 1e-9,
            "starts": [],
            "amplitude": 0.2e-3,
            "duration": 140e-9,
        },
        "inhibition": {"route": "none"},
        "sweep": {
            "param": "amplitude",
            "start": 0.0,
            "stop": 0.4e-3,
            "num": 41,
            "duration": 1e-6,
            "v_th_values": [0.2, 0.5, 0.7],
        },
        "iris": {
            "mode": "paper",
            "dataset": None,
            "test_fraction": 0.2,
            "v_th_grid": list(PipelineConfig().v_th_grid),
            "tune_bounds": True,
            "demo_per_class": 5,
            "count_threshold_volts": DecodeSpec().count_threshold_volts,
            "window": EncodingSpec().window,
            "header_length": EncodingSpec().header_length,
        },
        "energy": {"profile": "Foundry45", "mode": "standard", "baseline_power": 0.0},
    }


def _check(value, default, key: str, path):
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError("expected a mapping", path=path, key=key)
        for k, v in value.items():
            sub = f"{key}.{k}" if key else str(k)
            if k not in default:
                raise ConfigError(f"unknown key (valid: {', '.join(sorted(default))})", path=path, key=sub)
            _check(v, default[k], sub, path)
    elif default is None:
        if value is not None and not isinstance(value, _NULLABLE.get(key, ())):
            raise ConfigError(f"expected null or {_NULLABLE.get(key)}", path=path, key=key)
    elif isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError("expected true or false", path=path, key=key)
    elif isinstance(default, (int, float)):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path=path, key=key)
        if key == "seed" and not isinstance(value, int):
            raise ConfigError("expected an integer", path=path, key=key)
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path=path, key=key)
    elif isinstance(default, list):
        if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            raise ConfigError("expected a list of numbers", path=path, key=key)


def merge(base: dict, *updates: dict) -> dict:
    """Deep copy of ``base`` with each update applied in turn (nested dicts merge)."""
    out = copy.deepcopy(base)
    for upd in updates:
        for k, v in (upd or {}).items():
            if isinstance(v, dict) and isinstance(out.get(k), dict):
                out[k] = merge(out[k], v)
            else:
                out[k] = copy.deepcopy(v)
    return out


def validate(config: dict, path=None) -> dict:
    """Check ``config`` against the defaults and the model's own domain rules."""
    _check(config, default_config(), "", path)
    full = merge(default_config(), config)
    try:
        build_params(full)
        build_constants(full)
        build_chatter(full)
    except ValueError as exc:
        raise ConfigError(str(exc), path=path) from None
    if full["input"]["kind"] not in ("probe", "pulses", "constant", "none"):
        raise ConfigError("must be probe, pulses, constant or none", path=path, key="input.kind")
    if full["inhibition"]["route"] not in ("none", "detour", "direct"):
        raise ConfigError("must be none, detour or direct", path=path, key="inhibition.route")
    if full["iris"]["mode"] not in ("paper", "split"):
        raise ConfigError("must be paper or split", path=path, key="iris.mode")
    if full["energy"]["mode"] not in ("standard", "extended"):
        raise ConfigError("must be standard or extended", path=path, key="energy.mode")
    if not full["dt"] > 0:
        raise ConfigError("must be positive", path=path, key="dt")
    if int(full["sweep"]["num"]) < 1:
        raise ConfigError("must be at least 1", path=path, key="sweep.num")
    return full


def load_config(path) -> dict:
    """Read a YAML config; returns the full config (defaults filled in)."""
    path = Path(path)
    text = path.read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML syntax error: {exc}", path=path) from None
    if data is None:
        data = {}
    return validate(data, path)


def dump_config(config: dict) -> str:
    return yaml.safe_dump(config, sort_keys=False)


# -- typed views ---------------------------------------------------------------


def build_params(config: dict) -> ExtendedParams:
    n = config["neuron"]
    e = config["extended"]
    return ExtendedParams(NeuronParams(**n), v_c=e["v_c"], v_sw=e["v_sw"])


def build_constants(config: dict) -> ModelConstants:
    return ModelConstants(**config["constants"])


def build_chatter(config: dict):
    return DEFAULT_CHATTER.with_(**config["chatter"])


def build_pipeline(config: dict) -> PipelineConfig:
    ir = config["iris"]
    enc = EncodingSpec(window=ir["window"], header_length=ir["header_length"], dt=config["dt"])
    return PipelineConfig(
        encoding=enc,
        decode=DecodeSpec(count_threshold_volts=ir["count_threshold_volts"]),
        params=NeuronParams(**config["neuron"]),
        constants=build_constants(config),
        v_th_grid=tuple(float(v) for v in ir["v_th_grid"]),
        tune_bounds=bool(ir["tune_bounds"]),
    )
