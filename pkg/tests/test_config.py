from pathlib import Path

import pytest

from psnn.chatter import ExtendedParams
from psnn.config import (
    build_chatter,
    build_constants,
    build_params,
    build_pipeline,
    default_config,
    dump_config,
    load_config,
    merge,
    validate,
)
from psnn.errors import ConfigError
from psnn.neuron import DEFAULT_CONSTANTS, STANDARD

EXAMPLE = Path(__file__).resolve().parents[1] / "configs" / "example.yaml"


def write(tmp_path, text):
    p = tmp_path / "c.yaml"
    p.write_text(text)
    return p


def test_shipped_example_equals_defaults():
    assert load_config(EXAMPLE) == default_config()


def test_empty_file_gives_defaults(tmp_path):
    assert load_config(write(tmp_path, "")) == default_config()


def test_partial_file_merges(tmp_path):
    cfg = load_config(write(tmp_path, "neuron:\n  v_th: 0.5\nseed: 7\n"))
    assert cfg["neuron"]["v_th"] == 0.5
    assert cfg["neuron"]["v_p"] == STANDARD.v_p
    assert cfg["seed"] == 7


def test_dump_round_trip(tmp_path):
    cfg = merge(default_config(), {"extended": {"v_sw": 0.8}})
    assert load_config(write(tmp_path, dump_config(cfg))) == cfg


@pytest.mark.parametrize(
    "text, key",
    [
        ("neuron:\n  v_tht: 0.5\n", "neuron.v_tht"),
        ("neuron:\n  v_th: high\n", "neuron.v_th"),
        ("seed: 1.5\n", "seed"),
        ("iris:\n  tune_bounds: 1\n", "iris.tune_bounds"),
        ("input:\n  kind: laser\n", "input.kind"),
        ("sweep:\n  num: 0\n", "sweep.num"),
    ],
)
def test_errors_name_the_key(tmp_path, text, key):
    p = write(tmp_path, text)
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert exc.value.key == key
    assert str(p) in str(exc.value)


def test_domain_errors_surface_as_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "neuron:\n  v_th: 1.5\n"))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "extended:\n  v_sw: -1\n"))


def test_yaml_syntax_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "neuron: [unclosed\n"))


def test_typed_views():
    cfg = validate({"extended": {"v_c": 0.5, "v_sw": 0.8}, "neuron": {"v_th": 0.6}})
    p = build_params(cfg)
    assert isinstance(p, ExtendedParams) and p.v_sw == 0.8 and p.base.v_th == 0.6
    assert build_constants(cfg) == DEFAULT_CONSTANTS
    assert build_chatter(cfg).g_slow0 > 0
    pipe = build_pipeline(cfg)
    assert pipe.params.v_th == 0.6
    assert pipe.payload_window == (50e-9, 400e-9)


def test_merge_does_not_mutate():
    base = default_config()
    merge(base, {"neuron": {"v_th": 0.9}})
    assert base == default_config()
