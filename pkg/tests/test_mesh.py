import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psnn.errors import DomainError, ProgrammingError, SchemaError, ShapeError
from psnn.mesh import (
    BAR,
    CROSS,
    DUMMY,
    EXC,
    IDENTITY,
    INH,
    POSITIONS,
    MeshConfig,
    MZISetting,
    PortMap,
    candidate_port_maps,
    delivered_fractions,
    load_weights,
    mesh_unitary,
    mzi_transfer,
    program_weights,
    propagate_coherent,
    propagate_incoherent,
    propagate_waveforms,
    save_weights,
)
from psnn.waveform import Waveform, pulse_train

phases = st.floats(0.0, 2 * math.pi)
configs = st.builds(
    MeshConfig.from_phases,
    st.lists(phases, min_size=6, max_size=6),
    st.lists(phases, min_size=6, max_size=6),
)
powers = st.lists(st.floats(0.0, 1e-2), min_size=4, max_size=4)


def test_setting_stored_mod_2pi():
    s = MZISetting(3 * math.pi, -math.pi / 2)
    assert s.theta == pytest.approx(math.pi)
    assert s.phi == pytest.approx(1.5 * math.pi)


def test_non_finite_phase_rejected():
    with pytest.raises(DomainError):
        MZISetting(math.inf, 0.0)


def test_mzi_endpoints_and_midpoint():
    assert np.abs(mzi_transfer(BAR)) ** 2 == pytest.approx(np.eye(2))
    cross = np.abs(mzi_transfer(CROSS)) ** 2
    assert cross[1, 0] == 1.0 and cross[0, 0] == 0.0
    half = np.abs(mzi_transfer(MZISetting(math.pi / 2, 0.3))) ** 2
    assert half == pytest.approx(np.full((2, 2), 0.5))


@given(phases, phases)
def test_mzi_bar_power_is_cos_squared(theta, phi):
    t = np.abs(mzi_transfer(MZISetting(theta, phi))) ** 2
    assert t[0, 0] == pytest.approx(math.cos(theta / 2) ** 2, abs=1e-12)
    assert t[1, 0] == pytest.approx(math.sin(theta / 2) ** 2, abs=1e-12)


def test_all_bar_is_identity_routing():
    assert np.abs(mesh_unitary(IDENTITY)) ** 2 == pytest.approx(np.eye(4))


def test_single_cross_swaps_its_ports():
    cfg = IDENTITY.with_setting(2, CROSS)  # the MZI on modes (1, 2)
    out = propagate_incoherent([0.0, 1.0, 0.0, 0.0], cfg)
    assert out.tolist() == [0.0, 0.0, 1.0, 0.0]


def test_unitary_for_1000_random_configs():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        u = mesh_unitary(MeshConfig.random(rng))
        assert np.abs(u.conj().T @ u - np.eye(4)).max() < 1e-10


@given(configs, powers)
def test_incoherent_conserves_power(cfg, p):
    assert abs(propagate_incoherent(p, cfg).sum() - sum(p)) <= 1e-12 * max(1.0, sum(p))


@given(configs, st.lists(st.complex_numbers(max_magnitude=1.0), min_size=4, max_size=4))
def test_coherent_conserves_power(cfg, e):
    out = propagate_coherent(e, cfg)
    assert np.sum(np.abs(out) ** 2) == pytest.approx(np.sum(np.abs(e) ** 2), abs=1e-12)


@given(configs, st.integers(0, 3), st.floats(0.0, 1.0))
def test_coherent_and_incoherent_agree_for_one_input(cfg, port, amp):
    e = np.zeros(4, complex)
    e[port] = math.sqrt(amp)
    p = np.zeros(4)
    p[port] = amp
    assert np.abs(propagate_coherent(e, cfg)) ** 2 == pytest.approx(propagate_incoherent(p, cfg), abs=1e-12)


def test_identity_passes_fields_and_powers():
    e = np.array([1, 1j, 0.5, -0.2])
    assert propagate_coherent(e, IDENTITY) == pytest.approx(e)
    assert propagate_incoherent([1, 2, 3, 4], IDENTITY).tolist() == [1, 2, 3, 4]


def test_cross_state_detour_delivers_exactly_zero():
    # inhibitory light on input 1 is sent to port 2, a dummy port
    cfg = IDENTITY.with_setting(2, CROSS)
    exc, inh = delivered_fractions(cfg, PortMap((EXC, INH, DUMMY, DUMMY)))
    assert exc[1] == 0.0 and inh[1] == 0.0
    assert exc[0] == 1.0


def test_lossy_mesh_loses_power():
    cfg = MeshConfig(loss=0.1)
    # mode 0 passes through the two MZIs in columns 0 and 2
    out = propagate_incoherent([1.0, 0, 0, 0], cfg)
    assert out.sum() == pytest.approx(0.9**2)


def test_propagation_input_errors():
    with pytest.raises(DomainError):
        propagate_incoherent([-1.0, 0, 0, 0], IDENTITY)
    with pytest.raises(ShapeError):
        propagate_incoherent([1.0, 0, 0], IDENTITY)
    with pytest.raises(ShapeError):
        MeshConfig(settings=(BAR,) * 5)


def test_propagate_waveforms_routes_power():
    w = pulse_train([1e-9], n=100, dt=0.05e-9, peak=1e-3, width=1e-9)
    out = propagate_waveforms([None, w, None, None], IDENTITY.with_setting(2, CROSS))
    assert out[2] == w
    assert not out[1].samples.any()


def test_program_endpoints():
    cfg, pm = program_weights((1, 1, -1, -1))
    exc, inh = delivered_fractions(cfg, pm)
    assert exc[:2] == pytest.approx([1, 1], abs=1e-6)
    assert inh[2:] == pytest.approx([1, 1], abs=1e-6)


def test_program_single_split():
    cfg, pm = program_weights((0.5, 0, 0, 0))
    exc, inh = delivered_fractions(cfg, pm)
    assert exc[0] == pytest.approx(0.5, abs=1e-3)
    assert inh[0] == pytest.approx(0.0, abs=1e-3)


def test_program_iris_weights():
    cfg, pm = program_weights((0.3, 0.7, -1, -1))
    exc, inh = delivered_fractions(cfg, pm)
    assert exc[:2] == pytest.approx([0.3, 0.7], abs=1e-3)
    assert inh[2:] == pytest.approx([1, 1], abs=1e-3)
    assert exc[2:] == pytest.approx([0, 0], abs=1e-3)


@settings(max_examples=25)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.permutations(range(4)))
def test_program_round_trip(a, b, perm):
    base = np.array([a, 1 - a, -b, -(1 - b)])
    w = base[list(perm)]
    cfg, pm = program_weights(w)
    exc, inh = delivered_fractions(cfg, pm)
    for i, wi in enumerate(w):
        hit, miss = (exc[i], inh[i]) if wi > 0 else (inh[i], exc[i])
        assert hit == pytest.approx(abs(wi), abs=1e-3)
        assert miss == pytest.approx(0.0, abs=1e-3)


def test_over_capacity_target_rejected():
    # positive sum 0.9 and negative sum 0.7 cannot fill whole detector rows
    assert candidate_port_maps((0.6, 0.3, -0.2, -0.5)) == []
    with pytest.raises(ProgrammingError):
        program_weights((0.6, 0.3, -0.2, -0.5))


def test_out_of_range_weight_rejected():
    with pytest.raises(DomainError):
        program_weights((1.5, 0, 0, 0))


def test_port_map_swap():
    pm = PortMap((EXC, INH, INH, DUMMY))
    assert pm.swapped().roles == (INH, EXC, EXC, DUMMY)
    with pytest.raises(SchemaError):
        PortMap((EXC, "x", DUMMY, DUMMY))


def test_config_json_round_trip(tmp_path):
    cfg = MeshConfig.random(np.random.default_rng(3))
    cfg.to_json(tmp_path / "mesh.json")
    back = MeshConfig.from_json(tmp_path / "mesh.json")
    assert back == cfg
    rec = cfg.to_record()
    assert rec["layout"] == "rect4"
    assert {(m["row"], m["col"]) for m in rec["mzis"]} == set(POSITIONS)


def test_config_record_errors():
    with pytest.raises(SchemaError):
        MeshConfig.from_record({"layout": "triangle", "mzis": []})
    with pytest.raises(SchemaError):
        MeshConfig.from_record({"layout": "rect4", "mzis": [{"row": 0, "col": 0, "theta": 0, "phi": 0}]})


def test_weight_file_round_trip(tmp_path):
    save_weights(tmp_path / "w.csv", [0.3, 0.7, -1, -1])
    assert load_weights(tmp_path / "w.csv").tolist() == [0.3, 0.7, -1, -1]


def test_weight_file_schema(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("index,weight\n0,1\n")
    with pytest.raises(SchemaError):
        load_weights(p)
    p.write_text("input_index,weight\n0,1\n1,1\n")
    with pytest.raises(SchemaError):
        load_weights(p)


def test_detector_powers_sum_roles():
    dt = 0.05e-9
    outs = [Waveform(dt, [float(i + 1)] * 3) for i in range(4)]
    exc, inh = PortMap((EXC, INH, INH, DUMMY)).detector_powers(outs)
    assert exc.samples.tolist() == [1.0] * 3
    assert inh.samples.tolist() == [5.0] * 3
