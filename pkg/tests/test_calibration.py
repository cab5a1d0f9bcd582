import numpy as np
import pytest

from psnn.calibration import (
    PROBE_DURATION,
    calibrate_chatter,
    calibrate_core,
    membrane_peaks,
    probe_input,
    probe_starts,
    threshold_map,
    tuning_checks,
)
from psnn.chatter import DEFAULT_CHATTER
from psnn.neuron import DEFAULT_CONSTANTS, STANDARD, effective_threshold


def test_probe_layout():
    s = probe_starts()
    assert len(s) == 19
    assert probe_input().duration == pytest.approx(PROBE_DURATION)


def test_membrane_peaks_grow_with_each_pulse():
    p = membrane_peaks()
    assert np.all(np.diff(p) > 0)


def test_threshold_sits_in_its_brackets():
    p = membrane_peaks()
    assert p[0] < effective_threshold(STANDARD.v_th) < p[1]
    assert p[3] < effective_threshold(0.0) < p[4]
    theta0, slope = threshold_map()
    assert theta0 == pytest.approx(DEFAULT_CONSTANTS.theta0, abs=1e-4)
    assert slope == pytest.approx(DEFAULT_CONSTANTS.theta_slope, abs=1e-3)


def test_shipped_constants_pass_tuning_checks():
    res = tuning_checks()
    assert res.ok, res.checks


def test_calibration_reproduces_shipped_constants():
    k = calibrate_core()
    assert k.as_dict() == pytest.approx(DEFAULT_CONSTANTS.as_dict(), rel=1e-12)
    assert calibrate_chatter(k) == DEFAULT_CHATTER
