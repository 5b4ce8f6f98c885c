import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from accel2pos.metrics import ErrorMetrics, aggregate_scenario, format_cell, position_error_3d
from accel2pos.timeseries import SampledSignal

XYZ = ("x", "y", "z")


def sig(data, fs=100.0):
    return SampledSignal(XYZ, np.asarray(data, float), fs)


def test_pythagorean_example():
    truth = sig(np.zeros((2, 3)))
    pred = sig([[3.0, 4.0, 0.0], [0.0, 0.0, 0.0]])
    mae, rmse = position_error_3d(pred, truth)
    assert mae == 2.5
    assert rmse == math.sqrt(25 / 2)
    assert rmse == pytest.approx(3.5355, abs=5e-5)


def test_identity_is_zero():
    p = sig(np.random.default_rng(0).normal(size=(10, 3)))
    assert position_error_3d(p, p) == (0.0, 0.0)


def test_constant_offset():
    truth = sig(np.random.default_rng(1).normal(size=(7, 3)))
    pred = sig(truth.data + np.array([1.0, 2.0, 2.0]))
    mae, rmse = position_error_3d(pred, truth)
    assert mae == pytest.approx(3.0, abs=1e-12) and rmse == pytest.approx(3.0, abs=1e-12)


@pytest.mark.parametrize("pred", [sig(np.zeros((3, 3))), sig(np.zeros((4, 3)), fs=50.0)])
def test_mismatch_rejected(pred):
    with pytest.raises(ValueError):
        position_error_3d(pred, sig(np.zeros((4, 3))))


def test_aggregate_examples():
    assert aggregate_scenario([7.5]) == (7.5, 0.0)
    mean, std = aggregate_scenario([2.0, 4.0])
    assert mean == 3.0 and std == pytest.approx(math.sqrt(2), abs=1e-12)
    with pytest.raises(ValueError):
        aggregate_scenario([])


def test_cell_rendering():
    assert format_cell(201.89, 22.16) == "201.89±22.16"
    assert format_cell(4.771, 0.005) == "4.77±0.01"


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=50)
@given(arrays(float, (12, 3), elements=finite), arrays(float, (12, 3), elements=finite),
       arrays(float, 3, elements=finite))
def test_rmse_bounds_mae_and_translation(a, b, shift):
    mae, rmse = position_error_3d(sig(a), sig(b))
    assert rmse >= mae - 1e-9 * max(1.0, mae) and mae >= 0
    mae2, rmse2 = position_error_3d(sig(a + shift), sig(b + shift))
    scale = 1e-9 * (1.0 + np.abs(a).max() + np.abs(b).max() + np.abs(shift).max())
    assert abs(mae2 - mae) <= scale and abs(rmse2 - rmse) <= scale


def test_error_metrics_accumulates():
    em = ErrorMetrics()
    truth = sig(np.zeros((2, 3)))
    em.add(0, 0, sig([[3.0, 4.0, 0.0], [0.0, 0.0, 0.0]]), truth)
    em.add(0, 1, sig([[1.0, 2.0, 2.0], [1.0, 2.0, 2.0]]), truth)
    assert em.mae_mm == pytest.approx((2.5 + 3.0) / 2)
    s = em.summary()
    assert s["RMSE"][0] == pytest.approx((math.sqrt(12.5) + 3.0) / 2)
    for _, _, mae, rmse in em.per_sequence:
        assert rmse >= mae
