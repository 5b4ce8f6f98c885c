import math

import numpy as np
import pytest

from accel2pos.dsp_recon import integrate_trapezoidal
from accel2pos.synthgen import (GeneratorConfig, HelixParams, MotionProfileSpec, Phase,
                                PocketParams, SensorModel, VibrationComponent, build_scenario,
                                gen_helix, gen_point_to_point, gen_pocket, load_dataset,
                                machining_cycle, point_to_point_trajectory, sensor_readout,
                                write_dataset)
from accel2pos.timeseries import SampledSignal

QUIET = SensorModel(bias_m_s2=(0, 0, 0), noise_std_m_s2=0.0, vibration_components=(),
                    raw_rate_hz=8000.0)


def p2p(d, v=50.0, a=500.0):
    return MotionProfileSpec(Phase.RUN_UP, (0, 0, 0), (d, 0, 0), v, a)


def test_trapezoid_duration():
    traj = point_to_point_trajectory(p2p(100.0))
    assert traj.duration == pytest.approx(100 / 50 + 50 / 500)


def test_triangular_peak_velocity():
    traj = point_to_point_trajectory(p2p(1.0))
    t = np.linspace(0, traj.duration, 10001)
    assert np.max(np.abs(traj.eval(t, 1)[:, 0])) == pytest.approx(math.sqrt(500.0), rel=1e-6)
    assert math.sqrt(500.0) == pytest.approx(22.36, abs=5e-3)


def test_endpoints_and_rest():
    spec = MotionProfileSpec(Phase.RUN_UP, (1, 2, 3), (40, -7, 15.5), 30.0, 200.0)
    pos = gen_point_to_point(spec, 1000.0)
    np.testing.assert_allclose(pos.data[0], spec.start_mm, atol=1e-12)
    assert np.max(np.abs(pos.data[-1] - np.array(spec.end_mm))) < 1e-6
    traj = point_to_point_trajectory(spec)
    np.testing.assert_allclose(traj.eval(np.array([0.0, traj.duration]), 1), 0.0, atol=1e-9)


def test_zero_distance_rejected():
    with pytest.raises(ValueError):
        gen_point_to_point(MotionProfileSpec(Phase.RUN_UP, (1, 1, 1), (1, 1, 1)), 100.0)


def helix_spec(R=5.0, w=2 * math.pi, depth=6.0, turns=3.0):
    return MotionProfileSpec(Phase.HELICAL_RAMP_IN, (10.0, 20.0, 5.0),
                             helix=HelixParams(R, w, depth, turns))


def test_helix_centripetal_acceleration():
    from accel2pos.synthgen import helix_trajectory

    traj = helix_trajectory(helix_spec())
    t = np.arange(0, traj.duration, 1e-3)
    acc = traj.eval(t, 2)
    planar = np.hypot(acc[:, 0], acc[:, 1])
    np.testing.assert_allclose(planar, 5.0 * (2 * math.pi) ** 2, rtol=1e-12)
    assert 5.0 * (2 * math.pi) ** 2 == pytest.approx(197.39, abs=5e-3)


def test_helix_pitch_and_radius():
    from accel2pos.synthgen import helix_trajectory

    traj = helix_trajectory(helix_spec())
    pos = gen_helix(helix_spec(), 500.0)
    seg = traj.segments[0]
    r = np.hypot(pos.data[:, 0] - seg.center[0], pos.data[:, 1] - seg.center[1])
    assert np.max(np.abs(r - 5.0)) < 1e-9
    # one turn takes 1 s at 2*pi rad/s
    z = traj.eval(np.array([0.0, 1.0, 2.0, 3.0]))[:, 2]
    np.testing.assert_allclose(np.diff(z), -2.0, atol=1e-12)
    np.testing.assert_allclose(pos.data[0], (10.0, 20.0, 5.0), atol=1e-12)


def test_helix_zero_radius_rejected():
    with pytest.raises(ValueError):
        gen_helix(helix_spec(R=0.0), 100.0)


def pocket_spec(width=20.0, stepover=5.0):
    return MotionProfileSpec(Phase.POCKET_MILLING, (0.0, 0.0, -3.0), None, 30.0, 250.0,
                             pocket=PocketParams(width, 40.0, stepover, 30.0))


def test_pocket_pass_count():
    from accel2pos.synthgen import pocket_trajectory

    traj = pocket_trajectory(pocket_spec())
    x_passes = [s for s in traj.segments if abs(s.unit[0]) == 1.0]
    assert len(x_passes) == 5


def test_pocket_containment_and_constant_z():
    pos = gen_pocket(pocket_spec(), 1000.0).data
    assert pos[:, 0].min() >= -1e-6 and pos[:, 0].max() <= 40.0 + 1e-6
    assert pos[:, 1].min() >= -1e-6 and pos[:, 1].max() <= 20.0 + 1e-6
    assert np.all(pos[:, 2] == -3.0)


def test_pocket_acceleration_limit_by_finite_differences():
    fs = 1000.0
    pos = gen_pocket(pocket_spec(), fs).data
    acc = np.diff(pos, 2, axis=0) * fs**2
    assert np.max(np.abs(acc)) <= 250.0 + 1e-6


def test_pocket_stepover_too_large():
    with pytest.raises(ValueError):
        gen_pocket(pocket_spec(width=4.0, stepover=5.0), 100.0)


def stationary(n, fs):
    return SampledSignal(("x", "y", "z"), np.tile([5.0, 6.0, 7.0], (n, 1)), fs)


def test_readout_zero_case():
    out = sensor_readout(stationary(4000, 8000.0), QUIET, seed=0)
    assert np.all(out.data == 0.0)


def test_readout_bias_passthrough():
    model = SensorModel((0.01, 0.0, 0.0), 0.0, (), 8000.0)
    out = sensor_readout(stationary(4000, 8000.0), model, seed=0)
    assert np.all(out.data[:, 0] == 0.01)
    assert np.all(out.data[:, 1:] == 0.0)


def test_readout_noise_mean():
    model = SensorModel((0.0, 0.0, 0.0), 0.1, (), 1e6)
    out = sensor_readout(stationary(10**6, 1e6), model, seed=123)
    assert np.all(np.abs(out.data.mean(axis=0)) < 1e-3)


def test_readout_rate_mismatch():
    with pytest.raises(ValueError):
        sensor_readout(stationary(100, 100.0), QUIET, seed=0)


def test_readout_deterministic_and_seeded():
    traj = machining_cycle(GeneratorConfig(), 0, 0, 0)
    a = sensor_readout(traj, SensorModel(), 5, duration=1.0)
    b = sensor_readout(traj, SensorModel(), 5, duration=1.0)
    c = sensor_readout(traj, SensorModel(), 6, duration=1.0)
    assert a == b and a != c


def test_vibration_gated_by_phase():
    model = SensorModel((0, 0, 0), 0.0, (VibrationComponent(200.0, 1.0, ("pocket_milling",)),), 8000.0)
    traj = machining_cycle(GeneratorConfig(), 0, 0, 0)
    out = sensor_readout(traj, model, 0)
    kin = traj.eval(out.times, 2) * 1e-3
    resid = out.data - kin
    pocket = traj.phases(out.times) == "pocket_milling"
    assert np.max(np.abs(resid[~pocket])) < 1e-12
    assert np.max(np.abs(resid[pocket])) > 0.9


@pytest.mark.parametrize("phase", ["run_up", "helical_ramp_in", "pocket_milling"])
def test_double_integration_recovers_single_phase(phase):
    traj = machining_cycle(GeneratorConfig(), 0, 0, 0)
    starts = dict(zip([s.phase.value for s in traj.segments][::-1], traj.starts[::-1]))
    t0 = starts[phase]
    t1 = traj.phase_end_times()[phase]
    fs = QUIET.raw_rate_hz
    t = t0 + np.arange(int((t1 - t0) * fs) + 1) / fs
    acc = SampledSignal(("x", "y", "z"), traj.eval(t, 2) * 1e-3, fs)
    v = integrate_trapezoidal(acc, traj.eval(t[:1], 1)[0] * 1e-3)
    p = integrate_trapezoidal(v, traj.eval(t[:1])[0] * 1e-3)
    err = np.linalg.norm(p.data * 1e3 - traj.eval(t), axis=1)
    assert np.sqrt(np.mean(err**2)) < 0.1


def test_cycle_is_c1_at_phase_boundaries():
    traj = machining_cycle(GeneratorConfig(), 3, 1, 2)
    for b in traj.starts[1:]:
        v = traj.eval(np.array([b - 1e-9, b + 1e-9]), 1)
        assert np.max(np.abs(v[1] - v[0])) < 1e-6


def small_cfg():
    return GeneratorConfig(sensor=SensorModel(raw_rate_hz=1000.0))


def test_default_split_sizes():
    ds = build_scenario(1, seed=0, config=small_cfg())
    assert len(ds.train) == 36 and len(ds.test) == 12
    train_ids = {r.series_id for r in ds.train}
    test_ids = {r.series_id for r in ds.test}
    assert not train_ids & test_ids
    for r in ds.train + ds.test:
        np.testing.assert_allclose(r.pair.position.data[0], r.p0_mm, atol=1e-12)


def test_scenarios_are_nested_prefixes():
    cfg = small_cfg()
    lengths = [[len(r.pair) for r in build_scenario(k, 1, 1, 2, seed=4, config=cfg).train]
               for k in (1, 2, 3, 4)]
    for shorter, longer in zip(lengths, lengths[1:]):
        assert all(a < b for a, b in zip(shorter, longer))
    s1 = build_scenario(1, 1, 1, 1, seed=4, config=cfg).train[0]
    s2 = build_scenario(2, 1, 1, 1, seed=4, config=cfg).train[0]
    n = len(s1.accel_raw)
    assert np.array_equal(s1.accel_raw.data, s2.accel_raw.data[:n])


def test_same_seed_bit_identical():
    cfg = small_cfg()
    a = build_scenario(3, 1, 1, 2, seed=9, config=cfg)
    b = build_scenario(3, 1, 1, 2, seed=9, config=cfg)
    for ra, rb in zip(a.train + a.test, b.train + b.test):
        assert ra.accel_raw == rb.accel_raw and ra.pair.position == rb.pair.position


def test_invalid_scenario_arguments():
    with pytest.raises(ValueError):
        build_scenario(5)
    with pytest.raises(ValueError):
        build_scenario(1, n_train_series=0)


def test_dataset_round_trip(tmp_path):
    ds = build_scenario(2, 1, 1, 1, seed=3, config=small_cfg())
    base = write_dataset(ds, tmp_path)
    assert (base / "train" / "series0" / "seq0" / "accel_raw.csv").exists()
    assert (base / "test" / "series1" / "seq0" / "meta.json").exists()
    back = load_dataset(tmp_path, scenario=2)
    assert back.scenario == 2 and back.seed == 3
    for ra, rb in zip(ds.train + ds.test, back.train + back.test):
        assert ra.accel_raw == rb.accel_raw
        assert np.array_equal(ra.pair.accel.data, rb.pair.accel.data)
        assert np.array_equal(ra.pair.position.data, rb.pair.position.data)
        assert ra.phase_bounds == rb.phase_bounds
