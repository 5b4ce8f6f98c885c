"""Synthetic CNC milling data: toolpath kinematics, accelerometer model, scenarios.

A machining cycle is built from analytic segments (parking dwell, rapid
run-up, helical ramp-in, zigzag pocket), so position, velocity and
acceleration are available in closed form at any instant. The accelerometer
readout samples the analytic acceleration at the raw sensor rate and adds
process vibration, a constant bias and white noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .timeseries import AlignedPair, SampledSignal, align, read_csv, write_csv

__all__ = [
    "GeneratorConfig",
    "HelixParams",
    "MotionProfileSpec",
    "Phase",
    "PocketParams",
    "ScenarioDataset",
    "SensorModel",
    "SequenceRecord",
    "Trajectory",
    "VibrationComponent",
    "build_scenario",
    "gen_helix",
    "gen_point_to_point",
    "gen_pocket",
    "helix_trajectory",
    "load_dataset",
    "machining_cycle",
    "pocket_trajectory",
    "point_to_point_trajectory",
    "sensor_readout",
    "write_dataset",
]

AXES = ("x", "y", "z")
MM_TO_M = 1e-3


class Phase(str, Enum):
    RUN_UP = "run_up"
    HELICAL_RAMP_IN = "helical_ramp_in"
    POCKET_MILLING = "pocket_milling"


@dataclass(frozen=True)
class HelixParams:
    radius_mm: float
    angular_rate_rad_s: float
    depth_mm: float
    turns: float = 2.0
    # None -> constant angular rate from the first sample on
    angular_accel_rad_s2: float | None = None


@dataclass(frozen=True)
class PocketParams:
    width_mm: float
    length_mm: float
    stepover_mm: float
    feed_mm_s: float


@dataclass(frozen=True)
class MotionProfileSpec:
    phase: Phase
    start_mm: tuple[float, float, float]
    end_mm: tuple[float, float, float] | None = None
    v_max_mm_s: float = 50.0
    a_max_mm_s2: float = 250.0
    helix: HelixParams | None = None
    pocket: PocketParams | None = None

    def __post_init__(self):
        object.__setattr__(self, "phase", Phase(self.phase))
        if not (self.v_max_mm_s > 0 and self.a_max_mm_s2 > 0):
            raise ValueError("v_max and a_max must be positive")


# --------------------------------------------------------------------------
# analytic segments


def _trapezoid_times(distance: float, v_max: float, a_max: float):
    """Acceleration time, cruise time and peak speed of a rest-to-rest move."""
    if distance * a_max < v_max**2:
        t_acc = math.sqrt(distance / a_max)
        return t_acc, 0.0, a_max * t_acc
    t_acc = v_max / a_max
    return t_acc, distance / v_max - t_acc, v_max


def _trapezoid_eval(tau, distance, v_max, a_max, deriv):
    t_acc, t_cruise, v_peak = _trapezoid_times(distance, v_max, a_max)
    a = v_peak / t_acc
    t1, t2 = t_acc, t_acc + t_cruise
    total = t2 + t_acc
    tau = np.clip(tau, 0.0, total)
    s1 = 0.5 * a * t1**2
    rem = total - tau
    if deriv == 0:
        return np.where(tau < t1, 0.5 * a * tau**2,
                        np.where(tau < t2, s1 + v_peak * (tau - t1), distance - 0.5 * a * rem**2))
    if deriv == 1:
        return np.where(tau < t1, a * tau, np.where(tau < t2, v_peak, a * rem))
    inside = (tau > 0) & (tau < total)
    acc = np.where(tau < t1, a, np.where(tau < t2, 0.0, -a))
    return np.where(inside, acc, 0.0)


class Segment:
    """One analytic piece of a trajectory, evaluated in local time ``tau``."""

    phase: Phase
    duration: float

    def eval(self, tau: np.ndarray, deriv: int) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    @property
    def end_point(self) -> np.ndarray:
        return self.eval(np.array([self.duration]), 0)[0]


class Dwell(Segment):
    def __init__(self, point, duration, phase=Phase.RUN_UP):
        self.point = np.asarray(point, dtype=float)
        self.duration = float(duration)
        self.phase = Phase(phase)

    def eval(self, tau, deriv):
        if deriv == 0:
            return np.broadcast_to(self.point, (len(tau), 3)).copy()
        return np.zeros((len(tau), 3))


class LinearMove(Segment):
    """Straight rest-to-rest move with a trapezoidal (or triangular) speed profile."""

    def __init__(self, start, end, v_max, a_max, phase=Phase.RUN_UP):
        self.start = np.asarray(start, dtype=float)
        self.end = np.asarray(end, dtype=float)
        delta = self.end - self.start
        self.distance = float(np.linalg.norm(delta))
        if self.distance == 0:
            raise ValueError("start and end coincide; a move needs a non-zero distance")
        self.unit = delta / self.distance
        self.v_max, self.a_max = float(v_max), float(a_max)
        t_acc, t_cruise, self.v_peak = _trapezoid_times(self.distance, self.v_max, self.a_max)
        self.duration = 2 * t_acc + t_cruise
        self.phase = Phase(phase)

    def eval(self, tau, deriv):
        s = _trapezoid_eval(tau, self.distance, self.v_max, self.a_max, deriv)
        out = np.outer(s, self.unit)
        if deriv == 0:
            out += self.start
        return out


class HelixSegment(Segment):
    """Helical descent around a vertical axis, starting at ``start`` with angle ``phi0``."""

    def __init__(self, start, params: HelixParams, phi0=math.pi, phase=Phase.HELICAL_RAMP_IN):
        if params.radius_mm <= 0:
            raise ValueError("helix radius must be positive")
        if params.angular_rate_rad_s <= 0 or params.turns <= 0:
            raise ValueError("helix angular rate and turn count must be positive")
        self.p = params
        self.start = np.asarray(start, dtype=float)
        self.phi0 = float(phi0)
        r = params.radius_mm
        self.center = self.start[:2] - r * np.array([math.cos(phi0), math.sin(phi0)])
        self.total_angle = 2 * math.pi * params.turns
        self.dz_dtheta = -params.depth_mm / self.total_angle
        if params.angular_accel_rad_s2 is None:
            self.duration = self.total_angle / params.angular_rate_rad_s
        else:
            t_acc, t_cruise, _ = _trapezoid_times(
                self.total_angle, params.angular_rate_rad_s, params.angular_accel_rad_s2)
            self.duration = 2 * t_acc + t_cruise
        self.phase = Phase(phase)

    @property
    def ramped(self) -> bool:
        return self.p.angular_accel_rad_s2 is not None

    def _angle(self, tau, deriv):
        if self.ramped:
            return _trapezoid_eval(tau, self.total_angle, self.p.angular_rate_rad_s,
                                   self.p.angular_accel_rad_s2, deriv)
        w = self.p.angular_rate_rad_s
        if deriv == 0:
            return w * np.clip(tau, 0.0, self.duration)
        return np.full(len(tau), w if deriv == 1 else 0.0)

    def eval(self, tau, deriv):
        r = self.p.radius_mm
        th = self._angle(tau, 0)
        ang = self.phi0 + th
        c, s = np.cos(ang), np.sin(ang)
        out = np.empty((len(tau), 3))
        if deriv == 0:
            out[:, 0] = self.center[0] + r * c
            out[:, 1] = self.center[1] + r * s
            out[:, 2] = self.start[2] + self.dz_dtheta * th
            return out
        w = self._angle(tau, 1)
        if deriv == 1:
            out[:, 0] = -r * w * s
            out[:, 1] = r * w * c
            out[:, 2] = self.dz_dtheta * w
            return out
        al = self._angle(tau, 2)
        out[:, 0] = -r * al * s - r * w**2 * c
        out[:, 1] = r * al * c - r * w**2 * s
        out[:, 2] = self.dz_dtheta * al
        return out


class Trajectory:
    """Piecewise-analytic 3D toolpath; times before 0 / after the end are clamped."""

    def __init__(self, segments: Sequence[Segment]):
        if not segments:
            raise ValueError("a trajectory needs at least one segment")
        self.segments = list(segments)
        durations = np.array([s.duration for s in self.segments])
        self.starts = np.concatenate([[0.0], np.cumsum(durations)[:-1]])
        self.duration = float(durations.sum())

    def __add__(self, other: "Trajectory") -> "Trajectory":
        return Trajectory(self.segments + other.segments)

    def _locate(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.duration)
        idx = np.searchsorted(self.starts, t, side="right") - 1
        return t, np.clip(idx, 0, len(self.segments) - 1)

    def eval(self, t, deriv: int = 0) -> np.ndarray:
        """Position (0), velocity (1) or acceleration (2) in mm-based units."""
        t, idx = self._locate(t)
        out = np.empty((len(t), 3))
        for i, seg in enumerate(self.segments):
            sel = idx == i
            if sel.any():
                out[sel] = seg.eval(t[sel] - self.starts[i], deriv)
        return out

    def phases(self, t) -> np.ndarray:
        t, idx = self._locate(t)
        labels = np.array([s.phase.value for s in self.segments])
        return labels[idx]

    def phase_end_times(self) -> dict[str, float]:
        ends: dict[str, float] = {}
        for start, seg in zip(self.starts, self.segments):
            ends[seg.phase.value] = float(start + seg.duration)
        return ends

    @property
    def end_point(self) -> np.ndarray:
        return self.eval(np.array([self.duration]))[0]

    def sample(self, rate_hz: float, duration: float | None = None, deriv: int = 0) -> SampledSignal:
        if duration is None:
            # cover the whole trajectory; the last sample is clamped to the end point
            n = int(math.ceil(self.duration * rate_hz - 1e-9)) + 1
        else:
            n = int(math.floor(duration * rate_hz + 1e-9)) + 1
        t = np.arange(n) / rate_hz
        units = ("mm", "mm/s", "mm/s^2")[deriv]
        return SampledSignal(AXES, self.eval(t, deriv), rate_hz, 0.0, units)


def point_to_point_trajectory(spec: MotionProfileSpec) -> Trajectory:
    if spec.end_mm is None:
        raise ValueError("point-to-point motion needs end_mm")
    return Trajectory([LinearMove(spec.start_mm, spec.end_mm, spec.v_max_mm_s,
                                  spec.a_max_mm_s2, spec.phase)])


def helix_trajectory(spec: MotionProfileSpec, phi0: float = math.pi) -> Trajectory:
    if spec.helix is None:
        raise ValueError("helix parameters missing")
    return Trajectory([HelixSegment(spec.start_mm, spec.helix, phi0, spec.phase)])


def pocket_trajectory(spec: MotionProfileSpec) -> Trajectory:
    """Zigzag raster starting at ``start_mm`` (a pocket corner), passes along +x, steps along +y."""
    pk = spec.pocket
    if pk is None:
        raise ValueError("pocket parameters missing")
    if not 0 < pk.stepover_mm <= pk.width_mm:
        raise ValueError(f"stepover {pk.stepover_mm} mm must lie in (0, width={pk.width_mm}] mm")
    n_passes = int(math.floor(pk.width_mm / pk.stepover_mm + 1e-12)) + 1
    x0, y0, z0 = (float(v) for v in spec.start_mm)
    corners = []
    for i in range(n_passes):
        y = y0 + min(i * pk.stepover_mm, pk.width_mm)
        xs = (x0, x0 + pk.length_mm) if i % 2 == 0 else (x0 + pk.length_mm, x0)
        corners += [(xs[0], y, z0), (xs[1], y, z0)]
    segs = [LinearMove(a, b, pk.feed_mm_s, spec.a_max_mm_s2, spec.phase)
            for a, b in zip(corners[:-1], corners[1:])]
    return Trajectory(segs)


def gen_point_to_point(spec: MotionProfileSpec, rate_hz: float) -> SampledSignal:
    return point_to_point_trajectory(spec).sample(rate_hz)


def gen_helix(spec: MotionProfileSpec, rate_hz: float) -> SampledSignal:
    return helix_trajectory(spec).sample(rate_hz)


def gen_pocket(spec: MotionProfileSpec, rate_hz: float) -> SampledSignal:
    return pocket_trajectory(spec).sample(rate_hz)


# --------------------------------------------------------------------------
# sensor model


@dataclass(frozen=True)
class VibrationComponent:
    freq_hz: float
    amplitude_m_s2: float
    active_phases: tuple[str, ...] = (Phase.HELICAL_RAMP_IN.value, Phase.POCKET_MILLING.value)

    def __post_init__(self):
        object.__setattr__(self, "active_phases",
                           tuple(Phase(p).value for p in self.active_phases))


def _default_vibration():
    return (
        VibrationComponent(120.0, 0.8),
        VibrationComponent(240.0, 0.4),
        VibrationComponent(455.0, 0.3, (Phase.POCKET_MILLING.value,)),
    )


@dataclass(frozen=True)
class SensorModel:
    """Accelerometer model: kinematic + process vibration + bias + white noise."""

    bias_m_s2: tuple[float, float, float] = (0.02, 0.02, 0.02)
    noise_std_m_s2: float = 0.05
    vibration_components: tuple[VibrationComponent, ...] = field(default_factory=_default_vibration)
    raw_rate_hz: float = 8000.0

    def __post_init__(self):
        if self.noise_std_m_s2 < 0:
            raise ValueError("noise_std must be non-negative")
        if self.raw_rate_hz <= 0:
            raise ValueError("raw_rate_hz must be positive")
        comps = tuple(c if isinstance(c, VibrationComponent) else VibrationComponent(**c)
                      for c in self.vibration_components)
        for c in comps:
            if not 0 < c.freq_hz < self.raw_rate_hz / 2:
                raise ValueError(f"vibration at {c.freq_hz} Hz is above the raw Nyquist rate")
        object.__setattr__(self, "vibration_components", comps)
        object.__setattr__(self, "bias_m_s2", tuple(float(b) for b in self.bias_m_s2))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vibration_components"] = [asdict(c) for c in self.vibration_components]
        return d


def sensor_readout(motion: Trajectory | SampledSignal, model: SensorModel, seed,
                   duration: float | None = None, phases=None) -> SampledSignal:
    """Simulated raw accelerometer output in m/s^2 at ``model.raw_rate_hz``.

    With a :class:`Trajectory` the kinematic acceleration is evaluated in
    closed form on the raw grid and phase labels come from the segments. A
    :class:`SampledSignal` (position in mm) must already be at the raw rate;
    its acceleration is then taken by second-order finite differences and
    ``phases`` (one label per sample) gates the vibration components.
    """
    if isinstance(motion, Trajectory):
        duration = motion.duration if duration is None else duration
        n = int(math.floor(duration * model.raw_rate_hz + 1e-9)) + 1
        t = np.arange(n) / model.raw_rate_hz
        a_kin = motion.eval(t, 2) * MM_TO_M
        phases = motion.phases(t)
    else:
        if motion.sample_rate_hz != model.raw_rate_hz:
            raise ValueError(
                f"position sampled at {motion.sample_rate_hz} Hz, sensor model expects "
                f"{model.raw_rate_hz} Hz"
            )
        t = motion.times
        n = len(t)
        if n >= 3:
            vel = np.gradient(motion.data, motion.dt, axis=0, edge_order=2)
            a_kin = np.gradient(vel, motion.dt, axis=0, edge_order=2) * MM_TO_M
        else:
            a_kin = np.zeros((n, 3))
        if phases is None:
            phases = np.full(n, Phase.RUN_UP.value)
    a_proc = np.zeros((n, 3))
    axis_phase = np.array([0.0, 2 * math.pi / 3, 4 * math.pi / 3])
    for comp in model.vibration_components:
        active = np.isin(phases, comp.active_phases)
        if active.any():
            wave = comp.amplitude_m_s2 * np.sin(2 * math.pi * comp.freq_hz * t[:, None] + axis_phase)
            a_proc += wave * active[:, None]
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, 1.0, size=(n, 3)) * model.noise_std_m_s2
    data = a_kin + a_proc + np.asarray(model.bias_m_s2) + noise
    return SampledSignal(AXES, data, model.raw_rate_hz, 0.0, "m/s^2")


# --------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class GeneratorConfig:
    """Sampling ranges of the synthetic milling experiments (all in mm, s, rad)."""

    parking_mm: tuple[float, float, float] = (0.0, 0.0, 100.0)
    parking_dwell_s: float = 0.5
    corner_x_mm: tuple[float, float] = (170.0, 200.0)
    corner_y_mm: tuple[float, float] = (80.0, 110.0)
    corner_z_mm: tuple[float, float] = (5.0, 10.0)
    target_jitter_mm: float = 2.0
    rapid_v_max_mm_s: float = 60.0
    rapid_a_max_mm_s2: float = 250.0
    helix_radius_mm: tuple[float, float] = (3.0, 6.0)
    helix_rate_rad_s: tuple[float, float] = (math.pi, 2 * math.pi)
    helix_depth_mm: tuple[float, float] = (2.0, 4.0)
    helix_turns: float = 2.0
    helix_accel_rad_s2: float = 4 * math.pi
    pocket_width_mm: tuple[float, float] = (10.0, 20.0)
    pocket_length_mm: tuple[float, float] = (20.0, 40.0)
    pocket_stepover_mm: tuple[float, float] = (4.0, 6.0)
    pocket_feed_mm_s: tuple[float, float] = (20.0, 40.0)
    pocket_a_max_mm_s2: float = 250.0
    sensor: SensorModel = field(default_factory=SensorModel)
    controller_rate_hz: float = 110.0
    common_rate_hz: float = 100.0
    lp_cutoff_hz: float = 20.0
    lp_order: int = 4

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sensor"] = self.sensor.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        if "sensor" in d:
            s = dict(d["sensor"])
            s["vibration_components"] = tuple(VibrationComponent(**c) for c in s.get("vibration_components", ()))
            s["bias_m_s2"] = tuple(s.get("bias_m_s2", (0.0, 0.0, 0.0)))
            d["sensor"] = SensorModel(**s)
        for k, v in d.items():
            if isinstance(v, list):
                d[k] = tuple(v)
        return cls(**d)

    @property
    def decimation_factor(self) -> int:
        r = self.sensor.raw_rate_hz / self.common_rate_hz
        if abs(r - round(r)) > 1e-9:
            raise ValueError("raw rate must be an integer multiple of the common rate")
        return int(round(r))


@dataclass
class SequenceRecord:
    """One machining sequence: raw sensor stream, controller positions and the aligned pair."""

    series_id: int
    seq_id: int
    accel_raw: SampledSignal
    position_ctrl: SampledSignal
    pair: AlignedPair
    p0_mm: np.ndarray
    phase_bounds: dict[str, int]
    seed: int

    @property
    def truth(self) -> SampledSignal:
        return self.pair.position

    @property
    def key(self) -> tuple[int, int]:
        return self.series_id, self.seq_id


@dataclass
class ScenarioDataset:
    scenario: int
    train: list[SequenceRecord]
    test: list[SequenceRecord]
    seed: int
    config: GeneratorConfig = field(default_factory=GeneratorConfig)

    def __post_init__(self):
        overlap = {r.series_id for r in self.train} & {r.series_id for r in self.test}
        if overlap:
            raise ValueError(f"series {sorted(overlap)} appear in both train and test")

    @property
    def train_pairs(self) -> list[AlignedPair]:
        return [r.pair for r in self.train]

    @property
    def test_pairs(self) -> list[AlignedPair]:
        return [r.pair for r in self.test]


def _uniform(rng, bounds):
    lo, hi = bounds
    return float(rng.uniform(lo, hi))


def _series_params(cfg: GeneratorConfig, seed: int, series_id: int) -> dict:
    rng = np.random.default_rng(np.random.SeedSequence([seed, series_id]))
    return {
        "corner": np.array([_uniform(rng, cfg.corner_x_mm), _uniform(rng, cfg.corner_y_mm),
                            _uniform(rng, cfg.corner_z_mm)]),
        "helix": HelixParams(
            radius_mm=_uniform(rng, cfg.helix_radius_mm),
            angular_rate_rad_s=_uniform(rng, cfg.helix_rate_rad_s),
            depth_mm=_uniform(rng, cfg.helix_depth_mm),
            turns=cfg.helix_turns,
            angular_accel_rad_s2=cfg.helix_accel_rad_s2,
        ),
        "pocket": PocketParams(
            width_mm=_uniform(rng, cfg.pocket_width_mm),
            length_mm=_uniform(rng, cfg.pocket_length_mm),
            stepover_mm=_uniform(rng, cfg.pocket_stepover_mm),
            feed_mm_s=_uniform(rng, cfg.pocket_feed_mm_s),
        ),
    }


def machining_cycle(cfg: GeneratorConfig, seed: int, series_id: int, seq_id: int) -> Trajectory:
    """Full cycle (parking dwell, run-up, helical ramp-in, pocket) of one sequence."""
    sp = _series_params(cfg, seed, series_id)
    rng = np.random.default_rng(np.random.SeedSequence([seed, series_id, seq_id, 0]))
    target = sp["corner"] + rng.uniform(-1.0, 1.0, size=3) * cfg.target_jitter_mm
    park = np.asarray(cfg.parking_mm, dtype=float)
    run_up = Trajectory([
        Dwell(park, cfg.parking_dwell_s, Phase.RUN_UP),
        LinearMove(park, target, cfg.rapid_v_max_mm_s, cfg.rapid_a_max_mm_s2, Phase.RUN_UP),
    ])
    helix = Trajectory([HelixSegment(target, sp["helix"], math.pi, Phase.HELICAL_RAMP_IN)])
    pocket = pocket_trajectory(MotionProfileSpec(
        Phase.POCKET_MILLING, tuple(helix.end_point), None,
        sp["pocket"].feed_mm_s, cfg.pocket_a_max_mm_s2, pocket=sp["pocket"]))
    return run_up + helix + pocket


def scenario_duration(traj: Trajectory, scenario: int, rate_hz: float) -> float:
    """Length of the scenario's leading window, floored onto the model grid."""
    ends = traj.phase_end_times()
    run_up = ends[Phase.RUN_UP.value]
    t_end = {
        1: 0.5 * run_up,
        2: run_up,
        3: ends[Phase.HELICAL_RAMP_IN.value],
        4: ends[Phase.POCKET_MILLING.value],
    }[scenario]
    return math.floor(t_end * rate_hz + 1e-9) / rate_hz


def _phase_bounds(traj: Trajectory, rate_hz: float, n: int) -> dict[str, int]:
    bounds = {}
    for name, t_end in traj.phase_end_times().items():
        bounds[name] = min(n, int(math.floor(t_end * rate_hz + 1e-9)) + 1)
    return bounds


def _sequence_seed(seed: int, series_id: int, seq_id: int) -> int:
    return int(np.random.SeedSequence([seed, series_id, seq_id, 1]).generate_state(1)[0])


def make_sequence(cfg: GeneratorConfig, scenario: int, seed: int, series_id: int,
                  seq_id: int) -> SequenceRecord:
    # local import: dsp_recon imports this module for its config defaults
    from .dsp_recon import DspPipelineConfig, preprocess

    traj = machining_cycle(cfg, seed, series_id, seq_id)
    duration = scenario_duration(traj, scenario, cfg.common_rate_hz)
    noise_seed = _sequence_seed(seed, series_id, seq_id)
    raw = sensor_readout(traj, cfg.sensor, noise_seed, duration=duration)
    n_ctrl = int(math.ceil(duration * cfg.controller_rate_hz - 1e-9)) + 1
    t_ctrl = np.arange(n_ctrl) / cfg.controller_rate_hz
    ctrl = SampledSignal(AXES, traj.eval(t_ctrl), cfg.controller_rate_hz, 0.0, "mm")
    pre_cfg = DspPipelineConfig.from_generator(cfg)
    pair = align(preprocess(raw, pre_cfg), ctrl, cfg.common_rate_hz)
    p0 = traj.eval(np.array([0.0]))[0]
    return SequenceRecord(series_id, seq_id, raw, ctrl, pair, p0,
                          _phase_bounds(traj, cfg.common_rate_hz, len(pair)), noise_seed)


def build_scenario(scenario: int, n_train_series: int = 6, n_test_series: int = 2,
                   seqs_per_series: int = 6, seed: int = 0,
                   config: GeneratorConfig | None = None) -> ScenarioDataset:
    """Generate train/test sequences for one scenario.

    Train series get ids ``0 .. n_train_series-1``, test series the following
    ids, so the split is by series. Every scenario is a prefix of the same
    underlying cycles for a given seed.
    """
    if scenario not in (1, 2, 3, 4):
        raise ValueError(f"scenario must be 1..4, got {scenario!r}")
    if min(n_train_series, n_test_series, seqs_per_series) < 1:
        raise ValueError("series and sequence counts must be >= 1")
    cfg = config or GeneratorConfig()
    n_series = n_train_series + n_test_series
    records = [make_sequence(cfg, scenario, seed, s, j)
               for s in range(n_series) for j in range(seqs_per_series)]
    train = [r for r in records if r.series_id < n_train_series]
    test = [r for r in records if r.series_id >= n_train_series]
    return ScenarioDataset(scenario, train, test, seed, cfg)


# --------------------------------------------------------------------------
# on-disk layout


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n")


def write_dataset(ds: ScenarioDataset, root) -> Path:
    """Write ``<root>/scenario<k>/{train,test}/series<i>/seq<j>/`` with CSVs and meta.json."""
    base = Path(root) / f"scenario{ds.scenario}"
    base.mkdir(parents=True, exist_ok=True)
    _dump_json({"format": "accel2pos-dataset/1", "scenario": ds.scenario, "seed": ds.seed,
                "generator": ds.config.to_dict()}, base / "dataset.json")
    for split, records in (("train", ds.train), ("test", ds.test)):
        for r in records:
            d = base / split / f"series{r.series_id}" / f"seq{r.seq_id}"
            d.mkdir(parents=True, exist_ok=True)
            write_csv(r.accel_raw, d / "accel_raw.csv")
            write_csv(r.position_ctrl, d / "position.csv")
            _dump_json({
                "scenario": ds.scenario,
                "series_id": r.series_id,
                "seq_id": r.seq_id,
                "seed": ds.seed,
                "noise_seed": r.seed,
                "p0_mm": [float(v) for v in r.p0_mm],
                "phase_bounds": r.phase_bounds,
                "sensor_model": ds.config.sensor.to_dict(),
            }, d / "meta.json")
    return base


def load_dataset(root, scenario: int | None = None) -> ScenarioDataset:
    """Load a dataset written by :func:`write_dataset` (``root`` may be the scenario dir)."""
    from .dsp_recon import DspPipelineConfig, preprocess

    base = Path(root)
    if scenario is not None and (base / f"scenario{scenario}").is_dir():
        base = base / f"scenario{scenario}"
    header = json.loads((base / "dataset.json").read_text(encoding="utf-8"))
    cfg = GeneratorConfig.from_dict(header["generator"])
    pre_cfg = DspPipelineConfig.from_generator(cfg)
    splits = {}
    for split in ("train", "test"):
        records = []
        for meta_path in sorted((base / split).glob("series*/seq*/meta.json"),
                                key=lambda p: (int(p.parent.parent.name[6:]), int(p.parent.name[3:]))):
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            raw = read_csv(meta_path.parent / "accel_raw.csv", "m/s^2")
            ctrl = read_csv(meta_path.parent / "position.csv", "mm")
            pair = align(preprocess(raw, pre_cfg), ctrl, cfg.common_rate_hz)
            records.append(SequenceRecord(meta["series_id"], meta["seq_id"], raw, ctrl, pair,
                                          np.asarray(meta["p0_mm"]), meta["phase_bounds"],
                                          meta["noise_seed"]))
        splits[split] = records
    return ScenarioDataset(header["scenario"], splits["train"], splits["test"], header["seed"], cfg)
