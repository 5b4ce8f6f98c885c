"""Uniformly sampled multi-channel signals, resampling and stream alignment."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "AlignmentError",
    "AlignedPair",
    "SampledSignal",
    "align",
    "decimate",
    "read_csv",
    "resample_linear",
    "write_csv",
]

# Tolerance used when counting how many grid points fit into an interval.
_GRID_EPS = 1e-9


class AlignmentError(ValueError):
    """Raised when two streams share no common time support."""


@dataclass(frozen=True)
class SampledSignal:
    """Uniformly sampled multi-channel time series.

    ``data`` has shape ``(N, n_channels)``; sample ``k`` is taken at
    ``t0_s + k / sample_rate_hz``.
    """

    channels: tuple[str, ...]
    data: np.ndarray
    sample_rate_hz: float
    t0_s: float = 0.0
    units: str = field(default="", compare=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise ValueError("data must be 1-D or 2-D")
        channels = tuple(self.channels)
        if data.shape[1] != len(channels):
            raise ValueError(
                f"{len(channels)} channel labels for {data.shape[1]} data columns"
            )
        if data.shape[0] < 1:
            raise ValueError("a signal needs at least one sample")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "t0_s", float(self.t0_s))

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate_hz

    @property
    def times(self) -> np.ndarray:
        return self.t0_s + np.arange(len(self)) / self.sample_rate_hz

    @property
    def t_end_s(self) -> float:
        return self.t0_s + (len(self) - 1) / self.sample_rate_hz

    def channel(self, label: str) -> np.ndarray:
        return self.data[:, self.channels.index(label)]

    def with_data(self, data, sample_rate_hz: float | None = None,
                  t0_s: float | None = None, units: str | None = None) -> "SampledSignal":
        """Return a copy with replaced samples (and optionally rate/start/units)."""
        return SampledSignal(
            self.channels,
            data,
            self.sample_rate_hz if sample_rate_hz is None else sample_rate_hz,
            self.t0_s if t0_s is None else t0_s,
            self.units if units is None else units,
        )

    def head(self, n: int) -> "SampledSignal":
        return self.with_data(self.data[:n])

    def __eq__(self, other):
        if not isinstance(other, SampledSignal):
            return NotImplemented
        return (
            self.channels == other.channels
            and self.sample_rate_hz == other.sample_rate_hz
            and self.t0_s == other.t0_s
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None


@dataclass(frozen=True)
class AlignedPair:
    """Acceleration and position streams sharing one time grid."""

    accel: SampledSignal
    position: SampledSignal
    common_rate_hz: float

    def __post_init__(self):
        if not (self.accel.sample_rate_hz == self.position.sample_rate_hz
                == self.common_rate_hz):
            raise ValueError("accel, position and common rate must agree")
        if len(self.accel) != len(self.position):
            raise ValueError("accel and position lengths differ")

    def __len__(self) -> int:
        return len(self.accel)


def decimate(signal: SampledSignal, factor: int) -> SampledSignal:
    """Keep every ``factor``-th sample starting at index 0.

    No anti-alias filtering is done here; band-limit the signal first.
    """
    if int(factor) != factor or factor < 1:
        raise ValueError(f"decimation factor must be a positive integer, got {factor!r}")
    factor = int(factor)
    if factor == 1:
        return signal
    return signal.with_data(signal.data[::factor],
                            sample_rate_hz=signal.sample_rate_hz / factor)


def _grid(t_start: float, t_end: float, rate: float) -> np.ndarray:
    n = int(math.floor((t_end - t_start) * rate + _GRID_EPS)) + 1
    return t_start + np.arange(n) / rate


def _interp(signal: SampledSignal, times: np.ndarray) -> np.ndarray:
    src = signal.times
    return np.column_stack(
        [np.interp(times, src, signal.data[:, j]) for j in range(signal.data.shape[1])]
    )


def resample_linear(signal: SampledSignal, target_rate_hz: float) -> SampledSignal:
    """Linearly interpolate every channel onto a uniform grid at ``target_rate_hz``.

    The grid starts at the first sample and contains every target instant
    inside the original support, so the first sample is always kept and the
    last one is kept whenever it falls on the new grid.
    """
    if not target_rate_hz > 0:
        raise ValueError("target_rate_hz must be positive")
    if len(signal) < 2:
        raise ValueError("resampling needs at least two samples")
    if target_rate_hz == signal.sample_rate_hz:
        return signal
    times = _grid(signal.t0_s, signal.t_end_s, target_rate_hz)
    return signal.with_data(_interp(signal, times), sample_rate_hz=target_rate_hz)


def align(accel: SampledSignal, position: SampledSignal,
          common_rate_hz: float = 100.0) -> AlignedPair:
    """Resample both streams onto one grid over the intersection of their supports."""
    t_start = max(accel.t0_s, position.t0_s)
    t_end = min(accel.t_end_s, position.t_end_s)
    if t_end < t_start:
        raise AlignmentError(
            f"streams do not overlap: accel [{accel.t0_s}, {accel.t_end_s}] s, "
            f"position [{position.t0_s}, {position.t_end_s}] s"
        )
    times = _grid(t_start, t_end, common_rate_hz)

    def on_grid(sig: SampledSignal) -> SampledSignal:
        if sig.sample_rate_hz == common_rate_hz and sig.t0_s == t_start and len(sig) == len(times):
            return sig
        if len(sig) == 1:
            data = np.repeat(sig.data, len(times), axis=0)
        else:
            data = _interp(sig, times)
        return sig.with_data(data, sample_rate_hz=common_rate_hz, t0_s=t_start)

    return AlignedPair(on_grid(accel), on_grid(position), float(common_rate_hz))


def write_csv(signal: SampledSignal, path) -> None:
    """Write ``t,<ch...>`` CSV with round-trip (17 significant digit) precision."""
    buf = io.StringIO()
    buf.write(",".join(("t",) + signal.channels) + "\n")
    times = signal.times
    for t, row in zip(times, signal.data):
        buf.write(format(t, ".17g"))
        for v in row:
            buf.write(",")
            buf.write(format(v, ".17g"))
        buf.write("\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def read_csv(path, units: str = "") -> SampledSignal:
    """Read a signal written by :func:`write_csv`; the rate is inferred from ``t``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "t":
            raise ValueError(f"{path}: header must start with 't'")
        table = np.loadtxt(fh, delimiter=",", ndmin=2)
    if table.shape[0] < 1:
        raise ValueError(f"{path}: no samples")
    t = table[:, 0]
    if len(t) > 1:
        rate = (len(t) - 1) / (t[-1] - t[0])
        # snap rates that were written from an exact value
        rounded = round(rate, 6)
        rate = rounded if abs(rounded - rate) < 1e-6 * rate else rate
    else:
        rate = 1.0
    return SampledSignal(tuple(header[1:]), table[:, 1:], rate, float(t[0]), units)
