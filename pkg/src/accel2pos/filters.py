"""Butterworth IIR design and causal / zero-phase application.

Filters are realized as cascades of second-order sections (SOS) because
the drift-compensation stages run at normalized cutoffs around 1e-3, where
direct-form coefficients lose too much precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import signal as sps

from .timeseries import SampledSignal

__all__ = [
    "DigitalFilter",
    "FilterKind",
    "FilterSpec",
    "apply",
    "design_butterworth",
    "filter_signal",
]

MAX_ORDER = 8


class FilterKind(str, Enum):
    LOW_PASS = "low_pass"
    HIGH_PASS = "high_pass"


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth filter parameters.

    A ``cutoff_hz`` of 0 marks a disabled stage (only meaningful for the
    high-pass drift compensation stages).
    """

    kind: FilterKind
    cutoff_hz: float
    order: int = 2
    zero_phase: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", FilterKind(self.kind))
        if self.cutoff_hz < 0:
            raise ValueError("cutoff_hz must be non-negative")
        if int(self.order) != self.order or not 1 <= self.order <= MAX_ORDER:
            raise ValueError(f"order must be an integer in [1, {MAX_ORDER}], got {self.order!r}")
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "cutoff_hz", float(self.cutoff_hz))

    @property
    def enabled(self) -> bool:
        return self.cutoff_hz > 0

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "cutoff_hz": self.cutoff_hz,
                "order": self.order, "zero_phase": self.zero_phase}


@dataclass(frozen=True)
class DigitalFilter:
    """Designed filter: SOS coefficient array of shape ``(n_sections, 6)``."""

    sos: np.ndarray
    spec: FilterSpec
    sample_rate_hz: float

    @property
    def poles(self) -> np.ndarray:
        return np.concatenate([np.roots(sec[3:]) for sec in self.sos])

    def response(self, freqs_hz) -> np.ndarray:
        """Complex frequency response H(e^{jw}) at the given frequencies."""
        z = np.exp(2j * np.pi * np.asarray(freqs_hz, dtype=float) / self.sample_rate_hz)
        h = np.ones_like(z)
        for b0, b1, b2, a0, a1, a2 in self.sos:
            h = h * (b0 + b1 / z + b2 / z**2) / (a0 + a1 / z + a2 / z**2)
        return h


def design_butterworth(spec: FilterSpec, sample_rate_hz: float) -> DigitalFilter:
    """Digital Butterworth filter via the pre-warped bilinear transform."""
    nyquist = sample_rate_hz / 2.0
    if not 0 < spec.cutoff_hz < nyquist:
        raise ValueError(
            f"cutoff {spec.cutoff_hz} Hz must lie in (0, {nyquist}) Hz at fs={sample_rate_hz} Hz"
        )
    btype = "lowpass" if spec.kind is FilterKind.LOW_PASS else "highpass"
    sos = sps.butter(spec.order, spec.cutoff_hz, btype=btype, fs=sample_rate_hz, output="sos")
    return DigitalFilter(sos, spec, float(sample_rate_hz))


def filter_signal(filt: DigitalFilter, x: np.ndarray, zero_phase: bool = True) -> np.ndarray:
    """Filter an array along axis 0.

    Zero-phase mode runs forward then backward with odd reflective padding of
    ``3 * order`` samples per side and steady-state initial conditions; the
    causal mode is a single pass from rest.
    """
    # scipy SOS kernels refuse read-only buffers
    x = np.array(x, dtype=np.float64)
    padlen = 3 * filt.spec.order
    if x.shape[0] <= padlen:
        raise ValueError(
            f"signal of length {x.shape[0]} too short for order-{filt.spec.order} "
            f"filtering (needs > {padlen} samples)"
        )
    if zero_phase:
        return sps.sosfiltfilt(filt.sos, x, axis=0, padtype="odd", padlen=padlen)
    return sps.sosfilt(filt.sos, x, axis=0)


def apply(filt: DigitalFilter, signal: SampledSignal, zero_phase: bool = True) -> SampledSignal:
    if signal.sample_rate_hz != filt.sample_rate_hz:
        raise ValueError(
            f"filter designed for {filt.sample_rate_hz} Hz applied to {signal.sample_rate_hz} Hz signal"
        )
    return signal.with_data(filter_signal(filt, signal.data, zero_phase))
