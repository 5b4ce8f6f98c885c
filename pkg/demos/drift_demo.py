"""Why double integration drifts, and what the high-pass stages and offset
calibration do about it.

    python demos/drift_demo.py
"""

from dataclasses import replace

import numpy as np

from accel2pos.dsp_recon import (DspPipelineConfig, optimize_filters, preprocess,
                                 reconstruct_from_drive)
from accel2pos.timeseries import AlignedPair, SampledSignal

FS = 8000.0
XYZ = ("x", "y", "z")

rng = np.random.default_rng(0)
bias, noise = 0.01, 0.05
n = int(10 * FS) + 1
raw = SampledSignal(XYZ, bias + noise * rng.normal(size=(n, 3)), FS, units="m/s^2")

# 1. a stationary sensor with a small bias: position error grows as b t^2 / 2
plain = replace(DspPipelineConfig().without_hp(), calib_window_s=0.0)
drive = preprocess(raw, plain)
pos = reconstruct_from_drive(drive, plain)
print("uncompensated drift on x (mm):")
for t in (1, 2, 5, 10):
    k = int(t * drive.sample_rate_hz)
    print(f"  t = {t:2d} s  {pos.data[k, 0]:8.1f}   (b t^2 / 2 = {0.5 * bias * t**2 * 1e3:.1f})")

# 2. high-pass stages after each integration bound the drift; their cutoffs
#    and orders come from a seeded random search against known truth
truth = drive.with_data(np.zeros_like(drive.data), units="mm")
pair = AlignedPair(drive, truth, drive.sample_rate_hz)
best = optimize_filters([pair], plain, budget=32, seed=0)
hp = reconstruct_from_drive(drive, best)
print(f"\nsearched high-pass: velocity {best.hp_v.cutoff_hz:.3g} Hz (order {best.hp_v.order}), "
      f"position {best.hp_p.cutoff_hz:.3g} Hz (order {best.hp_p.order})")
print(f"  max |error| over 10 s: {np.abs(hp.data).max():.2f} mm")

# 3. offset calibration subtracts the mean of the parked first 0.5 s, which
#    removes a constant bias before anything is integrated
calibrated = replace(plain, calib_window_s=0.5)
cal = reconstruct_from_drive(preprocess(raw, calibrated), calibrated)
print(f"\ncalibrated, no high-pass: error at 10 s {np.linalg.norm(cal.data[-1]):.2f} mm "
      f"(uncalibrated {np.linalg.norm(pos.data[-1]):.0f} mm)")
# the residual comes from the noise mean inside the calibration window
