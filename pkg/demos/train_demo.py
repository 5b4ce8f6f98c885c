"""Train the three learned formulations on Scenario 1 and compare them with
optimized double integration.

    python demos/train_demo.py [out_dir]

Takes a few minutes on one core. With ``out_dir`` the report and the
per-sequence trajectories (truth and prediction) are written there.
"""

import sys
import time

from accel2pos import evaluation as ev
from accel2pos.dsp_recon import DspPipelineConfig, optimize_filters
from accel2pos.seq2seq import FormulationConfig
from accel2pos.synthgen import build_scenario

out = sys.argv[1] if len(sys.argv) > 1 else None

# 6 training and 2 test series, 6 sequences each; series never straddle the split
ds = build_scenario(1, seed=0)
print(f"scenario 1: {len(ds.train)} train / {len(ds.test)} test sequences, "
      f"{len(ds.test[0].pair)} samples at {ds.config.common_rate_hz:g} Hz")

t = time.perf_counter()
dsp = optimize_filters(ds.train_pairs, DspPipelineConfig.from_generator(ds.config), 32, seed=0)
print(f"filter search: {time.perf_counter() - t:.0f} s")

models = {}
for kind, epochs in (("m2o", 40), ("m2m", 80), ("ar", 80)):
    t = time.perf_counter()
    cfg = FormulationConfig(kind=kind, epochs=epochs)
    trained = ev.train_models(ds, cfg)
    models[(1, cfg.kind.value)] = {ax: trained[ax][:2] for ax in "xyz"}
    print(f"{ev.DISPLAY[cfg.kind.value]}: {time.perf_counter() - t:.0f} s, final training loss "
          + ", ".join(f"{ax} {trained[ax][2][-1]:.3g}" for ax in "xyz") + " mm^2")

report = ev.evaluate([ds], ["di", "m2o", "m2m", "ar"], models, {1: dsp}, out=out)
print()
print(report.to_table(), end="")
