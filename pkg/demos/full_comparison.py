"""All four methods on all four scenarios at reduced epochs (about half an
hour on one core), written to disk in the layout the CLI reads.

    python demos/full_comparison.py out_dir [workers]

Afterwards ``accel2pos compare --dataset out_dir/datasets --checkpoints
out_dir/checkpoints --dsp-config out_dir/checkpoints --out other_dir``
regenerates the same report from the stored artifacts.
"""

import sys
import time

from accel2pos import evaluation as ev

out = sys.argv[1] if len(sys.argv) > 1 else "comparison"
workers = int(sys.argv[2]) if len(sys.argv) > 2 else 1

start = time.perf_counter()
report = ev.run_sweep(ev.SweepConfig(workers=workers), out,
                      log=lambda msg: print(f"{time.perf_counter() - start:6.0f} s  {msg}", flush=True))
print()
print(report.to_table(), end="")

# difficulty should grow with the scenario, and every learned model should beat
# double integration
for m in report.methods:
    print(f"{ev.DISPLAY[m]:<20}" + "  ".join(f"{report.mean(m, k):8.2f}" for k in report.scenarios))
