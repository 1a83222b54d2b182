"""Small transmit-power sweep written to CSV, with a per-point summary.

Run with ``python3 demos/power_sweep.py [out.csv]``. The full-size version
of this sweep is ``fblsecure sweep``.
"""

import sys

from fblsecure.harness import SweepSpec, emit, run_sweep, summarize

out = sys.argv[1] if len(sys.argv) > 1 else "power_sweep.csv"
spec = SweepSpec(values=(0.0, 10.0, 20.0, 30.0), drops=10,
                 algorithms=("alg2", "alg2-cov", "fbl-se-max", "rzf", "zf-eve", "mrt"))
rows = run_sweep(spec)
emit(rows, out)

table = {}
for s in summarize(rows):
    table.setdefault(s["algorithm"], {})[s["sweep_value"]] = s["sum_secrecy_rate"]
print("mean sum secrecy rate (bits/s/Hz)")
print(f"{'P (dBm)':<11}" + "".join(f"{v:>8g}" for v in spec.values))
for alg, by_p in table.items():
    print(f"{alg:<11}" + "".join(f"{by_p[v]:8.2f}" for v in spec.values))
print(f"\n{len(rows)} rows written to {out}")
