"""Compare every precoder on one random drop of the default scenario.

Run with ``python3 demos/single_drop.py [seed]``.
"""

import sys

from fblsecure.channel import ScenarioConfig, drop_seed, generate_drop
from fblsecure.harness import ALGORITHMS, DropContext, SweepSpec, drop_metrics, run_algorithm

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
cfg = ScenarioConfig()
channels = generate_drop(cfg, drop_seed(seed))
params = cfg.fbl_params()
ctx = DropContext(channels, params, SweepSpec(scenario=cfg))

print(f"N={cfg.n_antennas} K={cfg.n_users} M={cfg.n_eves} P={cfg.power_dbm} dBm L={cfg.blocklength}")
print(f"user distances (m): {channels.dist_user.round(1)}")
print(f"eve distances (m):  {channels.dist_eve.round(1)}\n")
print(f"{'algorithm':<11} {'secrecy':>9} {'user rate':>10} {'max eps':>10} {'max leak':>10}")
for name in ALGORITHMS:
    f, eps, delta, _, _ = run_algorithm(name, ctx)
    m = drop_metrics(f, eps, delta, channels, params)
    print(f"{name:<11} {m['sum_secrecy_rate']:9.3f} {m['sum_rate']:10.3f} "
          f"{m['max_error_prob']:10.2e} {m['max_leakage']:10.2e}")
