"""How the rate weight trades secrecy rate against error and leakage levels.

For one drop, the joint optimization is rerun with several weights. Small
weights push the error probability and leakage far below their caps at a
modest rate cost; weights close to one leave both at the caps.
"""

from fblsecure.channel import ScenarioConfig, drop_seed, generate_drop
from fblsecure.joint import joint_solve

cfg = ScenarioConfig()
channels = generate_drop(cfg, drop_seed(3))
print(f"{'w':>10} {'secrecy':>9} {'max eps':>10} {'max leak':>10} {'outer':>6}")
for w in (1e-4, 1e-2, 0.5, 0.99, 1 - 1e-6):
    res = joint_solve(channels, cfg.fbl_params(weight=w))
    print(f"{w:10.6g} {res.sum_secrecy_rate:9.3f} {res.max_error_prob:10.2e} "
          f"{res.max_leakage:10.2e} {res.outer_iterations:6d}")
