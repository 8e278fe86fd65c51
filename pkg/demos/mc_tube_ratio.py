"""
Monte-Carlo view of the Onsager-Machlup action.

For small tubes, P(tube around psi1) / P(tube around psi2) should be close to
exp(S(psi2) - S(psi1)). We take the OU most probable path and a copy bumped
by 0.45 sin(pi t / l), count tube hits in unconditioned and bridge
ensembles, and compare the log-ratios with the action difference.
Smaller than the full check (n = 2e5) so it runs in seconds.
"""
import numpy as np

from mptp import Path, make_potential, om_ratio_check
from mptp.lineardyn import ou_analytic_path

theta, mu, l = 2.0, 1.0, 1.0
p = make_potential("ou", {"theta": theta, "mu": mu})
n_fine = 8 * 25
psi1 = ou_analytic_path(theta, mu, 1.0, 0.0, 1.0, l, l / n_fine)
psi2 = Path(0.0, psi1.dt, psi1.values + 0.45 * np.sin(np.pi * psi1.times / l)[:, None])

rep = om_ratio_check(p, 1.0, [0.0], [1.0], l, l / 8, psi1, psi2, delta=0.25, n=40_000,
                     seed=3, substeps=25)
print(f"action difference {rep.delta_action:.3f} (tube radius {rep.delta:g})")
for c in rep.checks:
    print(f"{c.ensemble:>13}: hits {c.tube1.hits}/{c.tube2.hits}, "
          f"log-ratio {c.log_ratio:.3f} +- {c.se:.3f}")
