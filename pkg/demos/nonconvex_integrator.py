"""An integrator that has to steer around an obstacle.

x' = u on [0, 1], minimize the integral of x^2 going from 0 to 3/4, while
staying outside the disc of radius 1/5 around (t, x) = (1/2, 1/5). The
best known cost is 0.176; a sixth-order moment relaxation bounds it from
below by 0.164, so that bound alone cannot certify the optimum.

Relaxation moments are not computed here. As a stand-in we take the moments
of a coarse admissible path over the obstacle, reconstruct it, refine it and
compare the refined cost with the lower bound.

    python3 demos/nonconvex_integrator.py [out_dir]
"""
import sys
from pathlib import Path

import numpy as np

from momentrecon import problems
from momentrecon.csvio import write_process_csv
from momentrecon.oracle import occupation_moments
from momentrecon.pipeline import certify, reconstruct_process
from momentrecon.refine import local_optimize

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out/nonconvex_integrator")
out.mkdir(parents=True, exist_ok=True)
prob = problems.nonconvex_integrator()

coarse = problems.nonconvex_coarse_process()
y = occupation_moments(coarse, 8, box=prob.box)
print(f"coarse path cost {y.evaluate(prob.h.terms):.4f}")

rec = reconstruct_process(y, prob)
write_process_csv(out / "assembled.csv", rec.assembled.process)

res = local_optimize(prob, rec.assembled, N=40)
t, x = res.trajectory.times, res.trajectory.states[:, 0]
slack = (x - 0.2) ** 2 + (t - 0.5) ** 2 - 0.04
print(f"refined cost {res.cost:.5f}, smallest obstacle slack {slack.min():.1e}, converged: {res.converged}")
write_process_csv(out / "refined.csv", res.trajectory.process())

for bound in (0.164, res.cost):
    print(f"against lower bound {bound:.4f}: {certify(res.cost, bound).line()}")

# Where the path goes relative to the obstacle
k = np.argmin(np.abs(t - 0.5))
print(f"x(1/2) = {x[k]:.3f} (obstacle top at 0.4)")
