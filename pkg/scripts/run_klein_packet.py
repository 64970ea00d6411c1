"""Klein-zone packet at the default resolution, compared with the plane-wave R.

Usage: python3 scripts/run_klein_packet.py [--sigma 40] [--dx 0.05] [--V0 3]
"""
import argparse
import time

from kleinstep import momentum_averaged_reflectivity, solve_step
from kleinstep.fv import content_classify
from kleinstep.sim import centroid_after, measure_R, plan_packet_run, run_plan

ap = argparse.ArgumentParser()
ap.add_argument("--E", type=float, default=1.25)
ap.add_argument("--V0", type=float, default=3.0)
ap.add_argument("--sigma", type=float, default=40.0)
ap.add_argument("--dx", type=float, default=0.05)
args = ap.parse_args()

plan = plan_packet_run(args.E, args.V0, sigma_x=args.sigma, dx=args.dx)
cfg = plan.config
print(f"n={cfg.grid.n} dt={cfg.dt:.5g} steps={cfg.n_steps} regime={plan.regime.value}")
t0 = time.perf_counter()
res = run_plan(plan)
elapsed = time.perf_counter() - t0

m = measure_R(res)
R0 = solve_step(plan.params, args.V0).R
Ravg = momentum_averaged_reflectivity(args.E, args.V0, 1.0, args.sigma)
Q = res.series("Q_total")
right = content_classify(res.final, res.final.grid.x > 0)
cen = centroid_after(res)
print(f"run time          {elapsed:.1f} s")
print(f"R measured        {m.R:.6f}")
print(f"R plane wave      {R0:.6f}  ({m.R / R0 - 1:+.3%})")
print(f"R spectrum avg    {Ravg:.6f}  ({m.R / Ravg - 1:+.3%})")
print(f"T measured        {m.T:.6f}  R - T = {m.R - m.T:.8f}")
print(f"Q_right           {m.Q_right:.6g}")
print(f"charge drift      {abs(Q - Q[0]).max() / abs(Q[0]):.3g}")
print(f"right side        {right.dominant} ({right.antiparticle_fraction:.4f} in chi)")
if cen.size > 1:
    print(f"centroid speed    {(cen[-1] - cen[0]) / (res.series('t')[-1] - cfg.measurement_time):.5f}")
