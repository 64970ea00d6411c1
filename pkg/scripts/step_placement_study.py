"""Packet R for two ways of sampling a sharp step.

'between': the step falls midway between grid points (the default).
'on-point': a grid point sits on the step and takes V0/2.
Both are compared with the spectrum-averaged plane-wave R.
"""
from dataclasses import replace

from kleinstep import momentum_averaged_reflectivity
from kleinstep.fv import Grid1D
from kleinstep.sim import measure_R, plan_packet_run, run_plan

E, V0, SIGMA = 1.25, 3.0, 10.0
Ravg = momentum_averaged_reflectivity(E, V0, 1.0, SIGMA)
print(f"spectrum-averaged R = {Ravg:.6f}")
for dx in (0.1, 0.05, 0.025):
    plan = plan_packet_run(E, V0, sigma_x=SIGMA, dx=dx)
    g = plan.config.grid
    on = Grid1D.covering(g.x_min, g.x_max, dx, anchor=0.0)
    on_plan = replace(plan, config=replace(plan.config, grid=on))
    r_between = measure_R(run_plan(plan), 1e-2).R
    r_on = measure_R(run_plan(on_plan), 1e-2).R
    print(f"dx={dx:<6} between {r_between / Ravg - 1:+.4%}   on-point {r_on / Ravg - 1:+.4%}")
