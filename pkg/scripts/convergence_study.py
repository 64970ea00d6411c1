"""Continuity-residual convergence for the free packet (dt = 0.4 dx^2).

Prints the residual at t = 1 for each dx and the fitted order, for both
stencil orders.
"""
import numpy as np

from kleinstep.sim import evolve, free_packet_plan

DXS = (0.2, 0.1, 0.05, 0.025)

for order in (4, 2):
    res = []
    for dx in DXS:
        state, cfg = free_packet_plan(dx=dx, stencil_order=order)
        res.append(evolve(state, cfg).records[-1].continuity_residual_max)
    slope = np.polyfit(np.log(DXS), np.log(res), 1)[0]
    print(f"stencil order {order}")
    for dx, r in zip(DXS, res):
        print(f"  dx={dx:<6} residual={r:.4e}")
    print(f"  fitted order {slope:.3f}")
