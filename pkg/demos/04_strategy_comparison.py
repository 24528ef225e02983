"""Optimized, passive and fixed topologies in closed loop.

Twenty seeded runs of a 15-vehicle platoon behind a stop-and-go leader at
28.57 veh/km.  OIFT broadcasts on the optimized topology, DIFT keeps every
sender on and adapts the controller, FIFT uses a one-predecessor CACC that
falls back to ACC on any lost message.
"""
import numpy as np

from cacc_oift import SimConfig, TrafficConditions
from cacc_oift.sim import compare_strategies
from cacc_oift.trajectory import stop_and_go

res = compare_strategies(SimConfig(), stop_and_go(), range(20), n_plus_1=15,
                         traffic=TrafficConditions(28.57))

print("strategy  energy    std e (first -> last follower)  max|e|  topology")
for name, r in res.items():
    std = r["mean_spacing_std"]
    print(f"{name:8s} {r['mean_total_energy']:8.0f}   {std[0]:.3f} -> {std[-1]:.3f}"
          f"                  {np.max(r['max_abs_spacing']):.2f}    {r['runs'][0].ifts[0]}")
