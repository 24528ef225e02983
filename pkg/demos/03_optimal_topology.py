"""Which vehicles should keep broadcasting?

Switching some transmitters off lowers channel contention for everyone
else, at the cost of downgrading a few followers' controller modes.  The
optimizer weighs both effects for every candidate topology and picks the
one with the lowest expected speed-oscillation energy.
"""
from cacc_oift import ControllerParams, TrafficConditions, optimize, spectrum_from_trajectory
from cacc_oift.trajectory import stop_and_go, trajectory_arrays

_, x = trajectory_arrays(stop_and_go())
spectrum = spectrum_from_trajectory(x, 0.1)
params = ControllerParams()

for density in (10.0, 25.0, 28.57, 40.0):
    res = optimize(15, TrafficConditions(density), params=params, spectrum=spectrum)
    worst = res.per_candidate_energies[-1]
    print(f"k = {density:5.2f} veh/km: best {res.best_ift}  E = {res.best_expected_energy:9.1f}"
          f"  (worst {worst[0]} E = {worst[1]:.1f}, {res.wall_time:.1f} s)")

# With perfect links nobody benefits from silence: all but the tail transmit.
res = optimize(15, TrafficConditions(28.57), params=params, spectrum=spectrum, link_success=1.0)
print(f"perfect links: {res.best_ift}")
