"""How reliable is a broadcast when neighbours compete for the channel?

Each activated sender draws a backoff slot from a window of CW slots.  The
more senders within radio range, the likelier a shared slot.  The library
combines a saturated-channel fixed point with a log correction fitted to a
slot-level Monte Carlo; this script shows both and refits the correction.
"""
import numpy as np

from cacc_oift import TrafficConditions, saturated_success, unsaturated_success
from cacc_oift.calibration import calibrate_coefficients, fit_errors, simulate_broadcast_success

print("rho   p_sat    p_unsat  Monte Carlo")
rng = np.random.default_rng(0)
for rho in (1, 2, 4, 6, 8, 10, 12):
    mc = simulate_broadcast_success(rho, 8, 20000, rng=rng)
    print(f"{rho:3d}  {saturated_success(rho, 8):.4f}   {unsaturated_success(rho, 8):.4f}   {mc:.4f}")

coeffs, rows = calibrate_coefficients()
err = fit_errors(rows)
print(f"\nrefit: k1={coeffs.k1:.4f} k2={coeffs.k2:.4f} k3={coeffs.k3:.4f}; "
      f"residual mean {err.mean():+.4f}, std {err.std():.4f}")

# Denser traffic widens the band of vehicles each sender competes with.
for k in (10, 25, 28.57, 40):
    t = TrafficConditions(k)
    print(f"density {k:6.2f} veh/km -> {2 * t.m} platoon neighbours within range")
