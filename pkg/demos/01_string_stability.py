"""Which controller modes damp a leader's oscillation?

A follower runs one of four modes depending on which predecessor messages
arrived: CACC1 (both), CACC2 (immediate only), CACC3 (second only) or ACC
(none, sensors only).  Here we sweep the single-link transfer magnitude of
each mode and show where ACC stops being string stable.
"""
import math

import numpy as np

from cacc_oift import ControllerParams, cutoff_frequency, single_link_response, stability_region_check
from cacc_oift.ift import MODE_NAMES

params = ControllerParams()
grid = np.logspace(-3, 3, 2048)

print("mode    wK    max|SS|       cut-off (rad/s)")
for mode in (1, 2, 3, 4):
    peak = np.max(np.abs(single_link_response(params, mode, grid)))
    print(f"{MODE_NAMES[mode]:6s} {params.omega_K[mode]:5.2f}  {peak:.9f}   {cutoff_frequency(params, mode):.5f}")

# CACC1 has the lowest cut-off, so it filters the widest band of leader motion.

print("\nACC gain sweep (h = 1 s): |SS| <= 1 needs h*wK >= sqrt(2)")
for hw in (1.0, 1.2, 1.3, math.sqrt(2), 1.45, 2.0):
    p = ControllerParams(omega_K={1: 0.8, 2: 0.8, 3: 0.9, 4: hw})
    peak = np.max(np.abs(single_link_response(p, 4, grid)))
    verdict = "stable" if stability_region_check(p, 4).passed else "amplifies"
    print(f"  h*wK = {hw:.4f}: peak {peak:.6f} -> {verdict}")
