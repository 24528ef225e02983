import math

import numpy as np
import pytest

from cacc_oift.calibration import (calibrate_coefficients, fit_coefficients, fit_errors,
                                   read_calibration_csv, simulate_broadcast_success,
                                   write_calibration_csv)
from cacc_oift.contention import DEFAULT_COEFFICIENTS, saturated_success


def test_single_sender_always_succeeds():
    assert simulate_broadcast_success(1, 8, 2000, rng=0) == 1.0


@pytest.mark.parametrize("rho", [2, 5, 10])
def test_unique_slot_probability(rho):
    # with the deadline slack the only loss is a shared slot: (1 - 1/CW)^(rho-1)
    exact = (7 / 8) ** (rho - 1)
    assert simulate_broadcast_success(rho, 8, 40000, rng=1) == pytest.approx(exact, abs=0.01)


def test_deadline_binds_with_tiny_period():
    assert simulate_broadcast_success(4, 8, 5000, rng=2, period=1e-6) < 0.5


def test_fit_recovers_exact_coefficients():
    rho = np.arange(1, 13)
    ps = np.array([saturated_success(r, 8) for r in rho])
    p = (-0.5 * np.log(rho) + 3.0) * ps
    k = fit_coefficients(rho, np.full(12, 8), ps, p)
    assert (k.k1, k.k2, k.k3) == pytest.approx((-0.5, 0.0, 3.0), abs=1e-9)


def test_defaults_reproduce_and_fit_quality(tmp_path):
    coeffs, rows = calibrate_coefficients()
    assert (coeffs.k1, coeffs.k2, coeffs.k3) == pytest.approx(
        (DEFAULT_COEFFICIENTS.k1, DEFAULT_COEFFICIENTS.k2, DEFAULT_COEFFICIENTS.k3), abs=1e-12)
    err = fit_errors(rows)
    assert abs(err.mean()) <= 0.01 and err.std() <= 0.06
    assert max(r.p_unsat_fitted for r in rows) <= 1.0 + 1e-12
    path = tmp_path / "cal.csv"
    write_calibration_csv(rows, path)
    assert read_calibration_csv(path) == rows


def test_multi_cw_fits_k2():
    coeffs, rows = calibrate_coefficients(cws=(8, 16), rho_max=8, trials=4000, seed=3)
    assert coeffs.k2 != 0.0
    assert {r.cw for r in rows} == {8, 16}
    assert math.isfinite(coeffs.k1)
