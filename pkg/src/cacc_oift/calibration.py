"""Slot-level Monte Carlo of one broadcast contention round, and the
least-squares fit of the unsaturated success coefficients to it.

Every sender in range has a fresh message at the start of a generation
period and draws a backoff slot uniformly from ``[0, CW-1]``.  Backoff
counters freeze while the channel is busy, so senders transmit in slot
order; equal slots collide.  A sender succeeds iff its slot is unique and
its transmission starts before the next message is generated.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .contention import ContentionCoefficients, saturated_success, CALIBRATION_RHO_MAX
from .errors import ValidationError

SLOT_TIME_S = 16e-6
GENERATION_PERIOD_S = 0.1
PACKET_BYTES = 500
DATA_RATE_BPS = 3e6
DEFAULT_TRIALS = 20000
DEFAULT_SEED = 2019


@dataclass(frozen=True)
class CalibrationRow:
    rho_bar: int
    cw: int
    p_sat: float
    p_unsat_simulated: float
    p_unsat_fitted: float


def simulate_broadcast_success(rho_bar: int, cw: int, trials: int = DEFAULT_TRIALS, rng=None,
                               slot_time=SLOT_TIME_S, period=GENERATION_PERIOD_S,
                               packet_bytes=PACKET_BYTES, data_rate=DATA_RATE_BPS) -> float:
    """Empirical per-sender success rate with ``rho_bar`` contending senders."""
    if rho_bar < 1 or cw < 2:
        raise ValidationError("need rho_bar >= 1 and CW >= 2")
    rng = np.random.default_rng(rng)
    airtime = packet_bytes * 8.0 / data_rate
    slots = rng.integers(0, cw, size=(trials, rho_bar))
    # occupancy[t, s] = number of senders that picked slot s in trial t
    occupancy = np.zeros((trials, cw), dtype=np.int64)
    np.add.at(occupancy, (np.arange(trials)[:, None], slots), 1)
    busy_before = np.cumsum(occupancy > 0, axis=1) - (occupancy > 0)
    unique = np.take_along_axis(occupancy, slots, axis=1) == 1
    start = slots * slot_time + np.take_along_axis(busy_before, slots, axis=1) * airtime
    ok = unique & (start < period)
    return float(ok.mean())


def fit_coefficients(rho, cw, p_sat, p_sim) -> ContentionCoefficients:
    """Least squares for ``p_sim ~ (k1 ln rho + k2 CW + k3) p_sat``.

    The fit is constrained so that the fitted probability never exceeds 1
    on the calibration points.  With a single CW value ``k2`` is not
    identifiable and is fixed at 0.
    """
    rho, cw, p_sat, p_sim = (np.asarray(a, float) for a in (rho, cw, p_sat, p_sim))
    multi = np.unique(cw).size > 1
    cols = [np.log(rho) * p_sat, cw * p_sat, p_sat] if multi else [np.log(rho) * p_sat, p_sat]
    A = np.column_stack(cols)
    k = np.linalg.lstsq(A, p_sim, rcond=None)[0]
    if np.max(A @ k) > 1.0:
        res = optimize.minimize(
            lambda x: np.sum((A @ x - p_sim) ** 2), k,
            jac=lambda x: 2.0 * A.T @ (A @ x - p_sim),
            constraints=[{"type": "ineq", "fun": lambda x: 1.0 - A @ x, "jac": lambda x: -A}],
            method="SLSQP", options={"ftol": 1e-15, "maxiter": 500},
        )
        k = res.x
        # SLSQP may sit a hair outside the constraint; pull back onto it
        k = k / max(1.0, float(np.max(A @ k)))
    if multi:
        k1, k2, k3 = k
    else:
        (k1, k3), k2 = k, 0.0
    return ContentionCoefficients(float(k1), float(k2), float(k3))


def calibrate_coefficients(cws=(8,), rho_max=CALIBRATION_RHO_MAX, trials=DEFAULT_TRIALS,
                           seed=DEFAULT_SEED):
    """Run the Monte Carlo over ``rho_bar = 1..rho_max`` for each CW and fit.

    Returns ``(coefficients, rows)``; the rows form the calibration table.
    """
    rng = np.random.default_rng(seed)
    rho, cw_col, p_sat, p_sim = [], [], [], []
    for cw in cws:
        for r in range(1, rho_max + 1):
            rho.append(r)
            cw_col.append(cw)
            p_sat.append(saturated_success(r, cw))
            p_sim.append(simulate_broadcast_success(r, cw, trials, rng))
    coeffs = fit_coefficients(rho, cw_col, p_sat, p_sim)
    fitted = coeffs.factor(np.asarray(rho, float), np.asarray(cw_col, float)) * np.asarray(p_sat)
    rows = [CalibrationRow(*vals) for vals in zip(rho, cw_col, p_sat, p_sim, fitted.tolist())]
    return coeffs, rows


def fit_errors(rows) -> np.ndarray:
    """Fitted minus simulated success probability, one entry per row."""
    return np.array([r.p_unsat_fitted - r.p_unsat_simulated for r in rows])


def write_calibration_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rho_bar", "cw", "p_sat", "p_unsat_simulated", "p_unsat_fitted"])
        for r in rows:
            w.writerow([r.rho_bar, r.cw, repr(r.p_sat), repr(r.p_unsat_simulated), repr(r.p_unsat_fitted)])


def read_calibration_csv(path):
    with open(path, newline="") as fh:
        return [
            CalibrationRow(int(d["rho_bar"]), int(d["cw"]), float(d["p_sat"]),
                           float(d["p_unsat_simulated"]), float(d["p_unsat_fitted"]))
            for d in csv.DictReader(fh)
        ]
