"""Broadcast contention model for platoon senders.

Per-sender success probabilities follow from the number of activated
senders within communication range: a saturated fixed point between the
transmission probability and the channel busy rate, scaled by a fitted
log-linear factor for periodic (unsaturated) message generation.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError, ValidationError
from .ift import Ift, DegenerationScenario

log = logging.getLogger(__name__)

UNSAT_FLOOR = 1e-9
FIXED_POINT_TOL = 1e-10
MAX_BISECTION_ITER = 200
CALIBRATION_RHO_MAX = 12


@dataclass(frozen=True)
class TrafficConditions:
    """Ambient traffic seen by the platoon.

    Attributes
    ----------
    density_kbar : float
        Average density of the ambient flow (veh/km).
    comm_range_R : float
        Communication range (km).
    contention_window_CW : int
        Contention window size in slots.
    """

    density_kbar: float
    comm_range_R: float = 0.2
    contention_window_CW: int = 8

    def __post_init__(self):
        if not self.density_kbar > 0:
            raise ValidationError("must be > 0", "traffic.density_kbar")
        if not self.comm_range_R > 0:
            raise ValidationError("must be > 0", "traffic.comm_range_R")
        if int(self.contention_window_CW) != self.contention_window_CW or self.contention_window_CW < 2:
            raise ValidationError("must be an integer >= 2", "traffic.contention_window_CW")

    @property
    def m(self) -> int:
        """Vehicles within range on each side: floor(range x density)."""
        return int(math.floor(self.comm_range_R * self.density_kbar + 1e-9))


@dataclass(frozen=True)
class ContentionCoefficients:
    """Fitting coefficients of the unsaturated success factor
    ``k1 * ln(rho) + k2 * CW + k3``."""

    k1: float
    k2: float
    k3: float

    def factor(self, rho_bar, cw):
        return self.k1 * np.log(rho_bar) + self.k2 * cw + self.k3

    def validate(self, cw: int, m: int):
        """Check the factor keeps ``p_unsat`` inside (0, 1] over rho in [1, 2m+1]."""
        rho = np.arange(1, 2 * m + 2, dtype=float)
        p = self.factor(rho, cw) * np.array([saturated_success(r, cw) for r in rho])
        if np.any(p <= 0) or np.any(p > 1 + 1e-12):
            bad = rho[(p <= 0) | (p > 1 + 1e-12)]
            raise ValidationError(
                f"coefficients give p_unsat outside (0, 1] at rho_bar={bad.tolist()} (CW={cw})",
                "contention",
            )


# Constrained least-squares fit of the slot-level Monte Carlo at CW=8,
# rho_bar in 1..12 (calibrate_coefficients() with its default arguments).
# k2 is not identifiable from a single CW and is pinned to 0.
DEFAULT_COEFFICIENTS = ContentionCoefficients(k1=-0.7010111443989491, k2=0.0, k3=5.236473436000086)


@dataclass(frozen=True)
class SenderSuccessProfile:
    """Per-vehicle contention quantities for one IFT."""

    ift: Ift
    rho_bar: np.ndarray
    p_sat: np.ndarray
    p_unsat: np.ndarray


def active_neighbors(ift: Ift, traffic: TrafficConditions) -> np.ndarray:
    """Activated senders within ``m`` positions of each vehicle (itself included)."""
    eta = np.asarray(ift.activation, dtype=float)
    n = eta.size
    m = traffic.m
    idx = np.arange(n)
    band = (np.abs(idx[:, None] - idx[None, :]) <= m).astype(float)
    return eta @ band


def _busy_residual(b, rho_bar, cw):
    p = 2.0 * (1.0 - b) / (1.0 - 2.0 * b + cw)
    return b - (1.0 - math.exp(-rho_bar * p))


def saturated_success(rho_bar: float, cw: int) -> float:
    return _saturated_success(float(rho_bar), int(cw))


@functools.lru_cache(maxsize=4096)
def _saturated_success(rho_bar: float, cw: int) -> float:
    """Fixed point of the saturated contention model.

    Solves ``p = 2(1-b)/(1-2b+CW)`` and ``b = 1 - exp(-rho * p)`` by
    bisection on the busy rate ``b``.  The residual is strictly increasing
    in ``b`` on [0, 1] with ``f(0) <= 0 < f(1)``, so the root is unique.
    """
    if rho_bar < 0:
        raise DomainError(f"rho_bar must be >= 0, got {rho_bar}")
    if cw < 2:
        raise DomainError(f"CW must be >= 2, got {cw}")
    if rho_bar == 0:
        return 2.0 / (1.0 + cw)
    lo, hi = 0.0, 1.0
    for _ in range(MAX_BISECTION_ITER):
        b = 0.5 * (lo + hi)
        f = _busy_residual(b, rho_bar, cw)
        if abs(f) < FIXED_POINT_TOL and hi - lo < 1e-12:
            break
        if f > 0:
            hi = b
        else:
            lo = b
    else:
        raise NumericalError(f"busy-rate bisection did not converge (rho_bar={rho_bar}, CW={cw})")
    return 2.0 * (1.0 - b) / (1.0 - 2.0 * b + cw)


def busy_rate(rho_bar: float, cw: int) -> float:
    """Channel busy rate at the saturated fixed point."""
    return 1.0 - math.exp(-rho_bar * saturated_success(rho_bar, cw))


def unsaturated_success(rho_bar: float, cw: int, coeffs: ContentionCoefficients = DEFAULT_COEFFICIENTS) -> float:
    if rho_bar < 1:
        raise DomainError(f"unsaturated success needs rho_bar >= 1, got {rho_bar}")
    p = float(coeffs.factor(rho_bar, cw)) * saturated_success(rho_bar, cw)
    if 1.0 < p <= 1.0 + 1e-12:
        p = 1.0
    if p < UNSAT_FLOOR or p > 1.0:
        log.warning(
            "calibration: p_unsat=%.6g clamped to [%g, 1] at rho_bar=%s, CW=%s",
            p, UNSAT_FLOOR, rho_bar, cw,
        )
        p = min(max(p, UNSAT_FLOOR), 1.0)
    return p


def success_profile(ift: Ift, traffic: TrafficConditions,
                    coeffs: ContentionCoefficients = DEFAULT_COEFFICIENTS) -> SenderSuccessProfile:
    """Success probabilities for every vehicle of ``ift``.

    Deactivated senders get entries too; their ``p_unsat`` is evaluated at
    ``max(rho_bar, 1)`` and is never used by :func:`scenario_probability`.
    """
    cw = traffic.contention_window_CW
    rho = active_neighbors(ift, traffic)
    cache = {}
    p_sat = np.empty_like(rho)
    p_unsat = np.empty_like(rho)
    for i, r in enumerate(rho):
        if r not in cache:
            r1 = max(r, 1.0)
            cache[r] = (saturated_success(r, cw), unsaturated_success(r1, cw, coeffs))
        p_sat[i], p_unsat[i] = cache[r]
    return SenderSuccessProfile(ift, rho, p_sat, p_unsat)


def scenario_probability(scenario: DegenerationScenario, profile) -> float:
    """Probability that exactly the senders in ``scenario`` succeed.

    ``profile`` is a :class:`SenderSuccessProfile` or a bare vector of
    per-sender success probabilities aligned with ``scenario.parent``.
    """
    p = profile.p_unsat if isinstance(profile, SenderSuccessProfile) else np.asarray(profile, float)
    prob = 1.0
    for eta, eta_d, pi in zip(scenario.parent.activation, scenario.outcome, p):
        if eta:
            prob *= pi if eta_d else (1.0 - pi)
    return prob


def scenario_probabilities(parent_mask: int, sub: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Vectorized scenario probabilities for submasks ``sub`` of ``parent_mask``."""
    positions = [i for i in range(parent_mask.bit_length()) if (parent_mask >> i) & 1]
    prob = np.ones(sub.shape, dtype=float)
    for i in positions:
        ok = ((sub >> i) & 1).astype(bool)
        prob *= np.where(ok, p[i], 1.0 - p[i])
    return prob
