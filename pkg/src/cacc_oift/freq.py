"""Frequency-domain model of the adaptive PD controller with acceleration
feedforward, for the two-predecessor-following scheme.

All transfer functions take angular frequencies ``omega`` (rad/s) and are
evaluated at ``s = j*omega``.  Component blocks:

* plant ``G = 1/s**2``
* spacing policy ``H = 1 + (2 - alpha_b) h s``
* PD feedback ``K = wK (wK + s)``
* feedforward filters ``F1 = F2 = 1/H``
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError, ValidationError
from .ift import ACC, CACC1, CACC2, CACC3, MODE_NAMES

SQRT2 = math.sqrt(2.0)
CUTOFF_DB = -3.01
C_3DB = 10 ** (CUTOFF_DB / 10)
DEFAULT_GRID = np.logspace(-3, 3, 2048)

_MODE_KEYS = {"CACC1": CACC1, "CACC2": CACC2, "CACC3": CACC3, "ACC": ACC}


def _mode(mode) -> int:
    if isinstance(mode, str):
        try:
            return _MODE_KEYS[mode.upper()]
        except KeyError:
            raise ValidationError(f"unknown controller mode {mode!r}") from None
    if mode not in (1, 2, 3, 4):
        raise ValidationError(f"controller mode must be 1..4, got {mode!r}")
    return int(mode)


def _default_omega_k():
    return {CACC1: 0.8, CACC2: 0.8, CACC3: 0.9, ACC: 1.45}


@dataclass(frozen=True)
class ControllerParams:
    """Homogeneous controller settings shared by every follower.

    ``omega_K`` maps controller mode (1..4 or 'CACC1'..'ACC') to the PD
    cut-off frequency.  String-stability bounds are not enforced here;
    use :func:`stability_region_check` or :meth:`require_stable`.
    """

    headway_h: float = 1.0
    omega_K: dict = field(default_factory=_default_omega_k)
    alpha: float = 0.7
    beta: float = 0.3
    W_max: float = 2.0
    standstill_L: float = 5.0

    def __post_init__(self):
        wk = {_mode(k): float(v) for k, v in dict(self.omega_K).items()}
        if set(wk) != {1, 2, 3, 4}:
            raise ValidationError("needs a cut-off frequency for each of the 4 modes", "controller.omega_K")
        if any(not v > 0 for v in wk.values()):
            raise ValidationError("cut-off frequencies must be > 0", "controller.omega_K")
        object.__setattr__(self, "omega_K", wk)
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise ValidationError("alpha and beta must lie in (0, 1)", "controller.alpha")
        if abs(self.alpha + self.beta - 1) > 1e-12:
            raise ValidationError("alpha + beta must equal 1", "controller.beta")
        if self.headway_h < 0:
            raise ValidationError("must be >= 0", "controller.headway_h")
        if not self.W_max > 0:
            raise ValidationError("must be > 0", "controller.W_max")
        if self.standstill_L < 0:
            raise ValidationError("must be >= 0", "controller.standstill_L")

    def require_stable(self):
        """Raise :class:`ValidationError` unless every mode passes."""
        for mode in (CACC1, CACC2, CACC3, ACC):
            rep = stability_region_check(self, mode)
            if not rep.passed:
                raise ValidationError(
                    f"{MODE_NAMES[mode]} violates the string-stability region (margin {rep.margin:.4g})",
                    "controller",
                )
        return self


@dataclass(frozen=True)
class ModeCoefficients:
    alpha_b: float
    beta_b: float
    alpha_f: float
    beta_f: float

    def astuple(self):
        return (self.alpha_b, self.beta_b, self.alpha_f, self.beta_f)


@dataclass(frozen=True)
class FrequencyResponse:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.grid) <= 0):
            raise ValidationError("frequency grid must be strictly increasing")
        if len(self.grid) != len(self.values):
            raise ValidationError("grid and values differ in length")

    @property
    def magnitude_db(self):
        return 20 * np.log10(np.abs(self.values))


@dataclass(frozen=True)
class StabilityReport:
    mode: int
    passed: bool
    margin: float
    noise_bound_ok: bool
    noise_margin: float


def mode_coefficients(zeta_i, params: ControllerParams | None = None) -> ModeCoefficients:
    """Feedback/feedforward weights for a receiver status.

    CACC3 (only the second predecessor heard) takes feedback from the sensed
    immediate predecessor and feedforward from the second predecessor.
    """
    z = _mode(zeta_i)
    if z == CACC1:
        p = params or ControllerParams()
        return ModeCoefficients(p.alpha, p.beta, p.alpha, p.beta)
    if z == CACC2:
        return ModeCoefficients(1.0, 0.0, 1.0, 0.0)
    if z == CACC3:
        return ModeCoefficients(1.0, 0.0, 0.0, 1.0)
    return ModeCoefficients(1.0, 0.0, 0.0, 0.0)


def _s(omega):
    return 1j * np.asarray(omega, dtype=float)


def component_responses(params: ControllerParams, zeta_i, omega) -> dict:
    """``G, H, K, F`` at ``s = j*omega``."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise DomainError("plant G = 1/s^2 has a pole at omega = 0")
    z = _mode(zeta_i)
    s = _s(w)
    ab = mode_coefficients(z, params).alpha_b
    wk = params.omega_K[z]
    H = 1 + (2 - ab) * params.headway_h * s
    return {"G": 1 / s**2, "H": H, "K": wk * (wk + s), "F": 1 / H}


def _lambdas(params, z, s):
    ab = mode_coefficients(z, params).alpha_b
    wk = params.omega_K[z]
    H = 1 + (2 - ab) * params.headway_h * s
    K = wk * (wk + s)
    den = s**2 + K * H  # (1 + GKH) s^2, regular at s = 0
    return K / den, s**2 / (H * den), H, K


def link_gains(params: ControllerParams, zeta_i, omega):
    """Gains from predecessors ``i-1`` and ``i-2`` to vehicle ``i``.

    Written in the cleared-denominator form so ``omega = 0`` gives the
    analytic DC limit (unity total gain) instead of evaluating the plant pole.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise DomainError("omega must be >= 0")
    z = _mode(zeta_i)
    c = mode_coefficients(z, params)
    lam_b, lam_f, _, _ = _lambdas(params, z, _s(w))
    return c.alpha_f * lam_f + c.alpha_b * lam_b, c.beta_f * lam_f + c.beta_b * lam_b


def single_link_response(params: ControllerParams, mode, omega):
    """Worst-case single-vehicle transfer, both predecessors at unit ratio."""
    g1, g2 = link_gains(params, mode, omega)
    return g1 + g2


def mode_gain_table(params: ControllerParams, omega):
    """Link gains for every mode on a grid: arrays of shape ``(5, F)``.

    Row ``z`` holds mode ``z``; row 0 is unused so statuses index directly.
    """
    w = np.asarray(omega, dtype=float)
    g1 = np.zeros((5, w.size), dtype=complex)
    g2 = np.zeros((5, w.size), dtype=complex)
    for z in (CACC1, CACC2, CACC3, ACC):
        g1[z], g2[z] = link_gains(params, z, w)
    return g1, g2


def transfer_array(zeta, g1, g2) -> np.ndarray:
    """Leader-to-vehicle transfer for status matrix ``zeta`` of shape ``(S, N+1)``.

    Returns complex ``(S, N+1, F)``.  Vehicle 1 only has the leader ahead,
    so its second-predecessor path is dropped.
    """
    zeta = np.atleast_2d(np.asarray(zeta, dtype=np.int64))
    S, n = zeta.shape
    out = np.empty((S, n, g1.shape[1]), dtype=complex)
    out[:, 0] = 1.0
    if n > 1:
        out[:, 1] = g1[zeta[:, 1]]
    for i in range(2, n):
        out[:, i] = g1[zeta[:, i]] * out[:, i - 1] + g2[zeta[:, i]] * out[:, i - 2]
    return out


def platoon_transfer(params: ControllerParams, zeta, grid=DEFAULT_GRID) -> list:
    """Leader-to-vehicle position transfer for every vehicle, one
    :class:`FrequencyResponse` each (vehicle 0 is identically 1)."""
    grid = np.asarray(grid, dtype=float)
    g1, g2 = mode_gain_table(params, grid)
    ss = transfer_array([tuple(zeta)], g1, g2)[0]
    return [FrequencyResponse(grid, row) for row in ss]


def stability_region_check(params: ControllerParams, mode) -> StabilityReport:
    """String-stability verdict for one mode plus the noise bound.

    CACC modes need ``h > 0``; ACC needs ``h * wK >= sqrt(2)``.  The noise
    bound ``h * wK <= W_max`` is reported separately.  ``margin`` is the
    signed distance to the stability boundary (negative when violated).
    """
    z = _mode(mode)
    h = params.headway_h
    hw = h * params.omega_K[z]
    margin = h if z != ACC else hw - SQRT2
    passed = margin > 0 if z != ACC else margin >= -1e-12
    noise_margin = params.W_max - hw
    return StabilityReport(z, bool(passed), float(margin), bool(noise_margin >= -1e-12), float(noise_margin))


def noise_attenuation(params: ControllerParams, zeta_i, omega):
    """Magnitudes of the complementary sensitivities to noise on the
    immediate and second predecessor position measurements."""
    z = _mode(zeta_i)
    c = mode_coefficients(z, params)
    _, _, H, K = _lambdas(params, z, _s(omega))
    s = _s(omega)
    T = H * K / (s**2 + H * K)
    return np.abs(c.alpha_b * T), np.abs(c.beta_b * T)


def noise_limit(params: ControllerParams, zeta_i):
    """High-frequency limits of :func:`noise_attenuation`.

    ``H K / (s^2 + H K)`` tends to ``tau wK / (1 + tau wK)`` with the
    spacing-policy time constant ``tau = (2 - alpha_b) h``.  That is
    ``h wK / (1 + h wK)`` for every mode except CACC1.
    """
    z = _mode(zeta_i)
    c = mode_coefficients(z, params)
    tw = (2 - c.alpha_b) * params.headway_h * params.omega_K[z]
    return c.alpha_b * tw / (1 + tw), c.beta_b * tw / (1 + tw)


def cutoff_frequency(params: ControllerParams, mode) -> float:
    """Frequency where the single-link transfer drops to -3.01 dB (rad/s)."""
    z = _mode(mode)
    rep = stability_region_check(params, z)
    if not rep.passed:
        raise ValidationError(f"{MODE_NAMES[z]} is outside its stability region")
    h, C = params.headway_h, C_3DB
    if z == CACC1:
        return math.sqrt((1 - C) / ((2 - params.alpha) ** 2 * C * h**2))
    if z in (CACC2, CACC3):
        return math.sqrt((1 - C) / (C * h**2))
    wk = params.omega_K[ACC]
    a = 1 + h * wk
    B = C * (wk + h * wk**2) ** 2 - 2 * C * wk**2 * a - wk**2
    disc = B**2 - 4 * C * a**2 * wk**4 * (C - 1)
    if disc < 0:
        raise NumericalError("negative discriminant in the ACC cut-off formula")
    # positive root of C a^2 x^2 + B x + (C - 1) wK^4 = 0 with x = omega^2
    return math.sqrt((-B + math.sqrt(disc)) / (2 * C * a**2))


def write_response_csv(path, response: FrequencyResponse):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "re", "im", "magnitude_db"])
        for om, v in zip(response.grid, response.values):
            w.writerow([repr(float(om)), repr(float(v.real)), repr(float(v.imag)),
                        repr(float(20 * np.log10(abs(v))))])
