"""Discrete-time platoon simulation with per-step sender failures.

Each control step samples which activated senders got their message
through, derives every follower's receiver status, and applies the
adaptive PD + feedforward law.  Three strategies are supported:

``OIFT``
    senders follow the optimized topology, re-optimized every
    ``update_period_tau`` seconds.
``DIFT``
    every sender but the tail is active; two-predecessor controller.
``FIFT``
    same senders as DIFT, but a fixed one-predecessor controller that
    falls back to ACC whenever the immediate predecessor's message is lost.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .contention import DEFAULT_COEFFICIENTS, ContentionCoefficients, TrafficConditions, success_profile
from .energy import spectrum_from_trajectory
from .errors import CollisionError, ValidationError
from .freq import ControllerParams, mode_coefficients
from .ift import ACC, CACC2, DegenerationScenario, Ift, from_mask, status_array
from .optimizer import optimize
from .trajectory import trajectory_arrays

log = logging.getLogger(__name__)

STRATEGIES = ("OIFT", "DIFT", "FIFT")


@dataclass
class VehicleState:
    position: float
    speed: float
    accel: float = 0.0
    ff_filter_state_1: float = 0.0
    ff_filter_state_2: float = 0.0
    prev_spacing_error: float = 0.0
    # second-predecessor component of the error, kept apart so that the
    # backward difference does not spike when the weights switch
    prev_spacing_error_2: float = 0.0


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    standstill_L: float | None = None
    headway_h: float | None = None
    seed: int = 0
    duration: float | None = None
    strategy: str = "OIFT"
    accel_limits: tuple | None = (-5.0, 3.0)
    update_period_tau: float = 10.0
    lead_time_delta_tau: float = 1.0
    link_success: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("must be > 0", "simulation.dt")
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"must be one of {', '.join(STRATEGIES)}", "simulation.strategy")
        if self.accel_limits is not None:
            lo, hi = self.accel_limits
            if not lo < 0 < hi:
                raise ValidationError("needs u_min < 0 < u_max", "simulation.accel_limits")
            object.__setattr__(self, "accel_limits", (float(lo), float(hi)))
        if self.duration is not None and not self.duration > 0:
            raise ValidationError("must be > 0", "simulation.duration")
        if not self.update_period_tau > 0:
            raise ValidationError("must be > 0", "simulation.update_period_tau")
        if not 0 <= self.lead_time_delta_tau <= self.update_period_tau:
            raise ValidationError("must lie in [0, update_period_tau]", "simulation.lead_time_delta_tau")
        if self.link_success is not None and not 0 <= self.link_success <= 1:
            raise ValidationError("must lie in [0, 1]", "simulation.link_success")

    def controller(self, params: ControllerParams) -> ControllerParams:
        """``params`` with this config's headway / standstill overrides."""
        kw = {}
        if self.headway_h is not None:
            kw["headway_h"] = self.headway_h
        if self.standstill_L is not None:
            kw["standstill_L"] = self.standstill_L
        return replace(params, **kw) if kw else params


@dataclass
class RunMetrics:
    """Time series have shape ``(steps, N+1)``; column 0 (leader) is zero."""

    strategy: str
    seed: int
    t: np.ndarray
    spacing_error: np.ndarray
    speed_error: np.ndarray
    speed: np.ndarray
    zeta: np.ndarray
    scenarios: np.ndarray
    ifts: list = field(default_factory=list)
    speed_saturations: int = 0

    @property
    def steps(self) -> int:
        return self.t.size

    @property
    def spacing_std(self) -> np.ndarray:
        return self.spacing_error[:, 1:].std(axis=0)

    @property
    def speed_std(self) -> np.ndarray:
        return self.speed_error[:, 1:].std(axis=0)

    @property
    def max_abs_spacing(self) -> np.ndarray:
        return np.abs(self.spacing_error[:, 1:]).max(axis=0)

    @property
    def vehicle_energy(self) -> np.ndarray:
        """Time-domain speed-oscillation energy of each follower (m^2/s)."""
        v = self.speed[:, 1:]
        dt = self.t[1] - self.t[0] if self.t.size > 1 else 0.0
        return ((v - v.mean(axis=0)) ** 2).sum(axis=0) * dt

    @property
    def total_energy(self) -> float:
        return float(self.vehicle_energy.sum())

    def summary(self) -> dict:
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "steps": self.steps,
            "ift": self.ifts,
            "spacing_error_std": self.spacing_std.tolist(),
            "speed_error_std": self.speed_std.tolist(),
            "max_abs_spacing_error": self.max_abs_spacing.tolist(),
            "total_energy": self.total_energy,
            "speed_saturations": self.speed_saturations,
        }

    def write_csv(self, path):
        n = self.spacing_error.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "vehicle", "spacing_error", "speed_error", "speed"])
            for k in range(self.steps):
                for i in range(1, n):
                    w.writerow([f"{self.t[k]:.6f}", i, repr(float(self.spacing_error[k, i])),
                                repr(float(self.speed_error[k, i])), repr(float(self.speed[k, i]))])

    def write_summary(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def sample_link_outcomes(ift: Ift, profile, rng) -> DegenerationScenario:
    """One Bernoulli draw per activated sender.

    ``profile`` is a :class:`SenderSuccessProfile` or a vector of success
    probabilities.  A draw is made for every vehicle regardless of its
    activation, so the random stream does not depend on the topology.
    """
    p = getattr(profile, "p_unsat", profile)
    p = np.asarray(p, dtype=float)
    eta = np.asarray(ift.activation, dtype=bool)
    ok = rng.random(eta.size) < p
    return DegenerationScenario(tuple(int(b) for b in (ok & eta)), ift)


def _mode_table(params: ControllerParams):
    """Per-mode (alpha_b, beta_b, alpha_f, beta_f, wK) rows indexed 0..4."""
    tab = np.zeros((5, 5))
    for z in range(1, 5):
        tab[z, :4] = mode_coefficients(z, params).astuple()
        tab[z, 4] = params.omega_K[z]
    return tab


def control_law(e, e_dot, omega_k, feedforward=0.0):
    """PD feedback plus feedforward: ``wK^2 e + wK de/dt + ff``."""
    return omega_k**2 * e + omega_k * e_dot + feedforward


def _commands(x, v, a, y1, y2, pe1, pe2, zeta, tab, params, dt, limits):
    """Vectorized control law for followers ``1..N``.

    Returns ``(u, y1, y2, e1, e2)`` for the followers: clipped commands,
    updated feedforward filter states and the two error components.
    """
    h, L = params.headway_h, params.standstill_L
    z = zeta[1:]
    ab, bb, af, bf, wk = tab[z].T
    xi, vi = x[1:], v[1:]
    d1 = L + h * vi
    e1 = x[:-1] - xi - d1
    a2 = np.concatenate([[0.0], a[:-2]])
    e2 = np.concatenate([[0.0], x[:-2] - xi[1:] - 2 * d1[1:]])
    e = ab * e1 + bb * e2
    tau = (2 - ab) * h
    # The backward difference of e carries -tau * a_i(k-1).  Feeding the own
    # acceleration back one step late is unstable once wK * tau > 1, so that
    # part is swapped for the current command and the loop solved for u.
    de = ab * (e1 - pe1) / dt + bb * (e2 - pe2) / dt + tau * a[1:]
    # exact ZOH of 1/(1 + tau s); filters only advance when their input arrived
    gain = np.where(tau > 0, -np.expm1(-dt / np.where(tau > 0, tau, 1.0)), 1.0)
    got1 = af > 0
    got2 = bf > 0
    y1 = np.where(got1, y1 + gain * (a[:-1] - y1), y1)
    y2 = np.where(got2, y2 + gain * (a2 - y2), y2)
    ff = np.where(got1, af * y1, 0.0) + np.where(got2, bf * y2, 0.0)
    u = control_law(e, de, wk, ff) / (1 + wk * tau)
    if limits is not None:
        u = np.clip(u, limits[0], limits[1])
    return u, y1, y2, e1, e2


def control_command(i: int, states, scenario: DegenerationScenario, params: ControllerParams,
                    config: SimConfig, zeta=None) -> float:
    """Acceleration command of follower ``i`` for the current step.

    ``states`` holds every vehicle's :class:`VehicleState` (leader first).
    ``zeta`` overrides the receiver statuses derived from ``scenario``.
    The states are not modified.
    """
    if i < 1 or i >= len(states):
        raise ValidationError(f"follower index must lie in 1..{len(states) - 1}")
    n = len(states)
    if zeta is None:
        zeta = status_array(np.array([scenario.mask]), n)[0]
    arr = lambda name: np.array([getattr(s, name) for s in states], dtype=float)
    u, *_ = _commands(arr("position"), arr("speed"), arr("accel"), arr("ff_filter_state_1")[1:],
                      arr("ff_filter_state_2")[1:], arr("prev_spacing_error")[1:],
                      arr("prev_spacing_error_2")[1:], np.asarray(zeta, dtype=np.int64),
                      _mode_table(params), params, config.dt, config.accel_limits)
    return float(u[i - 1])


def fift_status(outcome_mask: int, n_plus_1: int) -> np.ndarray:
    """One-predecessor CACC statuses: CACC2 if the predecessor was heard, else ACC."""
    z = np.full(n_plus_1, ACC, dtype=np.int64)
    bits = (outcome_mask >> np.arange(n_plus_1 - 1)) & 1
    z[1:] = np.where(bits == 1, CACC2, ACC)
    return z


def _leader_arrays(leader, dt):
    if isinstance(leader, tuple):
        t, x = (np.asarray(a, float) for a in leader)
    else:
        t, x = trajectory_arrays(leader)
    if t.size < 3:
        raise ValidationError("leader trajectory needs at least 3 samples", "trajectory")
    if np.any(np.abs(np.diff(t) - dt) > 1e-6):
        raise ValidationError(f"leader trajectory must be sampled at dt={dt}", "trajectory")
    return t, x


_OPT_CACHE: dict = {}


def _spectrum_key(x, dt):
    return hashlib.sha256(np.ascontiguousarray(x).tobytes() + repr(dt).encode()).hexdigest()


def optimal_ift(n_plus_1, traffic, coeffs, params, leader_x, dt, link_success=None) -> Ift:
    """Memoized optimizer call used by the OIFT schedule."""
    key = (n_plus_1, traffic, coeffs, params.headway_h, tuple(sorted(params.omega_K.items())),
           params.alpha, params.standstill_L, _spectrum_key(leader_x, dt), link_success)
    if key not in _OPT_CACHE:
        spec = spectrum_from_trajectory(leader_x, dt)
        res = optimize(n_plus_1, traffic, coeffs, params, spec, ranking=False, link_success=link_success)
        _OPT_CACHE[key] = res.best_ift
    return _OPT_CACHE[key]


def run(config: SimConfig, leader, strategy: str | None = None, *, n_plus_1: int = 15,
        params: ControllerParams | None = None, traffic: TrafficConditions | None = None,
        coeffs: ContentionCoefficients = DEFAULT_COEFFICIENTS, check_stability: bool = True) -> RunMetrics:
    """Simulate one seeded run.

    ``leader`` is a sequence of trajectory records or a ``(t, x)`` pair
    sampled at ``config.dt``.  Followers start at their desired spacings
    and the leader's initial speed.  The OIFT topology is recomputed at
    every multiple of ``update_period_tau`` from the leader trajectory
    spectrum; the computation is memoized, so with static traffic it runs
    once per process.  ``check_stability=False`` allows gains outside the
    string-stable region (DIFT/FIFT only), e.g. to demonstrate amplification.
    """
    strategy = strategy or config.strategy
    if strategy not in STRATEGIES:
        raise ValidationError(f"must be one of {', '.join(STRATEGIES)}", "simulation.strategy")
    if n_plus_1 < 2:
        raise ValidationError("must be >= 2", "platoon.size")
    params = config.controller(params or ControllerParams())
    if check_stability or strategy == "OIFT":
        params.require_stable()
    traffic = traffic or TrafficConditions(28.57)
    dt = config.dt
    t_lead, x_lead = _leader_arrays(leader, dt)
    if config.duration is not None:
        k = int(round(config.duration / dt))
        if k + 1 > t_lead.size:
            raise ValidationError("leader trajectory is shorter than the run", "simulation.duration")
        t_lead, x_lead = t_lead[:k + 1], x_lead[:k + 1]
    steps = t_lead.size - 1
    v_lead = np.empty(t_lead.size)
    v_lead[1:] = np.diff(x_lead) / dt
    v_lead[0] = v_lead[1]
    # backward difference, like the followers' reported acceleration
    a_lead = np.concatenate([[0.0], np.diff(v_lead) / dt])

    rng = np.random.default_rng(config.seed)
    n = n_plus_1
    h, L = params.headway_h, params.standstill_L
    x = x_lead[0] - np.arange(n) * (L + h * v_lead[0])
    v = np.full(n, v_lead[0])
    a = np.zeros(n)
    a[0] = a_lead[0]
    y1 = np.zeros(n - 1)
    y2 = np.zeros(n - 1)
    pe1 = np.zeros(n - 1)
    pe2 = np.zeros(n - 1)
    tab = _mode_table(params)

    full = Ift.from_mask((1 << (n - 1)) - 1, n)
    period = max(1, int(round(config.update_period_tau / dt)))
    ift = full
    p = None
    ifts = []

    out_sp = np.zeros((steps, n))
    out_sv = np.zeros((steps, n))
    out_v = np.zeros((steps, n))
    out_z = np.zeros((steps, n), dtype=np.int8)
    out_m = np.zeros(steps, dtype=np.int64)
    saturations = 0

    for k in range(steps):
        if strategy == "OIFT" and k % period == 0:
            new = optimal_ift(n, traffic, coeffs, params, x_lead, dt, config.link_success)
            if new != ift or p is None:
                ift = new
                ifts.append(str(ift))
                p = None
        if p is None:
            if config.link_success is not None:
                p = np.full(n, config.link_success)
            else:
                p = success_profile(ift, traffic, coeffs).p_unsat
            if strategy != "OIFT":
                ifts = [str(ift)]
        scen = sample_link_outcomes(ift, p, rng)
        mask = scen.mask
        if strategy == "FIFT":
            zeta = fift_status(mask, n)
        else:
            zeta = status_array(np.array([mask]), n)[0]

        # mode-weighted spacing error, the quantity each controller regulates
        gap = x[:-1] - x[1:] - (L + h * v[1:])
        gap2 = np.concatenate([[0.0], x[:-2] - x[2:] - 2 * (L + h * v[2:])])
        out_sp[k, 1:] = tab[zeta[1:], 0] * gap + tab[zeta[1:], 1] * gap2
        out_sv[k, 1:] = v[:-1] - v[1:]
        out_v[k] = v
        out_z[k] = zeta
        out_m[k] = mask

        if k == 0:
            # no history yet: start the backward difference from the current error
            _, _, _, pe1, pe2 = _commands(x, v, a, y1, y2, pe1, pe2, zeta, tab, params, dt, None)
        u, y1, y2, pe1, pe2 = _commands(x, v, a, y1, y2, pe1, pe2, zeta, tab, params, dt,
                                        config.accel_limits)
        v_new = v[1:] + u * dt
        neg = v_new < 0
        if np.any(neg):
            saturations += int(neg.sum())
            log.debug("speed saturated at 0 for %d vehicles at t=%.1f", int(neg.sum()), t_lead[k])
            v_new = np.maximum(v_new, 0.0)
        a[1:] = (v_new - v[1:]) / dt
        v[1:] = v_new
        x[1:] = x[1:] + v_new * dt
        x[0], v[0], a[0] = x_lead[k + 1], v_lead[k + 1], a_lead[k + 1]
        gaps = x[:-1] - x[1:]
        if np.any(gaps <= 0):
            i = int(np.argmax(gaps <= 0)) + 1
            raise CollisionError(f"vehicle {i} collided with its predecessor (seed {config.seed}, "
                                 f"strategy {strategy})", time=float(t_lead[k + 1]), vehicle=i)

    if saturations:
        log.info("speed saturation active for %d vehicle-steps", saturations)
    return RunMetrics(strategy, config.seed, t_lead[:-1].copy(), out_sp, out_sv, out_v, out_z, out_m,
                      ifts, saturations)


def _run_job(args):
    config, leader, strategy, kwargs = args
    return run(config, leader, strategy, **kwargs)


def run_many(config: SimConfig, leader, seeds, strategy: str | None = None, workers: int | None = None,
             **kwargs) -> list:
    """Independent seeded runs, returned in seed order."""
    if not isinstance(leader, tuple):
        leader = trajectory_arrays(leader)
    jobs = [(replace(config, seed=int(s)), leader, strategy, kwargs) for s in seeds]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_job, jobs))
    return [_run_job(j) for j in jobs]


def compare_strategies(config: SimConfig, leader, seeds, workers=None, **kwargs) -> dict:
    """Per-strategy aggregates over a seed set."""
    out = {}
    for s in STRATEGIES:
        runs = run_many(config, leader, seeds, s, workers, **kwargs)
        out[s] = {
            "runs": runs,
            "mean_total_energy": float(np.mean([r.total_energy for r in runs])),
            "mean_spacing_std": np.mean([r.spacing_std for r in runs], axis=0),
            "mean_speed_std": np.mean([r.speed_std for r in runs], axis=0),
            "max_abs_spacing": np.max([r.max_abs_spacing for r in runs], axis=0),
        }
    return out
