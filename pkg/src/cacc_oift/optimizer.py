"""Optimal information flow topology search.

Two-step exhaustive search over candidate IFTs (leader sending, tail
silent):

1. Energy table: every degeneration of the fully-activated candidate
   ``[1, ..., 1, 0]`` is evaluated once.  Any candidate's degeneration is a
   bit pattern of that table, so energies are shared across candidates.
2. For every candidate, weight the table entries of its degenerations by
   their contention-model probabilities and keep the minimum.

:func:`brute_force_optimize` evaluates every bit vector (including the
pruned ones) directly, without the table, and serves as the oracle.
"""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .contention import (DEFAULT_COEFFICIENTS, ContentionCoefficients, TrafficConditions,
                         scenario_probabilities, scenario_probability, success_profile)
from .energy import EnergyEvaluator, TrajectorySpectrum
from .errors import IntegrityError, ValidationError
from .freq import ControllerParams
from .ift import (DegenerationScenario, Ift, bits_to_str, candidate_masks, enumerate_degenerations,
                  from_mask, receiver_status, status_array, submasks, to_mask)

log = logging.getLogger(__name__)

DEFAULT_MAX_SIZE = 16
BRUTE_FORCE_MAX_SIZE = 8
TIE_RTOL = 1e-12
TABLE_CHUNK = 1024
CANDIDATE_CHUNK = 512


class EnergyTable:
    """Platoon energy of every degeneration of ``[1, ..., 1, 0]``.

    Indexed by sender bitmask (bit ``i`` = vehicle ``i``), bit string,
    bit tuple or :class:`DegenerationScenario`.
    """

    def __init__(self, n_plus_1: int, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != (1 << (n_plus_1 - 1),):
            raise IntegrityError(f"table for N+1={n_plus_1} needs {1 << (n_plus_1 - 1)} entries")
        self.n_plus_1 = n_plus_1
        self.values = values

    def _mask(self, key) -> int:
        if isinstance(key, DegenerationScenario):
            key = key.outcome
        if isinstance(key, str):
            key = tuple(int(c) for c in key)
        if isinstance(key, tuple):
            if len(key) != self.n_plus_1:
                raise IntegrityError(f"pattern {bits_to_str(key)} has the wrong length")
            key = to_mask(key)
        return int(key)

    def __getitem__(self, key) -> float:
        m = self._mask(key)
        if m < 0 or m >= self.values.size:
            raise IntegrityError(f"no table entry for pattern {bits_to_str(from_mask(m, self.n_plus_1))}")
        return float(self.values[m])

    def __contains__(self, key):
        try:
            self[key]
        except IntegrityError:
            return False
        return True

    def __len__(self):
        return self.values.size

    def items(self):
        for m, v in enumerate(self.values):
            yield bits_to_str(from_mask(m, self.n_plus_1)), float(v)


@dataclass
class OptimizationResult:
    best_ift: Ift
    best_expected_energy: float
    per_candidate_energies: list | None = None
    wall_time: float = 0.0
    lookups: int = 0
    evaluated: int = 0

    def to_dict(self, ranking=True) -> dict:
        d = {"ift": str(self.best_ift), "expected_energy": self.best_expected_energy}
        if ranking and self.per_candidate_energies is not None:
            d["ranking"] = [{"ift": s, "expected_energy": e} for s, e in self.per_candidate_energies]
        d["wall_time_s"] = self.wall_time
        return d

    def to_json(self, ranking=True) -> str:
        return json.dumps(self.to_dict(ranking), indent=2)


def select_best(masks, energies, n_plus_1):
    """Argmin with deterministic tie-breaking.

    Energies within a relative ``1e-12`` of the minimum tie; ties go to the
    fewest activated senders, then the lexicographically smallest string.
    """
    energies = np.asarray(energies, dtype=float)
    best = float(np.min(energies))
    tol = TIE_RTOL * abs(best)
    tied = [int(m) for m, e in zip(masks, energies) if e - best <= tol]
    winner = min(tied, key=lambda m: (bin(m).count("1"), bits_to_str(from_mask(m, n_plus_1))))
    idx = [int(m) for m in masks].index(winner)
    return winner, float(energies[idx])


def _ranking(masks, energies, n_plus_1):
    rows = [(bits_to_str(from_mask(int(m), n_plus_1)), float(e)) for m, e in zip(masks, energies)]
    rows.sort(key=lambda r: (r[1], r[0].count("1"), r[0]))
    return rows


def _map(fn, jobs, workers):
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _table_job(args):
    params, spectrum, n_plus_1, lo, hi = args
    ev = EnergyEvaluator(params, spectrum, check_stable=False)
    return ev.energies(status_array(np.arange(lo, hi), n_plus_1))


def build_energy_table(n_plus_1: int, params: ControllerParams, spectrum: TrajectorySpectrum,
                       max_size: int = DEFAULT_MAX_SIZE, workers: int | None = None) -> EnergyTable:
    """Step 1: energies of all ``2^N`` degenerations of ``[1, ..., 1, 0]``.

    Work is split into fixed-size slices of the mask range, so serial and
    pooled execution produce bit-identical tables.
    """
    if n_plus_1 < 2:
        raise ValidationError("platoon size must be at least 2")
    if n_plus_1 > max_size:
        raise ValidationError(
            f"platoon size {n_plus_1} exceeds the limit {max_size}: the table would need "
            f"2^{n_plus_1 - 1} scenario evaluations"
        )
    params.require_stable()
    size = 1 << (n_plus_1 - 1)
    # the canonical degeneration order of [1,...,1,0] is the mask value itself
    jobs = [(params, spectrum, n_plus_1, lo, min(lo + TABLE_CHUNK, size)) for lo in range(0, size, TABLE_CHUNK)]
    parts = _map(_table_job, jobs, workers)
    return EnergyTable(n_plus_1, np.concatenate(parts))


def _success(ift, traffic, coeffs, link_success):
    if link_success is not None:
        return np.full(ift.n_plus_1, float(link_success))
    return success_profile(ift, traffic, coeffs).p_unsat


def _candidate_job(args):
    masks, n_plus_1, traffic, coeffs, values, link_success = args
    out = np.empty(len(masks))
    lookups = 0
    for k, c in enumerate(masks):
        c = int(c)
        p = _success(Ift.from_mask(c, n_plus_1), traffic, coeffs, link_success)
        sub = submasks(c)
        probs = scenario_probabilities(c, sub, p)
        out[k] = np.sum(probs * values[sub])
        lookups += sub.size
    return out, lookups


def optimize(n_plus_1: int, traffic: TrafficConditions,
             coeffs: ContentionCoefficients = DEFAULT_COEFFICIENTS,
             params: ControllerParams | None = None, spectrum: TrajectorySpectrum | None = None,
             workers: int | None = None, max_size: int = DEFAULT_MAX_SIZE,
             table: EnergyTable | None = None, ranking: bool = True,
             link_success: float | None = None) -> OptimizationResult:
    """Two-step search for the candidate IFT of least expected energy.

    ``link_success`` replaces the contention model by one fixed success
    probability for every sender (used for failure-free comparisons).
    """
    if spectrum is None:
        raise ValidationError("a trajectory spectrum is required")
    params = params or ControllerParams()
    t0 = time.perf_counter()
    if table is None:
        table = build_energy_table(n_plus_1, params, spectrum, max_size, workers)
    elif table.n_plus_1 != n_plus_1:
        raise ValidationError("energy table was built for a different platoon size")
    cands = candidate_masks(n_plus_1)
    jobs = [(cands[lo:lo + CANDIDATE_CHUNK], n_plus_1, traffic, coeffs, table.values, link_success)
            for lo in range(0, cands.size, CANDIDATE_CHUNK)]
    parts = _map(_candidate_job, jobs, workers)
    energies = np.concatenate([p[0] for p in parts])
    lookups = sum(p[1] for p in parts)
    best, best_e = select_best(cands, energies, n_plus_1)
    wall = time.perf_counter() - t0
    log.info("optimize N+1=%d: %d candidates, %d lookups, %.2fs", n_plus_1, cands.size, lookups, wall)
    return OptimizationResult(
        Ift.from_mask(best, n_plus_1), best_e,
        _ranking(cands, energies, n_plus_1) if ranking else None,
        wall, lookups, int(cands.size),
    )


def brute_force_optimize(n_plus_1: int, traffic: TrafficConditions,
                         coeffs: ContentionCoefficients = DEFAULT_COEFFICIENTS,
                         params: ControllerParams | None = None,
                         spectrum: TrajectorySpectrum | None = None,
                         link_success: float | None = None) -> OptimizationResult:
    """Direct evaluation over every bit vector, pruned ones included."""
    if n_plus_1 > BRUTE_FORCE_MAX_SIZE:
        raise ValidationError(f"brute force is limited to N+1 <= {BRUTE_FORCE_MAX_SIZE}")
    if spectrum is None:
        raise ValidationError("a trajectory spectrum is required")
    params = params or ControllerParams()
    t0 = time.perf_counter()
    ev = EnergyEvaluator(params, spectrum)
    masks = np.arange(1 << n_plus_1)
    energies = np.empty(masks.size)
    evaluated = 0
    for k, m in enumerate(masks):
        ift = Ift.from_mask(int(m), n_plus_1)
        profile = _success(ift, traffic, coeffs, link_success)
        total = 0.0
        for scen in enumerate_degenerations(ift):
            zeta = receiver_status(scen).status
            total += scenario_probability(scen, profile) * float(ev.energies([zeta])[0])
            evaluated += 1
        energies[k] = total
    best, best_e = select_best(masks, energies, n_plus_1)
    return OptimizationResult(
        Ift.from_mask(best, n_plus_1), best_e, _ranking(masks, energies, n_plus_1),
        time.perf_counter() - t0, 0, evaluated,
    )
