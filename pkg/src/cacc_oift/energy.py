"""Speed-oscillation energy of a platoon in the frequency domain.

Convention: spectra live on ordinary frequencies ``f`` (Hz); transfer
functions are evaluated at ``s = j 2 pi f``.  The speed oscillation of
vehicle ``i`` is ``V_i(f) = j 2 pi f SS_i(f) X_0(f)``, so the energy of a
scenario is::

    E = sum_i  integral (2 pi f)^2 |SS_i(j 2 pi f)|^2 |X_0(f)|^2 df

integrated with the trapezoidal rule on the DFT grid.  The integrand
vanishes at ``f = 0``, which is included as a quadrature node.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import IntegrityError, ValidationError
from .freq import ControllerParams, mode_gain_table, transfer_array
from .ift import DegenerationScenario, Ift, ReceiverStatusVector, enumerate_degenerations

MIN_SAMPLES = 64


@dataclass(frozen=True)
class TrajectorySpectrum:
    """One-sided position-oscillation spectrum of a trajectory.

    ``amps`` is scaled so that ``integral |amps|^2 df`` equals the
    time-domain integral of the squared oscillation (one-sided Parseval).
    """

    freqs: np.ndarray
    amps: np.ndarray
    source_duration: float
    source_dt: float

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        a = np.asarray(self.amps, dtype=complex)
        if f.shape != a.shape or f.ndim != 1:
            raise ValidationError("freqs and amps must be 1-D and equally long")
        if f.size and (f[0] <= 0 or np.any(np.diff(f) <= 0)):
            raise ValidationError("freqs must be positive and strictly increasing")
        if not np.all(np.isfinite(a)):
            raise ValidationError("spectrum amplitudes must be finite")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "amps", a)

    @property
    def n_samples(self) -> int:
        return int(round(self.source_duration / self.source_dt))

    def scaled(self, factor: float) -> "TrajectorySpectrum":
        return TrajectorySpectrum(self.freqs, self.amps * factor, self.source_duration, self.source_dt)


def spectrum_from_trajectory(samples, dt: float) -> TrajectorySpectrum:
    """Oscillation spectrum of a position series.

    The mean-speed trend (the straight line through the first and last
    samples) is removed, which makes the detrended series start and end at
    zero.  The final sample then duplicates the first and is dropped, so the
    remaining ``n - 1`` samples are one period of a continuous periodic
    signal; this keeps the ``f^2``-weighted energy free of wrap-around jumps.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < MIN_SAMPLES:
        raise ValidationError(f"need at least {MIN_SAMPLES} position samples, got {x.size}")
    if not dt > 0:
        raise ValidationError("dt must be > 0")
    if not np.all(np.isfinite(x)):
        raise ValidationError("trajectory contains non-finite samples")
    n = x.size
    trend = x[0] + (x[-1] - x[0]) * np.arange(n) / (n - 1)
    y = (x - trend)[:-1]
    m = y.size
    Y = np.fft.rfft(y)[1:]
    freqs = np.arange(1, Y.size + 1) / (m * dt)
    scale = np.full(Y.size, np.sqrt(2.0) * dt)
    if m % 2 == 0:
        scale[-1] = dt  # Nyquist bin has no mirror image
    return TrajectorySpectrum(freqs, Y * scale, m * dt, dt)


def trajectory_from_spectrum(spectrum: TrajectorySpectrum) -> np.ndarray:
    """Inverse of :func:`spectrum_from_trajectory`: the detrended samples."""
    m = spectrum.n_samples
    dt = spectrum.source_dt
    scale = np.full(spectrum.amps.size, np.sqrt(2.0) * dt)
    if m % 2 == 0:
        scale[-1] = dt
    Y = np.concatenate([[0.0], spectrum.amps / scale])
    return np.fft.irfft(Y, n=m)


def quadrature_weights(freqs: np.ndarray) -> np.ndarray:
    """Trapezoid weights on ``[0, *freqs]`` with the origin node dropped
    (the integrand is zero there)."""
    nodes = np.concatenate([[0.0], np.asarray(freqs, float)])
    w = np.zeros_like(nodes)
    d = np.diff(nodes)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w[1:]


def speed_energy_density(spectrum: TrajectorySpectrum) -> np.ndarray:
    """Quadrature-weighted leader speed energy per frequency bin."""
    f = spectrum.freqs
    return quadrature_weights(f) * (2 * np.pi * f) ** 2 * np.abs(spectrum.amps) ** 2


def leader_energy(spectrum: TrajectorySpectrum) -> float:
    return float(np.sum(speed_energy_density(spectrum)))


class EnergyEvaluator:
    """Batch evaluation of scenario energies for one controller and spectrum.

    Mode link gains are computed once on the spectrum grid; energies of
    many receiver-status vectors are then evaluated in fixed-size chunks, so
    results do not depend on how the work is split.
    """

    chunk = 256

    def __init__(self, params: ControllerParams, spectrum: TrajectorySpectrum, check_stable=True):
        if check_stable:
            params.require_stable()
        self.params = params
        self.spectrum = spectrum
        self.g1, self.g2 = mode_gain_table(params, 2 * np.pi * spectrum.freqs)
        self.density = speed_energy_density(spectrum)

    def vehicle_energies(self, zeta) -> np.ndarray:
        """Per-vehicle energies, shape ``(S, N+1)``."""
        zeta = np.atleast_2d(np.asarray(zeta, dtype=np.int64))
        out = np.empty(zeta.shape, dtype=float)
        for start in range(0, zeta.shape[0], self.chunk):
            ss = transfer_array(zeta[start:start + self.chunk], self.g1, self.g2)
            mag2 = ss.real**2 + ss.imag**2
            out[start:start + self.chunk] = np.sum(mag2 * self.density, axis=-1)
        return out

    def energies(self, zeta) -> np.ndarray:
        """Platoon energy for each row of the status matrix."""
        return self.vehicle_energies(zeta).sum(axis=1)


def scenario_energy(zeta, spectrum: TrajectorySpectrum, params: ControllerParams) -> float:
    """Platoon speed-oscillation energy under one receiver-status vector.

    Raises :class:`ValidationError` if any controller mode lies outside its
    string-stability region.
    """
    if isinstance(zeta, ReceiverStatusVector):
        zeta = zeta.status
    return float(EnergyEvaluator(params, spectrum).energies([tuple(zeta)])[0])


def _lookup(energies, scenario: DegenerationScenario) -> float:
    for key in (str(scenario), scenario.mask, scenario.outcome):
        try:
            return float(energies[key])
        except (KeyError, TypeError, IndexError):
            continue
    raise IntegrityError(f"no energy entry for scenario {scenario}")


def expected_energy(ift: Ift, energies, probabilities) -> float:
    """Probability-weighted scenario energy of ``ift``.

    ``probabilities`` is either a sequence aligned with
    :func:`enumerate_degenerations` or a mapping from bit string to
    probability.  ``energies`` maps scenarios (bit string, mask or tuple)
    to energy values.
    """
    scenarios = enumerate_degenerations(ift)
    if hasattr(probabilities, "keys"):
        try:
            probs = [float(probabilities[str(s)]) for s in scenarios]
        except KeyError as exc:
            raise IntegrityError(f"no probability for scenario {exc}") from None
    else:
        probs = [float(p) for p in probabilities]
        if len(probs) != len(scenarios):
            raise ValidationError(f"expected {len(scenarios)} probabilities, got {len(probs)}")
    if abs(sum(probs) - 1.0) > 1e-9:
        raise ValidationError(f"scenario probabilities sum to {sum(probs)!r}, not 1")
    return float(sum(p * _lookup(energies, s) for p, s in zip(probs, scenarios)))


def write_spectrum_csv(path, spectrum: TrajectorySpectrum):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "re", "im"])
        for f, a in zip(spectrum.freqs, spectrum.amps):
            w.writerow([repr(float(f)), repr(float(a.real)), repr(float(a.imag))])


def read_spectrum_csv(path, dt=None) -> TrajectorySpectrum:
    """Read a spectrum CSV.  Without ``dt`` the source is assumed to have
    had an even sample count (last bin at Nyquist)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty spectrum file")
    f = np.array([float(r["freq_hz"]) for r in rows])
    a = np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
    duration = 1.0 / f[0]
    if dt is None:
        dt = duration / (2 * f.size)
    return TrajectorySpectrum(f, a, duration, dt)
