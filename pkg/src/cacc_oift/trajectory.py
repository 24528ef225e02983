"""Leader trajectories: NGSIM-style CSV ingestion and a synthetic
stop-and-go generator."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

FEET_TO_M = 0.3048
NGSIM_DT = 0.1
UNIFORM_TOL = 1e-6

# accepted column spellings: metric export and raw NGSIM release
_NGSIM_COLUMNS = {
    "vehicle": ("vehicle_id", "Vehicle_ID"),
    "frame": ("frame", "Frame_ID"),
    "position": ("local_y_m", "Local_Y"),
    "speed": ("velocity_mps", "v_Vel"),
}


@dataclass(frozen=True)
class TrajectoryRecord:
    time: float
    position: float
    speed: float | None = None


def trajectory_arrays(records):
    """``(t, x)`` numpy arrays from a record sequence."""
    t = np.array([r.time for r in records], dtype=float)
    x = np.array([r.position for r in records], dtype=float)
    return t, x


def _records(t, x, v=None):
    if v is None:
        return [TrajectoryRecord(float(a), float(b)) for a, b in zip(t, x)]
    return [TrajectoryRecord(float(a), float(b), float(c)) for a, b, c in zip(t, x, v)]


def _float(text, path, line, column):
    try:
        val = float(text)
    except (TypeError, ValueError):
        raise ValidationError(f"{path}:{line}: column {column!r} is not a number: {text!r}") from None
    if not math.isfinite(val):
        raise ValidationError(f"{path}:{line}: column {column!r} is not finite")
    return val


def _check_uniform(t, path):
    if t.size < 2:
        raise ValidationError(f"{path}: need at least 2 samples")
    d = np.diff(t)
    if np.any(d <= 0):
        k = int(np.argmax(d <= 0))
        raise ValidationError(f"{path}: time not strictly increasing at sample {k + 2}")
    step = float(np.median(d))
    bad = np.abs(d - step) > UNIFORM_TOL
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ValidationError(
            f"{path}: non-uniform sampling at sample {k + 2} (step {d[k]:.6g} s, expected {step:.6g} s)"
        )
    return step


def resample(t, x, dt, v=None):
    """Linear interpolation onto a uniform ``dt`` grid starting at ``t[0]``."""
    if not dt > 0:
        raise ValidationError("dt must be > 0", "simulation.dt")
    n = int(math.floor((t[-1] - t[0]) / dt + 1e-9)) + 1
    grid = t[0] + dt * np.arange(n)
    grid[-1] = min(grid[-1], t[-1])
    xs = np.interp(grid, t, x)
    vs = None if v is None else np.interp(grid, t, v)
    return grid, xs, vs


def _read_two_column(path):
    t, x = [], []
    with open(path, newline="") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise ValidationError(f"{path}:{line}: expected 2 columns (t, x), got {len(row)}")
            if line == 1 and not _is_number(row[0]):
                continue  # header
            t.append(_float(row[0], path, line, "t"))
            x.append(_float(row[1], path, line, "x"))
    return np.array(t), np.array(x), None


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def _pick(header, key, path):
    for name in _NGSIM_COLUMNS[key]:
        if name in header:
            return name
    raise ValidationError(f"{path}:1: missing column {_NGSIM_COLUMNS[key][0]!r}")


def _read_ngsim(path, vehicle_id):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        cols = {k: _pick(header, k, path) for k in ("vehicle", "frame", "position")}
        speed_col = next((n for n in _NGSIM_COLUMNS["speed"] if n in header), None)
        rows = []
        for line, row in enumerate(reader, start=2):
            if None in row or any(row[c] is None for c in cols.values()):
                raise ValidationError(f"{path}:{line}: wrong number of columns")
            vid = row[cols["vehicle"]].strip()
            if vehicle_id is None:
                vehicle_id = vid
            if vid != str(vehicle_id):
                continue
            frame = _float(row[cols["frame"]], path, line, cols["frame"])
            pos = _float(row[cols["position"]], path, line, cols["position"])
            spd = _float(row[speed_col], path, line, speed_col) if speed_col else None
            rows.append((frame, pos, spd))
    if not rows:
        raise ValidationError(f"{path}: no rows for vehicle {vehicle_id}")
    frames = np.array([r[0] for r in rows])
    t = (frames - frames[0]) * NGSIM_DT
    x = np.array([r[1] for r in rows])
    v = np.array([r[2] for r in rows]) if speed_col else None
    return t, x, v


def load_trajectory(path, format: str = "auto", dt: float = NGSIM_DT, feet: bool = False,
                    vehicle_id=None) -> list:
    """Read one vehicle's trajectory and resample it to ``dt``.

    ``format`` is ``"ngsim"`` (headered CSV with vehicle_id, frame,
    local_y_m[, velocity_mps] at 10 Hz, or the raw NGSIM names), ``"xy"``
    (two columns t, x) or ``"auto"``.  With several vehicles in an NGSIM
    file the first one listed is used unless ``vehicle_id`` is given.
    ``feet`` converts positions and speeds from feet.
    """
    path = str(path)
    if format == "auto":
        with open(path, newline="") as fh:
            first = fh.readline()
        names = {c.strip() for c in first.split(",")}
        format = "ngsim" if names & set(_NGSIM_COLUMNS["frame"]) else "xy"
    if format == "ngsim":
        t, x, v = _read_ngsim(path, vehicle_id)
    elif format == "xy":
        t, x, v = _read_two_column(path)
    else:
        raise ValidationError(f"unknown trajectory format {format!r}", "trajectory.format")
    _check_uniform(t, path)
    if feet:
        x = x * FEET_TO_M
        v = None if v is None else v * FEET_TO_M
    t, x, v = resample(t, x, dt, v)
    return _records(t, x, v)


def stop_and_go(duration: float = 240.0, dt: float = 0.1, base_speed: float = 10.0,
                amplitude: float = 8.0, period: float = 40.0) -> list:
    """Sinusoidal stop-and-go leader: ``v(t) = base - amp * sin(2 pi t / period)``."""
    if not (duration > 0 and dt > 0 and period > 0):
        raise ValidationError("duration, dt and period must be > 0", "trajectory")
    if amplitude < 0 or amplitude > base_speed:
        raise ValidationError("amplitude must lie in [0, base_speed] so speed stays >= 0",
                              "trajectory.amplitude")
    n = int(round(duration / dt))
    t = dt * np.arange(n + 1)
    w = 2 * np.pi / period
    x = base_speed * t + amplitude / w * (np.cos(w * t) - 1.0)
    v = base_speed - amplitude * np.sin(w * t)
    return _records(t, x, v)


def constant_speed(duration: float = 60.0, dt: float = 0.1, speed: float = 20.0) -> list:
    n = int(round(duration / dt))
    t = dt * np.arange(n + 1)
    return _records(t, speed * t, np.full(t.size, speed))


def write_trajectory_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x"])
        for r in records:
            w.writerow([repr(r.time), repr(r.position)])
