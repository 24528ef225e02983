"""Experiment configuration: one JSON file, one section per component.

Unknown keys and wrongly typed values are rejected with the dotted path
of the offending field.  Command-line overrides use the same paths,
e.g. ``traffic.density_kbar=25`` or ``controller.omega_K.ACC=1.5``.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass

from .contention import DEFAULT_COEFFICIENTS, ContentionCoefficients, TrafficConditions
from .errors import ValidationError
from .freq import ControllerParams
from .optimizer import DEFAULT_MAX_SIZE
from .sim import SimConfig
from .trajectory import load_trajectory, stop_and_go

DEFAULTS = {
    "platoon": {"size": 15},
    "traffic": {"density_kbar": 28.57, "comm_range_R": 0.2, "contention_window_CW": 8},
    "controller": {
        "headway_h": 1.0,
        "omega_K": {"CACC1": 0.8, "CACC2": 0.8, "CACC3": 0.9, "ACC": 1.45},
        "alpha": 0.7,
        "beta": 0.3,
        "W_max": 2.0,
        "standstill_L": 5.0,
    },
    "contention": {
        "k1": DEFAULT_COEFFICIENTS.k1,
        "k2": DEFAULT_COEFFICIENTS.k2,
        "k3": DEFAULT_COEFFICIENTS.k3,
        "calibration_trials": 20000,
        "calibration_seed": 2019,
        "calibration_rho_max": 12,
    },
    "simulation": {
        "dt": 0.1,
        "seed": 0,
        "seeds": 20,
        "duration": None,
        "strategy": "OIFT",
        "accel_limits": [-5.0, 3.0],
        "update_period_tau": 10.0,
        "lead_time_delta_tau": 1.0,
        "link_success": None,
        "workers": None,
    },
    "trajectory": {
        "source": "synthetic",
        "format": "auto",
        "feet": False,
        "vehicle_id": None,
        "duration": 240.0,
        "base_speed": 10.0,
        "amplitude": 8.0,
        "period": 40.0,
    },
    "optimizer": {"max_size": DEFAULT_MAX_SIZE, "workers": None},
    "output_dir": "out",
}

# fields whose default is None, with the types they accept
_NULLABLE = {
    "simulation.duration": (int, float),
    "simulation.link_success": (int, float),
    "simulation.workers": (int,),
    "optimizer.workers": (int,),
    "trajectory.vehicle_id": (int, str),
}
_FREE_KEYS = {"controller.omega_K"}


def _type_ok(value, default, path):
    if value is None:
        return path in _NULLABLE or default is None
    if path in _NULLABLE:
        types = _NULLABLE[path]
        return isinstance(value, types) and not isinstance(value, bool)
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, str):
        return isinstance(value, str)
    if isinstance(default, list):
        return isinstance(value, list) or value is None
    return True


def _merge(base, user, prefix=""):
    if not isinstance(user, dict):
        raise ValidationError("must be an object", prefix.rstrip(".") or None)
    out = copy.deepcopy(base)
    for key, value in user.items():
        path = prefix + key
        if key not in base:
            if prefix.rstrip(".") in _FREE_KEYS:
                out[key] = value
                continue
            raise ValidationError("unknown field", path)
        if isinstance(base[key], dict):
            out[key] = _merge(base[key], value, path + ".")
        else:
            if not _type_ok(value, base[key], path):
                raise ValidationError(f"wrong type {type(value).__name__}", path)
            out[key] = value
    return out


@dataclass
class ExperimentConfig:
    platoon_size: int
    traffic: TrafficConditions
    controller: ControllerParams
    coefficients: ContentionCoefficients
    simulation: SimConfig
    raw: dict

    @property
    def output_dir(self) -> str:
        return self.raw["output_dir"]

    def section(self, name) -> dict:
        return self.raw[name]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def leader(self) -> list:
        """Leader trajectory records at the simulation step."""
        tr = self.raw["trajectory"]
        dt = self.simulation.dt
        if tr["source"] == "synthetic":
            return stop_and_go(tr["duration"], dt, tr["base_speed"], tr["amplitude"], tr["period"])
        try:
            return load_trajectory(tr["source"], tr["format"], dt, tr["feet"], tr["vehicle_id"])
        except OSError as exc:
            raise ValidationError(f"cannot read {tr['source']}: {exc.strerror}", "trajectory.source") from None


def from_dict(data: dict, check_stability: bool = True) -> ExperimentConfig:
    raw = _merge(DEFAULTS, data)
    size = raw["platoon"]["size"]
    if size < 2:
        raise ValidationError("must be >= 2", "platoon.size")
    traffic = TrafficConditions(**raw["traffic"])
    controller = ControllerParams(**raw["controller"])
    if check_stability:
        controller.require_stable()
    c = raw["contention"]
    coeffs = ContentionCoefficients(c["k1"], c["k2"], c["k3"])
    coeffs.validate(traffic.contention_window_CW, min(traffic.m, size))
    s = raw["simulation"]
    limits = s["accel_limits"]
    if limits is not None and len(limits) != 2:
        raise ValidationError("needs [u_min, u_max] or null", "simulation.accel_limits")
    sim = SimConfig(
        dt=s["dt"], seed=s["seed"], duration=s["duration"], strategy=s["strategy"],
        accel_limits=None if limits is None else tuple(limits),
        update_period_tau=s["update_period_tau"], lead_time_delta_tau=s["lead_time_delta_tau"],
        link_success=s["link_success"],
    )
    if s["seeds"] < 1:
        raise ValidationError("must be >= 1", "simulation.seeds")
    tr = raw["trajectory"]
    if tr["source"] == "synthetic":
        for key in ("duration", "period"):
            if not tr[key] > 0:
                raise ValidationError("must be > 0", f"trajectory.{key}")
        if not 0 <= tr["amplitude"] <= tr["base_speed"]:
            raise ValidationError("must lie in [0, base_speed]", "trajectory.amplitude")
    if tr["format"] not in ("auto", "ngsim", "xy"):
        raise ValidationError("must be auto, ngsim or xy", "trajectory.format")
    return ExperimentConfig(size, traffic, controller, coeffs, sim, raw)


def parse_override(text: str):
    """``"a.b.c=value"`` -> ``("a.b.c", value)``; the value is read as JSON
    when possible, otherwise kept as a string."""
    if "=" not in text:
        raise ValidationError(f"override {text!r} must look like path=value")
    path, value = text.split("=", 1)
    try:
        value = json.loads(value)
    except json.JSONDecodeError:
        pass
    return path.strip(), value


def apply_overrides(data: dict, overrides) -> dict:
    out = copy.deepcopy(data)
    for item in overrides or ():
        path, value = parse_override(item) if isinstance(item, str) else item
        node = out
        keys = path.split(".")
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ValidationError("is not a section", path)
        node[keys[-1]] = value
    return out


def load_config(path=None, overrides=None, check_stability: bool = True) -> ExperimentConfig:
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    return from_dict(apply_overrides(data, overrides), check_stability)


def dump_config(cfg: ExperimentConfig, path=None) -> str:
    text = json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
