"""Command-line entry points.

Every subcommand reads one JSON config (``--config``) plus dotted
``--set path=value`` overrides, writes machine-readable files into the
output directory and prints a short human-readable summary (also saved as
``<command>_summary.txt``).

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import calibration
from .config import load_config
from .contention import TrafficConditions, saturated_success, unsaturated_success
from .energy import spectrum_from_trajectory, write_spectrum_csv
from .errors import CaccError, ValidationError
from .freq import DEFAULT_GRID, cutoff_frequency, noise_limit, single_link_response, stability_region_check
from .ift import MODE_NAMES
from .optimizer import optimize
from .sim import STRATEGIES, compare_strategies, run_many
from .trajectory import trajectory_arrays

log = logging.getLogger("cacc_oift")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


def _out(cfg, args):
    d = args.out or cfg.output_dir
    os.makedirs(d, exist_ok=True)
    return d


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _finish(out_dir, name, lines):
    text = "\n".join(lines) + "\n"
    with open(os.path.join(out_dir, f"{name}_summary.txt"), "w") as fh:
        fh.write(text)
    sys.stdout.write(text)


def cmd_stability(cfg, args):
    p = cfg.controller
    out = _out(cfg, args)
    rows, lines = [], [f"string stability at h={p.headway_h} s, alpha={p.alpha}"]
    for mode in (1, 2, 3, 4):
        rep = stability_region_check(p, mode)
        peak = float(np.max(np.abs(single_link_response(p, mode, DEFAULT_GRID))))
        wc = cutoff_frequency(p, mode) if rep.passed else None
        lim1, lim2 = noise_limit(p, mode)
        rows.append({
            "mode": MODE_NAMES[mode], "omega_K": p.omega_K[mode], "passed": rep.passed,
            "margin": rep.margin, "max_gain": peak, "cutoff_rad_s": wc,
            "noise_bound_ok": rep.noise_bound_ok, "noise_limit_1": lim1, "noise_limit_2": lim2,
        })
        verdict = "PASS" if rep.passed else "FAIL"
        wc_text = f"{wc:.5f} rad/s" if wc is not None else "n/a"
        lines.append(f"  {MODE_NAMES[mode]:5s} {verdict}  max|SS|={peak:.6f}  cut-off={wc_text}  "
                     f"noise {'ok' if rep.noise_bound_ok else 'EXCEEDED'}")
    _write_json(os.path.join(out, "stability.json"), rows)
    _finish(out, "stability", lines)
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_VALIDATION


def cmd_contention(cfg, args):
    """Success rate against density and share of activated senders in range."""
    out = _out(cfg, args)
    t = cfg.traffic
    cw = t.contention_window_CW
    densities = args.densities or [25.0, 28.57, 32.0, 36.0, 40.0]
    fractions = np.linspace(0.1, 1.0, 10)
    rows = []
    for k in densities:
        m = TrafficConditions(k, t.comm_range_R, cw).m
        for f in fractions:
            rho = max(1, int(round(f * (2 * m + 1))))
            rows.append([k, m, round(float(f), 2), rho, saturated_success(rho, cw),
                         unsaturated_success(rho, cw, cfg.coefficients)])
    with open(os.path.join(out, "contention.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["density_kbar", "m", "active_fraction", "rho_bar", "p_sat", "p_unsat"])
        w.writerows(rows)
    lines = [f"unsaturated success rate, CW={cw}, R={t.comm_range_R} km"]
    for k in densities:
        sel = [r for r in rows if r[0] == k]
        lines.append(f"  k={k:6.2f} veh/km (m={sel[0][1]}): "
                     + " ".join(f"{r[5]:.3f}" for r in sel))
    _finish(out, "contention", lines)
    return EXIT_OK


def _spectrum(cfg):
    t, x = trajectory_arrays(cfg.leader())
    return spectrum_from_trajectory(x, cfg.simulation.dt)


def cmd_optimize(cfg, args):
    out = _out(cfg, args)
    spec = _spectrum(cfg)
    write_spectrum_csv(os.path.join(out, "spectrum.csv"), spec)
    o = cfg.section("optimizer")
    res = optimize(cfg.platoon_size, cfg.traffic, cfg.coefficients, cfg.controller, spec,
                   workers=o["workers"], max_size=o["max_size"],
                   link_success=cfg.simulation.link_success)
    with open(os.path.join(out, "optimize.json"), "w") as fh:
        fh.write(res.to_json() + "\n")
    _finish(out, "optimize", [
        str(res.best_ift),
        f"expected energy {res.best_expected_energy:.6g} m^2/s over {res.evaluated} candidates "
        f"({res.lookups} table lookups, {res.wall_time:.2f} s)",
    ])
    return EXIT_OK


def _seeds(cfg):
    s = cfg.simulation
    return list(range(s.seed, s.seed + cfg.section("simulation")["seeds"]))


def _sim_kwargs(cfg):
    return {"n_plus_1": cfg.platoon_size, "params": cfg.controller, "traffic": cfg.traffic,
            "coeffs": cfg.coefficients}


def cmd_simulate(cfg, args):
    out = _out(cfg, args)
    strategy = args.strategy or cfg.simulation.strategy
    runs = run_many(cfg.simulation, cfg.leader(), _seeds(cfg), strategy,
                    cfg.section("simulation")["workers"], **_sim_kwargs(cfg))
    for r in runs:
        r.write_csv(os.path.join(out, f"run_{strategy}_seed{r.seed}.csv"))
        r.write_summary(os.path.join(out, f"run_{strategy}_seed{r.seed}.json"))
    energy = [r.total_energy for r in runs]
    _write_json(os.path.join(out, f"simulate_{strategy}.json"), {
        "strategy": strategy,
        "seeds": [r.seed for r in runs],
        "total_energy": energy,
        "mean_total_energy": float(np.mean(energy)),
        "mean_spacing_error_std": np.mean([r.spacing_std for r in runs], axis=0).tolist(),
    })
    _finish(out, "simulate", [
        f"{strategy}: {len(runs)} runs, mean total oscillation energy {np.mean(energy):.6g} m^2/s",
        f"  topology {', '.join(runs[0].ifts)}",
    ])
    return EXIT_OK


def cmd_compare(cfg, args):
    out = _out(cfg, args)
    res = compare_strategies(cfg.simulation, cfg.leader(), _seeds(cfg),
                             cfg.section("simulation")["workers"], **_sim_kwargs(cfg))
    table = {}
    with open(os.path.join(out, "compare.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strategy", "vehicle", "spacing_error_std", "speed_error_std", "max_abs_spacing_error"])
        for s in STRATEGIES:
            r = res[s]
            for i, (a, b, c) in enumerate(zip(r["mean_spacing_std"], r["mean_speed_std"], r["max_abs_spacing"]), 1):
                w.writerow([s, i, repr(float(a)), repr(float(b)), repr(float(c))])
            table[s] = {
                "mean_total_energy": r["mean_total_energy"],
                "topology": r["runs"][0].ifts,
                "mean_spacing_error_std": r["mean_spacing_std"].tolist(),
                "mean_speed_error_std": r["mean_speed_std"].tolist(),
                "max_abs_spacing_error": r["max_abs_spacing"].tolist(),
            }
    _write_json(os.path.join(out, "compare.json"), table)
    lines = [f"{len(_seeds(cfg))} seeds, N+1={cfg.platoon_size}, k={cfg.traffic.density_kbar} veh/km",
             f"  {'strategy':8s} {'energy':>12s} {'std e_1':>9s} {'std e_N':>9s} {'max|e|':>8s}"]
    for s in STRATEGIES:
        r = table[s]
        lines.append(f"  {s:8s} {r['mean_total_energy']:12.1f} {r['mean_spacing_error_std'][0]:9.4f} "
                     f"{r['mean_spacing_error_std'][-1]:9.4f} {max(r['max_abs_spacing_error']):8.3f}")
    _finish(out, "compare", lines)
    return EXIT_OK


def cmd_calibrate(cfg, args):
    out = _out(cfg, args)
    c = cfg.section("contention")
    cws = args.cw or [cfg.traffic.contention_window_CW]
    coeffs, rows = calibration.calibrate_coefficients(
        cws=tuple(cws), rho_max=c["calibration_rho_max"], trials=c["calibration_trials"],
        seed=c["calibration_seed"])
    calibration.write_calibration_csv(rows, os.path.join(out, "calibration.csv"))
    err = calibration.fit_errors(rows)
    _write_json(os.path.join(out, "coefficients.json"), {
        "k1": coeffs.k1, "k2": coeffs.k2, "k3": coeffs.k3,
        "mean_error": float(err.mean()), "std_error": float(err.std()),
    })
    _finish(out, "calibrate", [
        f"k1={coeffs.k1:.6f} k2={coeffs.k2:.6f} k3={coeffs.k3:.6f}",
        f"fit error: mean {err.mean():+.4f}, std {err.std():.4f} over {len(rows)} points",
    ])
    return EXIT_OK


COMMANDS = {
    "stability": (cmd_stability, "string-stability and cut-off report"),
    "contention": (cmd_contention, "success-rate table over densities"),
    "optimize": (cmd_optimize, "optimal information flow topology"),
    "simulate": (cmd_simulate, "seeded simulations for one strategy"),
    "compare": (cmd_compare, "OIFT / DIFT / FIFT comparison"),
    "calibrate": (cmd_calibrate, "fit contention coefficients to the slot-level Monte Carlo"),
}


def build_parser():
    ap = argparse.ArgumentParser(prog="cacc-oift", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", help="JSON config file (defaults if omitted)")
        p.add_argument("-s", "--set", action="append", default=[], metavar="PATH=VALUE",
                       help="override a config field, e.g. traffic.density_kbar=25")
        p.add_argument("-o", "--out", help="output directory (overrides output_dir)")
        if name == "simulate":
            p.add_argument("--strategy", choices=STRATEGIES)
        if name == "contention":
            p.add_argument("--densities", type=float, nargs="+")
        if name == "calibrate":
            p.add_argument("--cw", type=int, nargs="+", help="contention windows to fit over")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.set, check_stability=args.command != "stability")
        return COMMANDS[args.command][0](cfg, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CaccError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
