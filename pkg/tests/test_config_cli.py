import hashlib
import json
import subprocess
import sys

import pytest

from cacc_oift.cli import main
from cacc_oift.config import DEFAULTS, apply_overrides, dump_config, from_dict, load_config, parse_override
from cacc_oift.errors import ValidationError

SMALL = ["-s", "platoon.size=5", "-s", "trajectory.duration=40", "-s", "simulation.seeds=2"]


def run_cli(tmp_path, *argv):
    return main([*argv, "-o", str(tmp_path)])


class TestConfig:
    def test_defaults(self):
        cfg = load_config()
        assert cfg.platoon_size == 15
        assert cfg.traffic.contention_window_CW == 8
        assert cfg.controller.omega_K == {1: 0.8, 2: 0.8, 3: 0.9, 4: 1.45}
        assert cfg.simulation.dt == 0.1

    def test_round_trip(self, tmp_path):
        cfg = load_config(overrides=["traffic.density_kbar=25", "controller.alpha=0.6", "controller.beta=0.4"])
        path = tmp_path / "c.json"
        dump_config(cfg, path)
        again = load_config(path)
        assert again.to_dict() == cfg.to_dict()
        assert again.traffic == cfg.traffic and again.controller == cfg.controller
        assert again.simulation == cfg.simulation and again.coefficients == cfg.coefficients

    def test_shipped_default_file(self):
        import pathlib
        shipped = pathlib.Path(__file__).parents[1] / "configs" / "default.json"
        assert load_config(shipped).to_dict() == load_config().to_dict()

    @pytest.mark.parametrize("data,path", [
        ({"traffic": {"density_kbar": "high"}}, "traffic.density_kbar"),
        ({"traffic": {"density": 3}}, "traffic.density"),
        ({"controller": {"headway_h": -1.0}}, "controller.headway_h"),
        ({"simulation": {"accel_limits": [1, 2]}}, "simulation.accel_limits"),
        ({"platoon": {"size": 1}}, "platoon.size"),
        ({"trajectory": {"format": "xml"}}, "trajectory.format"),
    ])
    def test_field_paths(self, data, path):
        with pytest.raises(ValidationError) as err:
            from_dict(data)
        assert err.value.path == path
        assert str(err.value).startswith(path + ":")

    def test_unstable_refused_unless_asked(self):
        data = {"controller": {"omega_K": {"ACC": 1.2}}}
        with pytest.raises(ValidationError, match="ACC"):
            from_dict(data)
        assert from_dict(data, check_stability=False).controller.omega_K[4] == 1.2

    def test_overrides(self):
        assert parse_override("a.b=3") == ("a.b", 3)
        assert parse_override("a=text") == ("a", "text")
        assert apply_overrides({}, ["x.y=[1, 2]"]) == {"x": {"y": [1, 2]}}
        with pytest.raises(ValidationError):
            parse_override("novalue")

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{\n  \"traffic\": ,\n}")
        with pytest.raises(ValidationError, match="bad.json:2"):
            load_config(p)

    def test_defaults_untouched(self):
        before = json.dumps(DEFAULTS, sort_keys=True)
        load_config(overrides=["traffic.density_kbar=10"])
        assert json.dumps(DEFAULTS, sort_keys=True) == before


class TestCli:
    def test_stability_passes(self, tmp_path, capsys):
        assert run_cli(tmp_path, "stability") == 0
        doc = json.loads((tmp_path / "stability.json").read_text())
        assert [m["passed"] for m in doc] == [True] * 4
        assert "PASS" in capsys.readouterr().out

    def test_stability_fail_exit(self, tmp_path):
        assert run_cli(tmp_path, "stability", "-s", "controller.omega_K.ACC=1.2") == 1
        doc = json.loads((tmp_path / "stability.json").read_text())
        assert doc[3]["passed"] is False

    def test_optimize_two(self, tmp_path, capsys):
        assert run_cli(tmp_path, "optimize", "-s", "platoon.size=2") == 0
        assert json.loads((tmp_path / "optimize.json").read_text())["ift"] == "10"
        assert capsys.readouterr().out.splitlines()[0] == "10"

    def test_invalid_config_exit(self, tmp_path, capsys):
        assert run_cli(tmp_path, "optimize", "-s", "traffic.density_kbar=\"x\"") == 1
        assert "traffic.density_kbar" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert run_cli(tmp_path, "stability", "-c", str(tmp_path / "nope.json")) == 1

    def test_contention_table(self, tmp_path):
        assert run_cli(tmp_path, "contention", "--densities", "10", "25") == 0
        lines = (tmp_path / "contention.csv").read_text().splitlines()
        assert lines[0] == "density_kbar,m,active_fraction,rho_bar,p_sat,p_unsat"
        assert (tmp_path / "contention_summary.txt").exists()

    def test_calibrate(self, tmp_path):
        assert run_cli(tmp_path, "calibrate", "-s", "contention.calibration_trials=500",
                       "-s", "contention.calibration_rho_max=5") == 0
        doc = json.loads((tmp_path / "coefficients.json").read_text())
        assert {"k1", "k2", "k3", "mean_error", "std_error"} <= set(doc)

    def test_simulate_outputs(self, tmp_path):
        assert run_cli(tmp_path, "simulate", "--strategy", "DIFT", *SMALL) == 0
        for s in (0, 1):
            assert (tmp_path / f"run_DIFT_seed{s}.csv").exists()
        doc = json.loads((tmp_path / "simulate_DIFT.json").read_text())
        assert doc["seeds"] == [0, 1]

    def test_compare_perfect_links(self, tmp_path):
        assert run_cli(tmp_path, "compare", *SMALL, "-s", "simulation.link_success=1.0") == 0
        doc = json.loads((tmp_path / "compare.json").read_text())
        assert doc["OIFT"]["topology"] == ["11110"]
        for key in ("mean_total_energy", "mean_spacing_error_std", "max_abs_spacing_error"):
            assert doc["OIFT"][key] == doc["DIFT"][key]

    @pytest.mark.parametrize("cmd", [["optimize"], ["compare", *SMALL], ["contention"]])
    def test_reproducible_outputs(self, tmp_path, cmd):
        def digest(d):
            out = {}
            for p in sorted(d.iterdir()):
                data = p.read_bytes()
                if p.name.startswith("optimize"):
                    # wall-clock time is the only non-deterministic field
                    data = _mask_wall_time(p, data)
                out[p.name] = hashlib.sha256(data).hexdigest()
            return out
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli(a, *cmd) == 0
        assert run_cli(b, *cmd) == 0
        assert digest(a) == digest(b)

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "cacc_oift", "optimize", "-s", "platoon.size=2",
                               "-o", str(tmp_path)], capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout.startswith("10")


def _mask_wall_time(path, data):
    if path.suffix == ".json":
        doc = json.loads(data)
        doc["wall_time_s"] = 0
        return json.dumps(doc).encode()
    return b"\n".join(l for l in data.split(b"\n") if b" s)" not in l)
