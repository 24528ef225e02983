import numpy as np
import pytest

from cacc_oift.errors import ValidationError
from cacc_oift.trajectory import (FEET_TO_M, constant_speed, load_trajectory, resample, stop_and_go,
                                  trajectory_arrays, write_trajectory_csv)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def ngsim_text(n=50, vid=7, scale=1.0):
    rows = ["vehicle_id,frame,local_y_m,velocity_mps"]
    rows += [f"{vid},{100 + k},{scale * 2.0 * k:.6f},{scale * 20.0:.6f}" for k in range(n)]
    return "\n".join(rows) + "\n"


class TestTwoColumn:
    def test_ramp(self, tmp_path):
        recs = load_trajectory(write(tmp_path, "a.csv", "0,0\n0.1,1\n0.2,2"), format="xy")
        assert len(recs) == 3
        t, x = trajectory_arrays(recs)
        np.testing.assert_allclose(t, [0, 0.1, 0.2])
        np.testing.assert_allclose(x, [0, 1, 2])

    def test_header_and_auto(self, tmp_path):
        recs = load_trajectory(write(tmp_path, "a.csv", "t,x\n0,0\n0.1,1\n0.2,2\n"))
        assert len(recs) == 3

    def test_malformed_row_line_number(self, tmp_path):
        p = write(tmp_path, "bad.csv", "0,0\n0.1,1\n0.2,abc\n")
        with pytest.raises(ValidationError, match=r"bad.csv:3"):
            load_trajectory(p, format="xy")

    def test_wrong_column_count(self, tmp_path):
        with pytest.raises(ValidationError, match=r":2: expected 2 columns"):
            load_trajectory(write(tmp_path, "b.csv", "0,0\n0.1,1,5\n"), format="xy")

    def test_non_uniform(self, tmp_path):
        with pytest.raises(ValidationError, match="non-uniform"):
            load_trajectory(write(tmp_path, "c.csv", "0,0\n0.1,1\n0.25,2\n"), format="xy")

    def test_decreasing_time(self, tmp_path):
        with pytest.raises(ValidationError, match="strictly increasing"):
            load_trajectory(write(tmp_path, "d.csv", "0,0\n0.1,1\n0.05,2\n"), format="xy")

    def test_resampled_to_coarser_dt(self, tmp_path):
        text = "".join(f"{0.1 * k:.1f},{3.0 * 0.1 * k}\n" for k in range(21))
        t, x = trajectory_arrays(load_trajectory(write(tmp_path, "r.csv", text), format="xy", dt=0.5))
        np.testing.assert_allclose(t, [0, 0.5, 1.0, 1.5, 2.0])
        np.testing.assert_allclose(x, 3.0 * t, atol=1e-12)

    def test_round_trip(self, tmp_path):
        recs = stop_and_go(duration=5.0)
        p = tmp_path / "w.csv"
        write_trajectory_csv(p, recs)
        back = load_trajectory(p)
        np.testing.assert_allclose(trajectory_arrays(back)[1], trajectory_arrays(recs)[1], atol=1e-12)


class TestNgsim:
    def test_identity_resampling(self, tmp_path):
        recs = load_trajectory(write(tmp_path, "n.csv", ngsim_text()), dt=0.1)
        t, x = trajectory_arrays(recs)
        assert len(recs) == 50
        np.testing.assert_allclose(t, 0.1 * np.arange(50), atol=1e-12)
        np.testing.assert_allclose(x, 2.0 * np.arange(50), atol=1e-12)
        assert recs[0].speed == 20.0

    def test_feet(self, tmp_path):
        recs = load_trajectory(write(tmp_path, "f.csv", ngsim_text()), feet=True)
        assert recs[10].position == pytest.approx(20.0 * FEET_TO_M, abs=1e-12)
        assert recs[0].speed == pytest.approx(20.0 * 0.3048)

    def test_vehicle_selection(self, tmp_path):
        text = ngsim_text(vid=3) + ngsim_text(vid=9, scale=2.0).split("\n", 1)[1]
        p = write(tmp_path, "m.csv", text)
        assert load_trajectory(p)[1].position == pytest.approx(2.0)
        assert load_trajectory(p, vehicle_id=9)[1].position == pytest.approx(4.0)
        with pytest.raises(ValidationError, match="no rows"):
            load_trajectory(p, vehicle_id=42)

    def test_raw_column_names(self, tmp_path):
        text = "Vehicle_ID,Frame_ID,Local_Y,v_Vel\n" + "".join(f"1,{k},{10.0 * k},30\n" for k in range(5))
        recs = load_trajectory(write(tmp_path, "raw.csv", text), feet=True)
        assert recs[1].position == pytest.approx(10.0 * FEET_TO_M)

    def test_bad_value_line(self, tmp_path):
        text = ngsim_text(n=5).replace("7,102,", "7,10x,")
        with pytest.raises(ValidationError, match=r"n.csv:4"):
            load_trajectory(write(tmp_path, "n.csv", text))

    def test_missing_frame(self, tmp_path):
        text = ngsim_text(n=5).replace("7,103,", "7,104,", 1)
        with pytest.raises(ValidationError):
            load_trajectory(write(tmp_path, "g.csv", text))


class TestGenerators:
    def test_stop_and_go_speed(self):
        recs = stop_and_go(duration=40.0, base_speed=10.0, amplitude=8.0, period=40.0)
        t, x = trajectory_arrays(recs)
        v = np.diff(x) / 0.1
        assert v.min() == pytest.approx(2.0, abs=0.05) and v.max() == pytest.approx(18.0, abs=0.05)
        assert len(recs) == 401

    def test_amplitude_bound(self):
        with pytest.raises(ValidationError):
            stop_and_go(amplitude=12.0, base_speed=10.0)

    def test_constant(self):
        t, x = trajectory_arrays(constant_speed(1.0, speed=5.0))
        np.testing.assert_allclose(np.diff(x), 0.5)

    def test_resample_dt(self):
        with pytest.raises(ValidationError):
            resample(np.arange(3.0), np.arange(3.0), 0.0)
