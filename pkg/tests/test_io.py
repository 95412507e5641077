import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specclip import KoopmanModel, LiftingSpec, LinearModel, TrajectoryDataset, clip_model
from specclip.clip import ClipReport
from specclip.errors import DimensionMismatch, ParseError, VersionMismatch
from specclip.io import (dumps_model, dumps_trajectories, load_model, load_trajectories, loads_model,
                         loads_trajectories, save_model, save_trajectories)

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


class TestModelFile:
    @settings(max_examples=50, deadline=None)
    @given(st.lists(finite, min_size=4, max_size=4), st.lists(finite, min_size=2, max_size=2))
    def test_round_trip_bit_exact(self, a, b):
        model = LinearModel(np.reshape(a, (2, 2)), np.reshape(b, (2, 1)), 0.25)
        back = loads_model(dumps_model(model))
        np.testing.assert_array_equal(back.A, model.A)
        np.testing.assert_array_equal(back.B, model.B)
        assert back.eps == 0.25

    def test_report_and_koopman_round_trip(self, tmp_path):
        rep = ClipReport(1e-2, 1, 1.5, 0.99, 0.0, float("inf"), "unit")
        model = KoopmanModel(np.eye(5) * 0.3, LiftingSpec(2, 2), 1e-2, rep)
        save_model(model, tmp_path / "m.txt")
        back = load_model(tmp_path / "m.txt")
        assert isinstance(back, KoopmanModel) and back.spec == model.spec
        assert back.clip_report == rep
        np.testing.assert_array_equal(back.K, model.K)

    def test_field_order(self):
        text = dumps_model(clip_model(LinearModel(np.eye(2) * 2), 0.1))
        names = [line.split(":")[0] for line in text.splitlines()]
        assert names == ["schema_version", "type", "n", "m", "eps", "A", "B", "lifting", "clip_report"]

    def test_truncated_file_names_missing_field(self):
        text = "\n".join(dumps_model(LinearModel(np.eye(2))).splitlines()[:5])
        with pytest.raises(ParseError, match="field 'A'"):
            loads_model(text)

    def test_malformed_line_reports_line(self):
        lines = dumps_model(LinearModel(np.eye(2))).splitlines()
        lines[5] = "A: [[1, 0], [0, 1"
        with pytest.raises(ParseError) as info:
            loads_model("\n".join(lines))
        assert info.value.line == 6 and info.value.field == "A"

    def test_wrong_shape(self):
        text = dumps_model(LinearModel(np.eye(2))).replace("n: 2", "n: 3")
        with pytest.raises(ParseError):
            loads_model(text)

    def test_version_mismatch(self):
        with pytest.raises(VersionMismatch):
            loads_model(dumps_model(LinearModel(np.eye(2))).replace("schema_version: 1", "schema_version: 2"))

    def test_unknown_field(self):
        with pytest.raises(ParseError):
            loads_model(dumps_model(LinearModel(np.eye(2))) + "extra: 1\n")


class TestTrajectoryFile:
    def test_round_trip(self, rng, tmp_path):
        ds = TrajectoryDataset((rng.standard_normal((4, 2)), rng.standard_normal((3, 2))),
                               (rng.standard_normal((3, 1)), rng.standard_normal((2, 1))))
        save_trajectories(ds, tmp_path / "d.csv")
        back = load_trajectories(tmp_path / "d.csv")
        for a, b in zip(back.states + back.inputs, ds.states + ds.inputs):
            np.testing.assert_array_equal(a, b)

    def test_layout(self):
        text = dumps_trajectories(TrajectoryDataset((np.array([[1.0, 2.0], [3.0, 4.0]]),), (np.array([[5.0]]),)))
        assert text.splitlines() == ["# schema_version: 1", "traj_id,t,x_0,x_1,u_0", "0,0,1,2,5", "0,1,3,4,"]

    HEADER = "# schema_version: 1\ntraj_id,t,x_0\n"

    def test_ragged_row(self):
        with pytest.raises(ParseError) as info:
            loads_trajectories(self.HEADER + "0,0,1\n0,1,2,3\n")
        assert info.value.line == 4

    def test_unsorted(self):
        with pytest.raises(ParseError):
            loads_trajectories(self.HEADER + "1,0,1\n1,1,1\n0,0,1\n0,1,1\n")

    def test_non_contiguous(self):
        with pytest.raises(ParseError):
            loads_trajectories(self.HEADER + "0,0,1\n1,0,1\n1,1,1\n0,1,1\n")

    def test_time_gap(self):
        with pytest.raises(ParseError):
            loads_trajectories(self.HEADER + "0,0,1\n0,2,1\n")

    def test_single_state(self):
        with pytest.raises(DimensionMismatch):
            loads_trajectories(self.HEADER + "0,0,1\n")

    def test_bad_number(self):
        with pytest.raises(ParseError):
            loads_trajectories(self.HEADER + "0,0,abc\n0,1,1\n")

    def test_missing_header(self):
        with pytest.raises(ParseError):
            loads_trajectories("traj_id,t,x_0\n0,0,1\n0,1,1\n")

    def test_version(self):
        with pytest.raises(VersionMismatch):
            loads_trajectories("# schema_version: 7\ntraj_id,t,x_0\n0,0,1\n0,1,1\n")
