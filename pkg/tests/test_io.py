import json

import numpy as np
import pytest

from shapepix import MeasurementSet
from shapepix.io import (read_json, read_measurements_csv, read_pgm, read_raster_csv, write_json,
                         write_measurements_csv, write_pgm, write_raster_csv, write_table_csv)


def test_pgm_round_trip(tmp_path):
    img = np.random.default_rng(0).random((7, 9))
    write_pgm(tmp_path / "a.pgm", img)
    back = read_pgm(tmp_path / "a.pgm")
    assert back.shape == (7, 9)
    np.testing.assert_allclose(back, img, atol=0.5 / 65535 + 1e-12)
    header = (tmp_path / "a.pgm").read_bytes()[:15]
    assert header.startswith(b"P5\n9 7\n65535\n")


def test_pgm_keeps_scale_above_one(tmp_path):
    img = np.array([[0.0, 2.0], [1.0, 0.5]])
    vmax = write_pgm(tmp_path / "b.pgm", img)
    assert vmax == 2.0
    np.testing.assert_allclose(read_pgm(tmp_path / "b.pgm", vmax), img, atol=1e-4)


def test_raster_csv_round_trip(tmp_path):
    img = np.random.default_rng(1).random((5, 5))
    write_raster_csv(tmp_path / "r.csv", img)
    np.testing.assert_array_equal(read_raster_csv(tmp_path / "r.csv"), img)


def test_measurements_csv_round_trip(tmp_path):
    meas = MeasurementSet(np.arange(9.0).reshape(3, 3) / 10, "bilinear")
    write_measurements_csv(tmp_path / "m.csv", meas)
    back = read_measurements_csv(tmp_path / "m.csv", meas.family)
    np.testing.assert_array_equal(back.values, meas.values)
    assert back.family == meas.family
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "k,i,j,value"
    assert lines[2].startswith("1,1,0,")


def test_json_handles_numpy_and_infinity(tmp_path):
    write_json(tmp_path / "x.json", {"a": np.float64(np.inf), "b": np.arange(3), "c": np.bool_(True),
                                     "d": float("nan"), 4: np.int64(2)})
    data = read_json(tmp_path / "x.json")
    assert data == {"a": "inf", "b": [0, 1, 2], "c": True, "d": None, "4": 2}
    json.loads((tmp_path / "x.json").read_text())


def test_table_csv(tmp_path):
    write_table_csv(tmp_path / "t.csv", ["x", "y"], [[1, float("inf")], ["a", 0.25]])
    assert (tmp_path / "t.csv").read_text().splitlines() == ["x,y", "1,inf", "a,0.25"]


def test_bad_measurement_csv(tmp_path):
    (tmp_path / "bad.csv").write_text("k,i,j,value\n0,0,0,1\n1,1,0,1\n")
    with pytest.raises(ValueError):
        read_measurements_csv(tmp_path / "bad.csv")
