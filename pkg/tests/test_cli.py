import json

import numpy as np
import pytest

from shapepix.cli import main
from shapepix.io import read_json, read_pgm


def run(tmp_path, *argv):
    return main([argv[0], "--out", str(tmp_path / "out"), *argv[1:]])


def test_sample_writes_measurements(tmp_path):
    assert run(tmp_path, "sample", "--m", "3", "--n", "60", "--kernel", "bilinear", "--figures") == 0
    out = tmp_path / "out"
    lines = (out / "measurements.csv").read_text().splitlines()
    assert len(lines) == 10
    assert (out / "measurements.png").exists()
    assert read_json(out / "sample.json")["kernel"]["family"] == "bilinear"


def test_reconstruct_from_config(tmp_path):
    cfg = {"shape": {"type": "circle", "center": [0.5, 0.5], "radius": 0.3},
           "m": 8, "N": 64, "kernel": {"family": "box"}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert run(tmp_path, "reconstruct", "--config", str(path)) == 0
    out = tmp_path / "out"
    rep = read_json(out / "report.json")
    assert rep["report"]["converged"] and rep["report"]["residual"] <= 1e-6
    img = read_pgm(out / "image.pgm")
    assert img.shape == (64, 64)


def test_measurements_from_csv(tmp_path):
    assert run(tmp_path, "sample", "--m", "4", "--n", "32") == 0
    cfg = {"measurements": "out/measurements.csv", "N": 32}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["reconstruct", "--config", str(tmp_path / "cfg.json"),
                 "--out", str(tmp_path / "rec")]) == 0


def test_unconverged_exit_code(tmp_path):
    assert run(tmp_path, "reconstruct", "--m", "8", "--n", "64", "--max-iters", "3") == 3
    assert (tmp_path / "out" / "image.pgm").exists()


@pytest.mark.parametrize("argv", [
    ["sample", "--kernel", "gaussian"],
    ["sample", "--m", "20", "--n", "40"],
    ["sample", "--config", "missing.json"],
    ["frobnicate"],
    ["reconstruct", "--max-iters", "x"],
])
def test_config_errors(tmp_path, argv):
    assert run(tmp_path, *argv) == 2


def test_invalid_json_config(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    assert run(tmp_path, "sample", "--config", str(tmp_path / "bad.json")) == 2
    (tmp_path / "bad.json").write_text(json.dumps({"lambda": [1, 2], "measurements": [[0.5, 0.5], [0.5, 0.5]],
                                                   "N": 16}))
    assert run(tmp_path, "cheeger", "--config", str(tmp_path / "bad.json")) == 2


def test_cheeger_uniform(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"f": "uniform", "N": 60}))
    assert run(tmp_path, "cheeger", "--config", str(tmp_path / "c.json"), "--max-iters", "4000") in (0, 3)
    data = read_json(tmp_path / "out" / "cheeger.json")
    assert data["ratio_unit_square"] == pytest.approx(3.7725, rel=0.05)


def test_reduce_check_and_lambda_star(tmp_path):
    cfg = {"measurements": [[0.576, 0.72], [0.216, 0.216]], "kernel": {"family": "bilinear"},
           "N": 40, "reduce": {"density": 3}}
    (tmp_path / "r.json").write_text(json.dumps(cfg))
    assert run(tmp_path, "reduce-check", "--config", str(tmp_path / "r.json")) == 0
    rep = read_json(tmp_path / "out" / "reducibility.json")["report"]
    assert rep["reducible"] == "no" and rep["violating_index"] == 3
    cfg = {"shape": {"type": "circle", "center": [0.5, 0.5], "radius": 0.3}, "m": 2, "N": 48}
    (tmp_path / "l.json").write_text(json.dumps(cfg))
    assert run(tmp_path, "lambda-star", "--config", str(tmp_path / "l.json")) == 0
    res = read_json(tmp_path / "out" / "lambda_star.json")["result"]
    assert res["found"]


def test_eval_table(tmp_path):
    assert run(tmp_path, "eval", "--m", "8", "--n", "64") == 0
    lines = (tmp_path / "out" / "table.csv").read_text().splitlines()
    assert lines[0] == "method,image_psnr_db,measurement_psnr_db,mse,mismatch,is_bilevel"
    assert [line.split(",")[0] for line in lines[1:]] == ["proposed", "interpolation"]


def test_montecarlo_and_sweep(tmp_path):
    cfg = {"N": 48, "montecarlo": {"trials": 2, "m_values": [6, 8]},
           "sweep": {"grid": 2, "N": 32, "density": 2}}
    (tmp_path / "mc.json").write_text(json.dumps(cfg))
    assert run(tmp_path, "montecarlo", "--config", str(tmp_path / "mc.json"), "--figures") in (0, 3)
    out = tmp_path / "out"
    assert len((out / "trials.csv").read_text().splitlines()) == 5
    assert (out / "mse_vs_m.png").exists()
    assert run(tmp_path, "sweep", "--config", str(tmp_path / "mc.json")) == 0
    rows = (out / "thresholds.csv").read_text().splitlines()
    assert rows[0] == "family,grid,N,config_hash,a,b,Y,Z" and len(rows) == 5
