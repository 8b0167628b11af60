import json
import math
import os

import numpy as np
import pytest

from atol.cli import main
from atol.measures import MeasureCollection, PointMeasure, load_measures, save_measures


@pytest.fixture
def two_diracs(tmp_path):
    path = tmp_path / "diracs.csv"
    save_measures(MeasureCollection([PointMeasure([[0.0, 0.0]]), PointMeasure([[2.0, 0.0]])]), path)
    return path


def read_features(path):
    lines = path.read_text().strip().splitlines()
    return lines[0].split(","), np.array([[float(v) for v in ln.split(",")[1:]] for ln in lines[1:]])


def test_orbits_gen_counts(tmp_path, capsys):
    out = tmp_path / "orbits.csv"
    assert main(["orbits-gen", "--classes", "2.5,3.5", "--per-class", "3", "--iters", "10",
                 "--seed", "7", "--out", str(out)]) == 0
    data = load_measures(out, tmp_path / "orbits_labels.csv")
    assert len(data) == 6 and {len(m) for m in data} == {10}
    assert sorted(data.labels) == [0, 0, 0, 1, 1, 1]
    man = json.loads((tmp_path / "orbits_manifest.json").read_text())
    assert man["spec"]["master_seed"] == 7
    assert "seed 7" in capsys.readouterr().out


def test_orbits_gen_is_deterministic(tmp_path):
    args = ["orbits-gen", "--classes", "4.1", "--per-class", "2", "--iters", "5", "--seed", "3"]
    main(args + ["--out", str(tmp_path / "a.csv")])
    main(args + ["--out", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_calibrate_then_transform(tmp_path, two_diracs):
    vmap, feats = tmp_path / "map.json", tmp_path / "feats.csv"
    assert main(["calibrate", "--measures", str(two_diracs), "--budget", "2", "--out", str(vmap)]) == 0
    assert json.loads(vmap.read_text())["sigmas"] == [1.0, 1.0]
    assert main(["transform", "--map", str(vmap), "--measures", str(two_diracs), "--out", str(feats)]) == 0
    header, x = read_features(feats)
    assert header == ["measure_id", "v1", "v2"]
    expected = np.array([[1.0, math.exp(-2)], [math.exp(-2), 1.0]])
    # center order is not fixed by the example; compare as sets of rows
    if x[0, 0] != 1.0:
        x = x[:, ::-1]
    np.testing.assert_allclose(x, expected, rtol=1e-15)


def test_usage_errors_exit_1(capsys):
    assert main([]) == 1
    assert main(["calibrate", "--budget", "2"]) == 1
    assert main(["orbits-gen", "--classes", "a,b"]) == 1
    assert main(["experiment", "--measures", "x.csv"]) == 1
    assert "error" in capsys.readouterr().err


def test_data_errors_exit_2(tmp_path, two_diracs, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("measure_id,weight,x1\n0,1.0,notanumber\n")
    assert main(["calibrate", "--measures", str(bad), "--budget", "2", "--out", str(tmp_path / "m.json")]) == 2
    assert main(["calibrate", "--measures", str(tmp_path / "missing.csv"), "--budget", "2",
                 "--out", str(tmp_path / "m.json")]) == 2
    assert main(["calibrate", "--measures", str(two_diracs), "--budget", "5",
                 "--out", str(tmp_path / "m.json")]) == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["transform", "--map", str(broken), "--measures", str(two_diracs),
                 "--out", str(tmp_path / "f.csv")]) == 2
    assert "bad.csv: line 2" in capsys.readouterr().err


def test_failed_run_leaves_no_partial_output(tmp_path, two_diracs):
    out = tmp_path / "m.json"
    out.write_text("previous")
    assert main(["calibrate", "--measures", str(two_diracs), "--budget", "5", "--out", str(out)]) == 2
    assert out.read_text() == "previous"
    assert sorted(os.listdir(tmp_path)) == ["diracs.csv", "m.json"]


def test_experiment_from_files(tmp_path):
    data = tmp_path / "o.csv"
    main(["orbits-gen", "--classes", "2.5,4.3", "--per-class", "10", "--iters", "40", "--out", str(data)])
    report, per_rep = tmp_path / "r.json", tmp_path / "r.csv"
    assert main(["experiment", "--measures", str(data), "--labels", str(tmp_path / "o_labels.csv"),
                 "--budget", "4", "--reps", "2", "--trees", "10", "--fraction", "0.5", "--seed", "4",
                 "--out", str(report), "--csv", str(per_rep)]) == 0
    rep = json.loads(report.read_text())
    assert len(rep["accuracies"]) == 2 and rep["config"]["master_seed"] == 4
    assert per_rep.read_text().splitlines()[0] == "repetition,accuracy,vectorization_time_s"


def test_experiment_from_config_file(tmp_path):
    from atol.bench import ExperimentConfig
    from atol.forest import ForestConfig
    from atol.orbits import OrbitDatasetSpec
    cfg = ExperimentConfig(orbit=OrbitDatasetSpec(parameters=(2.5, 4.3), orbits_per_class=8, n_iterations=30),
                           budget=4, n_repetitions=2, forest=ForestConfig(n_trees=5))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    out = tmp_path / "r.json"
    assert main(["experiment", "--config", str(path), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["config"] == cfg.to_dict()


def test_separation_command(tmp_path, capsys):
    out = tmp_path / "sep.json"
    assert main(["separation", "--trials", "2", "--per-source", "10", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert len(rep["trials"]) == 2
    assert "trials separated" in capsys.readouterr().out
