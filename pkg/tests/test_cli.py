import json

import numpy as np
import pytest

from repcause.cli import main
from repcause.data import RepresentationSet, load_representations, save_representations
from repcause.simulate import ConfoundingSpec, ManifoldLabelGenerator, ManifoldSampler


@pytest.fixture()
def label_fixture(tmp_path):
    gen = ManifoldLabelGenerator(300, ManifoldSampler(6, 2, seed=3),
                                 ConfoundingSpec())
    ds, _ = gen.generate(5)
    path = tmp_path / "fixture.ptrz"
    save_representations(ds, path)
    return path


def test_validate_ok(label_fixture, capsys):
    assert main(["validate", str(label_fixture)]) == 0
    out = capsys.readouterr().out
    assert "n=300" in out and "d=6" in out and "label=yes" in out


def test_validate_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.ptrz"
    bad.write_bytes(b"XXXXnot a real file")
    assert main(["validate", str(bad)]) == 1
    assert "error" in capsys.readouterr().err


def test_usage_error_exit_code():
    assert main(["frobnicate"]) == 2
    assert main([]) == 2


def test_estimate_end_to_end(label_fixture, tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(["estimate", str(label_fixture), "--method", "dml-aipw",
                 "--g", "ols", "--m", "logistic", "--k", "2", "--seed", "1",
                 "--out", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["method"] == "dml_aipw"
    assert {"estimate", "std_error", "ci_low", "ci_high", "level", "n",
            "folds", "warnings", "meta"} <= set(payload)
    assert payload["n"] == 300
    assert len(payload["folds"]) == 2
    assert payload["meta"]["seed"] == 1
    # biased-naive sanity: the point estimate lives near the truth
    assert 0.5 < payload["estimate"] < 3.5


def test_estimate_naive_to_stdout(label_fixture, capsys):
    assert main(["estimate", str(label_fixture), "--method", "naive"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["method"] == "naive"


def test_simulate_roundtrip(tmp_path, capsys):
    out = tmp_path / "sim.ptrz"
    code = main(["simulate", "--kind", "label", "--n", "120", "--d", "8",
                 "--d-manifold", "2", "--seed", "4", "--out", str(out)])
    assert code == 0
    meta = json.loads(capsys.readouterr().out)
    assert meta["n"] == 120 and meta["d"] == 8
    ds = load_representations(out)
    assert ds.n == 120 and ds.label is not None
    assert main(["validate", str(out)]) == 0


def test_experiment_byte_identical(tmp_path, capsys):
    config = tmp_path / "exp.toml"
    config.write_text(
        """
[experiment]
kind = "label"
n = 150
d = 6
d_manifold = 2
reps = 3
seed = 9

[[experiment.estimators]]
name = "naive"
method = "naive"

[[experiment.estimators]]
name = "oracle"
method = "oracle"
"""
    )
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert main(["experiment", "--config", str(config), "--out", str(out1),
                 "--summary", str(tmp_path / "s1.json")]) == 0
    assert main(["experiment", "--config", str(config), "--out", str(out2),
                 "--summary", str(tmp_path / "s2.json")]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    header = out1.read_text().splitlines()
    assert header[0].startswith("# repcause ")
    assert header[1] == "# seed = 9"
    assert header[2].startswith("# config = ")
    assert header[3] == "rep,estimator,estimate,se,ci_low,ci_high,covered"
    summary = json.loads((tmp_path / "s1.json").read_text())
    assert set(summary["summaries"]) == {"naive", "oracle"}


def test_experiment_rejects_unknown_keys(tmp_path, capsys):
    config = tmp_path / "bad.toml"
    config.write_text(
        """
[experiment]
kind = "label"
banana = 3
reps = 2

[[experiment.estimators]]
method = "naive"
"""
    )
    assert main(["experiment", "--config", str(config),
                 "--out", str(tmp_path / "x.csv")]) == 2
    err = capsys.readouterr().err
    assert "banana" in err


def test_id_subcommand(label_fixture, tmp_path):
    out = tmp_path / "id.json"
    per_point = tmp_path / "pp.csv"
    code = main(["id", str(label_fixture), "--method", "mle", "--k", "5",
                 "--out", str(out), "--per-point", str(per_point)])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["method"] == "mle" and payload["k"] == 5
    assert 1.0 <= payload["estimate"] <= 6.0
    lines = per_point.read_text().splitlines()
    assert lines[3] == "index,value"
    assert len(lines) == 4 + 300


def test_rotate_subcommand(tmp_path):
    rng = np.random.default_rng(0)
    z = rng.standard_normal((120, 10))
    y = 2.0 * z[:, 0] + 0.1 * rng.standard_normal(120)
    ds = RepresentationSet(z=z, t=rng.integers(0, 2, 120), y=y)
    path = tmp_path / "rot.ptrz"
    save_representations(ds, path)
    out = tmp_path / "curve.csv"
    code = main(["rotate", str(path), "--rotations", "2", "--grid-points", "8",
                 "--seed", "1", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[3] == "rotations,nonzero_count"
    assert len(lines) == 4 + 3
    first = lines[4].split(",")
    assert first[0] == "0"


def test_rate_subcommand(tmp_path):
    out = tmp_path / "rate.csv"
    code = main(["rate", "--d-manifold", "2", "--ambient", "4", "--n-grid",
                 "100,200", "--epochs", "15", "--width", "8", "--depth", "1",
                 "--n-test", "200", "--seed", "2", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert any(line.startswith("# slope d=4") for line in lines)
    assert "d,n,test_mse" in lines


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert "repcause" in capsys.readouterr().out
