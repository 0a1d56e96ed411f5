import csv
import json

import numpy as np
import pytest

from clam.cli import main
from clam.config import PRESETS, build, read_toml
from clam.dynamics import DynamicsConfig, PrototypeSet
from clam.persistence import SCHEMA, ModelFile, SchemaError


# -- model files --------------------------------------------------------------

def test_model_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    mem = rng.normal(size=(5, 4)) * 10 ** rng.uniform(-8, 8, size=(5, 1))
    mf = ModelFile(PrototypeSet(mem, rng.uniform(0.1, 3, size=5)), DynamicsConfig(0.3, 7, 0.2, "euclidean"),
                   {"seed": 3, "standardization": {"mean": [0.1] * 4, "scale": [2.0] * 4}})
    mf.save(tmp_path / "m.json")
    back = ModelFile.load(tmp_path / "m.json")
    assert back.protos.memories.tobytes() == mem.tobytes()
    np.testing.assert_array_equal(back.protos.weights, mf.protos.weights)
    assert back.dynamics == mf.dynamics
    np.testing.assert_array_equal(back.standardization[1], [2.0] * 4)


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(schema="other"),
    lambda d: d.update(version=99),
    lambda d: d.update(k=3),
    lambda d: d.pop("memories"),
])
def test_schema_errors(mutate):
    doc = ModelFile(PrototypeSet(np.eye(2)), DynamicsConfig(1.0)).to_dict()
    assert doc["schema"] == SCHEMA
    mutate(doc)
    with pytest.raises(SchemaError):
        ModelFile.from_dict(doc)


# -- config -------------------------------------------------------------------

def test_config_precedence(tmp_path):
    (tmp_path / "c.toml").write_text('[run]\nbeta = 5.0\nepochs = 3\n')
    cfg = build({"data": "zoo", "epochs": 4, "lr": None}, tmp_path / "c.toml")
    assert cfg.k == PRESETS["zoo"]["k"]  # preset
    assert cfg.beta == 5.0  # file beats preset
    assert cfg.epochs == 4  # flag beats file
    (tmp_path / "bad.toml").write_text("bogus = 1\n")
    with pytest.raises(ValueError):
        read_toml(tmp_path / "bad.toml")


# -- CLI ----------------------------------------------------------------------

def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _labels(path):
    with open(path) as fh:
        return [row[0] for row in list(csv.reader(fh))[1:]]


QUICK = ["--epochs", "3", "--restarts", "2"]


def test_train_infer_eval(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", "--data", "zoo", *QUICK, "--out", str(out)]) == 0
    for name in ("model.json", "labels.csv", "train_log.jsonl", "train_summary.json"):
        assert (out / name).exists()
    log = [json.loads(line) for line in (out / "train_log.jsonl").read_text().splitlines()]
    assert len(log) == 6
    assert main(["infer", "--model", str(out / "model.json"), "--data", "zoo",
                 "--out", str(tmp_path / "again.csv")]) == 0
    assert (tmp_path / "again.csv").read_bytes() == (out / "labels.csv").read_bytes()
    capsys.readouterr()
    assert main(["eval", "--labels", str(out / "labels.csv"), "--data", "zoo",
                 "--model", str(out / "model.json"), "--out", str(tmp_path / "m.json")]) == 0
    doc = _read_json(tmp_path / "m.json")
    assert {"sc", "nmi", "ari", "cluster_sizes", "entropy"} <= set(doc)
    assert sum(doc["cluster_sizes"]) == 101 and len(doc["cluster_sizes"]) == 7


def test_train_is_byte_reproducible(tmp_path, monkeypatch):
    # identical argv, run from two working directories
    for name in ("a", "b"):
        (tmp_path / name).mkdir()
        monkeypatch.chdir(tmp_path / name)
        assert main(["train", "--data", "ecoli", *QUICK, "--seed", "4", "--out", "."]) == 0
    for name in ("model.json", "labels.csv", "train_log.jsonl", "train_summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_train_with_config_file_and_thread_env(tmp_path, monkeypatch):
    (tmp_path / "c.toml").write_text('data = "zoo"\nepochs = 2\nrestarts = 1\nbeta = 1.0\n')
    monkeypatch.setenv("CLAM_NUM_THREADS", "1")
    assert main(["train", "--config", str(tmp_path / "c.toml"), "--out", str(tmp_path / "r")]) == 0
    model = _read_json(tmp_path / "r" / "model.json")
    assert model["dynamics"]["beta"] == 1.0 and model["k"] == 7
    monkeypatch.setenv("CLAM_NUM_THREADS", "many")
    assert main(["train", "--config", str(tmp_path / "c.toml"), "--out", str(tmp_path / "r")]) == 1


@pytest.mark.slow
def test_zoo_tuned_run_reaches_band(tmp_path):
    out = tmp_path / "zoo"
    assert main(["train", "--data", "zoo", "--k", "7", "--beta", "2.4", "--steps", "10", "--lr", "0.1",
                 "--batch", "8", "--mask-prob", "0.2", "--mask-fill", "mean", "--out", str(out)]) == 0
    assert main(["eval", "--labels", str(out / "labels.csv"), "--data", "zoo", "--out", str(tmp_path / "e.json")]) == 0
    assert _read_json(tmp_path / "e.json")["sc"] >= 0.38


def test_grid_on_ecoli(tmp_path):
    table = tmp_path / "grid.csv"
    assert main(["grid", "--data", "ecoli", "--epochs", "3", "--restarts", "1",
                 "--grid-beta", "0.1,1", "--grid-steps", "5,10", "--table", str(table)]) == 0
    with open(table) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert all(np.isfinite(float(r["sc"])) for r in rows)
    assert {(r["beta"], r["steps"]) for r in rows} == {("0.1", "5"), ("0.1", "10"), ("1.0", "5"), ("1.0", "10")}


def test_basin_map_outputs(tmp_path, capsys):
    prefix = tmp_path / "maps" / "b"
    assert main(["basin-map", "--memories", "0,0;1,0;0.3,0.8", "--beta", "100",
                 "--resolution", "40", "30", "--out", str(prefix)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["agreement"] >= 0.99
    for suffix in (".ppm", "_voronoi.ppm", ".csv", "_memories.csv"):
        assert (tmp_path / "maps" / f"b{suffix}").exists()


def test_synth_and_baselines(tmp_path, capsys):
    path = tmp_path / "el.csv"
    assert main(["synth", "--n-per-cluster", "50", "--out", str(path)]) == 0
    assert main(["baseline", "--data", str(path), "--label-column", "label", "--k", "2", "--n-init", "5",
                 "--out", str(tmp_path / "l.json"), "--labels-out", str(tmp_path / "l.csv")]) == 0
    doc = _read_json(tmp_path / "l.json")
    assert doc["method"] == "lloyd" and sum(doc["cluster_sizes"]) == 100 and "nmi" in doc
    assert len(_labels(tmp_path / "l.csv")) == 100
    assert main(["baseline", "--data", str(path), "--label-column", "label", "--k", "2", "--method", "soft",
                 "--epochs", "20", "--out", str(tmp_path / "s.json")]) == 0
    assert set(_read_json(tmp_path / "s.json")) >= {"sc", "nmi", "ari", "cluster_sizes", "centers"}


def test_eval_rejects_degenerate_labellings(tmp_path, capsys):
    path = tmp_path / "d.csv"
    path.write_text("1,2\n3,4\n5,7\n")
    (tmp_path / "one.csv").write_text("label\n0\n0\n0\n")
    assert main(["eval", "--labels", str(tmp_path / "one.csv"), "--data", str(path)]) == 1
    assert "clam: error:" in capsys.readouterr().err
    (tmp_path / "each.csv").write_text("label\n0\n1\n2\n")
    assert main(["eval", "--labels", str(tmp_path / "each.csv"), "--data", str(path)]) == 0
    assert "singleton" in capsys.readouterr().out


def test_error_exit_codes(tmp_path, capsys):
    out = tmp_path / "never"
    assert main(["train", "--data", str(tmp_path / "missing.csv"), "--k", "2", "--out", str(out)]) != 0
    assert not out.exists()
    assert main(["infer", "--model", str(tmp_path / "nope.json"), "--data", "zoo"]) != 0
    (tmp_path / "bad.json").write_text('{"schema": "other"}')
    assert main(["infer", "--model", str(tmp_path / "bad.json"), "--data", "zoo"]) != 0
    err = capsys.readouterr().err
    assert err.count("clam: error:") == 3
    with pytest.raises(SystemExit) as exc:
        main(["train", "--no-such-flag"])
    assert exc.value.code != 0
