import json
import os

import numpy as np
import pytest

import egohist as eh
from egohist.cli import main


@pytest.fixture(scope="module")
def data_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    eh.save_tudataset(
        eh.synthetic_classification_dataset(num_graphs=60, seed=21, name="SYN"), str(root)
    )
    eh.save_tudataset(
        eh.synthetic_regression_dataset(num_graphs=40, seed=22, name="SYNREG"), str(root)
    )
    return str(root)


def _fast_args(extra):
    return [
        "--layers", "1", "--masks", "2", "--dict-size", "3", "--hidden", "4",
        "--epochs", "5", "--patience", "5", "--seed", "7",
    ] + extra


def test_train_smoke(data_root, tmp_path, capsys):
    out = str(tmp_path / "run")
    rc = main(
        ["train", "--dataset-root", data_root, "--dataset", "SYN", "--out", out]
        + _fast_args([])
    )
    assert rc == 0
    for name in ("manifest.json", "checkpoint.egh", "metrics.csv"):
        assert os.path.isfile(os.path.join(out, name))
    model = eh.load_checkpoint(os.path.join(out, "checkpoint.egh"))
    assert model.config.num_layers == 1
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert manifest["command"] == "train"
    assert manifest["dataset"] == "SYN"
    assert manifest["seed"] == 7
    assert manifest["model_config"]["masks_per_layer"] == 2
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert "best_val_loss" in summary


def test_train_missing_dataset_names_path(tmp_path, capsys):
    rc = main(
        ["train", "--dataset-root", str(tmp_path / "nowhere"), "--dataset", "SYN",
         "--out", str(tmp_path / "o")]
    )
    assert rc == 1
    err = capsys.readouterr().err
    assert "error:" in err and "SYN_A.txt" in err and "nowhere" in str(err)


def test_train_metrics_identical_across_runs(data_root, tmp_path):
    outs = []
    for sub in ("a", "b"):
        out = str(tmp_path / sub)
        assert main(
            ["train", "--dataset-root", data_root, "--dataset", "SYN", "--out", out]
            + _fast_args([])
        ) == 0
        outs.append(open(os.path.join(out, "metrics.csv"), "rb").read())
    assert outs[0] == outs[1]


def test_config_file_and_flag_precedence(data_root, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"num_layers": 2, "epochs": 4, "masks_per_layer": 2,
                               "dict_size": 3, "mlp_hidden": 4, "patience": 4}))
    out = str(tmp_path / "run")
    rc = main(
        ["train", "--dataset-root", data_root, "--dataset", "SYN", "--out", out,
         "--config", str(cfg), "--layers", "1", "--seed", "0"]
    )
    assert rc == 0
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert manifest["model_config"]["num_layers"] == 1      # flag wins
    assert manifest["model_config"]["dict_size"] == 3       # file beats default
    assert manifest["train_config"]["epochs"] == 4


def test_config_file_unknown_key(data_root, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"learning_rat": 0.1}))
    rc = main(
        ["train", "--dataset-root", data_root, "--dataset", "SYN",
         "--out", str(tmp_path / "o"), "--config", str(cfg)]
    )
    assert rc == 1
    assert "learning_rat" in capsys.readouterr().err


def test_cv_summary(data_root, tmp_path, capsys):
    out = str(tmp_path / "cv")
    rc = main(
        ["cv", "--dataset-root", data_root, "--dataset", "SYN", "--out", out,
         "--folds", "10"] + _fast_args([])
    )
    assert rc == 0
    summary = json.load(open(os.path.join(out, "summary.json")))
    assert summary["metric"] == "accuracy"
    assert len(summary["folds"]) == 10
    folds = [f["test_accuracy"] for f in summary["folds"]]
    assert summary["mean"] == pytest.approx(np.mean(folds), abs=1e-12)
    assert os.path.isfile(os.path.join(out, "folds.csv"))
    assert os.path.isfile(os.path.join(out, "manifest.json"))


def test_cv_regression_selects_mae(data_root, tmp_path):
    out = str(tmp_path / "cvreg")
    rc = main(
        ["cv", "--dataset-root", data_root, "--dataset", "SYNREG", "--out", out,
         "--folds", "5"] + _fast_args([])
    )
    assert rc == 0
    summary = json.load(open(os.path.join(out, "summary.json")))
    assert summary["metric"] == "mae"
    assert len(summary["folds"]) == 5
    assert all("test_mae" in f for f in summary["folds"])


def test_sweep_singleton_matches_cv(data_root, tmp_path):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"num_layers": [1]}))
    sweep_out = str(tmp_path / "sweep")
    cv_out = str(tmp_path / "cv")
    common = ["--dataset-root", data_root, "--dataset", "SYN"] + _fast_args([])
    assert main(["sweep", "--grid", str(grid), "--out", sweep_out, "--folds", "10",
                 "--fold-subset", "2"] + common) == 0
    entries = json.load(open(os.path.join(sweep_out, "sweep.json")))
    assert len(entries) == 1
    # direct cross-validation over the same folds
    ds = eh.load_tudataset(data_root, "SYN")
    config = eh.config_for_dataset(ds, num_layers=1, masks_per_layer=2,
                                   dict_size=3, mlp_hidden=4)
    direct = eh.cross_validate(
        ds, config, eh.TrainConfig(epochs=5, patience=5, seed=7), fold_subset=[0, 1]
    )
    assert entries[0]["mean_test_metric"] == pytest.approx(direct.mean, abs=1e-12)


def test_sweep_cells_report(data_root, tmp_path):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"num_layers": [1, 2], "egonet_radius": [1, 2]}))
    out = str(tmp_path / "sweep")
    rc = main(
        ["sweep", "--dataset-root", data_root, "--dataset", "SYN", "--out", out,
         "--grid", str(grid), "--folds", "10", "--fold-subset", "1",
         "--cells", "egonet_radius,num_layers"]
        + _fast_args([])
    )
    assert rc == 0
    entries = json.load(open(os.path.join(out, "sweep.json")))
    assert len(entries) == 4
    ranks = [e["rank"] for e in entries]
    assert ranks == sorted(ranks)
    cells = open(os.path.join(out, "cells.csv")).read().splitlines()
    assert len(cells) == 1 + 1 + 2  # schema line, header, one row per radius


def test_sweep_empty_grid_fails(data_root, tmp_path, capsys):
    grid = tmp_path / "grid.json"
    grid.write_text("{}")
    rc = main(
        ["sweep", "--dataset-root", data_root, "--dataset", "SYN",
         "--out", str(tmp_path / "s"), "--grid", str(grid)]
    )
    assert rc == 1
    assert "grid" in capsys.readouterr().err


def test_inspect_outputs(data_root, tmp_path, capsys):
    train_out = str(tmp_path / "run")
    assert main(
        ["train", "--dataset-root", data_root, "--dataset", "SYN", "--out", train_out]
        + _fast_args([])
    ) == 0
    out = str(tmp_path / "inspect")
    rc = main(
        ["inspect", "--dataset-root", data_root, "--dataset", "SYN",
         "--checkpoint", os.path.join(train_out, "checkpoint.egh"),
         "--out", out, "--layer", "0", "--seed", "7"]
    )
    assert rc == 0
    summary = json.load(open(os.path.join(out, "importance.json")))
    assert summary["criterion"] == "validation_loss"
    assert len(summary["masks"]) == 2
    assert os.path.isfile(os.path.join(out, "masks_layer0.csv"))
    assert os.path.isfile(os.path.join(out, "manifest.json"))


def test_bench_requires_three_rungs(capsys):
    rc = main(["bench", "--nodes", "64,128"])
    assert rc == 1
    assert "3 node counts" in capsys.readouterr().err


def test_bench_smoke(tmp_path, capsys):
    out = str(tmp_path / "bench")
    rc = main(
        ["bench", "--nodes", "64,128,256", "--degree", "4", "--feature-dim", "4",
         "--masks", "2", "--dict-size", "4", "--repeats", "2", "--out", out]
    )
    assert rc == 0
    text = capsys.readouterr().out
    assert "slope(time vs n)" in text
    report = json.load(open(os.path.join(out, "bench.json")))
    assert report["node_counts"] == [64, 128, 256]
    assert len(report["seconds"]) == 3


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["train"])  # missing required flags
    assert exc.value.code == 2
