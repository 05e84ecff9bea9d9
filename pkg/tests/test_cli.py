import json
import os

import numpy as np
import pytest

from dnnstate import cli, reduction, resnet

TINY = """schema_version = 1
name = "tiny"

[data]
scenario = "{scenario}"
mesh_n = 10
sensors = "{sensors}"
n_sensors = {m}
mode = "H1"
n_snapshots = 80
n_ghost = 20
master_seed = 7
sensor_seed = 3

[net]
blocks = 2
width = 6

[train]
lr = 0.03
steps = 400
schedules = ["expansion", "global"]

[compare]
sensor_counts = [6, 12]
"""


def tiny_config(tmp_path, name="tiny.toml", scenario="pwc", sensors="uniform16", m=16):
    path = tmp_path / name
    path.write_text(TINY.format(scenario=scenario, sensors=sensors, m=m))
    return str(path)


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    cfg = tiny_config(tmp)
    outs = []
    for rep in ("a", "b"):
        out = tmp / rep
        assert run("generate", "--config", cfg, "--out", out) == 0
        assert run("train", "--config", cfg, "--out", out) == 0
        assert run("evaluate", "--config", cfg, "--out", out) == 0
        assert run("plot", out / "loss-expansion.csv", out / "loss-global.csv", "--out", out / "loss.svg") == 0
        outs.append(out)
    return tmp, cfg, outs


def test_pipeline_outputs(pipeline_run):
    _, _, (a, _) = pipeline_run
    snaps = reduction.read_snapshots(a / "snapshots.bin")
    assert len(snaps) == 80 and snaps.m == 16
    net = resnet.load(a / "model-expansion.bin")
    assert net.n_blocks == 2 and net.m == 16
    lines = (a / "errors.csv").read_text().splitlines()
    assert lines[0] == "B,W,trainables,scheme,ehat,rel_l2,rel_h1"
    assert [l.split(",")[3] for l in lines[1:]] == ["expansion", "global"]
    losses = np.loadtxt(a / "loss-expansion.csv", delimiter=",", skiprows=1, usecols=1)
    assert losses[-1] < losses[0]
    manifest = json.loads((a / "manifest-train.json").read_text())
    assert manifest["seeds"]["master_seed"] == 7
    assert set(manifest["outputs"]) == {"model-expansion.bin", "loss-expansion.csv",
                                         "model-global.bin", "loss-global.csv"}


def test_pipeline_is_deterministic(pipeline_run):
    _, _, (a, b) = pipeline_run
    for name in ("snapshots.bin", "model-expansion.bin", "model-global.bin", "loss-expansion.csv",
                 "errors.csv", "loss.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    ma = json.loads((a / "manifest-evaluate.json").read_text())
    mb = json.loads((b / "manifest-evaluate.json").read_text())
    assert ma["outputs"] == mb["outputs"]


def test_seed_override_changes_data(pipeline_run, tmp_path):
    _, cfg, (a, _) = pipeline_run
    assert run("generate", "--config", cfg, "--out", tmp_path, "--seed", 8) == 0
    assert (tmp_path / "snapshots.bin").read_bytes() != (a / "snapshots.bin").read_bytes()


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(TINY.format(scenario="gaussian", sensors="uniform16", m=16))
    assert run("generate", "--config", bad, "--out", tmp_path) == 2
    assert run("generate", "--config", tmp_path / "none.toml", "--out", tmp_path) == 2
    cfg = tiny_config(tmp_path)
    assert run("generate", "--config", cfg, "--out", tmp_path, "--seed", -1) == 2
    # compare-affine needs random sensors
    assert run("compare-affine", "--config", cfg, "--out", tmp_path) == 2


def test_artifact_mismatch_exit_3(pipeline_run, tmp_path):
    _, cfg, (a, _) = pipeline_run
    assert run("train", "--config", cfg, "--out", tmp_path) == 3
    other = tiny_config(tmp_path, "ln.toml", scenario="log-normal")
    assert run("train", "--config", other, "--out", tmp_path, "--cache", a / "snapshots.bin") == 3
    # model trained for 16 sensors against data for 49
    cfg49 = tiny_config(tmp_path, "s49.toml", sensors="uniform49", m=49)
    assert run("generate", "--config", cfg49, "--out", tmp_path) == 0
    assert run("evaluate", "--config", cfg49, "--out", tmp_path, "--model", a / "model-expansion.bin") == 3


def test_format_errors_exit_4(pipeline_run, tmp_path):
    _, cfg, (a, _) = pipeline_run
    broken = tmp_path / "snapshots.bin"
    broken.write_bytes((a / "snapshots.bin").read_bytes()[:-16])
    assert run("train", "--config", cfg, "--out", tmp_path) == 4
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert run("plot", empty, "--out", tmp_path / "e.svg") == 4


def test_compare_affine_smoke(tmp_path):
    cfg = tiny_config(tmp_path, sensors="random", m=12)
    assert run("generate", "--config", cfg, "--out", tmp_path) == 0
    assert run("compare-affine", "--config", cfg, "--out", tmp_path) == 0
    rows = (tmp_path / "compare.csv").read_text().splitlines()
    assert rows[0] == "method,m,n,mu,max_h1,mean_h1"
    methods = [r.split(",")[:2] for r in rows[1:]]
    assert methods == [["pod-pbdw", "6"], ["resnet-expansion", "6"],
                       ["pod-pbdw", "12"], ["resnet-expansion", "12"]]
    for r in rows[1:]:
        assert np.isfinite(float(r.split(",")[4]))
    assert run("plot", tmp_path / "compare.csv", "--out", tmp_path) == 0
    assert os.path.exists(tmp_path / "plot.svg")
