import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from motivpl import cli
from motivpl.domain import FeatureSchema, load_csv
from motivpl.ranking import read_pgm
from motivpl.survey import default_mapping


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert run("synth", "--out", root / "s", "--n", 50, "--corrupt", 4, "--seed", 2) == 0
    assert run("clean", "--data", root / "s" / "dataset.csv", "--out", root / "c") == 0
    return root


def test_synth_and_clean_outputs(work):
    latents = json.loads((work / "s" / "latents.json").read_text())
    dropped = [json.loads(line)["player_id"] for line in (work / "c" / "clean_log.jsonl").read_text().splitlines()]
    assert sorted(dropped) == sorted(latents["corrupted_ids"])
    summary = json.loads((work / "c" / "clean.json").read_text())
    assert summary["n_in"] == 50 and summary["n_out"] == 46
    assert summary["config"]["outlier"] == "iqr:1.5"


def test_manifest_digests(work):
    man = json.loads((work / "c" / "manifest.json").read_text())
    assert man["command"] == "clean" and man["config"]["seed"] == 0
    assert man["inputs"]["dataset.csv"] == hashlib.sha256((work / "s" / "dataset.csv").read_bytes()).hexdigest()
    for name, digest in man["outputs"].items():
        assert hashlib.sha256((work / "c" / name).read_bytes()).hexdigest() == digest
    assert set(man["versions"]) == {"python", "numpy", "numba"}
    assert "out" not in man["config"]


def test_cluster_then_transform_with_new_schema(work):
    assert run("cluster", "--data", work / "c" / "dataset.csv", "--out", work / "k", "--seed", 1) == 0
    schema = FeatureSchema.load(work / "k" / "schema.json")
    ds = load_csv(work / "k" / "dataset.csv", schema)
    assert ds.X[:, -4:].sum(axis=1).tolist() == [1.0] * len(ds)
    assert run("transform", "--data", work / "k" / "dataset.csv", "--schema", work / "k" / "schema.json",
               "--out", work / "t", "--factor", "competence") == 0
    ret = json.loads((work / "t" / "retention.json").read_text())
    assert 0 < ret["retention"]["competence"]["kept_fraction"] <= 1
    assert (work / "t" / "pairs_competence.csv").exists()


def test_cv_gives_ten_folds(work):
    assert run("cv", "--data", work / "c" / "dataset.csv", "--out", work / "cv", "--factor", "competence",
               "--kernel", "rbf", "--pt", "0.1", "--grid-c", "1", "--grid-gamma", "0.5") == 0
    rep = json.loads((work / "cv" / "report.json").read_text())
    assert len(rep["reports"]) == 1
    r = rep["reports"][0]
    assert len(r["folds"]) == 10 and r["kernel"] == "rbf" and r["pt"] == 0.1
    assert rep["config"]["folds"] == 10 and rep["config"]["grid_c"] == [1.0]


def test_rank_report(work):
    assert run("rank", "--data", work / "c" / "dataset.csv", "--out", work / "r", "--factor", "presence",
               "--kernel", "linear", "--c", "1", "--top", "10") == 0
    img = read_pgm(work / "r" / "rank_presence.pgm")
    assert img.shape == (300, 200)
    side = json.loads((work / "r" / "rank_presence.json").read_text())
    assert len(side["players"]) == 20 and side["config"]["top"] == 10
    ordering = json.loads((work / "r" / "ordering_presence.json").read_text())["ordering"]
    assert side["players"] == ordering["player_ids"][:10] + ordering["player_ids"][-10:]
    assert b"# {" in (work / "r" / "rank_presence.pgm").read_bytes()[:400]


def test_identical_runs_identical_bytes(work, tmp_path):
    data = work / "c" / "dataset.csv"
    args = ["cv", "--data", data, "--factor", "autonomy", "--kernel", "linear", "--folds", "4"]
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--out", tmp_path / "b") == 0
    for name in ("manifest.json", "report.json", "grid_reports.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("argv", [
    ["cv", "--out", "x"],
    ["cv", "--data", "missing.csv", "--out", "x"],
    ["cv", "--data", "d.csv", "--out", "x", "--pt", "-1"],
    ["cv", "--data", "d.csv", "--out", "x", "--grid-c", "1,zero"],
    ["clean", "--data", "d.csv", "--out", "x", "--outlier", "mad:3"],
    ["frobnicate"],
])
def test_user_errors_exit_1_with_json(argv, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.main(argv) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    payload = json.loads(err[0])
    assert payload["error"] == "user_error" and payload["message"]


def test_internal_error_exit_2(monkeypatch, capsys, tmp_path):
    def boom(run):
        raise RuntimeError("kaput")

    monkeypatch.setitem(cli.COMMANDS, "synth", boom)
    assert cli.main(["synth", "--out", str(tmp_path / "o")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "internal_error"


def test_ingest_with_survey(tmp_path, work):
    ds = load_csv(work / "c" / "dataset.csv", FeatureSchema.from_dict(
        json.loads((work / "c" / "schema.json").read_text())))
    feats = tmp_path / "features.csv"
    lines = ["player_id," + ",".join(ds.schema.names)]
    lines += [pid + "," + ",".join(map(repr, x.tolist())) for pid, x in zip(ds.ids, ds.X)]
    feats.write_text("\n".join(lines) + "\n")
    m = default_mapping()
    survey = tmp_path / "survey.csv"
    rows = ["player_id," + ",".join(m.item_ids)]
    rows += [pid + "," + ",".join(str(1 + (i + j) % 5) for j in range(24)) for i, pid in enumerate(ds.ids)]
    survey.write_text("\n".join(rows) + "\n")
    assert run("ingest", "--data", feats, "--survey", survey, "--out", tmp_path / "i") == 0
    out = load_csv(tmp_path / "i" / "dataset.csv", ds.schema)
    assert np.isfinite(out.Y).all() and ((out.Y >= 1) & (out.Y <= 5)).all()


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "motivpl.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("synth", "ingest", "clean", "cluster", "transform", "cv", "suite", "rank"):
        assert sub in proc.stdout
