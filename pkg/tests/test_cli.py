import json
import os
from datetime import datetime, timezone

import pytest

from gdcnet.cli import main, resolve_config
from gdcnet.data import CaptionRecord, DatasetManifest, load_manifest, save_manifest
from gdcnet.errors import ConfigError
from gdcnet.synthetic import make_incongruity_dataset


@pytest.fixture
def workspace(tmp_path):
    m = make_incongruity_dataset(48, d_t=64, d_v=32, seed=4, splits={"train": 0.75, "val": 0.25})
    save_manifest(m, tmp_path / "data.jsonl")
    cfg = {
        "train": {"epochs": 3, "seed": 1},
        "dims": {"d_t": 64, "d_v": 32, "d_z": 16, "d_fused": 16},
        "paths": {"dataset": "data.jsonl"},
    }
    (tmp_path / "run.json").write_text(json.dumps(cfg))
    return tmp_path


def train(ws, run, *extra):
    return main(["train", "--config", str(ws / "run.json"), "--run-dir", str(ws / run), *extra])


def test_resolve_config_rejects_unknown():
    with pytest.raises(ConfigError, match="train.lr"):
        resolve_config({"train": {"lr": 1}})
    with pytest.raises(ConfigError, match="bogus"):
        resolve_config({"bogus": {}})
    with pytest.raises(ConfigError):
        resolve_config({}, ["nope=1"])


def test_resolve_config_defaults_and_overrides():
    cfg = resolve_config({}, ["ablation=no_gdrm,no_send", "dims.d_z=8", "alpha=0.5"])
    assert cfg["train"]["ablation"] == ["no_gdrm", "no_send"]
    assert cfg["dims"]["d_z"] == 8 and cfg["train"]["alpha"] == 0.5 and cfg["train"]["batch_size"] == 32


def test_train_layout_and_ablation_echo(workspace):
    assert train(workspace, "r1", "--set", "ablation=no_gdrm") == 0
    run = workspace / "r1"
    resolved = json.loads((run / "resolved_config.json").read_text())
    assert resolved["train"]["ablation"] == ["no_gdrm"]
    assert {p.name for p in run.iterdir()} >= {"resolved_config.json", "checkpoints", "metrics", "logs"}
    assert (run / "checkpoints" / "final.ckpt").is_file()
    assert len((run / "metrics" / "epochs.jsonl").read_text().splitlines()) == 3
    summary = json.loads((run / "metrics" / "summary.json").read_text())
    assert summary["best_val_f1_epoch"] in (0, 1, 2)
    assert (run / "metrics" / "val_report.json").is_file()


def test_train_deterministic(workspace):
    assert train(workspace, "a") == 0 and train(workspace, "b") == 0
    for rel in ("checkpoints/final.ckpt", "checkpoints/epoch_002.ckpt", "metrics/val_report.json"):
        assert (workspace / "a" / rel).read_bytes() == (workspace / "b" / rel).read_bytes()


def test_train_batch_size_one(workspace, capsys):
    assert train(workspace, "bad", "--set", "batch_size=1") == 1
    assert "negative" in capsys.readouterr().err


def test_train_unknown_key(workspace, capsys):
    assert train(workspace, "bad", "--set", "learning_rate=3") == 1
    assert "learning_rate" in capsys.readouterr().err


def test_run_root_env(workspace, monkeypatch):
    monkeypatch.setenv("GDCNET_RUN_ROOT", str(workspace / "root"))
    cfg = json.loads((workspace / "run.json").read_text())
    cfg["run_name"] = "named"
    (workspace / "run.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(workspace / "run.json")]) == 0
    assert (workspace / "root" / "named" / "checkpoints" / "final.ckpt").is_file()


def test_eval(workspace, capsys):
    train(workspace, "r")
    ckpt = str(workspace / "r" / "checkpoints" / "final.ckpt")
    args = ["eval", "--checkpoint", ckpt, "--dataset", str(workspace / "data.jsonl"), "--split", "val"]
    assert main(args + ["--out", str(workspace / "e1")]) == 0
    out = capsys.readouterr().out
    assert all(k in out for k in ("accuracy", "precision", "recall", "f1"))
    assert main(args + ["--out", str(workspace / "e2")]) == 0
    assert (workspace / "e1" / "eval_val.json").read_bytes() == (workspace / "e2" / "eval_val.json").read_bytes()
    assert (workspace / "e1" / "eval_val.txt").is_file() and (workspace / "e1" / "eval_val_per_sample.jsonl").is_file()


def test_eval_missing_checkpoint(workspace):
    assert main(["eval", "--checkpoint", str(workspace / "nope.ckpt"), "--dataset", str(workspace / "data.jsonl")]) != 0


def test_eval_version_mismatch(workspace, capsys):
    train(workspace, "r")
    ckpt = workspace / "r" / "checkpoints" / "final.ckpt"
    ckpt.write_text(ckpt.read_text().replace('"schema_version": 1', '"schema_version": 2'))
    assert main(["eval", "--checkpoint", str(ckpt), "--dataset", str(workspace / "data.jsonl"), "--split", "val"]) == 2
    assert "schema_version" in capsys.readouterr().err


def test_discrepancy_dump(tmp_path, capsys):
    m = make_incongruity_dataset(6, d_t=512, d_v=768, seed=0)
    s0 = m.samples[0]
    samples = [s0.__class__(**{**s0.__dict__, "caption": s0.text})] + list(m.samples[1:5])
    samples.append(s0.__class__(**{**m.samples[5].__dict__, "caption": None}))
    save_manifest(DatasetManifest(samples), tmp_path / "d.jsonl")
    code = main(["discrepancy", "--dataset", str(tmp_path / "d.jsonl"), "--out", str(tmp_path / "D.jsonl")])
    assert code == 2
    out = capsys.readouterr().out
    assert "skipped" in out and samples[-1].id in out and "d_sem: mean" in out
    rows = [json.loads(x) for x in (tmp_path / "D.jsonl").read_text().splitlines()]
    assert len(rows) == 5 and rows[0]["id"] == s0.id and rows[0]["d_sem"] == pytest.approx(0, abs=1e-12)
    for r in rows:
        assert 0 <= r["d_sem"] <= 2 and 0 <= r["d_sen"] <= 2 and -1 <= r["d_fidelity"] <= 1


def test_captions_import_file(tmp_path):
    m = make_incongruity_dataset(4, seed=0)
    bare = DatasetManifest([s.__class__(**{**s.__dict__, "caption": None}) for s in m.samples])
    save_manifest(bare, tmp_path / "in.jsonl")
    before = (tmp_path / "in.jsonl").read_bytes()
    t = datetime(2024, 5, 1, tzinfo=timezone.utc)
    with open(tmp_path / "caps.jsonl", "w") as fh:
        for s in m.samples:
            fh.write(json.dumps(CaptionRecord(s.id, s.caption, "file", t).to_json()) + "\n")
    args = ["captions-import", "--dataset", str(tmp_path / "in.jsonl"), "--captions", str(tmp_path / "caps.jsonl")]
    assert main(args + ["--out", str(tmp_path / "out.jsonl")]) == 0
    assert (tmp_path / "in.jsonl").read_bytes() == before
    out = load_manifest(tmp_path / "out.jsonl")
    assert all(s.has_caption for s in out.samples)
    assert main(["captions-import", "--dataset", str(tmp_path / "out.jsonl"), "--captions",
                 str(tmp_path / "caps.jsonl"), "--out", str(tmp_path / "out2.jsonl")]) == 0
    assert (tmp_path / "out.jsonl").read_bytes() == (tmp_path / "out2.jsonl").read_bytes()
    assert main(args + ["--out", str(tmp_path / "in.jsonl")]) == 1


def test_captions_import_service_down(tmp_path):
    m = make_incongruity_dataset(2, seed=0)
    save_manifest(DatasetManifest([s.__class__(**{**s.__dict__, "caption": None, "image_vec": None,
                                                   "image_path": f"img/{s.id}"}) for s in m.samples]),
                  tmp_path / "in.jsonl")
    before = (tmp_path / "in.jsonl").read_bytes()
    code = main(["captions-import", "--dataset", str(tmp_path / "in.jsonl"), "--endpoint", "http://127.0.0.1:9",
                 "--retries", "0", "--timeout", "0.5", "--out", str(tmp_path / "out.jsonl")])
    assert code == 4
    assert (tmp_path / "in.jsonl").read_bytes() == before and not (tmp_path / "out.jsonl").exists()


from test_data import caption_server  # noqa: E402,F401


def test_captions_import_service(tmp_path, caption_server):
    m = make_incongruity_dataset(3, seed=0)
    bare = DatasetManifest([s.__class__(**{**s.__dict__, "caption": None, "image_vec": None,
                                           "image_path": f"img/{s.id}"}) for s in m.samples])
    save_manifest(bare, tmp_path / "in.jsonl")
    code = main(["captions-import", "--dataset", str(tmp_path / "in.jsonl"), "--endpoint", caption_server,
                 "--out", str(tmp_path / "out.jsonl")])
    assert code == 0
    out = load_manifest(tmp_path / "out.jsonl")
    assert [s.caption for s in out.samples] == ["a dog on wet pavement"] * 3
