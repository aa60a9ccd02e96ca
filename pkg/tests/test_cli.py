import json
from pathlib import Path

import pytest

from aqakit import cli


def _cfg(tmp_path, **extra):
    doc = {
        "output_root": str(tmp_path / "out"),
        "instances_per_type": 2,
        "sample_rate": 8000,
        "master_seed": 3,
        "counts": {"train": 8, "validation": 2, "test": 2},
        "hyper": {"learning_rate": 1e-3, "batch_size": 4, "epochs": 1},
        "model": {"kind": "malimo", "modulated_units": 1, "scale": 8},
    }
    doc.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def _run(command, cfg_path, *extra):
    return cli.main([command, "--config", str(cfg_path), *extra])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    cfg = _cfg(tmp)
    assert _run("gen-events", cfg) == 0
    assert _run("gen-clips", cfg) == 0
    assert _run("gen-questions", cfg) == 0
    return tmp, cfg


def test_stage_order_enforced(tmp_path, capsys):
    cfg = _cfg(tmp_path)
    assert _run("gen-clips", cfg) == 1
    err = capsys.readouterr().err
    assert "gen-events" in err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["not-a-command"])
    assert exc.value.code == 2


def test_unknown_config_key_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"output_root": "x", "bogus": 1}))
    with pytest.raises(SystemExit) as exc:
        cli.main(["verify", "--config", str(path)])
    assert exc.value.code == 2


def test_verify_ok_and_detects_corruption(pipeline):
    tmp, cfg = pipeline
    assert _run("verify", cfg) == 0
    qpath = Path(json.loads(cfg.read_text())["output_root"]) / "questions" / "test.jsonl"
    original = qpath.read_text()
    lines = original.splitlines()
    doc = json.loads(lines[0])
    doc["answer"] = "yes" if doc["answer"] != "yes" else "no"
    qpath.write_text("\n".join([json.dumps(doc)] + lines[1:]) + "\n")
    try:
        assert _run("verify", cfg) == 1
    finally:
        qpath.write_text(original)
    assert _run("verify", cfg) == 0


def test_stats_outputs(pipeline):
    tmp, cfg = pipeline
    assert _run("stats", cfg) == 0
    out = Path(json.loads(cfg.read_text())["output_root"]) / "reports" / "stats"
    for name in ("answer_frequency.tsv", "template_counts.tsv",
                 "template_answer_frequency.tsv", "question_lengths.tsv",
                 "clip_lengths.tsv", "summary.json"):
        assert (out / name).exists(), name
    lengths = (out / "question_lengths.tsv").read_text().splitlines()[1:]
    assert all(int(line.split("\t")[0]) >= 5 for line in lengths)


def test_features_train_eval_saliency(pipeline):
    tmp, cfg = pipeline
    assert _run("features", cfg) == 0
    assert _run("train", cfg) == 0
    assert _run("eval", cfg) == 0
    assert _run("saliency", cfg) == 0
    root = Path(json.loads(cfg.read_text())["output_root"])
    assert (root / "models" / "malimo.ckpt").exists()
    assert (root / "reports" / "metrics_mode.json").exists()
    assert (root / "reports" / "metrics_malimo.json").exists()
    assert list((root / "reports").glob("saliency_*.f32"))


def test_gen_stage_idempotent(pipeline):
    tmp, cfg = pipeline
    root = Path(json.loads(cfg.read_text())["output_root"])
    ann = (root / "annotations" / "train.jsonl").read_bytes()
    qs = (root / "questions" / "train.jsonl").read_bytes()
    wav = (root / "clips" / "train" / "train_00000.wav").read_bytes()
    assert _run("gen-clips", cfg) == 0
    assert _run("gen-questions", cfg) == 0
    assert (root / "annotations" / "train.jsonl").read_bytes() == ann
    assert (root / "questions" / "train.jsonl").read_bytes() == qs
    assert (root / "clips" / "train" / "train_00000.wav").read_bytes() == wav


def test_low_resource_flag(tmp_path):
    cfg = _cfg(tmp_path)
    assert _run("gen-events", cfg) == 0
    assert _run("gen-clips", cfg) == 0
    assert _run("gen-questions", cfg, "--low-resource") == 0
    root = Path(json.loads(cfg.read_text())["output_root"])
    lines = (root / "questions" / "train.jsonl").read_text().splitlines()
    per_clip = {}
    for line in lines:
        doc = json.loads(line)
        per_clip[doc["clip_id"]] = per_clip.get(doc["clip_id"], 0) + 1
    assert all(v == 1 for v in per_clip.values())
    assert len(lines) <= 8


def test_seed_override_changes_outputs(tmp_path):
    cfg = _cfg(tmp_path)
    assert _run("gen-events", cfg) == 0
    assert _run("gen-clips", cfg) == 0
    root = Path(json.loads(cfg.read_text())["output_root"])
    first = (root / "annotations" / "train.jsonl").read_bytes()
    assert _run("gen-clips", cfg, "--seed", "99") == 0
    assert (root / "annotations" / "train.jsonl").read_bytes() != first
