import json
import sys
from pathlib import Path

import numpy as np
import pytest

SRC = Path(__file__).resolve().parents[1] / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from aqakit.catalog import load_catalog, load_synonyms  # noqa: E402
from aqakit.clips import annotation_from_plan, generate_split_plans  # noqa: E402
from aqakit.events import build_synthetic_library, load_taxonomy  # noqa: E402
from aqakit.questions import generate_questions  # noqa: E402

#: (criterion name, passed, detail) rows filled by the acceptance tests.
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(
            f"  {name}: {status}" + (f" — {detail}" if detail else ""))


@pytest.fixture(scope="session")
def default_types():
    types, rate = load_taxonomy()
    return types


@pytest.fixture(scope="session")
def types_by_id(default_types):
    return {t.id: t for t in default_types}


@pytest.fixture(scope="session")
def catalog_templates(default_types):
    return load_catalog(types=default_types)


@pytest.fixture(scope="session")
def synonyms():
    return load_synonyms()


@pytest.fixture(scope="session")
def small_library(default_types):
    """Two instances per type at 8 kHz: fast enough for per-test use."""
    return build_synthetic_library(default_types, instances_per_type=2,
                                   sample_rate=8000, master_seed=11)


@pytest.fixture(scope="session")
def small_annotations(small_library):
    """A 60/8/8-clip annotation-only corpus (no audio rendered)."""
    plans = generate_split_plans(small_library, 60, 8, 8, master_seed=5)
    return {split: [annotation_from_plan(p, small_library) for p in ps]
            for split, ps in plans.items()}


@pytest.fixture(scope="session")
def small_questions(small_annotations, catalog_templates, types_by_id, synonyms):
    return generate_questions(small_annotations, catalog_templates, types_by_id,
                              master_seed=5, synonyms=synonyms)


# ---------------------------------------------------------------------------
# Desk-scale dataset (all pipeline stages), shared by CLI and acceptance tests
# ---------------------------------------------------------------------------

DESK_SEED = 7


@pytest.fixture(scope="session")
def desk_dir(tmp_path_factory):
    """Full desk pipeline: 80/10/10 clips, default taxonomy and catalog."""
    from aqakit import cli

    root = tmp_path_factory.mktemp("desk")
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps({
        "output_root": str(root / "out"),
        "instances_per_type": 20,
        "master_seed": DESK_SEED,
        "counts": {"train": 80, "validation": 10, "test": 10},
    }))
    ns = type("NS", (), {"seed": None, "scale": None, "low_resource": False,
                         "output_root": None})()
    cfg = cli.load_config(str(cfg_path), ns)
    assert cli.cmd_gen_events(cfg) == 0
    assert cli.cmd_gen_clips(cfg) == 0
    assert cli.cmd_gen_questions(cfg) == 0
    assert cli.cmd_features(cfg) == 0
    return cfg


# ---------------------------------------------------------------------------
# Micro overfitting run (shared by the capacity acceptance criterion and the
# saliency localization smoke test)
# ---------------------------------------------------------------------------

MICRO_SEED = 13


def _short_taxonomy(tmp_path: Path) -> Path:
    """Default taxonomy with compressed duration ranges: short clips keep the
    training loop inside the wall-clock budget."""
    types, rate = load_taxonomy()
    doc = {"sample_rate": 8000, "types": []}
    for t in types:
        lo, hi = t.duration_range_s
        doc["types"].append({
            "id": t.id, "source": t.source, "action": t.action,
            "continuity": t.continuity,
            "duration_range_s": [max(0.6, lo / 4), max(0.8, hi / 4)],
        })
    path = tmp_path / "short_taxonomy.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="session")
def micro_run(tmp_path_factory):
    """Train MALiMo (1 block, scale 4) to >= 95% train accuracy on a
    200-question micro-dataset; returns everything downstream tests need."""
    import time

    from aqakit import features as feat_mod
    from aqakit import models as models_mod
    from aqakit import qlang
    from aqakit.clips import render_clip
    from aqakit.events import load_taxonomy
    from aqakit.neural.optim import Hyperparams

    root = tmp_path_factory.mktemp("micro")
    tax_path = _short_taxonomy(root)
    types, rate = load_taxonomy(tax_path)
    library = build_synthetic_library(types, instances_per_type=4,
                                      sample_rate=rate, master_seed=MICRO_SEED)
    plans = generate_split_plans(library, 48, 8, 8, master_seed=MICRO_SEED)
    annotations = {s: [annotation_from_plan(p, library) for p in ps]
                   for s, ps in plans.items()}
    templates = load_catalog(types=types)
    questions = generate_questions(annotations, templates, {t.id: t for t in types},
                                   master_seed=MICRO_SEED)

    waveforms = {}
    for split, split_plans in plans.items():
        for plan in split_plans:
            wav, _ = render_clip(plan, library)
            waveforms[plan.clip_id] = wav
    train_feats = [feat_mod.mfsc(waveforms[a.clip_id], rate)
                   for a in annotations["train"]]
    stats = feat_mod.fit_normalizer(train_feats)
    feats = {a.clip_id: feat_mod.apply_normalizer(
        stats, feat_mod.mfsc(waveforms[a.clip_id], rate)).astype(np.float32)
        for split in annotations for a in annotations[split]}

    answers = qlang.answer_vocab(types)
    aidx = {a: i for i, a in enumerate(answers)}
    vocab = models_mod.build_vocab(
        [inst.text_tokens for inst in questions["train"]])

    def to_examples(qs):
        return [models_mod.Example(
            clip_id=inst.clip_id, question_id=inst.question_id,
            feat=feats[inst.clip_id],
            tokens=models_mod.encode_tokens(inst.text_tokens, vocab),
            label=aidx[inst.answer], skill=inst.skill,
            template_id=inst.template_id) for inst in qs]

    train_questions = questions["train"][:200]
    train_examples = to_examples(train_questions)
    config = models_mod.ModelConfig(kind="malimo", vocab_size=len(vocab),
                                    modulated_units=1, scale=4)
    model = models_mod.build_model(config, seed=MICRO_SEED)
    hyper = Hyperparams(learning_rate=1e-3, weight_decay=1e-5, batch_size=40,
                        epochs=200)
    t0 = time.time()
    result = models_mod.train_model(model, train_examples, train_examples,
                                    hyper, seed=MICRO_SEED,
                                    early_stop_val_acc=0.97)
    wall = time.time() - t0
    return {
        "model": model,
        "train_examples": train_examples,
        "train_questions": train_questions,
        "questions": questions,
        "annotations": annotations,
        "templates": templates,
        "answers": answers,
        "result": result,
        "wall_seconds": wall,
        "epochs_run": len(result["log"]),
        "final_train_acc": models_mod.accuracy(model, train_examples),
    }
