"""Pipeline driver: deterministic, resumable stages communicating via files.

    aqakit gen-events  --config cfg.json
    aqakit gen-clips   --config cfg.json
    aqakit gen-questions --config cfg.json
    aqakit verify      --config cfg.json
    aqakit stats       --config cfg.json
    aqakit features    --config cfg.json
    aqakit train       --config cfg.json
    aqakit eval        --config cfg.json
    aqakit saliency    --config cfg.json --question <id>

Exit codes: 0 success, 1 validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import clips as clips_mod
from . import features as feat_mod
from . import models as models_mod
from . import qlang
from .catalog import load_catalog, load_synonyms
from .clips import SPLITS, read_annotations
from .evalkit import (BaselinePredictor, bag_of_words, evaluate_predictions,
                      template_onehot, train_logistic, write_metrics,
                      write_per_template_table)
from .events import (build_synthetic_library, load_manifest, load_taxonomy,
                     read_wav, write_library_manifest)
from .neural.optim import Hyperparams
from .oracle import verify_dataset
from .questions import BalanceState, generate_questions, read_questions

LOW_RESOURCE_ATTEMPTS = {"train": 1, "validation": 10, "test": 10}


@dataclass
class RunConfig:
    output_root: str = "out"
    taxonomy: str | None = None
    catalog: str | None = None
    synonyms: str | None = None
    manifest: str | None = None  # external event library; None = synthesize
    sample_rate: int = 16000
    instances_per_type: int = 20
    master_seed: int = 7
    counts: dict = field(default_factory=lambda: {"train": 80, "validation": 10,
                                                  "test": 10})
    attempts: dict = field(default_factory=lambda: {"train": 5, "validation": 10,
                                                    "test": 10})
    low_resource: bool = False
    noise_snr_db: float = 30.0
    balance: dict = field(default_factory=lambda: {"gap_threshold": 0.05,
                                                   "warmup": 50})
    model: dict = field(default_factory=lambda: {"kind": "malimo",
                                                 "modulated_units": 1, "scale": 4})
    hyper: dict = field(default_factory=dict)

    @property
    def root(self) -> Path:
        return Path(self.output_root)

    def effective_attempts(self) -> dict:
        return LOW_RESOURCE_ATTEMPTS if self.low_resource else self.attempts


def load_config(path: str | None, overrides: argparse.Namespace) -> RunConfig:
    doc = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            print(f"error: config file not found: {p}", file=sys.stderr)
            raise SystemExit(2)
        doc = json.loads(p.read_text())
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        print(f"error: unknown config keys: {sorted(unknown)}", file=sys.stderr)
        raise SystemExit(2)
    cfg = RunConfig(**doc)
    if getattr(overrides, "seed", None) is not None:
        cfg.master_seed = overrides.seed
    if getattr(overrides, "scale", None) is not None:
        cfg.model["scale"] = overrides.scale
    if getattr(overrides, "low_resource", False):
        cfg.low_resource = True
    if getattr(overrides, "output_root", None) is not None:
        cfg.output_root = overrides.output_root
    return cfg


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        print(f"error: missing {path}; run the `{produced_by}` stage first",
              file=sys.stderr)
        raise SystemExit(1)
    return path


def _taxonomy(cfg: RunConfig):
    return load_taxonomy(cfg.taxonomy)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def cmd_gen_events(cfg: RunConfig) -> int:
    types, tax_rate = _taxonomy(cfg)
    rate = cfg.sample_rate or tax_rate
    if cfg.manifest is not None:
        lib = load_manifest(cfg.manifest, types)
    else:
        lib = build_synthetic_library(types, cfg.instances_per_type, rate,
                                      cfg.master_seed)
    path = write_library_manifest(lib, cfg.root / "events")
    print(f"gen-events: {len(lib.instances)} instances -> {path}")
    return 0


def cmd_gen_clips(cfg: RunConfig) -> int:
    types, _ = _taxonomy(cfg)
    manifest = _require(cfg.root / "events" / "library.json", "gen-events")
    lib = load_manifest(manifest, types)
    plans = clips_mod.generate_split_plans(
        lib, cfg.counts["train"], cfg.counts["validation"], cfg.counts["test"],
        cfg.master_seed, snr_db=cfg.noise_snr_db)
    for split, split_plans in plans.items():
        anns = clips_mod.render_split_to_dir(split_plans, lib,
                                             cfg.root / "clips" / split)
        clips_mod.write_annotations(anns, cfg.root / "annotations" / f"{split}.jsonl")
        print(f"gen-clips: {split}: {len(anns)} clips")
    return 0


def cmd_gen_questions(cfg: RunConfig) -> int:
    types, _ = _taxonomy(cfg)
    templates = load_catalog(cfg.catalog, types)
    synonyms = load_synonyms(cfg.synonyms)
    annotations = {}
    for split in SPLITS:
        path = _require(cfg.root / "annotations" / f"{split}.jsonl", "gen-clips")
        annotations[split] = read_annotations(path)
    generated = generate_questions(
        annotations, templates, {t.id: t for t in types}, cfg.master_seed,
        attempts=cfg.effective_attempts(), synonyms=synonyms,
        gap_threshold=cfg.balance["gap_threshold"], warmup=cfg.balance["warmup"],
        out_dir=cfg.root / "questions")
    for split in SPLITS:
        print(f"gen-questions: {split}: {len(generated[split])} questions")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    types, _ = _taxonomy(cfg)
    templates = load_catalog(cfg.catalog, types)
    continuity = {t.id: t.continuity for t in types}
    vocab = set(qlang.answer_vocab(types))
    problems: list[str] = []

    annotations = {}
    for split in SPLITS:
        path = _require(cfg.root / "annotations" / f"{split}.jsonl", "gen-clips")
        anns = read_annotations(path)
        annotations[split] = anns
        for ann in anns:
            problems.extend(clips_mod.scan_annotation(ann, continuity=continuity))
        noisy = sum(a.has_noise for a in anns)
        if noisy != len(anns) // 2:
            problems.append(f"{split}: {noisy} noisy clips, expected {len(anns) // 2}")

    def seq_key(ann):
        return tuple((o.type_id, o.instance_index) for o in ann.occurrences)

    train_keys = {seq_key(a) for a in annotations["train"]}
    for split in ("validation", "test"):
        for ann in annotations[split]:
            if seq_key(ann) in train_keys:
                problems.append(f"{ann.clip_id}: instance sequence duplicates a "
                                "training clip")

    balance_cfg = cfg.balance
    for split in SPLITS:
        qpath = _require(cfg.root / "questions" / f"{split}.jsonl", "gen-questions")
        questions = read_questions(qpath)
        for inst in questions:
            if inst.answer not in vocab:
                problems.append(f"{inst.question_id}: answer {inst.answer!r} "
                                "outside the 36-answer vocabulary")
        report = verify_dataset(qpath, cfg.root / "annotations" / f"{split}.jsonl")
        for mism in report["mismatches"]:
            problems.append(f"{split}: oracle mismatch {mism}")
        state = BalanceState(templates, balance_cfg["gap_threshold"],
                             balance_cfg["warmup"])
        for inst in questions:
            state.hist[inst.template_id][inst.answer] += 1
        for tpl in templates:
            total = sum(state.hist[tpl.template_id].values())
            if total >= balance_cfg["warmup"]:
                gap = state.gap(tpl.template_id)
                if gap is not None and gap > balance_cfg["gap_threshold"] + 1e-12:
                    problems.append(
                        f"{split}/{tpl.template_id}: balance gap {gap:.3f} "
                        f"> {balance_cfg['gap_threshold']} past warm-up")

    for p in problems:
        print(f"VIOLATION: {p}")
    print(f"verify: {'OK' if not problems else f'{len(problems)} violation(s)'}")
    return 0 if not problems else 1


def cmd_stats(cfg: RunConfig) -> int:
    out = cfg.root / "reports" / "stats"
    out.mkdir(parents=True, exist_ok=True)
    answer_counts: Counter = Counter()
    template_counts: Counter = Counter()
    template_answer: Counter = Counter()
    length_counts: Counter = Counter()
    for split in SPLITS:
        qpath = _require(cfg.root / "questions" / f"{split}.jsonl", "gen-questions")
        for inst in read_questions(qpath):
            if split == "train":
                answer_counts[inst.answer] += 1
                template_counts[inst.template_id] += 1
                template_answer[(inst.template_id, inst.answer)] += 1
                length_counts[len(inst.text_tokens)] += 1

    def tsv(path, header, rows):
        lines = [header] + [("\t".join(str(v) for v in row)) for row in rows]
        (out / path).write_text("\n".join(lines) + "\n")

    tsv("answer_frequency.tsv", "answer\tcount",
        sorted(answer_counts.items()))
    tsv("template_counts.tsv", "template_id\tcount",
        sorted(template_counts.items()))
    tsv("template_answer_frequency.tsv", "template_id\tanswer\tcount",
        sorted(((t, a, c) for (t, a), c in template_answer.items())))
    tsv("question_lengths.tsv", "tokens\tcount", sorted(length_counts.items()))

    clip_rows = []
    durations = {}
    for split in SPLITS:
        path = _require(cfg.root / "annotations" / f"{split}.jsonl", "gen-clips")
        anns = read_annotations(path)
        durations[split] = [a.total_duration for a in anns]
        clip_rows += [(split, a.clip_id, f"{a.total_duration:.3f}") for a in anns]
    tsv("clip_lengths.tsv", "split\tclip_id\tduration_s", clip_rows)

    summary = {
        "train_questions": sum(template_counts.values()),
        "question_length": {
            "min": min(length_counts) if length_counts else 0,
            "max": max(length_counts) if length_counts else 0,
            "mean": (sum(k * v for k, v in length_counts.items())
                     / max(1, sum(length_counts.values()))),
        },
        "clip_duration_s": {
            split: {"min": min(v), "max": max(v),
                    "mean": float(np.mean(v))} if v else {}
            for split, v in durations.items()
        },
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    print(f"stats: wrote {out}")
    return 0


def cmd_features(cfg: RunConfig) -> int:
    stats = None
    for split in SPLITS:
        apath = _require(cfg.root / "annotations" / f"{split}.jsonl", "gen-clips")
        anns = read_annotations(apath)
        raw = {}
        for ann in anns:
            wav_path = _require(cfg.root / "clips" / split / f"{ann.clip_id}.wav",
                                "gen-clips")
            raw[ann.clip_id] = feat_mod.mfsc(read_wav(wav_path, cfg.sample_rate),
                                             cfg.sample_rate)
        if split == "train":
            stats = feat_mod.fit_normalizer(list(raw.values()))
            feat_mod.save_norm_stats(stats, cfg.root / "features" / "norm_stats.json")
        if stats is None:
            stats = feat_mod.load_norm_stats(
                _require(cfg.root / "features" / "norm_stats.json", "features"))
        for clip_id, matrix in raw.items():
            normalized = feat_mod.apply_normalizer(stats, matrix)
            feat_mod.write_feature(cfg.root / "features" / split / f"{clip_id}.f32",
                                   normalized, clip_id, normalized=True)
        print(f"features: {split}: {len(raw)} matrices")
    return 0


def _load_examples(cfg: RunConfig, split: str, vocab: dict) -> list:
    questions = read_questions(
        _require(cfg.root / "questions" / f"{split}.jsonl", "gen-questions"))
    types, _ = _taxonomy(cfg)
    answers = qlang.answer_vocab(types)
    aidx = {a: i for i, a in enumerate(answers)}
    feats = {}
    examples = []
    for inst in questions:
        if inst.clip_id not in feats:
            fpath = _require(cfg.root / "features" / split / f"{inst.clip_id}.f32",
                             "features")
            feats[inst.clip_id], _ = feat_mod.read_feature(fpath)
        examples.append(models_mod.Example(
            clip_id=inst.clip_id, question_id=inst.question_id,
            feat=feats[inst.clip_id],
            tokens=models_mod.encode_tokens(inst.text_tokens, vocab),
            label=aidx[inst.answer], skill=inst.skill,
            template_id=inst.template_id))
    return examples


def cmd_train(cfg: RunConfig) -> int:
    train_q = read_questions(
        _require(cfg.root / "questions" / "train.jsonl", "gen-questions"))
    vocab = models_mod.build_vocab([inst.text_tokens for inst in train_q])
    vocab_path = cfg.root / "models" / "vocab.json"
    vocab_path.parent.mkdir(parents=True, exist_ok=True)
    vocab_path.write_text(json.dumps(vocab) + "\n")

    train_examples = _load_examples(cfg, "train", vocab)
    val_examples = _load_examples(cfg, "validation", vocab)
    config = models_mod.ModelConfig(vocab_size=len(vocab), **cfg.model)
    model = models_mod.build_model(config, seed=cfg.master_seed)
    hyper = Hyperparams(**cfg.hyper) if cfg.hyper else Hyperparams(epochs=20)
    result = models_mod.train_model(
        model, train_examples, val_examples, hyper, seed=cfg.master_seed,
        log_path=cfg.root / "models" / "train_log.jsonl")
    ckpt = cfg.root / "models" / f"{config.kind}.ckpt"
    models_mod.save_checkpoint(ckpt, model)
    print(f"train: best val acc {result['best_val_acc']:.4f} -> {ckpt}")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    types, _ = _taxonomy(cfg)
    templates = load_catalog(cfg.catalog, types)
    answers = qlang.answer_vocab(types)
    train_q = read_questions(
        _require(cfg.root / "questions" / "train.jsonl", "gen-questions"))
    test_q = read_questions(
        _require(cfg.root / "questions" / "test.jsonl", "gen-questions"))
    reports = cfg.root / "reports"

    predictor = BaselinePredictor(train_q, templates, answers, seed=cfg.master_seed)
    for kind in ("random", "mode", "random_per_template", "mode_per_template"):
        metrics = evaluate_predictions(predictor.predict_all(kind, test_q),
                                       test_q, answers)
        write_metrics(metrics, reports / f"metrics_{kind}.json")
        print(f"eval: {kind}: {metrics.overall:.4f}")

    aidx = {a: i for i, a in enumerate(answers)}
    labels_train = np.array([aidx[inst.answer] for inst in train_q])
    tindex = {t.template_id: i for i, t in enumerate(templates)}
    onehot_model = train_logistic(template_onehot(train_q, tindex), labels_train,
                                  len(answers), seed=cfg.master_seed)
    preds = onehot_model.predict(template_onehot(test_q, tindex))
    metrics = evaluate_predictions([answers[i] for i in preds], test_q, answers)
    write_metrics(metrics, reports / "metrics_question_template.json")
    print(f"eval: question_template: {metrics.overall:.4f}")

    words = sorted({w for inst in train_q for w in inst.text_tokens})
    windex = {w: i for i, w in enumerate(words)}
    bow_model = train_logistic(bag_of_words(train_q, windex), labels_train,
                               len(answers), seed=cfg.master_seed)
    preds = bow_model.predict(bag_of_words(test_q, windex))
    metrics = evaluate_predictions([answers[i] for i in preds], test_q, answers)
    write_metrics(metrics, reports / "metrics_bag_of_words.json")
    print(f"eval: bag_of_words: {metrics.overall:.4f}")

    ckpt = cfg.root / "models" / f"{cfg.model.get('kind', 'malimo')}.ckpt"
    if ckpt.exists():
        vocab = json.loads((cfg.root / "models" / "vocab.json").read_text())
        model = models_mod.load_checkpoint(ckpt)
        test_examples = _load_examples(cfg, "test", vocab)
        preds = models_mod.predict(model, test_examples)
        metrics = evaluate_predictions([answers[i] for i in preds], test_q, answers)
        write_metrics(metrics, reports / f"metrics_{model.config.kind}.json")
        write_per_template_table(metrics,
                                 reports / f"per_template_{model.config.kind}.tsv")
        print(f"eval: {model.config.kind}: {metrics.overall:.4f}")
    return 0


def cmd_saliency(cfg: RunConfig, question_id: str | None) -> int:
    ckpt = _require(cfg.root / "models" / f"{cfg.model.get('kind', 'malimo')}.ckpt",
                    "train")
    vocab = json.loads(
        _require(cfg.root / "models" / "vocab.json", "train").read_text())
    model = models_mod.load_checkpoint(ckpt)
    examples = _load_examples(cfg, "test", vocab)
    if question_id is not None:
        examples = [e for e in examples if e.question_id == question_id]
        if not examples:
            print(f"error: question {question_id!r} not found in the test split",
                  file=sys.stderr)
            return 1
    example = examples[0]
    smap = models_mod.saliency(model, example)
    out = cfg.root / "reports" / f"saliency_{example.question_id}.f32"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(np.ascontiguousarray(smap, dtype="<f4").tobytes())
    out.with_suffix(".json").write_text(json.dumps(
        {"question_id": example.question_id, "clip_id": example.clip_id,
         "T": int(smap.shape[0]), "dims": int(smap.shape[1])}) + "\n")
    print(f"saliency: {example.question_id} -> {out}")
    return 0


# ---------------------------------------------------------------------------

def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="aqakit", description=__doc__)
    parser.add_argument("command", choices=[
        "gen-events", "gen-clips", "gen-questions", "verify", "stats",
        "features", "train", "eval", "saliency"])
    parser.add_argument("--config", default=None, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None,
                        help="override master_seed")
    parser.add_argument("--scale", type=int, default=None,
                        help="override model size divisor")
    parser.add_argument("--low-resource", action="store_true",
                        help="one training question per clip")
    parser.add_argument("--output-root", default=None)
    parser.add_argument("--question", default=None,
                        help="question id for the saliency command")
    args = parser.parse_args(argv)

    cfg = load_config(args.config, args)
    try:
        if args.command == "gen-events":
            return cmd_gen_events(cfg)
        if args.command == "gen-clips":
            return cmd_gen_clips(cfg)
        if args.command == "gen-questions":
            return cmd_gen_questions(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "stats":
            return cmd_stats(cfg)
        if args.command == "features":
            return cmd_features(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg)
        if args.command == "saliency":
            return cmd_saliency(cfg, args.question)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
