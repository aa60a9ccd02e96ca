"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v`; the per-criterion summary is
printed at the end of the session (see pytest_terminal_summary in this file's
plugin hooks).
"""

import json
import time

import numpy as np
import pytest

from aqakit import cli, qlang
from aqakit.catalog import load_catalog
from aqakit.clips import MAX_OVERLAP_S, read_annotations, scan_annotation
from aqakit.evalkit import BaselinePredictor, evaluate_predictions
from aqakit.events import load_taxonomy
from aqakit.features import frame_count, mfsc, read_feature
from aqakit.models import ModelConfig, build_model, collate
from aqakit.neural import ops
from aqakit.neural.gradcheck import grad_check
from aqakit.neural.tensor import Tensor, no_grad
from aqakit.oracle import evaluate, verify_dataset
from aqakit.questions import BalanceState, read_questions

from reference_semantics import brute_answer, enumerate_asts, enumerate_worlds, \
    make_annotation

from conftest import ACCEPTANCE_RESULTS


def _record(name: str, ok: bool, detail: str = ""):
    ACCEPTANCE_RESULTS.append((name, ok, detail))
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" — {detail}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. Dataset invariants on the desk-scale run
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_1_dataset_invariants(desk_dir):
    cfg = desk_dir
    verify_exit = cli.cmd_verify(cfg)
    types, _ = load_taxonomy()
    continuity = {t.id: t.continuity for t in types}
    problems = []
    annotations = {}
    for split in ("train", "validation", "test"):
        anns = read_annotations(cfg.root / "annotations" / f"{split}.jsonl")
        annotations[split] = anns
        noisy = 0
        for ann in anns:
            n = len(ann.occurrences)
            if not 5 <= n <= 12:
                problems.append(f"{ann.clip_id}: {n} events")
            problems.extend(scan_annotation(ann, continuity=continuity))
            noisy += ann.has_noise
            for a, b in zip(ann.occurrences, ann.occurrences[1:]):
                if b.start < a.end - MAX_OVERLAP_S - 1e-9:
                    problems.append(f"{ann.clip_id}: overlap too large")
        if noisy != len(anns) // 2:
            problems.append(f"{split}: noisy={noisy}")

    key = lambda a: tuple((o.type_id, o.instance_index) for o in a.occurrences)
    train_keys = {key(a) for a in annotations["train"]}
    dupes = sum(key(a) in train_keys
                for s in ("validation", "test") for a in annotations[s])
    total_q = 0
    mismatches = 0
    for split in ("train", "validation", "test"):
        report = verify_dataset(cfg.root / "questions" / f"{split}.jsonl",
                                cfg.root / "annotations" / f"{split}.jsonl")
        total_q += report["total"]
        mismatches += len(report["mismatches"])
    ok = (verify_exit == 0 and not problems and dupes == 0 and mismatches == 0
          and total_q > 0)
    _record("1 dataset invariants", ok,
            f"verify exit {verify_exit}, {len(problems)} scan problems, "
            f"{dupes} dupes, {mismatches}/{total_q} oracle mismatches")


# ---------------------------------------------------------------------------
# 2. Balance gap rescanned from emitted files
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_2_balance(desk_dir):
    cfg = desk_dir
    templates = load_catalog()
    warmup = cfg.balance["warmup"]
    worst = 0.0
    violations = []
    for split in ("train", "validation", "test"):
        state = BalanceState(templates, warmup=warmup)
        for inst in read_questions(cfg.root / "questions" / f"{split}.jsonl"):
            state.hist[inst.template_id][inst.answer] += 1
        for tpl in templates:
            total = sum(state.hist[tpl.template_id].values())
            if total >= warmup:
                gap = state.gap(tpl.template_id)
                worst = max(worst, gap)
                if gap > 0.05 + 1e-12:
                    violations.append((split, tpl.template_id, gap))
    _record("2 balance", not violations,
            f"worst past-warm-up gap {worst:.4f}" if worst else
            "no template past warm-up at desk scale")


# ---------------------------------------------------------------------------
# 3. Answer vocabulary
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_3_answer_vocabulary(desk_dir):
    cfg = desk_dir
    types, _ = load_taxonomy()
    vocab = qlang.answer_vocab(types)
    members = set(vocab)
    outside = 0
    total = 0
    for split in ("train", "validation", "test"):
        for inst in read_questions(cfg.root / "questions" / f"{split}.jsonl"):
            total += 1
            outside += inst.answer not in members
    _record("3 answer vocabulary", len(vocab) == 36 and outside == 0,
            f"|vocab|={len(vocab)}, {outside}/{total} answers outside")


# ---------------------------------------------------------------------------
# 4. Oracle equivalence with the brute-force reference
# ---------------------------------------------------------------------------

def test_criterion_4_small_world_equivalence():
    types, _ = load_taxonomy()
    three = ("d000", "c000", "p000")
    phrases = {t.id: t.phrase for t in types}
    t0 = time.time()
    worlds = enumerate_worlds(three, per_sequence_worlds=16)
    asts = enumerate_asts(three)
    disagreements = 0
    checked = 0
    for ann in worlds:
        for ast in asts:
            mine = evaluate(ast, ann, phrases)
            ref = brute_answer(ast, ann, phrases)
            mine_cmp = None if mine is qlang.INVALID else mine
            if mine_cmp != ref:
                disagreements += 1
            checked += 1
    elapsed = time.time() - t0
    _record("4 oracle small-world equivalence",
            disagreements == 0 and elapsed < 300,
            f"{checked} evaluations over {len(worlds)} worlds x {len(asts)} "
            f"ASTs, {disagreements} disagreements, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 5. Monotone loudness invariance
# ---------------------------------------------------------------------------

def test_criterion_5_monotone_invariance():
    types, _ = load_taxonomy()
    phrases = {t.id: t.phrase for t in types}
    ids = [t.id for t in types]
    rng = np.random.default_rng(2026)
    loud_asts = [
        lambda: qlang.QueryType(qlang.SuperlativeSel("loudness",
                                                     rng.choice(["max", "min"]))),
        lambda: qlang.CountSet(qlang.AttrFiltered(
            "loudness", rng.choice(["greater", "less"]),
            qlang.ByOrdinal(int(rng.integers(1, 4))))),
        lambda: qlang.CompareAttr(qlang.ByOrdinal(1), qlang.ByOrdinal("last"),
                                  "loudness", rng.choice(["greater", "less"])),
        lambda: qlang.Exist(qlang.AttrFiltered(
            "loudness", rng.choice(["greater", "less"]), qlang.ByOrdinal(2))),
    ]
    mismatched = 0
    for _ in range(1000):
        n = int(rng.integers(3, 13))
        louds = rng.uniform(0.5, 5.0, size=n)
        while np.min(np.diff(np.sort(louds))) < 1e-3:
            louds = rng.uniform(0.5, 5.0, size=n)
        durs = rng.uniform(0.5, 4.0, size=n).tolist()
        tids = [ids[int(i)] for i in rng.integers(len(ids), size=n)]
        ann = make_annotation(tids, durs, louds.tolist())
        a = rng.uniform(0.5, 3.0)
        p = rng.choice([0.5, 1.0, 2.0, 3.0])
        b = rng.uniform(0.0, 10.0)
        transformed = make_annotation(tids, durs, (a * louds ** p + b).tolist())
        ast = loud_asts[int(rng.integers(len(loud_asts)))]()
        if evaluate(ast, ann, phrases) != evaluate(ast, transformed, phrases):
            mismatched += 1
    _record("5 monotone invariance", mismatched == 0,
            f"{mismatched}/1000 answers changed under monotone transforms")


# ---------------------------------------------------------------------------
# 6. Feature pipeline
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_6_features(desk_dir):
    cfg = desk_dir
    rng = np.random.default_rng(3)
    formula_ok = True
    for _ in range(100):
        n = int(rng.integers(400, 200_000))
        formula_ok &= frame_count(n, 16000) == 1 + (n - 400) // 160
    floor_ok = bool(np.all(mfsc(np.zeros(16000), 16000) == np.log(1e-10)))

    columns = []
    for f in sorted((cfg.root / "features" / "train").glob("*.f32")):
        mat, _ = read_feature(f)
        columns.append(mat.astype(np.float64))
    stacked = np.concatenate(columns)
    mean_off = np.abs(stacked.mean(axis=0)).max()
    std_off = np.abs(stacked.std(axis=0) - 1.0).max()
    ok = formula_ok and floor_ok and mean_off <= 1e-5 and std_off <= 1e-4
    _record("6 feature pipeline", ok,
            f"formula {formula_ok}, floor {floor_ok}, "
            f"|mean|max {mean_off:.2e}, |std-1|max {std_off:.2e}")


# ---------------------------------------------------------------------------
# 7. Gradient checks
# ---------------------------------------------------------------------------

def _op_checks(rng):
    checks = {}

    def weighted(build, tensors, name, max_coords=80, eps=1e-5):
        w = {}

        def loss():
            out = build()
            if out.data.shape not in w:
                w[out.data.shape] = rng.standard_normal(out.data.shape)
            prod = ops.mul(out, Tensor(w[out.data.shape]))
            flat = ops.reshape(prod, (1, prod.data.size))
            return ops.reshape(ops.linear(flat, Tensor(np.ones((1, prod.data.size)))),
                               (1,))

        checks[name] = grad_check(loss, tensors, eps=eps, max_coords=max_coords)

    x = Tensor(rng.standard_normal((2, 3, 7, 9)), requires_grad=True)
    w_ = Tensor(rng.standard_normal((4, 3, 3, 3)) * 0.4, requires_grad=True)
    b_ = Tensor(rng.standard_normal(4) * 0.1, requires_grad=True)
    weighted(lambda: ops.conv2d(x, w_, b_, (1, 2), (1, 1)), [x, w_, b_], "conv2d")
    xp = Tensor(rng.standard_normal((2, 3, 6, 8)), requires_grad=True)
    weighted(lambda: ops.maxpool2d(xp), [xp], "maxpool2d")
    weighted(lambda: ops.avgpool2d(xp, (2, 4), (2, 2)), [xp], "avgpool2d")
    mask = np.array([[1] * 5 + [0] * 3, [1] * 8])
    weighted(lambda: ops.global_avg_pool(xp, mask), [xp], "global_avg_pool")
    bn = ops.BatchNorm2d(3, affine=True, dtype=np.float64)
    weighted(lambda: bn(xp, training=True), [xp] + bn.parameters(), "batchnorm2d")
    xl = Tensor(rng.standard_normal((3, 5)) + 0.2, requires_grad=True)
    wl = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
    bl = Tensor(rng.standard_normal(4), requires_grad=True)
    weighted(lambda: ops.linear(xl, wl, bl), [xl, wl, bl], "linear")
    xr = Tensor(xl.data + 0.31, requires_grad=True)  # clear of the relu kink
    weighted(lambda: ops.relu(xr), [xr], "relu")
    table = Tensor(rng.standard_normal((9, 4)), requires_grad=True)
    idx = rng.integers(0, 9, size=(2, 5))
    weighted(lambda: ops.embedding(table, idx), [table], "embedding_lookup")
    lstm = ops.LSTM(3, 5, 2, rng, dtype=np.float64)
    steps = [rng.standard_normal((2, 3)) for _ in range(4)]
    weighted(lambda: lstm([Tensor(s) for s in steps]), lstm.parameters(),
             "lstm", max_coords=30)
    xf = Tensor(rng.standard_normal((2, 4, 3, 5)), requires_grad=True)
    gf = Tensor(rng.standard_normal((2, 4)), requires_grad=True)
    bf = Tensor(rng.standard_normal((2, 4)), requires_grad=True)
    weighted(lambda: ops.film(xf, gf, bf), [xf, gf, bf], "film_modulate")
    logits = Tensor(rng.standard_normal((5, 36)), requires_grad=True)
    labels = rng.integers(0, 36, size=5)
    checks["softmax_cross_entropy"] = grad_check(
        lambda: ops.softmax_cross_entropy(logits, labels), [logits])
    return checks


def _block_checks(rng):
    from aqakit.models import FilmLayer

    checks = {}
    for name, n_layers in (("film residual block", 1), ("malimo block", 2)):
        layers = [FilmLayer(np.random.default_rng(7 + i), 5, np.float64)
                  for i in range(n_layers)]
        x = Tensor(rng.standard_normal((2, 5, 4, 8)) * 0.7, requires_grad=True)
        mods = [(Tensor(rng.standard_normal((2, 5)) * 0.3 + 1.0, requires_grad=True),
                 Tensor(rng.standard_normal((2, 5)) * 0.3, requires_grad=True))
                for _ in range(n_layers)]
        params = [x]
        for layer, (g, b) in zip(layers, mods):
            params += [g, b] + layer.parameters()
        w = rng.standard_normal((2, 5, 4, 8))

        def loss():
            h = x
            for layer, (g, b) in zip(layers, mods):
                h = layer(h, g, b, training=True, bypass=False)
            prod = ops.mul(h, Tensor(w))
            flat = ops.reshape(prod, (1, prod.data.size))
            return ops.reshape(
                ops.linear(flat, Tensor(np.ones((1, prod.data.size)))), (1,))

        checks[name] = grad_check(loss, params, eps=1e-6, max_coords=40)
    return checks


def _e2e_checks():
    """End-to-end checks verify d(loss)/d(every parameter).

    The loss is scaled by 1e-3 before differencing: finite differences on a
    ~3.6-magnitude loss are quantized at ~4e-10/eps, which swamps the 1e-8
    denominator floor for coordinates whose true gradient is tiny.  Scaling
    the objective leaves every meaningful relative error unchanged while
    keeping the floor negligible, and eps stays at 1e-6 so perturbations
    cannot push activations across ReLU or pooling-argmax boundaries.
    """
    from aqakit.models import Example

    checks = {}
    for kind, t_len in (("film", 200), ("malimo", 579)):
        rng = np.random.default_rng(31)
        model = build_model(ModelConfig(kind=kind, vocab_size=12,
                                        modulated_units=1, scale=8),
                            seed=17, dtype=np.float64)
        examples = [Example(f"c{i}", f"c{i}_q0",
                            rng.standard_normal((t_len, 64)).astype(np.float32) * 0.5,
                            list(rng.integers(2, 12, size=6)), int(rng.integers(36)))
                    for i in range(2)]
        batch = collate(examples)

        def loss():
            logits = model.forward(batch, training=True)
            return ops.scale(ops.softmax_cross_entropy(logits, batch.labels), 1e-3)

        checks[f"{kind} end-to-end"] = grad_check(
            loss, model.parameters(), eps=1e-6, max_coords=12, seed=3)
    return checks


def test_criterion_7_gradient_checks():
    rng = np.random.default_rng(11)
    op_errs = _op_checks(rng)
    block_errs = _block_checks(rng)
    e2e_errs = _e2e_checks()
    bad_ops = {k: v for k, v in {**op_errs, **block_errs}.items() if v > 1e-4}
    bad_e2e = {k: v for k, v in e2e_errs.items() if v > 1e-3}
    worst_op = max({**op_errs, **block_errs}.values())
    worst_e2e = max(e2e_errs.values())
    _record("7 gradient checks", not bad_ops and not bad_e2e,
            f"worst op/block {worst_op:.2e} (<=1e-4), "
            f"worst end-to-end {worst_e2e:.2e} (<=1e-3)")


# ---------------------------------------------------------------------------
# 8. Modulation identity
# ---------------------------------------------------------------------------

def test_criterion_8_modulation_identity():
    from aqakit.models import Example

    rng = np.random.default_rng(5)
    examples = [Example(f"c{i}", f"c{i}_q0",
                        rng.standard_normal((260, 64)).astype(np.float32),
                        list(rng.integers(2, 20, size=7)), 0) for i in range(3)]
    batch = collate(examples)
    ok = True
    for kind in ("film", "malimo"):
        model = build_model(ModelConfig(kind=kind, vocab_size=20,
                                        modulated_units=2 if kind == "film" else 1,
                                        scale=8), seed=23)
        n, ch = 3, model.config.dim(128)
        override = [(Tensor(np.ones((n, ch), np.float32)),
                     Tensor(np.zeros((n, ch), np.float32)))
                    for _ in range(model.n_film_layers)]
        with no_grad():
            bypassed = model.forward(batch, bypass_modulation=True)
            forced = model.forward(batch, modulation_override=override)
        ok &= bypassed.data.tobytes() == forced.data.tobytes()
    _record("8 modulation identity", ok, "bitwise for film and malimo")


# ---------------------------------------------------------------------------
# 9. Parameter-count structure
# ---------------------------------------------------------------------------

def test_criterion_9_parameter_counts():
    fcn = build_model(ModelConfig(kind="fcn", scale=1)).count_parameters()
    fcn_err = abs(fcn - 7.65e6) / 7.65e6
    details = [f"fcn {fcn / 1e6:.3f}M ({fcn_err * 100:.2f}% from 7.65M)"]
    ok = fcn_err <= 0.02
    for scale in (1, 4):
        film = [build_model(ModelConfig(kind="film", vocab_size=90,
                                        modulated_units=k, scale=scale)
                            ).count_parameters() for k in range(2, 13, 2)]
        film_deltas = {b - a for a, b in zip(film, film[1:])}
        mal = [build_model(ModelConfig(kind="malimo", vocab_size=90,
                                       modulated_units=k, scale=scale)
                           ).count_parameters() for k in range(1, 7)]
        mal_deltas = {b - a for a, b in zip(mal, mal[1:])}
        ok &= len(film_deltas) == 1 and len(mal_deltas) == 1
        ok &= film_deltas == mal_deltas
        if scale == 1:
            delta = next(iter(film_deltas))
            details.append(f"uniform delta {delta / 1e6:.3f}M at scale 1")
            ok &= abs(delta - 0.86e6) / 0.86e6 < 0.01
    _record("9 parameter-count structure", ok, "; ".join(details))


# ---------------------------------------------------------------------------
# 10. Learning capacity on the micro-dataset
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_10_capacity(micro_run):
    acc = micro_run["final_train_acc"]
    epochs = micro_run["epochs_run"]
    wall = micro_run["wall_seconds"]
    templates = micro_run["templates"]
    answers = micro_run["answers"]
    train_q = micro_run["train_questions"]
    test_q = micro_run["questions"]["test"]

    predictor = BaselinePredictor(train_q, templates, answers, seed=0)
    mode_preds = predictor.predict_all("mode", test_q)
    mode_acc = evaluate_predictions(mode_preds, test_q, answers).overall
    modal_freq = np.mean([inst.answer == predictor.global_mode for inst in test_q])
    pt_acc = evaluate_predictions(
        predictor.predict_all("mode_per_template", test_q), test_q,
        answers).overall
    ok = (acc >= 0.95 and epochs <= 200 and wall <= 900
          and mode_acc == pytest.approx(float(modal_freq))
          and pt_acc >= mode_acc)
    _record("10 learning capacity", ok,
            f"train acc {acc:.3f} in {epochs} epochs / {wall:.0f}s; "
            f"mode {mode_acc:.3f} == modal test freq {modal_freq:.3f}; "
            f"mode-per-template {pt_acc:.3f} >= mode")


# ---------------------------------------------------------------------------
# 11. Random baseline near 1/36
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_11_random_baseline(desk_dir):
    cfg = desk_dir
    templates = load_catalog()
    types, _ = load_taxonomy()
    answers = qlang.answer_vocab(types)
    train_q = read_questions(cfg.root / "questions" / "train.jsonl")
    test_q = read_questions(cfg.root / "questions" / "test.jsonl")
    predictor = BaselinePredictor(train_q, templates, answers,
                                  seed=cfg.master_seed)
    acc = evaluate_predictions(predictor.predict_all("random", test_q),
                               test_q, answers).overall
    p = 1 / 36
    sigma = np.sqrt(p * (1 - p) / len(test_q))
    ok = abs(acc - p) <= 3 * sigma
    _record("11 random baseline", ok,
            f"acc {acc:.4f} vs 1/36 ({p:.4f}) +- {3 * sigma:.4f} "
            f"(n={len(test_q)})")


# ---------------------------------------------------------------------------
# 12. Pipeline determinism
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_12_determinism(tmp_path):
    """Full pipeline twice at a reduced clip count; annotation, question,
    feature, and metrics files must match byte for byte."""
    digests = []
    for run in ("a", "b"):
        root = tmp_path / run
        cfg_path = tmp_path / f"cfg_{run}.json"
        cfg_path.write_text(json.dumps({
            "output_root": str(root),
            "instances_per_type": 3,
            "master_seed": 41,
            "counts": {"train": 20, "validation": 5, "test": 5},
        }))
        ns = type("NS", (), {"seed": None, "scale": None, "low_resource": False,
                             "output_root": None})()
        cfg = cli.load_config(str(cfg_path), ns)
        assert cli.cmd_gen_events(cfg) == 0
        assert cli.cmd_gen_clips(cfg) == 0
        assert cli.cmd_gen_questions(cfg) == 0
        assert cli.cmd_features(cfg) == 0
        assert cli.cmd_eval(cfg) == 0
        files = {}
        for pattern in ("annotations/*.jsonl", "questions/*.jsonl",
                        "features/*/*.f32", "features/norm_stats.json",
                        "reports/metrics_*.json"):
            for f in sorted(root.glob(pattern)):
                files[str(f.relative_to(root))] = f.read_bytes()
        digests.append(files)
    same_names = set(digests[0]) == set(digests[1])
    diffs = [k for k in digests[0] if digests[0][k] != digests[1].get(k)]
    _record("12 determinism", same_names and not diffs,
            f"{len(digests[0])} files compared, {len(diffs)} differ")
