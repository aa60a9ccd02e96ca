"""Non-neural baselines, logistic question-only models, and the metric suite."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import QuestionTemplate
from .neural import ops
from .neural.optim import AdamState, Hyperparams, adam_step
from .neural.tensor import Tensor
from .qlang import SKILLS
from .questions import QuestionInstance

BASELINE_KINDS = ("random", "mode", "random_per_template", "mode_per_template")


@dataclass
class Metrics:
    overall: float
    per_skill: dict[str, float]
    per_template: dict[str, float]
    confusion: np.ndarray  # (36, 36), rows gold, row-normalized
    n_questions: int

    def to_json(self) -> dict:
        return {
            "overall": self.overall,
            "per_skill": self.per_skill,
            "per_template": self.per_template,
            "confusion": self.confusion.tolist(),
            "n_questions": self.n_questions,
        }


class BaselinePredictor:
    """Training-set answer statistics driving the four trivial baselines."""

    def __init__(self, train_questions: list[QuestionInstance],
                 templates: list[QuestionTemplate], vocab: list[str], seed: int = 0):
        self.vocab = list(vocab)
        self.rng = np.random.default_rng(seed)
        counts = Counter(inst.answer for inst in train_questions)
        self.global_mode = counts.most_common(1)[0][0] if counts else vocab[0]
        self.template_mode: dict[str, str] = {}
        per_template: dict[str, Counter] = {}
        for inst in train_questions:
            per_template.setdefault(inst.template_id, Counter())[inst.answer] += 1
        for tid, c in per_template.items():
            self.template_mode[tid] = c.most_common(1)[0][0]
        self.support = {t.template_id: t.support for t in templates}

    def predict(self, kind: str, question: QuestionInstance) -> str:
        if kind == "random":
            return self.vocab[int(self.rng.integers(len(self.vocab)))]
        if kind == "mode":
            return self.global_mode
        if kind == "random_per_template":
            support = self.support.get(question.template_id)
            if not support:
                return self.vocab[int(self.rng.integers(len(self.vocab)))]
            return support[int(self.rng.integers(len(support)))]
        if kind == "mode_per_template":
            return self.template_mode.get(question.template_id, self.global_mode)
        raise ValueError(f"unknown baseline kind {kind!r}")

    def predict_all(self, kind: str, questions: list[QuestionInstance]) -> list[str]:
        return [self.predict(kind, inst) for inst in questions]


# ---------------------------------------------------------------------------
# Question-only logistic models
# ---------------------------------------------------------------------------

def template_onehot(questions: list[QuestionInstance],
                    template_index: dict[str, int]) -> np.ndarray:
    x = np.zeros((len(questions), len(template_index)), dtype=np.float32)
    for i, inst in enumerate(questions):
        j = template_index.get(inst.template_id)
        if j is not None:
            x[i, j] = 1.0
    return x


def bag_of_words(questions: list[QuestionInstance],
                 word_index: dict[str, int]) -> np.ndarray:
    x = np.zeros((len(questions), len(word_index)), dtype=np.float32)
    for i, inst in enumerate(questions):
        for w in inst.text_tokens:
            j = word_index.get(w)
            if j is not None:
                x[i, j] += 1.0
    return x


@dataclass
class LogisticModel:
    w: Tensor
    b: Tensor

    def predict(self, x: np.ndarray) -> np.ndarray:
        logits = x @ self.w.data.T + self.b.data
        return logits.argmax(axis=1)


def train_logistic(x: np.ndarray, labels: np.ndarray, n_classes: int,
                   hyper: Hyperparams | None = None, max_epochs: int = 4000,
                   tol: float = 1e-5, patience_epochs: int = 5,
                   seed: int = 0) -> LogisticModel:
    """Multinomial logistic regression by minibatch Adam.

    Stops when the epoch-mean loss moved by less than `tol` over the last
    `patience_epochs` epochs, or at the epoch cap.
    """
    hyper = hyper or Hyperparams(learning_rate=1e-2, weight_decay=1e-5,
                                 batch_size=40, epochs=max_epochs)
    rng = np.random.default_rng(seed)
    n, d = x.shape
    model = LogisticModel(
        w=Tensor(np.zeros((n_classes, d), dtype=np.float32), requires_grad=True),
        b=Tensor(np.zeros(n_classes, dtype=np.float32), requires_grad=True))
    state = AdamState()
    history: list[float] = []
    for epoch in range(max_epochs):
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, hyper.batch_size):
            idx = order[lo:lo + hyper.batch_size]
            model.w.zero_grad()
            model.b.zero_grad()
            logits = ops.linear(Tensor(x[idx]), model.w, model.b)
            loss = ops.softmax_cross_entropy(logits, labels[idx])
            loss.backward()
            adam_step([model.w, model.b], state, hyper)
            losses.append(float(loss.data))
        history.append(float(np.mean(losses)))
        if (len(history) > patience_epochs
                and abs(history[-1] - history[-1 - patience_epochs]) < tol):
            break
    return model


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def evaluate_predictions(predictions: list[str], gold: list[QuestionInstance],
                         vocab: list[str]) -> Metrics:
    if len(predictions) != len(gold):
        raise ValueError(f"{len(predictions)} predictions vs {len(gold)} questions")
    vidx = {a: i for i, a in enumerate(vocab)}
    confusion = np.zeros((len(vocab), len(vocab)))
    skill_hits: dict[str, list[int]] = {s: [] for s in SKILLS}
    template_hits: dict[str, list[int]] = {}
    hits = 0
    for pred, inst in zip(predictions, gold):
        ok = int(pred == inst.answer)
        hits += ok
        confusion[vidx[inst.answer], vidx[pred]] += 1
        skill_hits[inst.skill].append(ok)
        template_hits.setdefault(inst.template_id, []).append(ok)
    row_sums = confusion.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        confusion = np.where(row_sums > 0, confusion / row_sums, 0.0)
    per_skill = {s: float(np.mean(v)) if v else 0.0 for s, v in skill_hits.items()}
    per_template = {t: float(np.mean(v)) for t, v in sorted(template_hits.items())}
    return Metrics(overall=hits / max(1, len(gold)), per_skill=per_skill,
                   per_template=per_template, confusion=confusion,
                   n_questions=len(gold))


def write_metrics(metrics: Metrics, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(metrics.to_json()) + "\n")


def write_per_template_table(metrics: Metrics, path: str | Path) -> None:
    """Tab-separated template accuracy table (plot-ready)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["template_id\taccuracy"]
    lines += [f"{tid}\t{acc:.6f}" for tid, acc in metrics.per_template.items()]
    path.write_text("\n".join(lines) + "\n")
