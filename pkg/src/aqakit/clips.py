"""Audio scene composition: event sequences, splicing, noise, and splits.

A scene is 5-12 events in a row.  Successive events may overlap by up to
500 ms, adjacent continuous events of the same type are rejected during
sampling, and half of each split's clips get Gaussian background noise.
All randomness flows from per-clip seeds derived from (master_seed, split,
clip index), so generation is a pure function of its configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import DISCRETE, EventInstance, EventLibrary, write_wav

MIN_EVENTS = 5
MAX_EVENTS = 12
MAX_OVERLAP_S = 0.5
DEFAULT_SNR_DB = 30.0
SPLITS = ("train", "validation", "test")


class ClipGenerationError(Exception):
    pass


@dataclass(frozen=True)
class EventOccurrence:
    type_id: str
    instance_index: int
    start: float
    end: float
    loudness: float
    ordinal: int  # 1-based position by start time

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class ClipAnnotation:
    clip_id: str
    occurrences: tuple[EventOccurrence, ...]
    has_noise: bool
    total_duration: float

    def to_json(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "has_noise": self.has_noise,
            "total_duration_s": self.total_duration,
            "events": [
                {"type_id": o.type_id, "instance_index": o.instance_index,
                 "start_s": o.start, "end_s": o.end,
                 "loudness": o.loudness, "ordinal": o.ordinal}
                for o in self.occurrences
            ],
        }

    @staticmethod
    def from_json(doc: dict) -> "ClipAnnotation":
        occs = tuple(
            EventOccurrence(e["type_id"], e["instance_index"], e["start_s"],
                            e["end_s"], e["loudness"], e["ordinal"])
            for e in doc["events"]
        )
        return ClipAnnotation(doc["clip_id"], occs, doc["has_noise"],
                              doc["total_duration_s"])


@dataclass(frozen=True)
class ClipPlan:
    """Everything needed to render a clip deterministically."""
    clip_id: str
    sequence: tuple[EventInstance, ...]
    overlaps: tuple[int, ...]  # samples taken back at each of the n-1 joins
    has_noise: bool
    noise_seed: tuple[int, ...]
    snr_db: float


def sample_event_sequence(library: EventLibrary,
                          rng: np.random.Generator) -> list[EventInstance]:
    """Draw 5-12 instances, resampling any draw that would put two
    continuous events of the same type next to each other."""
    if not library.instances:
        raise ClipGenerationError("empty event library")
    length = int(rng.integers(MIN_EVENTS, MAX_EVENTS + 1))
    seq: list[EventInstance] = []
    while len(seq) < length:
        pick = library.instances[int(rng.integers(len(library.instances)))]
        if seq:
            prev = seq[-1]
            if (pick.type_id == prev.type_id
                    and library.type_by_id(pick.type_id).continuity != DISCRETE):
                continue  # reject the offending draw only
        seq.append(pick)
    return seq


def plan_clip(clip_id: str, library: EventLibrary, rng: np.random.Generator,
              noise: bool, snr_db: float = DEFAULT_SNR_DB) -> ClipPlan:
    seq = sample_event_sequence(library, rng)
    sr = library.sample_rate
    max_over = int(MAX_OVERLAP_S * sr)
    overlaps = []
    for prev in seq[:-1]:
        # overlap is quantized to the sample grid and may never swallow the
        # whole previous event, which keeps start times strictly increasing
        prev_n = int(round(prev.duration * sr))
        overlaps.append(int(rng.integers(0, min(max_over, prev_n - 1) + 1)))
    noise_seed = tuple(int(v) for v in rng.integers(0, 2**31, size=4))
    return ClipPlan(clip_id, tuple(seq), tuple(overlaps), noise, noise_seed, snr_db)


def annotation_from_plan(plan: ClipPlan, library: EventLibrary) -> ClipAnnotation:
    """Annotation arithmetic only; no waveforms touched."""
    sr = library.sample_rate
    start_n = 0
    occs = []
    for i, inst in enumerate(plan.sequence):
        n = int(round(inst.duration * sr))
        occs.append(EventOccurrence(
            type_id=inst.type_id, instance_index=inst.instance_index,
            start=start_n / sr, end=(start_n + n) / sr,
            loudness=inst.loudness, ordinal=i + 1))
        if i < len(plan.sequence) - 1:
            start_n = start_n + n - plan.overlaps[i]
    total = max(o.end for o in occs)
    return ClipAnnotation(plan.clip_id, tuple(occs), plan.has_noise, total)


def render_clip(plan: ClipPlan, library: EventLibrary) -> tuple[np.ndarray, ClipAnnotation]:
    """Mix the planned events into one waveform plus its annotation."""
    if not plan.sequence:
        raise ClipGenerationError("cannot render an empty sequence")
    ann = annotation_from_plan(plan, library)
    sr = library.sample_rate
    total_n = int(round(ann.total_duration * sr))
    mix = np.zeros(total_n)
    for occ, inst in zip(ann.occurrences, plan.sequence):
        wav = library.waveform(inst)
        s = int(round(occ.start * sr))
        mix[s:s + len(wav)] += wav
    if plan.has_noise:
        rms = float(np.sqrt(np.mean(np.square(mix))))
        sigma = rms / (10.0 ** (plan.snr_db / 20.0))
        noise_rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(plan.noise_seed)))
        mix = mix + sigma * noise_rng.standard_normal(total_n)
    peak = float(np.abs(mix).max())
    if peak > 0.999:
        mix = mix * (0.999 / peak)
    return mix, ann


def _clip_rng(master_seed: int, split: str, index: int, attempt: int) -> np.random.Generator:
    sidx = SPLITS.index(split)
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((int(master_seed), sidx, index, attempt))))


def sequence_key(plan: ClipPlan) -> tuple:
    return tuple((i.type_id, i.instance_index) for i in plan.sequence)


def plan_split(library: EventLibrary, split: str, n_clips: int, master_seed: int,
               forbidden: set | None = None, retry_budget: int = 100,
               snr_db: float = DEFAULT_SNR_DB) -> list[ClipPlan]:
    """Plan one split.  Clips whose instance-id sequence appears in
    `forbidden` (the training split's keys) are resampled."""
    if n_clips < 1:
        raise ClipGenerationError("split sizes must be >= 1")
    plans = []
    for i in range(n_clips):
        has_noise = (i % 2) == 1  # exactly floor(n/2) noisy clips per split
        clip_id = f"{split}_{i:05d}"
        for attempt in range(retry_budget):
            rng = _clip_rng(master_seed, split, i, attempt)
            plan = plan_clip(clip_id, library, rng, has_noise, snr_db)
            if forbidden is None or sequence_key(plan) not in forbidden:
                break
        else:
            raise ClipGenerationError(
                f"dedup retry budget exhausted for {split} clip {i}")
        plans.append(plan)
    return plans


def generate_split_plans(library: EventLibrary, n_train: int, n_val: int,
                         n_test: int, master_seed: int,
                         snr_db: float = DEFAULT_SNR_DB) -> dict[str, list[ClipPlan]]:
    train = plan_split(library, "train", n_train, master_seed, snr_db=snr_db)
    train_keys = {sequence_key(p) for p in train}
    val = plan_split(library, "validation", n_val, master_seed, train_keys, snr_db=snr_db)
    test = plan_split(library, "test", n_test, master_seed, train_keys, snr_db=snr_db)
    return {"train": train, "validation": val, "test": test}


def write_annotations(annotations: list[ClipAnnotation], path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for ann in annotations:
            fh.write(json.dumps(ann.to_json()) + "\n")


def read_annotations(path: str | Path) -> list[ClipAnnotation]:
    anns = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                anns.append(ClipAnnotation.from_json(json.loads(line)))
    return anns


def render_split_to_dir(plans: list[ClipPlan], library: EventLibrary,
                        wav_dir: str | Path) -> list[ClipAnnotation]:
    out = Path(wav_dir)
    out.mkdir(parents=True, exist_ok=True)
    annotations = []
    for plan in plans:
        wav, ann = render_clip(plan, library)
        write_wav(out / f"{plan.clip_id}.wav", wav, library.sample_rate)
        annotations.append(ann)
    return annotations


# ---------------------------------------------------------------------------
# Invariant scanners (reused by the CLI verify stage)
# ---------------------------------------------------------------------------

def scan_annotation(ann: ClipAnnotation, library: EventLibrary | None = None,
                    continuity: dict[str, str] | None = None) -> list[str]:
    """Return human-readable violations for one annotation (empty = clean)."""
    problems = []
    n = len(ann.occurrences)
    if not (MIN_EVENTS <= n <= MAX_EVENTS):
        problems.append(f"{ann.clip_id}: {n} events outside [{MIN_EVENTS}, {MAX_EVENTS}]")
    if continuity is None and library is not None:
        continuity = {t.id: t.continuity for t in library.types}
    eps = 1e-9
    for a, b in zip(ann.occurrences, ann.occurrences[1:]):
        if continuity is not None and a.type_id == b.type_id:
            if continuity.get(a.type_id) != DISCRETE:
                problems.append(f"{ann.clip_id}: adjacent continuous {a.type_id}")
        if b.start < a.end - MAX_OVERLAP_S - eps:
            problems.append(f"{ann.clip_id}: overlap > {MAX_OVERLAP_S}s at ordinal {b.ordinal}")
        if b.start <= a.start:
            problems.append(f"{ann.clip_id}: starts not strictly increasing at {b.ordinal}")
    for i, occ in enumerate(ann.occurrences):
        if occ.ordinal != i + 1:
            problems.append(f"{ann.clip_id}: bad ordinal at position {i}")
        if occ.end <= occ.start:
            problems.append(f"{ann.clip_id}: non-positive duration at {occ.ordinal}")
        if not (occ.loudness > 0 and np.isfinite(occ.loudness)):
            problems.append(f"{ann.clip_id}: bad loudness at {occ.ordinal}")
    if abs(ann.total_duration - max(o.end for o in ann.occurrences)) > eps:
        problems.append(f"{ann.clip_id}: total_duration != max end")
    return problems
