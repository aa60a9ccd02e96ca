"""Sound event taxonomy, synthetic event instances, and event libraries.

An event library is the pool of atomic sounds that audio scenes are spliced
from.  Two modes exist: Synthetic (every instance is procedurally generated
from a seed) and Manifest (instances point at mono 16-bit PCM WAV files on
disk).  Both produce the same immutable EventLibrary structure.
"""

from __future__ import annotations

import json
import wave
import zlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

DISCRETE = "discrete"
CONTINUOUS = "continuous"

#: Stevens-style exponent and reference level for the loudness proxy.
LOUDNESS_EXPONENT = 0.6
LOUDNESS_REFERENCE = 2e-5


class EventLibraryError(Exception):
    """Raised for malformed taxonomies, manifests, or unreadable audio."""


@dataclass(frozen=True)
class EventType:
    id: str
    source: str
    action: str
    continuity: str
    duration_range_s: tuple[float, float]

    @property
    def phrase(self) -> str:
        return f"{self.source} {self.action}"


@dataclass(frozen=True)
class EventInstance:
    type_id: str
    instance_index: int
    duration: float
    loudness: float
    synthesis_seed: int | None = None
    source_path: str | None = None


@dataclass
class EventLibrary:
    types: list[EventType]
    instances: list[EventInstance]
    sample_rate: int
    mode: str  # "synthetic" | "manifest"
    _waveforms: dict[tuple[str, int], np.ndarray] = field(default_factory=dict, repr=False)

    def type_by_id(self, type_id: str) -> EventType:
        return self._type_index()[type_id]

    def _type_index(self) -> dict[str, EventType]:
        if not hasattr(self, "_tidx"):
            object.__setattr__(self, "_tidx", {t.id: t for t in self.types})
        return self._tidx

    def waveform(self, instance: EventInstance) -> np.ndarray:
        """Samples in [-1, 1] for one instance; cached after first access."""
        key = (instance.type_id, instance.instance_index)
        if key not in self._waveforms:
            if instance.source_path is not None:
                self._waveforms[key] = read_wav(instance.source_path, self.sample_rate)
            else:
                self._waveforms[key] = synthesize_event(
                    self.type_by_id(instance.type_id),
                    instance.instance_index,
                    self.sample_rate,
                    instance.synthesis_seed,
                )
        return self._waveforms[key]


def load_taxonomy(path: str | Path | None = None) -> tuple[list[EventType], int]:
    """Read a taxonomy file; defaults to the packaged 20-type taxonomy."""
    if path is None:
        raw = resources.files("aqakit.data").joinpath("taxonomy.json").read_text()
    else:
        p = Path(path)
        if not p.exists():
            raise EventLibraryError(f"taxonomy file not found: {p}")
        raw = p.read_text()
    doc = json.loads(raw)
    types = []
    for entry in doc["types"]:
        lo, hi = entry["duration_range_s"]
        if not (0 < lo <= hi):
            raise EventLibraryError(f"bad duration range for {entry['id']}: {lo}..{hi}")
        if entry["continuity"] not in (DISCRETE, CONTINUOUS):
            raise EventLibraryError(f"bad continuity for {entry['id']}")
        types.append(EventType(entry["id"], entry["source"], entry["action"],
                               entry["continuity"], (float(lo), float(hi))))
    ids = [t.id for t in types]
    if len(set(ids)) != len(ids):
        raise EventLibraryError("duplicate type ids in taxonomy")
    pairs = [(t.source, t.action) for t in types]
    if len(set(pairs)) != len(pairs):
        raise EventLibraryError("duplicate (source, action) pairs in taxonomy")
    return types, int(doc.get("sample_rate", 16000))


def compute_loudness_proxy(waveform: np.ndarray, sample_rate: int) -> float:
    """Power-law-shaped RMS loudness: (rms / reference) ** 0.6.

    Strictly monotone in RMS, which is all downstream answer semantics need;
    an all-zero waveform maps to 0.
    """
    if len(waveform) == 0:
        raise EventLibraryError("empty waveform")
    rms = float(np.sqrt(np.mean(np.square(waveform, dtype=np.float64))))
    if rms == 0.0:
        return 0.0
    return (rms / LOUDNESS_REFERENCE) ** LOUDNESS_EXPONENT


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------

# Per-type spectral signature: band-limited noise bands (lo_hz, hi_hz, gain),
# tonal components (hz, gain, fm_dev_hz, fm_rate_hz), and an amplitude
# envelope.  Bands were chosen so that every pair of types has a visibly
# different band-energy profile.
_SIGNATURES: dict[str, dict] = {
    "a000": {"bands": [(50, 300, 1.0), (300, 900, 0.3)], "tones": [],
             "env": ("bump", {})},
    "b000": {"bands": [(700, 2000, 0.25)],
             "tones": [(110, 0.7, 0, 0), (220, 0.6, 0, 0), (330, 0.5, 0, 0),
                       (440, 0.4, 0, 0), (550, 0.3, 0, 0)],
             "env": ("steady", {})},
    "b001": {"bands": [(3300, 3900, 0.15)],
             "tones": [(3550, 1.0, 250, 7.0)],
             "env": ("bursts", {"rate": 3.0, "duty": 0.5})},
    "c000": {"bands": [(300, 3000, 1.0)], "tones": [],
             "env": ("bursts", {"rate": 1.5, "duty": 0.85})},
    "c001": {"bands": [(1500, 6500, 1.0)], "tones": [],
             "env": ("bursts", {"rate": 12.0, "duty": 0.7})},
    "c002": {"bands": [(150, 1200, 0.8), (1200, 5000, 0.6)], "tones": [],
             "env": ("bursts", {"rate": 2.5, "duty": 0.75})},
    "c003": {"bands": [], "tones": [(330, 0.9, 0, 0), (415, 0.8, 0, 0), (660, 0.3, 0, 0)],
             "env": ("gate", {"rate": 0.8, "duty": 0.65})},
    "c004": {"bands": [(60, 700, 1.0)], "tones": [(90, 0.2, 0, 0)],
             "env": ("bump", {})},
    "d000": {"bands": [(60, 2500, 1.0)], "tones": [],
             "env": ("decay", {"tau_frac": 0.18})},
    "d001": {"bands": [], "tones": [(1320, 0.8, 0, 0), (1760, 0.7, 0, 0)],
             "env": ("gate", {"rate": 0.9, "duty": 0.5, "ring": True})},
    "d002": {"bands": [(350, 900, 0.8)], "tones": [(520, 0.4, 30, 2.0)],
             "env": ("bursts", {"rate": 2.2, "duty": 0.3})},
    "f000": {"bands": [(400, 1200, 0.15)], "tones": [(750, 0.9, 150, 0.4)],
             "env": ("steady", {})},
    "f001": {"bands": [], "tones": [(3100, 0.9, 0, 0), (2400, 0.5, 0, 0),
                                    (6200, 0.25, 0, 0)],
             "env": ("gate", {"rate": 1.7, "duty": 0.55})},
    "h000": {"bands": [(100, 400, 0.9), (400, 2500, 0.7)],
             "tones": [(120, 0.3, 8, 3.0)],
             "env": ("bursts", {"rate": 4.0, "duty": 0.55})},
    "h001": {"bands": [(300, 2000, 0.6)], "tones": [(230, 0.5, 15, 4.5)],
             "env": ("bursts", {"rate": 4.5, "duty": 0.45})},
    "h002": {"bands": [(1000, 5500, 1.0)], "tones": [],
             "env": ("bursts", {"rate": 6.0, "duty": 0.1})},
    "h003": {"bands": [], "tones": [(1600, 0.9, 40, 5.0)],
             "env": ("steady", {})},
    "h004": {"bands": [(500, 1500, 0.2)],
             "tones": [(50, 0.5, 0, 0), (100, 0.45, 0, 0), (200, 0.35, 0, 0), (400, 0.2, 0, 0)],
             "env": ("steady", {})},
    "p000": {"bands": [], "tones": [(1000, 0.7, 60, 20.0), (1250, 0.5, 0, 0)],
             "env": ("gate", {"rate": 1.0, "duty": 0.4})},
    "t000": {"bands": [(20, 120, 1.0), (120, 400, 0.4)], "tones": [],
             "env": ("bursts", {"rate": 0.35, "duty": 0.55})},
}


def _smooth(env: np.ndarray, sample_rate: int, ms: float = 20.0) -> np.ndarray:
    n = max(3, int(sample_rate * ms / 1000.0) | 1)
    win = np.hanning(n)
    win /= win.sum()
    return np.convolve(env, win, mode="same")


def _envelope(kind: str, params: dict, n: int, sample_rate: int,
              rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / sample_rate
    dur = n / sample_rate
    if kind == "steady":
        env = np.ones(n)
        ramp = max(2, int(0.05 * n))
        env[:ramp] = np.linspace(0, 1, ramp)
        env[-ramp:] = np.linspace(1, 0, ramp)
        return env
    if kind == "decay":
        tau = params.get("tau_frac", 0.2) * dur
        attack = max(2, int(0.003 * sample_rate))
        env = np.exp(-t / tau)
        env[:attack] *= np.linspace(0, 1, attack)
        return env
    if kind == "bump":
        return np.sin(np.pi * np.arange(n) / max(1, n - 1)) ** 2
    if kind in ("bursts", "gate"):
        rate = params["rate"] * float(rng.uniform(0.85, 1.18))
        duty = params["duty"]
        phase = float(rng.uniform(0, 1)) if kind == "bursts" else 0.0
        cyc = (t * rate + phase) % 1.0
        env = (cyc < duty).astype(np.float64)
        if kind == "bursts":
            # jitter burst heights so repetitions are not carbon copies
            n_bursts = int(np.ceil(dur * rate)) + 2
            heights = rng.uniform(0.6, 1.0, size=n_bursts)
            env *= heights[np.minimum((t * rate + phase).astype(int), n_bursts - 1)]
        if params.get("ring"):
            env *= np.exp(-3.0 * cyc)
        env = _smooth(env, sample_rate)
        peak = env.max()
        return env / peak if peak > 0 else env
    raise ValueError(f"unknown envelope kind: {kind}")


def synthesize_event(event_type: EventType, instance_index: int,
                     sample_rate: int, seed: int) -> np.ndarray:
    """Render one synthetic instance; deterministic in all four arguments.

    Every type keeps a fixed spectral signature; the seed only jitters
    duration, gains, and envelope timing within the type's character.
    """
    if sample_rate < 8000:
        raise EventLibraryError(f"sample_rate must be >= 8000, got {sample_rate}")
    sig = _SIGNATURES[event_type.id]
    type_key = zlib.crc32(event_type.id.encode())
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((int(seed) & 0xFFFFFFFFFFFFFFFF, type_key, instance_index))))

    lo, hi = event_type.duration_range_s
    duration = float(rng.uniform(lo, hi))
    n = max(int(round(duration * sample_rate)), int(0.05 * sample_rate))
    t = np.arange(n) / sample_rate

    audio = np.zeros(n)
    if sig["bands"]:
        white = rng.standard_normal(n)
        spectrum = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
        weight = np.zeros_like(freqs)
        for blo, bhi, gain in sig["bands"]:
            jitter = float(rng.uniform(0.8, 1.25))
            weight += gain * jitter * ((freqs >= blo) & (freqs < min(bhi, sample_rate / 2)))
        shaped = np.fft.irfft(spectrum * weight, n)
        peak = np.abs(shaped).max()
        if peak > 0:
            audio += shaped / peak
    for hz, gain, fm_dev, fm_rate in sig["tones"]:
        if hz >= sample_rate / 2:
            continue
        gain = gain * float(rng.uniform(0.8, 1.25))
        phase0 = float(rng.uniform(0, 2 * np.pi))
        if fm_dev and fm_rate:
            phase = 2 * np.pi * hz * t - (fm_dev / fm_rate) * np.cos(2 * np.pi * fm_rate * t)
        else:
            phase = 2 * np.pi * hz * t
        audio += gain * np.sin(phase + phase0)

    env = _envelope(sig["env"][0], sig["env"][1], n, sample_rate, rng)
    audio = audio * env
    peak = np.abs(audio).max()
    target = float(rng.uniform(0.45, 0.95))
    if peak > 0:
        audio = audio * (target / peak)
    return audio


def build_synthetic_library(taxonomy: list[EventType] | None = None,
                            instances_per_type: int = 20,
                            sample_rate: int | None = 16000,
                            master_seed: int = 0) -> EventLibrary:
    """Synthesize a full library; bitwise reproducible for fixed inputs.

    sample_rate=None takes the rate declared by the (default) taxonomy file.
    """
    if instances_per_type < 1:
        raise EventLibraryError("instances_per_type must be >= 1")
    default_rate = None
    if taxonomy is None:
        taxonomy, default_rate = load_taxonomy()
    if sample_rate is None:
        sample_rate = default_rate or 16000
    instances = []
    waveforms = {}
    for etype in taxonomy:
        for idx in range(instances_per_type):
            wav = synthesize_event(etype, idx, sample_rate, master_seed)
            instances.append(EventInstance(
                type_id=etype.id,
                instance_index=idx,
                duration=len(wav) / sample_rate,
                loudness=compute_loudness_proxy(wav, sample_rate),
                synthesis_seed=int(master_seed),
            ))
            waveforms[(etype.id, idx)] = wav
    lib = EventLibrary(types=list(taxonomy), instances=instances,
                       sample_rate=sample_rate, mode="synthetic")
    lib._waveforms.update(waveforms)
    return lib


# ---------------------------------------------------------------------------
# WAV and manifest I/O
# ---------------------------------------------------------------------------

def write_wav(path: str | Path, waveform: np.ndarray, sample_rate: int) -> None:
    """Write mono 16-bit PCM."""
    data = np.clip(np.round(waveform * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(sample_rate)
        fh.writeframes(data.tobytes())


def read_wav(path: str | Path, expect_rate: int | None = None) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise EventLibraryError(f"audio file not found: {p}")
    try:
        with wave.open(str(p), "rb") as fh:
            if fh.getnchannels() != 1 or fh.getsampwidth() != 2:
                raise EventLibraryError(f"not mono 16-bit PCM: {p}")
            rate = fh.getframerate()
            frames = fh.readframes(fh.getnframes())
    except wave.Error as exc:
        raise EventLibraryError(f"unreadable audio {p}: {exc}") from exc
    if expect_rate is not None and rate != expect_rate:
        raise EventLibraryError(f"sample rate mismatch in {p}: {rate} != {expect_rate}")
    return np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32767.0


def wav_duration_s(path: str | Path) -> float:
    with wave.open(str(path), "rb") as fh:
        return fh.getnframes() / fh.getframerate()


def load_manifest(path: str | Path,
                  taxonomy: list[EventType] | None = None) -> EventLibrary:
    """Load a Manifest-mode library from a JSON manifest of WAV files.

    Durations come from audio headers; loudness from the proxy over samples.
    """
    p = Path(path)
    if not p.exists():
        raise EventLibraryError(f"manifest file not found: {p}")
    doc = json.loads(p.read_text())
    if taxonomy is None:
        taxonomy, _ = load_taxonomy()
    tindex = {t.id: t for t in taxonomy}
    entries = doc.get("entries", [])
    if not entries:
        raise EventLibraryError("no event types in manifest")
    sample_rate = int(doc["sample_rate"])

    instances = []
    waveforms = {}
    seen = set()
    referenced = set()
    for entry in entries:
        tid = entry["type_id"]
        if tid not in tindex:
            raise EventLibraryError(f"manifest references unknown type_id {tid!r}")
        idx = int(entry["instance_index"])
        if (tid, idx) in seen:
            raise EventLibraryError(f"duplicate instance ({tid}, {idx}) in manifest")
        seen.add((tid, idx))
        referenced.add(tid)
        src = p.parent / entry["source_path"]
        try:
            wav = read_wav(src, sample_rate)
        except EventLibraryError as exc:
            raise EventLibraryError(
                f"instance ({tid}, {idx}): {exc}") from exc
        if len(wav) == 0:
            raise EventLibraryError(f"instance ({tid}, {idx}): empty audio {src}")
        instances.append(EventInstance(
            type_id=tid, instance_index=idx,
            duration=len(wav) / sample_rate,
            loudness=compute_loudness_proxy(wav, sample_rate),
            source_path=str(src),
        ))
        waveforms[(tid, idx)] = wav
    if not referenced:
        raise EventLibraryError("no event types in manifest")

    lib = EventLibrary(types=[t for t in taxonomy if t.id in referenced],
                       instances=instances, sample_rate=sample_rate, mode="manifest")
    lib._waveforms.update(waveforms)
    return lib


def write_library_manifest(lib: EventLibrary, out_dir: str | Path) -> Path:
    """Materialize a library as WAV files plus a manifest JSON; returns the path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for inst in lib.instances:
        name = f"{inst.type_id}_{inst.instance_index:02d}.wav"
        write_wav(out / name, lib.waveform(inst), lib.sample_rate)
        entries.append({
            "type_id": inst.type_id,
            "instance_index": inst.instance_index,
            "source_path": name,
            "duration_s": inst.duration,
            "loudness": inst.loudness,
        })
    manifest = {"sample_rate": lib.sample_rate, "entries": entries}
    mpath = out / "library.json"
    mpath.write_text(json.dumps(manifest, indent=1) + "\n")
    return mpath
