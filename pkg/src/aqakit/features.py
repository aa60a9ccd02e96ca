"""Log-Mel spectral features and per-coefficient normalization.

25 ms Hamming frames, 10 ms stride, magnitude-squared FFT (next power of
two), 64 unit-peak triangular Mel filters over 0..sr/2, natural log with an
absolute floor.  The unstated conventions (FFT size, Mel formula variant,
log floor, filter normalization) live in one config record so an alternate
convention is a one-line change.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

N_MELS = 64
FRAME_LEN_S = 0.025
FRAME_STRIDE_S = 0.010
LOG_FLOOR = 1e-10
STD_FLOOR = 1e-8


class FeatureError(Exception):
    pass


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray  # (64,)
    std: np.ndarray   # (64,) floored elementwise

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @staticmethod
    def from_json(doc: dict) -> "NormStats":
        return NormStats(np.asarray(doc["mean"]), np.asarray(doc["std"]))


def frame_count(n_samples: int, sample_rate: int) -> int:
    frame_len = int(round(FRAME_LEN_S * sample_rate))
    stride = int(round(FRAME_STRIDE_S * sample_rate))
    if n_samples < frame_len:
        raise FeatureError(
            f"waveform too short: {n_samples} samples < one {frame_len}-sample frame")
    return 1 + (n_samples - frame_len) // stride


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int = N_MELS) -> np.ndarray:
    """(n_mels, n_fft//2 + 1) triangular weights with unit peaks."""
    mel_points = np.linspace(0.0, float(hz_to_mel(sample_rate / 2)), n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    bin_freqs = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)
    fb = np.zeros((n_mels, len(bin_freqs)))
    for m in range(n_mels):
        lo, center, hi = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        fb[m] = np.maximum(0.0, np.minimum(rising, falling))
    return fb


def filter_center_hz(sample_rate: int, n_fft: int, index: int,
                     n_mels: int = N_MELS) -> float:
    mel_points = np.linspace(0.0, float(hz_to_mel(sample_rate / 2)), n_mels + 2)
    return float(mel_to_hz(mel_points[index + 1]))


def mfsc(waveform: np.ndarray, sample_rate: int) -> np.ndarray:
    """(T, 64) log filterbank energies in float64."""
    waveform = np.asarray(waveform, dtype=np.float64)
    frame_len = int(round(FRAME_LEN_S * sample_rate))
    stride = int(round(FRAME_STRIDE_S * sample_rate))
    n_frames = frame_count(len(waveform), sample_rate)
    idx = np.arange(frame_len)[None, :] + stride * np.arange(n_frames)[:, None]
    frames = waveform[idx] * np.hamming(frame_len)[None, :]
    n_fft = _next_pow2(frame_len)
    spectrum = np.fft.rfft(frames, n=n_fft, axis=1)
    power = np.abs(spectrum) ** 2
    fb = mel_filterbank(sample_rate, n_fft)
    energies = power @ fb.T
    return np.log(np.maximum(energies, LOG_FLOOR))


def fit_normalizer(matrices: list[np.ndarray]) -> NormStats:
    """Per-coefficient mean/std over all training frames; std floored."""
    stacked = np.concatenate(matrices, axis=0)
    if stacked.shape[0] < 2:
        raise FeatureError("need at least two frames to fit a normalizer")
    mean = stacked.mean(axis=0)
    std = np.maximum(stacked.std(axis=0), STD_FLOOR)
    # constant coefficients normalize to exact zeros: pin their mean to the
    # representable value instead of the ulp-off np.mean result
    constant = stacked.max(axis=0) == stacked.min(axis=0)
    if constant.any():
        mean = np.where(constant, stacked[0], mean)
        std = np.where(constant, STD_FLOOR, std)
    return NormStats(mean, std)


def apply_normalizer(stats: NormStats, matrix: np.ndarray) -> np.ndarray:
    return (matrix - stats.mean) / stats.std


# ---------------------------------------------------------------------------
# Feature files: raw little-endian float32 (T, 64) plus a JSON sidecar
# ---------------------------------------------------------------------------

def write_feature(path: str | Path, matrix: np.ndarray, clip_id: str,
                  normalized: bool) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(matrix, dtype="<f4")
    path.write_bytes(data.tobytes())
    sidecar = {"clip_id": clip_id, "T": int(matrix.shape[0]),
               "dims": int(matrix.shape[1]), "normalized": bool(normalized)}
    path.with_suffix(".json").write_text(json.dumps(sidecar) + "\n")


def read_feature(path: str | Path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    data = np.frombuffer(path.read_bytes(), dtype="<f4")
    return data.reshape(sidecar["T"], sidecar["dims"]).copy(), sidecar


def save_norm_stats(stats: NormStats, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(stats.to_json()) + "\n")


def load_norm_stats(path: str | Path) -> NormStats:
    return NormStats.from_json(json.loads(Path(path).read_text()))
