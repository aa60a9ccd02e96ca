import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aqakit.features import (LOG_FLOOR, FeatureError, apply_normalizer,
                             filter_center_hz, fit_normalizer, frame_count,
                             load_norm_stats, mel_filterbank, mfsc, read_feature,
                             save_norm_stats, write_feature)


def test_frame_count_one_second_16k():
    # 1 + floor((16000 - 400) / 160)
    assert frame_count(16000, 16000) == 98


def test_frame_count_matches_mfsc_rows():
    rng = np.random.default_rng(0)
    for n in (400, 401, 700, 16000, 23456):
        wav = rng.standard_normal(n) * 0.1
        assert mfsc(wav, 16000).shape == (frame_count(n, 16000), 64)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(min_value=400, max_value=60_000))
def test_frame_count_formula_property(n):
    assert frame_count(n, 16000) == 1 + (n - 400) // 160


def test_frame_count_against_reference_pipeline():
    """Cross-check framing against scipy's spectrogram segmentation."""
    scipy_signal = pytest.importorskip("scipy.signal")
    rng = np.random.default_rng(9)
    for n in (400, 799, 800, 16000, 31415):
        wav = rng.standard_normal(n)
        _, t, _ = scipy_signal.spectrogram(
            wav, fs=16000, window=np.hamming(400), nperseg=400,
            noverlap=240, detrend=False)
        assert frame_count(n, 16000) == len(t)


def test_too_short_waveform_rejected():
    with pytest.raises(FeatureError, match="400"):
        mfsc(np.zeros(399), 16000)


def test_zero_signal_hits_log_floor():
    out = mfsc(np.zeros(16000), 16000)
    assert np.all(out == np.log(LOG_FLOOR))


def test_all_values_finite_on_real_audio(small_library):
    inst = small_library.instances[0]
    out = mfsc(small_library.waveform(inst), small_library.sample_rate)
    assert np.all(np.isfinite(out))


def test_filterbank_geometry():
    fb = mel_filterbank(16000, 512)
    assert fb.shape == (64, 257)
    assert np.all(fb >= 0)
    assert np.all(fb.sum(axis=1) > 0)
    assert np.all(fb.max(axis=1) <= 1.0 + 1e-12)
    # adjacent filters overlap: the falling edge of m crosses the rising edge
    for m in range(63):
        assert np.any((fb[m] > 0) & (fb[m + 1] > 0))


def test_sine_at_center_peaks_its_filter():
    rate = 16000
    for m in (10, 25, 40):
        hz = filter_center_hz(rate, 512, m)
        t = np.arange(rate) / rate
        wav = 0.5 * np.sin(2 * np.pi * hz * t)
        out = mfsc(wav, rate)
        interior = out[1:-1]
        assert np.all(interior.argmax(axis=1) == m)


def test_mfsc_deterministic():
    rng = np.random.default_rng(1)
    wav = rng.standard_normal(8000) * 0.2
    assert mfsc(wav, 16000).tobytes() == mfsc(wav, 16000).tobytes()


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def _matrices(seed=0, k=5):
    rng = np.random.default_rng(seed)
    return [rng.standard_normal((int(rng.integers(50, 150)), 64)) * 3 + 1
            for _ in range(k)]


def test_fit_apply_standardizes_training_set():
    mats = _matrices()
    stats = fit_normalizer(mats)
    stacked = np.concatenate([apply_normalizer(stats, m) for m in mats])
    assert np.abs(stacked.mean(axis=0)).max() <= 1e-5
    assert np.abs(stacked.std(axis=0) - 1).max() <= 1e-4


def test_apply_to_shifted_copy():
    mats = _matrices(seed=2)
    stats = fit_normalizer(mats)
    shifted = [m + 0.7 for m in mats]
    stacked = np.concatenate([apply_normalizer(stats, m) for m in shifted])
    expected = 0.7 / stats.std
    assert np.abs(stacked.mean(axis=0) - expected).max() < 1e-6


def test_constant_column_floored_not_exploding():
    m = np.ones((100, 64)) * 4.2
    stats = fit_normalizer([m])
    out = apply_normalizer(stats, m)
    assert np.all(np.isfinite(out))
    assert np.abs(out).max() == 0.0


def test_needs_two_frames():
    with pytest.raises(FeatureError):
        fit_normalizer([np.ones((1, 64))])


def test_norm_stats_round_trip(tmp_path):
    stats = fit_normalizer(_matrices(seed=3))
    save_norm_stats(stats, tmp_path / "norm.json")
    back = load_norm_stats(tmp_path / "norm.json")
    assert np.array_equal(back.mean, stats.mean)
    assert np.array_equal(back.std, stats.std)


def test_feature_file_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    mat = rng.standard_normal((37, 64)).astype(np.float32)
    write_feature(tmp_path / "c.f32", mat, "clip_c", normalized=True)
    back, sidecar = read_feature(tmp_path / "c.f32")
    assert np.array_equal(back, mat)
    assert sidecar == {"clip_id": "clip_c", "T": 37, "dims": 64,
                       "normalized": True}
    raw = (tmp_path / "c.f32").read_bytes()
    assert len(raw) == 37 * 64 * 4  # little-endian float32 payload
