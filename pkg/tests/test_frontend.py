import math

import numpy as np
import pytest

from kwskit import frontend
from kwskit.corpus import WaveformBuffer


def test_mel_scale_anchor_points():
    assert frontend.hz_to_mel(0.0) == 0.0
    # closed form: 2595 * log10(2)
    assert math.isclose(float(frontend.hz_to_mel(700.0)), 2595.0 * math.log10(2.0),
                        rel_tol=0, abs_tol=1e-9)
    assert abs(float(frontend.hz_to_mel(700.0)) - 781.17) < 0.01
    back = frontend.mel_to_hz(frontend.hz_to_mel(1234.5))
    assert math.isclose(float(back), 1234.5, rel_tol=1e-12)


def test_filterbank_shape_and_support():
    fb = frontend.build_filterbank(16000, 1024, f_min=20.0, f_max=8000.0)
    assert fb.filters.shape == (80, 513)
    centers = []
    for row in fb.filters:
        nz = np.flatnonzero(row)
        assert nz.size > 0
        # contiguous support
        assert np.all(np.diff(nz) == 1)
        assert row.max() == 1.0
        centers.append(int(np.argmax(row)))
    assert centers == sorted(centers)
    assert np.all(fb.filters.sum(axis=1) > 0)


def test_filterbank_rejects_bad_ranges():
    with pytest.raises(ValueError):
        frontend.build_filterbank(16000, 1024, f_min=4000, f_max=1000)
    with pytest.raises(ValueError):
        frontend.build_filterbank(16000, 1024, f_min=20, f_max=9000)
    with pytest.raises(ValueError):
        frontend.build_filterbank(16000, 1000)


def test_frame_count_examples():
    # N = floor((L - W)/S) + 1 with W=800, S=400 at 16 kHz
    rng = np.random.default_rng(0)
    feat = frontend.featurize(WaveformBuffer(rng.uniform(-0.5, 0.5, 16000), 16000))
    assert feat.shape == (39, 80)
    feat1 = frontend.featurize(WaveformBuffer(rng.uniform(-0.5, 0.5, 800), 16000))
    assert feat1.shape == (1, 80)
    with pytest.raises(ValueError, match="shorter"):
        frontend.featurize(WaveformBuffer(np.zeros(799), 16000))


def test_frame_count_matches_window_enumeration():
    # independent oracle: count placements i*S + W <= L directly
    rng = np.random.default_rng(1)
    sr = 16000
    W = frontend.window_samples(sr)
    S = frontend.shift_samples(sr)
    for L in rng.integers(W, 40000, size=20):
        L = int(L)
        expected = sum(1 for i in range(L) if i * S + W <= L)
        feat = frontend.featurize(WaveformBuffer(rng.uniform(-0.5, 0.5, L), sr))
        assert feat.shape[0] == expected == frontend.frame_count(L, sr)


def test_all_zero_input_hits_log_floor():
    feat = frontend.featurize(WaveformBuffer(np.zeros(16000), 16000))
    assert np.all(feat == np.log(1e-10))


def test_amplitude_scaling_shifts_log_energy():
    sr = 16000
    t = np.arange(2 * sr) / sr
    x = 0.3 * np.sin(2 * np.pi * 440.0 * t)
    c = 3.0
    f1 = frontend.featurize(WaveformBuffer(x, sr))
    f2 = frontend.featurize(WaveformBuffer(c * x, sr))
    shift = f2 - f1
    # only compare bins far above the log floor
    loud = f1 > np.log(1e-10) + 20.0
    assert loud.any()
    assert np.allclose(shift[loud], 2.0 * np.log(c), atol=1e-8)


def test_featurize_is_pure():
    rng = np.random.default_rng(2)
    x = rng.uniform(-0.9, 0.9, 12345)
    a = frontend.featurize(WaveformBuffer(x, 16000))
    b = frontend.featurize(WaveformBuffer(x, 16000))
    assert np.array_equal(a, b)


def test_cut_segment_contract():
    rng = np.random.default_rng(3)
    feat = rng.normal(size=(200, 80))
    seg = frontend.cut_segment(feat, 0)
    assert seg.shape == (121, 80)
    assert np.array_equal(seg, feat[:121])
    seg = frontend.cut_segment(feat, 40)
    assert np.array_equal(seg, feat[40:161])

    exact = rng.normal(size=(121, 80))
    assert np.array_equal(frontend.cut_segment(exact, 0), exact)
    with pytest.raises(ValueError, match="out of range"):
        frontend.cut_segment(exact, 1)
    with pytest.raises(ValueError, match="out of range"):
        frontend.cut_segment(exact, -1)


def test_pad_to_segment_fills_with_log_floor():
    rng = np.random.default_rng(4)
    feat = rng.normal(size=(50, 80))
    padded = frontend.pad_to_segment(feat)
    assert padded.shape == (121, 80)
    assert np.array_equal(padded[:50], feat)
    assert np.all(padded[50:] == np.log(1e-10))
    full = rng.normal(size=(130, 80))
    assert frontend.pad_to_segment(full).shape == (130, 80)


def test_feature_dump_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    feat = rng.normal(size=(37, 80))
    path = tmp_path / "f.bin"
    frontend.write_features(feat, path)
    raw = path.read_bytes()
    assert raw[:4] == b"KWSF"
    assert len(raw) == 16 + 37 * 80 * 8
    back = frontend.read_features(path)
    assert np.array_equal(back, feat)


def test_feature_dump_rejects_corrupt_files(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 12)
    with pytest.raises(ValueError, match="not a feature dump"):
        frontend.read_features(path)
    frontend.write_features(np.zeros((4, 4)), path)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(ValueError, match="bytes"):
        frontend.read_features(path)
