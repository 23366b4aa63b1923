import wave

import numpy as np
import pytest

from kwskit import frontend
from kwskit.corpus import (
    CorpusSpec,
    ManifestEntry,
    WaveformBuffer,
    _confusion_rendering,
    _keyword_rendering,
    _rng_for,
    generate_corpus,
    parse_manifest,
    read_wav,
    speaker_pitch,
    write_manifest,
    write_wav,
)


def test_corpus_entry_counts(tmp_path):
    spec = CorpusSpec(n_speakers=2, n_pos=3, n_neg=3, n_confusion=3, seed=7)
    entries = generate_corpus(spec, tmp_path)
    assert len(entries) == 18
    assert sum(e.label == "positive" for e in entries) == 6
    assert sum(e.cluster == "synt-neg" for e in entries) == 6
    for e in entries:
        assert (tmp_path / e.path).exists()


def test_generation_is_byte_deterministic(tmp_path):
    spec = CorpusSpec(n_speakers=1, n_pos=2, n_neg=2, n_confusion=2, seed=123)
    a = tmp_path / "a"
    b = tmp_path / "b"
    ea = generate_corpus(spec, a)
    eb = generate_corpus(spec, b)
    assert [e.utterance_id for e in ea] == [e.utterance_id for e in eb]
    for e in ea:
        assert (a / e.path).read_bytes() == (b / e.path).read_bytes()
    assert (a / "manifest.txt").read_bytes() == (b / "manifest.txt").read_bytes()


def test_confusion_differs_in_exactly_one_syllable():
    # Oracle: run the confusion generator twice from the same stream, once
    # with the detune disabled. The two renderings must agree everywhere
    # outside the perturbed syllable's sample interval.
    sr = 16000
    for trial in range(5):
        pitch = speaker_pitch(99, trial)
        plain, intervals, _, idx = _confusion_rendering(
            _rng_for(99, trial, "cw", 0), pitch, sr, perturb=False
        )
        pert, intervals2, _, idx2 = _confusion_rendering(
            _rng_for(99, trial, "cw", 0), pitch, sr, perturb=True
        )
        assert idx == idx2
        assert intervals == intervals2
        assert plain.size == pert.size
        diff = np.flatnonzero(plain != pert)
        assert diff.size > 0
        lo, hi = intervals[idx]
        assert diff[0] >= lo and diff[-1] < hi


def test_confusion_shares_keyword_timing_grid():
    sr = 16000
    _, kw_iv, kw_onset = _keyword_rendering(_rng_for(5, 0, "pos", 0), 1.0, sr)
    _, cw_iv, cw_onset, _ = _confusion_rendering(_rng_for(5, 0, "cw", 0), 1.0, sr)
    assert len(kw_iv) == len(cw_iv)
    kw_rel = [(a - kw_onset, b - kw_onset) for a, b in kw_iv]
    cw_rel = [(a - cw_onset, b - cw_onset) for a, b in cw_iv]
    assert kw_rel == cw_rel


def test_positive_segments_fit_after_onset(tmp_path):
    spec = CorpusSpec(n_speakers=2, n_pos=2, n_neg=0, n_confusion=0, seed=11)
    entries = generate_corpus(spec, tmp_path)
    for e in entries:
        feat = frontend.featurize(read_wav(tmp_path / e.path))
        assert feat.shape[0] - e.onset_frame >= frontend.SEGMENT_FRAMES


def test_speaker_pitch_range_and_determinism():
    factors = [speaker_pitch(42, s) for s in range(20)]
    assert all(0.85 <= f <= 1.2 for f in factors)
    assert factors == [speaker_pitch(42, s) for s in range(20)]
    assert len(set(factors)) > 1


def test_wav_silence_roundtrip(tmp_path):
    buf = WaveformBuffer(np.zeros(16000), 16000)
    path = tmp_path / "silence.wav"
    write_wav(buf, path)
    back = read_wav(path)
    assert back.sample_rate == 16000
    assert back.samples.shape == (16000,)
    assert np.all(back.samples == 0.0)


def test_wav_ramp_quantization_bound(tmp_path):
    ramp = np.linspace(-1.0, 1.0, 4001)
    path = tmp_path / "ramp.wav"
    write_wav(WaveformBuffer(ramp, 16000), path)
    back = read_wav(path)
    assert np.max(np.abs(back.samples - ramp)) <= 2.0 ** -15


def test_wav_rejects_stereo(tmp_path):
    path = tmp_path / "stereo.wav"
    with wave.open(str(path), "wb") as w:
        w.setnchannels(2)
        w.setsampwidth(2)
        w.setframerate(44100)
        w.writeframes(np.zeros(2000, dtype="<i2").tobytes())
    with pytest.raises(ValueError, match="channels"):
        read_wav(path)


def test_wav_rejects_garbage(tmp_path):
    path = tmp_path / "junk.wav"
    path.write_bytes(b"not audio at all, definitely not RIFF")
    with pytest.raises(ValueError):
        read_wav(path)


def test_buffer_validation():
    with pytest.raises(ValueError):
        WaveformBuffer(np.array([0.0, 1.5]), 16000)
    with pytest.raises(ValueError):
        WaveformBuffer(np.array([]), 16000)
    with pytest.raises(ValueError):
        WaveformBuffer(np.array([np.nan]), 16000)
    with pytest.raises(ValueError):
        WaveformBuffer(np.zeros(10), 0)


def test_manifest_parse_single_line(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("u1|u1.wav|positive|real-pos|12|1.50\n")
    entries = parse_manifest(path)
    assert len(entries) == 1
    e = entries[0]
    assert e.utterance_id == "u1"
    assert e.onset_frame == 12
    assert e.duration_s == 1.50


def test_manifest_positive_requires_onset(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("u1|u1.wav|positive|real-pos||1.50\n")
    with pytest.raises(ValueError, match="onset"):
        parse_manifest(path)


def test_manifest_rejects_unknown_cluster(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("u1|u1.wav|negative|other-cluster||1.50\n")
    with pytest.raises(ValueError, match="cluster"):
        parse_manifest(path)


def test_manifest_rejects_label_cluster_mismatch(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("u1|u1.wav|negative|real-pos||1.50\n")
    with pytest.raises(ValueError, match="mismatch"):
        parse_manifest(path)


def test_manifest_empty_and_comments(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("# header only\n\n")
    assert parse_manifest(path) == []


def test_manifest_roundtrip(tmp_path):
    entries = [
        ManifestEntry("a", "a.wav", "positive", "real-pos", 4, 2.125),
        ManifestEntry("b", "b.wav", "negative", "real-neg", None, 3.0),
        ManifestEntry("c", "c.wav", "negative", "synt-neg", None, 2.75),
    ]
    path = tmp_path / "m.txt"
    write_manifest(entries, path)
    assert parse_manifest(path) == entries


def test_manifest_field_count_error(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("u1|u1.wav|positive\n")
    with pytest.raises(ValueError, match="6 fields"):
        parse_manifest(path)
