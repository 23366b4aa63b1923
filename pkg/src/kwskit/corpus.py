"""Procedurally generated keyword corpus, WAV I/O and manifest handling.

Utterances are built from syllables, where each syllable is a stack of three
harmonically related sinusoids under a smooth amplitude envelope plus a low
noise floor. A fixed four-syllable word acts as the keyword; confusion words
detune exactly one syllable of it; negatives are random syllable strings from
a disjoint frequency inventory. Every "speaker" is a global pitch-scale
factor, so the same word renders differently across speakers.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LABELS = ("positive", "negative")
CLUSTERS = ("real-pos", "real-neg", "synt-neg")

# Fixed keyword: four syllables, base frequencies in Hz and durations in
# seconds. Confusion words reuse this grid with one detuned syllable.
KEYWORD_BASE_HZ = (220.0, 330.0, 262.0, 294.0)
KEYWORD_SYLLABLE_S = (0.22, 0.18, 0.20, 0.24)
SYLLABLE_GAP_S = 0.03

# Inventory for negatives; disjoint from the keyword frequencies.
NEGATIVE_INVENTORY_HZ = (
    168.0, 187.0, 203.0, 243.0, 281.0, 312.0, 352.0, 401.0, 452.0, 496.0
)

HARMONIC_AMPS = (1.0, 0.5, 0.25)
SYLLABLE_PEAK = 0.32
NOISE_FLOOR_RMS = 0.004
DETUNE_MIN, DETUNE_MAX = 0.08, 0.15
PITCH_MIN, PITCH_MAX = 0.85, 1.2
LEAD_SILENCE_S = (0.10, 0.40)

# Frames of headroom beyond the minimum segment length when padding.
_PAD_MARGIN_FRAMES = 2


@dataclass(frozen=True)
class WaveformBuffer:
    """Mono audio: float64 samples in [-1, 1] plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", s)
        if s.ndim != 1 or s.size < 1:
            raise ValueError("samples must be a non-empty 1-D array")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples contain non-finite values")
        if np.abs(s).max() > 1.0:
            raise ValueError("samples exceed [-1, 1]")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class ManifestEntry:
    """One corpus record binding a WAV file to its label, cluster and onset."""

    utterance_id: str
    path: str
    label: str
    cluster: str
    onset_frame: int | None
    duration_s: float

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if self.cluster not in CLUSTERS:
            raise ValueError(f"unknown cluster {self.cluster!r}")
        if (self.cluster == "real-pos") != (self.label == "positive"):
            raise ValueError(
                f"label/cluster mismatch: {self.label!r} with {self.cluster!r}"
            )
        if self.label == "positive":
            if self.onset_frame is None:
                raise ValueError(f"positive entry {self.utterance_id!r} lacks onset_frame")
            if self.onset_frame < 0:
                raise ValueError("onset_frame must be nonnegative")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")


@dataclass(frozen=True)
class CorpusSpec:
    """Counts and seed controlling one corpus-generation run."""

    n_speakers: int
    n_pos: int
    n_neg: int
    n_confusion: int
    seed: int
    sample_rate: int = 16000

    def __post_init__(self):
        for name in ("n_speakers", "n_pos", "n_neg", "n_confusion"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")


# ---------------------------------------------------------------------------
# WAV I/O (16-bit PCM mono only)
# ---------------------------------------------------------------------------

def write_wav(buf: WaveformBuffer, path) -> None:
    """Write a buffer as RIFF/WAVE, PCM 16-bit little-endian, mono."""
    q = np.rint(buf.samples * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(buf.sample_rate)
        w.writeframes(q.tobytes())


def read_wav(path) -> WaveformBuffer:
    """Read a 16-bit PCM mono WAV file.

    Raises ValueError on malformed headers, non-PCM encodings or channel
    counts other than one.
    """
    try:
        with wave.open(str(path), "rb") as w:
            if w.getnchannels() != 1:
                raise ValueError(
                    f"{path}: expected mono audio, got {w.getnchannels()} channels"
                )
            if w.getsampwidth() != 2:
                raise ValueError(
                    f"{path}: expected 16-bit samples, got {8 * w.getsampwidth()}-bit"
                )
            if w.getcomptype() != "NONE":
                raise ValueError(f"{path}: unsupported encoding {w.getcomptype()!r}")
            sr = w.getframerate()
            raw = w.readframes(w.getnframes())
    except wave.Error as exc:
        raise ValueError(f"{path}: malformed WAV file ({exc})") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0
    # A foreign file may carry -32768, which lands just below -1.
    np.clip(samples, -1.0, 1.0, out=samples)
    return WaveformBuffer(samples, sr)


# ---------------------------------------------------------------------------
# Manifest text format
# ---------------------------------------------------------------------------
# One record per line: id|relative_path|label|cluster|onset_frame|duration_s
# onset_frame is empty for negatives; '#' starts a comment line.

def write_manifest(entries: list[ManifestEntry], path) -> None:
    lines = ["# id|relative_path|label|cluster|onset_frame|duration_s"]
    for e in entries:
        onset = "" if e.onset_frame is None else str(e.onset_frame)
        lines.append(
            f"{e.utterance_id}|{e.path}|{e.label}|{e.cluster}|{onset}|{e.duration_s:.3f}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_manifest(path) -> list[ManifestEntry]:
    """Parse a manifest file, preserving record order. Raises ValueError on
    records violating the entry invariants."""
    entries = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("|")
        if len(parts) != 6:
            raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
        uid, rel, label, cluster, onset_txt, dur_txt = (p.strip() for p in parts)
        try:
            onset = None if onset_txt == "" else int(onset_txt)
            duration = float(dur_txt)
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
        try:
            entries.append(ManifestEntry(uid, rel, label, cluster, onset, duration))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return entries


# ---------------------------------------------------------------------------
# Procedural synthesis
# ---------------------------------------------------------------------------

def _synth_syllable(f0: float, dur_s: float, sr: int) -> np.ndarray:
    n = int(round(dur_s * sr))
    t = np.arange(n) / sr
    env = np.sin(np.pi * (np.arange(n) + 0.5) / n) ** 2
    y = np.zeros(n)
    for k, amp in enumerate(HARMONIC_AMPS, start=1):
        y += amp * np.sin(2.0 * np.pi * k * f0 * t)
    return SYLLABLE_PEAK * env * y


def _min_length(onset_sample: int, content_end: int, sr: int) -> int:
    # Enough samples that featurization yields >= 121 frames past the onset
    # frame (plus margin), and never truncates the rendered content.
    from . import frontend

    win = frontend.window_samples(sr)
    shift = frontend.shift_samples(sr)
    onset_frame = onset_sample // shift
    need = (onset_frame + frontend.SEGMENT_FRAMES + _PAD_MARGIN_FRAMES - 1) * shift + win
    return max(need, content_end + int(0.05 * sr))


def _render_word(f0s, durs, lead_s: float, pitch: float, sr: int,
                 noise_rng: np.random.Generator):
    """Render syllables on a fixed grid; returns (samples, intervals, onset)."""
    onset_sample = int(round(lead_s * sr))
    cursor = lead_s
    placed = []
    intervals = []
    for f0, dur in zip(f0s, durs):
        start = int(round(cursor * sr))
        syl = _synth_syllable(f0 * pitch, dur, sr)
        placed.append((start, syl))
        intervals.append((start, start + syl.size))
        cursor += dur + SYLLABLE_GAP_S
    content_end = intervals[-1][1]
    total = _min_length(onset_sample, content_end, sr)
    y = noise_rng.normal(0.0, NOISE_FLOOR_RMS, total)
    for start, syl in placed:
        y[start:start + syl.size] += syl
    np.clip(y, -1.0, 1.0, out=y)
    return y, intervals, onset_sample


def _keyword_rendering(rng: np.random.Generator, pitch: float, sr: int):
    r_noise, r_misc = rng.spawn(2)
    lead = r_misc.uniform(*LEAD_SILENCE_S)
    return _render_word(KEYWORD_BASE_HZ, KEYWORD_SYLLABLE_S, lead, pitch, sr, r_noise)


def _confusion_rendering(rng: np.random.Generator, pitch: float, sr: int,
                         perturb: bool = True):
    """Render a confusion word: the keyword with one syllable's frequency
    triple detuned by 8-15%. With perturb=False the identical random stream
    renders the untouched keyword, which pins down the detuned interval."""
    r_perturb, r_noise, r_misc = rng.spawn(3)
    syl_idx = int(r_perturb.integers(0, len(KEYWORD_BASE_HZ)))
    sign = 1.0 if r_perturb.random() < 0.5 else -1.0
    detune = r_perturb.uniform(DETUNE_MIN, DETUNE_MAX)
    f0s = list(KEYWORD_BASE_HZ)
    if perturb:
        f0s[syl_idx] *= 1.0 + sign * detune
    lead = r_misc.uniform(*LEAD_SILENCE_S)
    samples, intervals, onset = _render_word(
        f0s, KEYWORD_SYLLABLE_S, lead, pitch, sr, r_noise
    )
    return samples, intervals, onset, syl_idx


def _negative_rendering(rng: np.random.Generator, pitch: float, sr: int):
    r_plan, r_noise, r_misc = rng.spawn(3)
    count = int(r_plan.integers(4, 9))
    f0s = r_plan.choice(NEGATIVE_INVENTORY_HZ, size=count)
    durs = r_plan.uniform(0.15, 0.25, size=count)
    lead = r_misc.uniform(*LEAD_SILENCE_S)
    samples, intervals, _ = _render_word(f0s, durs, lead, pitch, sr, r_noise)
    return samples, intervals


_KIND_CODE = {"pitch": 0, "pos": 1, "neg": 2, "cw": 3}


def _rng_for(seed: int, speaker: int, kind: str, index: int) -> np.random.Generator:
    entropy = (seed & 0xFFFFFFFFFFFFFFFF, speaker, _KIND_CODE[kind], index)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def speaker_pitch(seed: int, speaker: int) -> float:
    """Global pitch-scale factor for one synthetic speaker."""
    r = _rng_for(seed, speaker, "pitch", 0)
    return float(r.uniform(PITCH_MIN, PITCH_MAX))


def generate_corpus(spec: CorpusSpec, out_dir) -> list[ManifestEntry]:
    """Write the corpus WAVs plus ``manifest.txt`` under out_dir.

    Deterministic: the same spec produces byte-identical files. Returns the
    manifest entries in the order written.
    """
    from . import frontend

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shift = frontend.shift_samples(spec.sample_rate)
    entries: list[ManifestEntry] = []

    def emit(uid: str, samples: np.ndarray, label: str, cluster: str,
             onset_sample: int | None) -> None:
        buf = WaveformBuffer(samples, spec.sample_rate)
        write_wav(buf, out / f"{uid}.wav")
        onset_frame = None if onset_sample is None else onset_sample // shift
        entries.append(
            ManifestEntry(uid, f"{uid}.wav", label, cluster, onset_frame,
                          buf.duration_s)
        )

    for s in range(spec.n_speakers):
        pitch = speaker_pitch(spec.seed, s)
        for i in range(spec.n_pos):
            samples, _, onset = _keyword_rendering(
                _rng_for(spec.seed, s, "pos", i), pitch, spec.sample_rate
            )
            emit(f"s{s:03d}-pos{i:03d}", samples, "positive", "real-pos", onset)
        for i in range(spec.n_neg):
            samples, _ = _negative_rendering(
                _rng_for(spec.seed, s, "neg", i), pitch, spec.sample_rate
            )
            emit(f"s{s:03d}-neg{i:03d}", samples, "negative", "real-neg", None)
        for i in range(spec.n_confusion):
            samples, _, _, _ = _confusion_rendering(
                _rng_for(spec.seed, s, "cw", i), pitch, spec.sample_rate
            )
            emit(f"s{s:03d}-cw{i:03d}", samples, "negative", "synt-neg", None)

    write_manifest(entries, out / "manifest.txt")
    return entries
