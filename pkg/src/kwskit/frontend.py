"""Log-mel filterbank feature extraction.

Waveforms are cut into 50 ms windows with a 25 ms shift. Each frame gets its
mean removed, a Hann window, a zero-padded power spectrum, projection onto 80
triangular mel filters and a natural log with a small floor. Training inputs
are fixed 121-frame segments cut at the keyword onset.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .corpus import WaveformBuffer

N_MELS = 80
FRAME_LEN_S = 0.050
FRAME_SHIFT_S = 0.025
SEGMENT_FRAMES = 121
LOG_FLOOR = 1e-10
F_MIN_HZ = 20.0
DEFAULT_N_FFT = 1024

DUMP_MAGIC = b"KWSF"


def window_samples(sample_rate: int) -> int:
    return int(round(FRAME_LEN_S * sample_rate))


def shift_samples(sample_rate: int) -> int:
    return int(round(FRAME_SHIFT_S * sample_rate))


def frame_count(n_samples: int, sample_rate: int) -> int:
    """Number of full analysis windows that fit into n_samples."""
    win = window_samples(sample_rate)
    if n_samples < win:
        return 0
    return (n_samples - win) // shift_samples(sample_rate) + 1


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular filters over power-spectrum bins, rows ordered by center."""

    filters: np.ndarray
    f_min: float
    f_max: float

    def __post_init__(self):
        w = np.asarray(self.filters, dtype=np.float64)
        object.__setattr__(self, "filters", w)
        if w.ndim != 2:
            raise ValueError("filters must be a 2-D matrix")
        if np.any(w < 0):
            raise ValueError("filter weights must be nonnegative")
        for i, row in enumerate(w):
            nz = np.flatnonzero(row)
            if nz.size == 0:
                raise ValueError(f"filter row {i} is empty")
            if not np.all(row[nz[0]:nz[-1] + 1] > 0):
                raise ValueError(f"filter row {i} has non-contiguous support")


def build_filterbank(sample_rate: int, n_fft: int, n_mels: int = N_MELS,
                     f_min: float = F_MIN_HZ,
                     f_max: float | None = None) -> MelFilterbank:
    """Build triangular filters with centers uniformly spaced on the mel
    scale; each filter peaks at 1 at its center bin."""
    if f_max is None:
        f_max = sample_rate / 2.0
    if not (0 <= f_min < f_max <= sample_rate / 2.0):
        raise ValueError(
            f"invalid frequency range [{f_min}, {f_max}] at {sample_rate} Hz"
        )
    if n_fft < 1 or (n_fft & (n_fft - 1)) != 0:
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")

    mel_points = np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    bins = np.floor((n_fft + 1) * hz_points / sample_rate).astype(int)

    weights = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(1, n_mels + 1):
        left, center, right = bins[m - 1], bins[m], bins[m + 1]
        if not (left < center < right):
            raise ValueError(
                f"filter {m - 1} collapsed (bins {left},{center},{right}); "
                "increase n_fft or widen the frequency range"
            )
        for k in range(left, center):
            weights[m - 1, k] = (k - left) / (center - left)
        for k in range(center, right):
            weights[m - 1, k] = (right - k) / (right - center)
        weights[m - 1, center] = 1.0
    return MelFilterbank(weights, float(f_min), float(f_max))


@lru_cache(maxsize=8)
def _cached_filterbank(sample_rate: int, n_fft: int) -> MelFilterbank:
    return build_filterbank(sample_rate, n_fft)


def _fft_size(win: int) -> int:
    n = DEFAULT_N_FFT
    while n < win:
        n *= 2
    return n


def featurize(buf: "WaveformBuffer") -> np.ndarray:
    """Convert a waveform into a (frames, 80) log-mel matrix."""
    sr = buf.sample_rate
    x = buf.samples
    win = window_samples(sr)
    shift = shift_samples(sr)
    if x.size < win:
        raise ValueError(
            f"buffer of {x.size} samples is shorter than one {win}-sample window"
        )
    frames = np.lib.stride_tricks.sliding_window_view(x, win)[::shift]
    frames = frames - frames.mean(axis=1, keepdims=True)
    frames = frames * np.hanning(win)
    n_fft = _fft_size(win)
    power = np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2
    fb = _cached_filterbank(sr, n_fft)
    energy = power @ fb.filters.T
    return np.log(energy + LOG_FLOOR)


def cut_segment(feat: np.ndarray, onset_frame: int) -> np.ndarray:
    """Copy rows [onset_frame, onset_frame + 121) out of a feature matrix."""
    feat = np.asarray(feat)
    if onset_frame < 0 or onset_frame + SEGMENT_FRAMES > feat.shape[0]:
        raise ValueError(
            f"onset {onset_frame} out of range for {feat.shape[0]} frames"
        )
    return feat[onset_frame:onset_frame + SEGMENT_FRAMES].copy()


def pad_to_segment(feat: np.ndarray) -> np.ndarray:
    """Pad a short feature matrix up to 121 frames with log-floor rows."""
    feat = np.asarray(feat, dtype=np.float64)
    if feat.shape[0] >= SEGMENT_FRAMES:
        return feat
    pad = np.full((SEGMENT_FRAMES - feat.shape[0], feat.shape[1]),
                  np.log(LOG_FLOOR))
    return np.vstack([feat, pad])


# ---------------------------------------------------------------------------
# Feature dump: 16-byte header (magic, u32 rows, u32 cols, u32 reserved,
# little-endian) followed by row-major float64 values.
# ---------------------------------------------------------------------------

def write_features(feat: np.ndarray, path) -> None:
    a = np.ascontiguousarray(feat, dtype="<f8")
    if a.ndim != 2:
        raise ValueError("feature dump expects a 2-D matrix")
    with open(path, "wb") as f:
        f.write(struct.pack("<4sIII", DUMP_MAGIC, a.shape[0], a.shape[1], 0))
        f.write(a.tobytes())


def read_features(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != DUMP_MAGIC:
        raise ValueError(f"{path}: not a feature dump")
    rows, cols, _ = struct.unpack_from("<III", data, 4)
    expect = 16 + rows * cols * 8
    if len(data) != expect:
        raise ValueError(f"{path}: expected {expect} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f8", offset=16).reshape(rows, cols).copy()
