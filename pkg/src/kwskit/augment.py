"""Masked-sample augmentation.

A masked sample is a positive utterance with one contiguous span, covering
40-60% of it, replaced by Gaussian white noise. Masking can happen on the raw
waveform (default) or on the log-mel feature matrix; either way the result is
an intentionally broken keyword that downstream training labels negative.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .corpus import WaveformBuffer

MIN_MASK_SAMPLES = 10

MASK_MODES = ("waveform", "feature")


def stable_hash64(text: str) -> int:
    """Process-independent 64-bit hash, used to derive per-utterance seeds."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8],
                          "little")


@dataclass(frozen=True)
class MaskSpec:
    ratio_min: float = 0.40
    ratio_max: float = 0.60
    noise_rms: float = 0.05
    n_variants: int = 5
    mode: str = "waveform"
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.ratio_min <= self.ratio_max < 1):
            raise ValueError(
                f"need 0 < ratio_min <= ratio_max < 1, got "
                f"[{self.ratio_min}, {self.ratio_max}]"
            )
        if self.n_variants < 1:
            raise ValueError("n_variants must be >= 1")
        if self.noise_rms <= 0:
            raise ValueError("noise_rms must be positive")
        if self.mode not in MASK_MODES:
            raise ValueError(f"mode must be one of {MASK_MODES}, got {self.mode!r}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _span_length(ratio: float, total: int, ratio_min: float, ratio_max: float) -> int:
    """Span size for a drawn ratio: round half up, then clamp so that the
    realized fraction stays inside [ratio_min, ratio_max] even when rounding
    on short inputs would push it out."""
    n = _round_half_up(ratio * total)
    lo = math.ceil(ratio_min * total)
    hi = math.floor(ratio_max * total)
    if lo > hi:
        raise ValueError(f"input of {total} elements too short to mask")
    return min(max(n, lo), hi)


def _draw_span(rng: np.random.Generator, total: int, spec: MaskSpec) -> tuple[int, int]:
    r = rng.uniform(spec.ratio_min, spec.ratio_max)
    n = _span_length(r, total, spec.ratio_min, spec.ratio_max)
    start = int(rng.integers(0, total - n + 1))
    return start, n


def mask_waveform(buf: WaveformBuffer, spec: MaskSpec,
                  rng: np.random.Generator) -> WaveformBuffer:
    """Replace one random 40-60% span of the samples with Gaussian noise.

    Samples outside the span are preserved bit for bit.
    """
    x = buf.samples
    if x.size < MIN_MASK_SAMPLES:
        raise ValueError(f"buffer too short to mask ({x.size} samples)")
    start, n = _draw_span(rng, x.size, spec)
    y = x.copy()
    y[start:start + n] = np.clip(
        rng.normal(0.0, spec.noise_rms, n), -1.0, 1.0
    )
    return WaveformBuffer(y, buf.sample_rate)


def variant_rng(spec_seed: int, utterance_id: str, variant: int,
                variant_set: int = 0) -> np.random.Generator:
    """Deterministic generator for one masked variant of one utterance."""
    entropy = (
        spec_seed & 0xFFFFFFFFFFFFFFFF,
        stable_hash64(utterance_id),
        variant_set,
        variant,
    )
    return np.random.default_rng(np.random.SeedSequence(entropy))


def mask_batch(buf: WaveformBuffer, spec: MaskSpec, utterance_id: str = "",
               variant_set: int = 0) -> list[WaveformBuffer]:
    """n_variants independently masked copies of one utterance.

    Deterministic in (spec.seed, utterance_id, variant_set); masking is done
    in the waveform domain.
    """
    return [
        mask_waveform(buf, spec, variant_rng(spec.seed, utterance_id, v, variant_set))
        for v in range(spec.n_variants)
    ]


def mask_feature(seg: np.ndarray, spec: MaskSpec,
                 rng: np.random.Generator) -> np.ndarray:
    """Replace a random 40-60% block of frames with Gaussian entries matching
    the segment's own mean and standard deviation."""
    seg = np.asarray(seg, dtype=np.float64)
    rows = seg.shape[0]
    start, n = _draw_span(rng, rows, spec)
    out = seg.copy()
    out[start:start + n] = rng.normal(
        seg.mean(), seg.std(), size=(n,) + seg.shape[1:]
    )
    return out
