"""Sliding-window keyword detection over log-mel features.

A trained classifier scores every 121-frame window of an utterance; the
maximum keyword posterior over all window starts is the utterance's
confidence, and the detector triggers when that confidence reaches the
threshold. Long recordings are handled by scoring overlapping fixed-length
chunks of the feature matrix.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import frontend, nn
from .corpus import WaveformBuffer

DEFAULT_CHUNK_S = 3.0
DEFAULT_HOP_S = 1.0
DEFAULT_REFRACTORY_S = 1.0


@dataclass(frozen=True)
class DetectorConfig:
    """Window geometry and trigger threshold for scoring."""

    window_frames: int = frontend.SEGMENT_FRAMES
    stride: int = 1
    threshold: float = 0.5

    def __post_init__(self):
        if self.window_frames < 1:
            raise ValueError(f"window_frames must be >= 1, got {self.window_frames}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if not np.isfinite(self.threshold):
            raise ValueError(f"threshold must be finite, got {self.threshold}")


@dataclass(frozen=True)
class DetectionResult:
    """Confidence, best-window location and trigger decision for one input.

    ``triggered`` is True only when ``confidence >= threshold_used``;
    score_utterance always sets it exactly by that rule, while stream
    scoring may clear it on chunks suppressed by the refractory period.
    """

    utterance_id: str
    confidence: float
    best_window_start: int
    triggered: bool
    threshold_used: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")
        if self.best_window_start < 0:
            raise ValueError(
                f"best_window_start must be >= 0, got {self.best_window_start}"
            )
        if self.triggered and self.confidence < self.threshold_used:
            raise ValueError("triggered result below its own threshold")


def _pad_frames(feat: np.ndarray, n_frames: int) -> np.ndarray:
    """Extend feat to n_frames rows with silence-level log energies."""
    pad = np.full((n_frames - feat.shape[0], feat.shape[1]), np.log(frontend.LOG_FLOOR))
    return np.vstack([feat, pad])


def score_utterance(
    params: nn.ModelParams,
    feat: np.ndarray,
    config: DetectorConfig | None = None,
    utterance_id: str = "",
) -> DetectionResult:
    """Score one utterance's feature matrix and apply the trigger rule.

    Windows start at 0, stride, 2*stride, ... up to the last full window;
    each is classified independently and the maximum keyword posterior
    wins, with the earliest start kept on ties. Inputs shorter than one
    window are padded at the end with the log-floor value.
    """
    if config is None:
        config = DetectorConfig()
    feat = np.asarray(feat, dtype=np.float64)
    if feat.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {feat.shape}")
    if feat.shape[0] < 1:
        raise ValueError("cannot score an empty feature matrix")
    win = config.window_frames
    if win != params.arch.in_h or feat.shape[1] != params.arch.in_w:
        raise ValueError(
            f"model expects {params.arch.in_h}x{params.arch.in_w} windows, got "
            f"window_frames={win} over {feat.shape[1]}-dim features"
        )
    if feat.shape[0] < win:
        feat = _pad_frames(feat, win)

    # One forward per window keeps scores independent of any batching, so
    # a stride-1 pass is reproducible window for window.
    best_p = -1.0
    best_t = 0
    for t in range(0, feat.shape[0] - win + 1, config.stride):
        x = feat[t : t + win][np.newaxis, np.newaxis]
        p = float(nn.forward(params, x)[0][0, 1])
        if p > best_p:
            best_p = p
            best_t = t
    return DetectionResult(
        utterance_id=utterance_id,
        confidence=best_p,
        best_window_start=best_t,
        triggered=bool(best_p >= config.threshold),
        threshold_used=config.threshold,
    )


def detect_stream(
    params: nn.ModelParams,
    buf: WaveformBuffer,
    config: DetectorConfig | None = None,
    utterance_id: str = "",
    chunk_s: float = DEFAULT_CHUNK_S,
    hop_s: float = DEFAULT_HOP_S,
    refractory_s: float = DEFAULT_REFRACTORY_S,
) -> list[DetectionResult]:
    """Score a long recording as overlapping chunks of features.

    The waveform is featurized once; chunk_s-long slices of the feature
    matrix, hop_s apart, are each scored exactly like a standalone
    utterance. best_window_start is reported in absolute frames. After a
    chunk triggers, chunks whose best window starts within refractory_s of
    the previous trigger have their triggered flag cleared so one keyword
    occurrence fires once.
    """
    if config is None:
        config = DetectorConfig()
    if chunk_s <= 0 or hop_s <= 0 or refractory_s < 0:
        raise ValueError("chunk_s and hop_s must be positive, refractory_s >= 0")
    sr = buf.sample_rate
    feat = frontend.featurize(buf)
    shift = frontend.shift_samples(sr)
    chunk_frames = frame_count_for_duration(chunk_s, sr)
    hop_frames = max(1, int(round(hop_s * sr / shift)))
    refractory_frames = int(round(refractory_s * sr / shift))

    n = feat.shape[0]
    if n <= chunk_frames:
        starts = [0]
    else:
        starts = list(range(0, n - chunk_frames + 1, hop_frames))

    results = []
    last_trigger = None
    for k, start in enumerate(starts):
        chunk = feat[start : start + chunk_frames]
        chunk_id = f"{utterance_id}@{k:03d}" if utterance_id else f"@{k:03d}"
        res = score_utterance(params, chunk, config, utterance_id=chunk_id)
        res = dataclasses.replace(res, best_window_start=start + res.best_window_start)
        if res.triggered:
            if last_trigger is not None and (
                res.best_window_start - last_trigger < refractory_frames
            ):
                res = dataclasses.replace(res, triggered=False)
            else:
                last_trigger = res.best_window_start
        results.append(res)
    return results


def frame_count_for_duration(duration_s: float, sample_rate: int) -> int:
    """Number of analysis frames in duration_s seconds of audio."""
    n = frontend.frame_count(int(round(duration_s * sample_rate)), sample_rate)
    return max(1, n)
