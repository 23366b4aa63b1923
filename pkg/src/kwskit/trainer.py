"""Training loop: Nesterov-momentum SGD with plateau learning-rate decay.

Six data setups control what one epoch contains. `baseline` trains on real
keyword segments against plain negatives; `mask` adds five freshly masked
copies of every positive per epoch, labeled negative; the `synt-cw*` setups
add confusion-word utterances as negatives; the `*-coral` setups additionally
stratify every batch over the three clusters (real-pos, real-neg, synt-neg)
and add the covariance-alignment ratio term to the loss, with its embedding
gradient injected into backprop.
"""

from __future__ import annotations

import csv
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import augment, coral, frontend, nn
from .corpus import ManifestEntry, WaveformBuffer, parse_manifest, read_wav

SETUPS = ("baseline", "mask", "synt-cw", "synt-cw-neg", "synt-cw-coral",
          "full-coral")
CORAL_SETUPS = ("synt-cw-coral", "full-coral")
SYNT_SETUPS = ("synt-cw", "synt-cw-neg", "synt-cw-coral", "full-coral")

LOG_COLUMNS = ("epoch", "step", "ce", "coral_ratio", "lr", "wall_ms")


@dataclass(frozen=True)
class TrainConfig:
    setup: str = "baseline"
    epochs: int = 100
    lr0: float = 0.01
    momentum: float = 0.9
    plateau_patience: int = 3
    lr_decay: float = 0.5
    lr_min: float = 1e-5
    batch_size: int = 32
    cluster_quota: tuple[int, int, int] | None = None
    seed: int = 0
    channels: tuple[int, int, int] = (32, 32, 64)
    d_emb: int = 128
    mask_variants: int = 5
    mask_mode: str = "waveform"
    mask_noise_rms: float = 0.05
    min_pos_fraction: float = 0.0
    coral_warmup_epochs: int = 0
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.setup not in SETUPS:
            raise ValueError(
                f"unknown setup {self.setup!r}; valid setups: {', '.join(SETUPS)}"
            )
        if self.lr0 <= 0 or self.lr_min <= 0 or self.lr_min > self.lr0:
            raise ValueError("need 0 < lr_min <= lr0")
        if not (0 <= self.momentum < 1):
            raise ValueError("momentum must be in [0, 1)")
        if not (0 < self.lr_decay <= 1):
            raise ValueError("lr_decay must be in (0, 1]")
        if self.epochs < 1 or self.plateau_patience < 1 or self.batch_size < 1:
            raise ValueError("epochs, plateau_patience and batch_size must be >= 1")
        if self.coral_enabled and self.batch_size < 6:
            raise ValueError("alignment setups need batch_size >= 6 (2 per cluster)")
        if self.cluster_quota is not None:
            q = self.cluster_quota
            if len(q) != 3 or any(v < 2 for v in q):
                raise ValueError("cluster_quota must be three counts, each >= 2")
            if sum(q) != self.batch_size:
                raise ValueError("cluster_quota must sum to batch_size")
        if self.mask_variants < 1:
            raise ValueError("mask_variants must be >= 1")
        if not (0 <= self.min_pos_fraction <= 0.9):
            raise ValueError("min_pos_fraction must be in [0, 0.9]")
        if self.coral_warmup_epochs < 0:
            raise ValueError("coral_warmup_epochs must be >= 0")
        if self.coral_enabled and self.coral_warmup_epochs >= self.epochs:
            raise ValueError(
                "coral_warmup_epochs must be < epochs, or the alignment term "
                "never trains"
            )

    @property
    def coral_enabled(self) -> bool:
        return self.setup in CORAL_SETUPS

    def mask_spec(self) -> augment.MaskSpec:
        return augment.MaskSpec(noise_rms=self.mask_noise_rms,
                                n_variants=self.mask_variants,
                                mode=self.mask_mode, seed=self.seed)


@dataclass
class TrainSample:
    uid: str
    label: int
    cluster: str
    segment: np.ndarray                  # 121 x 80
    waveform: np.ndarray | None = None   # kept for positives (masking source)
    sample_rate: int = 16000
    onset_frame: int = 0
    features: np.ndarray | None = None   # full matrix, negatives only


@dataclass
class TrainingSet:
    """Featurized training corpus, reusable across setups and seeds."""

    samples: list[TrainSample]

    def by_cluster(self, tag: str) -> list[TrainSample]:
        return [s for s in self.samples if s.cluster == tag]


@dataclass
class ClusterBatch:
    segments: np.ndarray     # (n, 1, 121, 80)
    labels: np.ndarray       # (n,) int
    cluster_tags: tuple
    ids: tuple


@dataclass
class EpochStats:
    epoch: int
    mean_ce: float
    mean_ratio: float
    lr: float
    steps: int


def _load_sample(entry: ManifestEntry, base_dir: Path) -> TrainSample:
    buf = read_wav(base_dir / entry.path)
    feat = frontend.featurize(buf)
    if entry.label == "positive":
        segment = frontend.cut_segment(feat, entry.onset_frame)
        return TrainSample(entry.utterance_id, 1, entry.cluster, segment,
                           waveform=buf.samples, sample_rate=buf.sample_rate,
                           onset_frame=entry.onset_frame)
    feat = frontend.pad_to_segment(feat)
    return TrainSample(entry.utterance_id, 0, entry.cluster,
                       feat[:frontend.SEGMENT_FRAMES],
                       sample_rate=buf.sample_rate, features=feat)


def build_training_set(source, base_dir=None, jobs: int = 1) -> TrainingSet:
    """Featurize a manifest (path or parsed entries) into memory.

    Results are ordered like the manifest regardless of jobs, so parallel
    featurization cannot change anything downstream.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        entries = parse_manifest(path)
        base_dir = path.parent
    else:
        entries = list(source)
        if base_dir is None:
            raise ValueError("base_dir is required when passing entries directly")
        base_dir = Path(base_dir)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            samples = list(pool.map(lambda e: _load_sample(e, base_dir), entries))
    else:
        samples = [_load_sample(e, base_dir) for e in entries]
    return TrainingSet(samples)


# ---------------------------------------------------------------------------
# Batching
# ---------------------------------------------------------------------------

def _masked_samples(positives, config: TrainConfig, epoch: int):
    """Fresh masked negatives for this epoch, n_variants per positive."""
    spec = config.mask_spec()
    out = []
    for s in positives:
        for v in range(spec.n_variants):
            rng = augment.variant_rng(spec.seed, s.uid, v, variant_set=epoch)
            if spec.mode == "feature":
                seg = augment.mask_feature(s.segment, spec, rng)
            else:
                if s.waveform is None:
                    raise ValueError(f"{s.uid}: no waveform kept for masking")
                masked = augment.mask_waveform(
                    WaveformBuffer(s.waveform, s.sample_rate), spec, rng
                )
                feat = frontend.featurize(masked)
                seg = frontend.cut_segment(feat, s.onset_frame)
            out.append(TrainSample(f"{s.uid}+mask{v}", 0, "real-neg", seg))
    return out


def _window_rng(seed: int, uid: str, epoch: int) -> np.random.Generator:
    entropy = (seed & 0xFFFFFFFFFFFFFFFF,
               augment.stable_hash64("window:" + uid), epoch)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _shift_window(sample: TrainSample, config: TrainConfig, epoch: int):
    """Fresh 121-frame view of a negative for this epoch.

    Evaluation slides a window over the whole utterance, so training must
    not anchor negatives to one fixed window; the start is drawn per epoch
    from a per-utterance stream, independent of batch assembly order.
    """
    feats = sample.features
    if feats is None or feats.shape[0] <= frontend.SEGMENT_FRAMES:
        return sample
    span = feats.shape[0] - frontend.SEGMENT_FRAMES
    rng = _window_rng(config.seed, sample.uid, epoch)
    start = int(rng.integers(0, span + 1))
    return replace(sample, segment=feats[start:start + frontend.SEGMENT_FRAMES])


def _epoch_pool(data: TrainingSet, config: TrainConfig, epoch: int):
    pos = data.by_cluster("real-pos")
    neg = data.by_cluster("real-neg")
    if not pos or not neg:
        raise ValueError(
            f"setup {config.setup!r} needs real-pos and real-neg samples"
        )
    pool = pos + neg
    if config.setup == "mask":
        pool = pool + _masked_samples(pos, config, epoch)
    if config.setup in SYNT_SETUPS:
        synt = data.by_cluster("synt-neg")
        if not synt:
            raise ValueError(
                f"setup {config.setup!r} requires synt-neg samples, "
                "none in the manifest"
            )
        pool = pool + synt
    return [_shift_window(s, config, epoch) for s in pool]


def _balanced(pool, config: TrainConfig, rng: np.random.Generator):
    """Optionally upsample positives (with replacement) to a minimum
    fraction. Off by default, which keeps one epoch = each sample once."""
    if config.min_pos_fraction <= 0:
        return pool
    pos = [s for s in pool if s.label == 1]
    need = int(np.ceil(config.min_pos_fraction * len(pool)))
    extra = []
    while len(pos) + len(extra) < need:
        extra.append(pos[int(rng.integers(0, len(pos)))])
    return pool + extra


def _as_batch(samples) -> ClusterBatch:
    segs = np.stack([s.segment for s in samples])[:, None, :, :]
    labels = np.array([s.label for s in samples], dtype=np.int64)
    return ClusterBatch(segs, labels,
                        tuple(s.cluster for s in samples),
                        tuple(s.uid for s in samples))


def default_quota(batch_size: int, sizes: tuple[int, int, int]) -> tuple:
    """Per-cluster batch quota roughly proportional to cluster sizes, each at
    least 2, summing to batch_size."""
    total = sum(sizes)
    q = [max(2, int(round(batch_size * n / total))) for n in sizes]
    while sum(q) > batch_size:
        i = int(np.argmax(q))
        if q[i] <= 2:
            raise ValueError(f"batch_size {batch_size} too small for 3 clusters")
        q[i] -= 1
    while sum(q) < batch_size:
        deficit = [n / qq for n, qq in zip(sizes, q)]
        q[int(np.argmax(deficit))] += 1
    return tuple(q)


def _coral_batches(data: TrainingSet, config: TrainConfig, epoch: int,
                   rng: np.random.Generator):
    clusters = {}
    for tag in ("real-pos", "real-neg", "synt-neg"):
        members = data.by_cluster(tag)
        if len(members) < 2:
            raise ValueError(
                f"setup {config.setup!r} needs >= 2 {tag} samples, "
                f"found {len(members)}"
            )
        clusters[tag] = [_shift_window(s, config, epoch) for s in members]
    sizes = tuple(len(clusters[t]) for t in ("real-pos", "real-neg", "synt-neg"))
    quota = config.cluster_quota or default_quota(config.batch_size, sizes)

    n_batches = max(
        int(np.ceil(n / q)) for n, q in zip(sizes, quota)
    )

    def stream(members):
        while True:
            for i in rng.permutation(len(members)):
                yield members[i]

    streams = {t: stream(m) for t, m in clusters.items()}
    batches = []
    for _ in range(n_batches):
        rows = []
        for tag, q in zip(("real-pos", "real-neg", "synt-neg"), quota):
            rows.extend(next(streams[tag]) for _ in range(q))
        batches.append(_as_batch(rows))
    return batches


def make_batches(data: TrainingSet, config: TrainConfig, epoch: int,
                 rng: np.random.Generator) -> list[ClusterBatch]:
    """Batches for one epoch. Plain setups shuffle the eligible pool and
    visit every sample exactly once; alignment setups emit stratified batches
    meeting the per-cluster quota (the largest cluster drives the batch
    count, smaller clusters wrap around reshuffled)."""
    if config.coral_enabled:
        return _coral_batches(data, config, epoch, rng)
    pool = _balanced(_epoch_pool(data, config, epoch), config, rng)
    order = rng.permutation(len(pool))
    batches = []
    for lo in range(0, len(pool), config.batch_size):
        chunk = [pool[i] for i in order[lo:lo + config.batch_size]]
        batches.append(_as_batch(chunk))
    return batches


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

def nesterov_step(params: nn.ModelParams, grads: nn.Gradients,
                  velocity: dict, lr: float, momentum: float):
    """v <- momentum*v - lr*g; theta <- theta + v. The gradient must have
    been evaluated at the look-ahead point theta + momentum*v (the caller
    does that; see lookahead_params)."""
    for name in nn.PARAM_FIELDS:
        g = np.asarray(getattr(grads, name))
        p = getattr(params, name)
        if g.shape != p.shape:
            raise ValueError(
                f"{name}: gradient shape {g.shape} does not match {p.shape}"
            )
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient in {name}")
        v = velocity[name]
        v *= momentum
        v -= lr * g
        p += v
    return params, velocity


def lookahead_params(params: nn.ModelParams, velocity: dict,
                     momentum: float) -> nn.ModelParams:
    return nn.ModelParams(
        params.arch,
        *(getattr(params, n) + momentum * velocity[n] for n in nn.PARAM_FIELDS),
    )


def zero_velocity(params: nn.ModelParams) -> dict:
    return {n: np.zeros_like(getattr(params, n)) for n in nn.PARAM_FIELDS}


# ---------------------------------------------------------------------------
# Training driver
# ---------------------------------------------------------------------------

def _cluster_slices(tags: tuple):
    out = {}
    for tag in ("real-pos", "real-neg", "synt-neg"):
        idx = [i for i, t in enumerate(tags) if t == tag]
        out[tag] = np.array(idx, dtype=np.intp)
    return out


def _coral_terms(trace: nn.ForwardTrace, ce: float, tags: tuple):
    idx = _cluster_slices(tags)
    emb = trace.embedding
    res = coral.joint_loss(
        ce,
        coral.EmbeddingCluster(emb[idx["real-pos"]], "real-pos"),
        coral.EmbeddingCluster(emb[idx["real-neg"]], "real-neg"),
        coral.EmbeddingCluster(emb[idx["synt-neg"]], "synt-neg"),
    )
    demb = np.zeros_like(emb)
    demb[idx["real-pos"]] = res.grad_real_pos
    demb[idx["real-neg"]] = res.grad_real_neg
    demb[idx["synt-neg"]] = res.grad_synt_neg
    return res, demb


def train(config: TrainConfig, data, log_path=None, checkpoint_path=None,
          jobs: int = 1, verbose: bool = False):
    """Train under the configured setup.

    data may be a TrainingSet, a manifest path, or a list of ManifestEntry
    (with base paths resolvable). Returns (params, per-epoch stats). The
    per-step log CSV (columns epoch,step,ce,coral_ratio,lr,wall_ms) is
    written when log_path is given; wall_ms is logged as 0 so reruns are
    byte-identical, wall time goes to stderr with verbose=True.
    """
    if not isinstance(data, TrainingSet):
        data = build_training_set(data, jobs=jobs)

    arch = nn.Architecture(in_h=frontend.SEGMENT_FRAMES, in_w=frontend.N_MELS,
                           channels=config.channels, d_emb=config.d_emb)
    seed = config.seed & 0xFFFFFFFFFFFFFFFF
    params = nn.init_params(
        arch, np.random.default_rng(np.random.SeedSequence((seed, 0)))
    )
    velocity = zero_velocity(params)

    lr = config.lr0
    best_loss = np.inf
    stale = 0
    rows = []
    stats: list[EpochStats] = []

    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1, epoch)))
        batches = make_batches(data, config, epoch, rng)
        # The covariance-ratio term is ill-conditioned at random init: all
        # three clusters look alike, the denominator is near zero and its
        # gradient scales like its inverse square, which blows up embedding
        # scales before cross-entropy can shape them. Warmup epochs train
        # plain cross-entropy on the same stratified batches first.
        align_now = (config.coral_enabled
                     and epoch >= config.coral_warmup_epochs)
        ce_sum = ratio_sum = loss_sum = 0.0
        for step, batch in enumerate(batches):
            la = lookahead_params(params, velocity, config.momentum)
            _, trace = nn.forward(la, batch.segments)
            ce, dlogits = nn.cross_entropy(trace.logits, batch.labels)
            if align_now:
                res, demb = _coral_terms(trace, ce, batch.cluster_tags)
                loss, ratio = res.loss, res.ratio
            else:
                loss, ratio, demb = ce, 0.0, None
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch} step {step}; "
                    f"batch ids {batch.ids[:4]}..."
                )
            grads = nn.backward(la, trace, dlogits, demb)
            nesterov_step(params, grads, velocity, lr, config.momentum)
            ce_sum += ce
            ratio_sum += ratio
            loss_sum += loss
            rows.append((epoch, step, float(ce), float(ratio), lr, 0))

        n = len(batches)
        stats.append(EpochStats(epoch, ce_sum / n, ratio_sum / n, lr, n))
        if verbose:
            print(
                f"epoch {epoch}: loss {loss_sum / n:.6f} ce {ce_sum / n:.6f} "
                f"ratio {ratio_sum / n:.6f} lr {lr:g} "
                f"({time.perf_counter() - t0:.1f}s)",
                file=sys.stderr,
            )

        mean_loss = loss_sum / n
        if mean_loss < best_loss:
            best_loss = mean_loss
            stale = 0
        else:
            stale += 1
            if stale >= config.plateau_patience and lr > config.lr_min:
                lr = max(lr * config.lr_decay, config.lr_min)
                stale = 0

        if (checkpoint_path and config.checkpoint_every
                and (epoch + 1) % config.checkpoint_every == 0
                and epoch + 1 < config.epochs):
            p = Path(checkpoint_path)
            nn.save_checkpoint(params, p.with_name(f"{p.stem}-epoch{epoch + 1:03d}{p.suffix}"))

    if checkpoint_path:
        nn.save_checkpoint(params, checkpoint_path)
    if log_path:
        write_training_log(rows, log_path)
    return params, stats


def write_training_log(rows, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(LOG_COLUMNS)
        for epoch, step, ce, ratio, lr, wall in rows:
            w.writerow([epoch, step, repr(float(ce)), repr(float(ratio)),
                        repr(float(lr)), wall])
