"""Detection-error metrics: threshold sweeps, DET curves, FR at a target
false-alarm rate, and report files for a scored test set.

False-rejection rate is the fraction of positive utterances whose
confidence falls below the threshold. False alarms are counted once per
negative utterance and rated per hour of negative-side audio; confusion
utterances join the negative pool in the confusion test set, duration
included.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .corpus import ManifestEntry, parse_manifest, read_wav
from .detector import DetectorConfig, score_utterance
from .frontend import featurize

REAL_SET = "real"
CONFUSION_SET = "real+synt-cw"


@dataclass(frozen=True)
class DetCurvePoint:
    """One threshold's error rates along a sweep."""

    threshold: float
    fr_rate: float
    fa_per_hour: float

    def __post_init__(self):
        if not 0.0 <= self.fr_rate <= 1.0:
            raise ValueError(f"fr_rate must lie in [0, 1], got {self.fr_rate}")
        if self.fa_per_hour < 0:
            raise ValueError(f"fa_per_hour must be >= 0, got {self.fa_per_hour}")


@dataclass(frozen=True)
class OperatingPoint:
    """FR and threshold where a sweep meets the target false-alarm rate.

    below_target is True when even the most permissive threshold yields
    fewer false alarms per hour than the target; the reported values then
    come from that lowest-threshold point.
    """

    fr_rate: float
    threshold: float
    below_target: bool = False


@dataclass(frozen=True)
class ScoredUtterance:
    """Detector output for one test utterance plus its manifest facts."""

    utterance_id: str
    label: str
    cluster: str
    confidence: float
    best_window_start: int
    duration_s: float


@dataclass(frozen=True)
class EvalRow:
    """One test set's operating point for the report."""

    setup: str
    test_set: str
    fr_percent: float
    threshold: float
    below_target: bool
    n_pos: int
    n_neg: int
    neg_hours: float


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]
    curves: dict[str, tuple[DetCurvePoint, ...]]
    files: dict[str, Path]
    target_fa_per_hour: float


def sweep(pos_confidences, neg_scored) -> list[DetCurvePoint]:
    """Build a DET curve from per-utterance confidences.

    neg_scored is a sequence of (confidence, duration_s) pairs; durations
    feed the false-alarm denominator. Thresholds are every distinct
    confidence plus one sentinel just below the minimum and one just above
    the maximum, so the curve spans (FR=0-ish, all-FA) to (FR=1, FA=0).
    """
    pos = np.asarray(list(pos_confidences), dtype=np.float64)
    neg_pairs = list(neg_scored)
    if pos.size == 0:
        raise ValueError("sweep needs at least one positive utterance")
    if not neg_pairs:
        raise ValueError("sweep needs at least one negative utterance")
    neg = np.asarray([c for c, _ in neg_pairs], dtype=np.float64)
    durations = np.asarray([d for _, d in neg_pairs], dtype=np.float64)
    if np.any(durations <= 0):
        raise ValueError("negative utterance durations must be positive")
    if not (np.isfinite(pos).all() and np.isfinite(neg).all()):
        raise ValueError("confidences must be finite")

    hours = float(durations.sum()) / 3600.0
    values = np.unique(np.concatenate([pos, neg]))
    thresholds = np.concatenate(
        [
            [np.nextafter(values[0], -np.inf)],
            values,
            [np.nextafter(values[-1], np.inf)],
        ]
    )
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    points = []
    for theta in thresholds:
        n_fr = int(np.searchsorted(pos_sorted, theta, side="left"))
        n_fa = neg.size - int(np.searchsorted(neg_sorted, theta, side="left"))
        points.append(
            DetCurvePoint(
                threshold=float(theta),
                fr_rate=n_fr / pos.size,
                fa_per_hour=n_fa / hours,
            )
        )
    return points


def fr_at_fa(points, target_fa_per_hour: float = 1.0) -> OperatingPoint:
    """Read the FR where the curve crosses the target FA rate.

    Exact hits return that point's FR; otherwise FR is linearly
    interpolated in (FA, FR) between the bracketing points and the lower
    of the two thresholds is reported. When every point's FA is already
    under the target, the lowest-threshold point is returned with
    below_target set.
    """
    points = sorted(points, key=lambda p: p.threshold)
    if not points:
        raise ValueError("cannot place an operating point on an empty curve")
    fas = np.asarray([p.fa_per_hour for p in points])
    frs = np.asarray([p.fr_rate for p in points])

    exact = np.nonzero(fas == target_fa_per_hour)[0]
    if exact.size:
        i = int(exact[0])
        return OperatingPoint(float(frs[i]), points[i].threshold)
    above = np.nonzero(fas > target_fa_per_hour)[0]
    below = np.nonzero(fas < target_fa_per_hour)[0]
    if above.size == 0:
        return OperatingPoint(float(frs[0]), points[0].threshold, below_target=True)
    if below.size == 0:
        i = len(points) - 1
        return OperatingPoint(float(frs[i]), points[i].threshold)
    i_hi = int(above[-1])
    i_lo = i_hi + 1
    fa_a, fr_a = fas[i_hi], frs[i_hi]
    fa_b, fr_b = fas[i_lo], frs[i_lo]
    fr = fr_b + (fr_a - fr_b) * (target_fa_per_hour - fa_b) / (fa_a - fa_b)
    return OperatingPoint(float(fr), points[i_hi].threshold)


def score_manifest(
    params: nn.ModelParams,
    entries,
    base_dir,
    config: DetectorConfig | None = None,
    jobs: int = 1,
) -> list[ScoredUtterance]:
    """Run the detector over every manifest entry, in manifest order."""
    base_dir = Path(base_dir)
    if config is None:
        config = DetectorConfig()

    def one(entry: ManifestEntry) -> ScoredUtterance:
        buf = read_wav(base_dir / entry.path)
        res = score_utterance(
            params, featurize(buf), config, utterance_id=entry.utterance_id
        )
        return ScoredUtterance(
            utterance_id=entry.utterance_id,
            label=entry.label,
            cluster=entry.cluster,
            confidence=res.confidence,
            best_window_start=res.best_window_start,
            duration_s=entry.duration_s,
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, entries))
    return [one(e) for e in entries]


def curve_inputs(scored, include_confusion: bool):
    """Split scored utterances into sweep() inputs for one test set."""
    pos = [s.confidence for s in scored if s.cluster == "real-pos"]
    neg_tags = {"real-neg", "synt-neg"} if include_confusion else {"real-neg"}
    neg = [(s.confidence, s.duration_s) for s in scored if s.cluster in neg_tags]
    return pos, neg


def write_det_csv(points, path) -> None:
    """Write threshold,fr_rate,fa_per_hour rows at 17 significant digits."""
    path = Path(path)
    with open(path, "w", newline="\n") as f:
        f.write("threshold,fr_rate,fa_per_hour\n")
        for p in points:
            f.write(f"{p.threshold:.17g},{p.fr_rate:.17g},{p.fa_per_hour:.17g}\n")


def _set_slug(name: str) -> str:
    out = []
    for ch in name:
        out.append(ch if ch.isalnum() else "_")
    return "".join(out)


def write_report(rows, target_fa_per_hour: float, txt_path, csv_path) -> None:
    """Emit the plain-text operating-point table and its CSV twin."""
    lines = [
        f"false rejection rate (%) at {target_fa_per_hour:g} false alarm(s) per hour",
        "false-alarm denominator: hours of negative-side audio in the test set",
        "(confusion utterances count as negative audio where present)",
        "",
        f"{'setup':<16} {'test set':<16} {'FR%':>9} {'threshold':>12} "
        f"{'n_pos':>6} {'n_neg':>6} {'neg_hours':>10}",
    ]
    for r in rows:
        note = "  [FA stays below target]" if r.below_target else ""
        lines.append(
            f"{r.setup:<16} {r.test_set:<16} {r.fr_percent:>9.3f} "
            f"{r.threshold:>12.6g} {r.n_pos:>6d} {r.n_neg:>6d} "
            f"{r.neg_hours:>10.4f}{note}"
        )
    with open(txt_path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")

    with open(csv_path, "w", newline="\n") as f:
        f.write(
            "setup,test_set,fr_percent,threshold,below_target,"
            "target_fa_per_hour,n_pos,n_neg,neg_hours\n"
        )
        for r in rows:
            f.write(
                f"{r.setup},{r.test_set},{r.fr_percent:.17g},"
                f"{r.threshold:.17g},{int(r.below_target)},"
                f"{target_fa_per_hour:.17g},{r.n_pos},{r.n_neg},"
                f"{r.neg_hours:.17g}\n"
            )


def evaluate(
    params: nn.ModelParams,
    source,
    base_dir=None,
    out_dir=None,
    setup_label: str = "model",
    target_fa_per_hour: float = 1.0,
    config: DetectorConfig | None = None,
    jobs: int = 1,
    test_sets=None,
) -> EvalReport:
    """Score a test manifest, build DET curves and place operating points.

    source is a manifest path or a sequence of ManifestEntry (base_dir
    required for the latter). The clean test set uses plain negatives
    only; when confusion utterances are present a second test set adds
    them to the negative pool. test_sets restricts which sets are built
    (None picks every applicable one). With out_dir set, per-curve DET
    CSVs, a plain-text report, its CSV twin and a curve figure are
    written there.
    """
    if isinstance(source, (str, Path)):
        manifest = Path(source)
        entries = parse_manifest(manifest)
        if base_dir is None:
            base_dir = manifest.parent
    else:
        entries = list(source)
        if base_dir is None:
            raise ValueError("base_dir is required when passing entries directly")

    scored = score_manifest(params, entries, base_dir, config=config, jobs=jobs)
    has_confusion = any(s.cluster == "synt-neg" for s in scored)
    if test_sets is None:
        set_names = [REAL_SET] + ([CONFUSION_SET] if has_confusion else [])
    else:
        set_names = list(test_sets)
        for name in set_names:
            if name not in (REAL_SET, CONFUSION_SET):
                raise ValueError(
                    f"unknown test set {name!r}; valid: {REAL_SET}, {CONFUSION_SET}"
                )
            if name == CONFUSION_SET and not has_confusion:
                raise ValueError(
                    "test set real+synt-cw needs confusion utterances in the manifest"
                )

    curves: dict[str, tuple[DetCurvePoint, ...]] = {}
    rows = []
    for name in set_names:
        pos, neg = curve_inputs(scored, include_confusion=(name == CONFUSION_SET))
        points = sweep(pos, neg)
        curves[name] = tuple(points)
        op = fr_at_fa(points, target_fa_per_hour)
        rows.append(
            EvalRow(
                setup=setup_label,
                test_set=name,
                fr_percent=100.0 * op.fr_rate,
                threshold=op.threshold,
                below_target=op.below_target,
                n_pos=len(pos),
                n_neg=len(neg),
                neg_hours=sum(d for _, d in neg) / 3600.0,
            )
        )

    files: dict[str, Path] = {}
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, points in curves.items():
            path = out_dir / f"det_{_set_slug(name)}.csv"
            write_det_csv(points, path)
            files[name] = path
        txt_path = out_dir / "report.txt"
        csv_path = out_dir / "report.csv"
        write_report(rows, target_fa_per_hour, txt_path, csv_path)
        files["report_txt"] = txt_path
        files["report_csv"] = csv_path
        from .figures import save_det_curves

        fig_path = out_dir / "det_curves.png"
        save_det_curves(curves, fig_path, target_fa_per_hour=target_fa_per_hour)
        files["figure"] = fig_path

    return EvalReport(
        rows=tuple(rows),
        curves=curves,
        files=files,
        target_fa_per_hour=target_fa_per_hour,
    )
