"""Command-line front end tying the library into one binary.

Subcommands cover the whole workflow: corpus generation, feature
extraction, augmentation preview, training, evaluation and detection.
Every subcommand accepts a `key = value` config file whose values sit
between built-in defaults and explicit flags (flag > config > default),
prints its resolved settings and seed, and exits 0 on success, 1 on a
validation problem, 2 on a runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from pathlib import Path

from . import augment, evaluation, frontend, nn, trainer
from .corpus import CorpusSpec, generate_corpus, parse_manifest, read_wav, write_wav
from .detector import (
    DEFAULT_CHUNK_S,
    DEFAULT_HOP_S,
    DEFAULT_REFRACTORY_S,
    DetectorConfig,
    detect_stream,
)

SETUP_HELP = (
    "training setup: baseline (real positives and negatives only), "
    "mask (adds masked-audio variants of positives as extra negatives), "
    "synt-cw / synt-cw-neg (add synthetic confusion words as extra "
    "negatives), synt-cw-coral / full-coral (confusion words plus the "
    "covariance-alignment loss on the embedding)"
)


class CliError(Exception):
    """User-facing validation problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract reserves 2 for
    # runtime failures, so remap argument problems to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _default_jobs() -> int:
    return os.cpu_count() or 1


def _load_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise CliError(f"config file not found: {p}")
        with open(p, encoding="utf-8") as f:
            cp.read_file(f)
    return cp


def _resolve(flag_value, cfg, section, key, default, cast=str):
    """flag > config-file value > default."""
    if flag_value is not None:
        return flag_value
    if cfg.has_option(section, key):
        raw = cfg.get(section, key)
        try:
            return cast(raw)
        except (TypeError, ValueError) as e:
            raise CliError(f"config [{section}] {key} = {raw!r}: {e}") from None
    return default


def _bool(raw) -> bool:
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _int_tuple(raw) -> tuple[int, ...]:
    return tuple(int(v) for v in str(raw).replace(",", " ").split())


def _print_resolved(section: str, settings: dict) -> None:
    print(f"resolved config [{section}]")
    for key in sorted(settings):
        print(f"  {key} = {settings[key]}")


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} not found: {p}")
    return p


# ---------------------------------------------------------------------------
# gen-corpus
# ---------------------------------------------------------------------------


def _cmd_gen_corpus(args, cfg) -> int:
    sec = "corpus"
    spec = CorpusSpec(
        n_speakers=_resolve(args.speakers, cfg, sec, "speakers", 10, int),
        n_pos=_resolve(args.pos, cfg, sec, "pos", 20, int),
        n_neg=_resolve(args.neg, cfg, sec, "neg", 40, int),
        n_confusion=_resolve(args.confusion, cfg, sec, "confusion", 20, int),
        seed=_resolve(args.seed, cfg, sec, "seed", 0, int),
        sample_rate=_resolve(None, cfg, sec, "sample_rate", 16000, int),
    )
    out = Path(args.out)
    _print_resolved(
        "gen-corpus",
        {
            "speakers": spec.n_speakers,
            "pos": spec.n_pos,
            "neg": spec.n_neg,
            "confusion": spec.n_confusion,
            "sample_rate": spec.sample_rate,
            "seed": spec.seed,
            "out": out,
        },
    )
    try:
        entries = generate_corpus(spec, out)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {len(entries)} utterances and manifest.txt under {out}")
    return 0


# ---------------------------------------------------------------------------
# featurize
# ---------------------------------------------------------------------------


def _cmd_featurize(args, cfg) -> int:
    manifest = _require_file(args.manifest, "manifest")
    entries = parse_manifest(manifest)
    out = Path(args.out)
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    seed = args.seed if args.seed is not None else 0
    _print_resolved(
        "featurize",
        {"manifest": manifest, "out": out, "jobs": jobs, "seed": seed},
    )

    base = manifest.parent

    def one(entry):
        feat = frontend.featurize(read_wav(base / entry.path))
        frontend.write_features(feat, out / f"{entry.utterance_id}.feat")
        return feat.shape[0]

    try:
        out.mkdir(parents=True, exist_ok=True)
        if jobs > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=jobs) as pool:
                frames = list(pool.map(one, entries))
        else:
            frames = [one(e) for e in entries]
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {len(frames)} feature files ({sum(frames)} frames) under {out}")
    return 0


# ---------------------------------------------------------------------------
# augment
# ---------------------------------------------------------------------------


def _cmd_augment(args, cfg) -> int:
    manifest = _require_file(args.manifest, "manifest")
    entries = parse_manifest(manifest)
    out = Path(args.out)
    seed = args.seed if args.seed is not None else 0
    variants = args.variants if args.variants is not None else 5
    mode = args.mode if args.mode is not None else "waveform"
    spec = augment.MaskSpec(seed=seed, n_variants=variants, mode=mode)
    _print_resolved(
        "augment",
        {"manifest": manifest, "out": out, "seed": seed,
         "variants": variants, "mode": mode},
    )

    positives = [e for e in entries if e.label == "positive"]
    if not positives:
        raise CliError("manifest has no positive utterances to augment")
    base = manifest.parent
    written = 0
    try:
        out.mkdir(parents=True, exist_ok=True)
        for entry in positives:
            buf = read_wav(base / entry.path)
            if mode == "waveform":
                for v, masked in enumerate(
                    augment.mask_batch(buf, spec, entry.utterance_id)
                ):
                    write_wav(masked, out / f"{entry.utterance_id}.mask{v}.wav")
                    written += 1
            else:
                seg = frontend.cut_segment(frontend.featurize(buf), entry.onset_frame)
                for v in range(variants):
                    rng = augment.variant_rng(seed, entry.utterance_id, v)
                    masked = augment.mask_feature(seg, spec, rng)
                    frontend.write_features(
                        masked, out / f"{entry.utterance_id}.mask{v}.feat"
                    )
                    written += 1
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {written} masked variants under {out}")
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _cmd_train(args, cfg) -> int:
    sec = "train"
    manifest = _require_file(args.manifest, "manifest")
    quota_raw = _resolve(None, cfg, sec, "cluster_quota", None, _int_tuple)
    try:
        config = trainer.TrainConfig(
            setup=_resolve(args.setup, cfg, sec, "setup", "baseline"),
            epochs=_resolve(args.epochs, cfg, sec, "epochs", 100, int),
            lr0=_resolve(args.lr0, cfg, sec, "lr0", 0.01, float),
            momentum=_resolve(args.momentum, cfg, sec, "momentum", 0.9, float),
            plateau_patience=_resolve(None, cfg, sec, "plateau_patience", 3, int),
            lr_decay=_resolve(None, cfg, sec, "lr_decay", 0.5, float),
            lr_min=_resolve(None, cfg, sec, "lr_min", 1e-5, float),
            batch_size=_resolve(args.batch_size, cfg, sec, "batch_size", 32, int),
            cluster_quota=quota_raw,
            seed=_resolve(args.seed, cfg, sec, "seed", 0, int),
            channels=_resolve(args.channels, cfg, sec, "channels",
                              (32, 32, 64), _int_tuple),
            d_emb=_resolve(args.d_emb, cfg, sec, "d_emb", 128, int),
            mask_variants=_resolve(None, cfg, sec, "mask_variants", 5, int),
            mask_mode=_resolve(None, cfg, sec, "mask_mode", "waveform"),
            mask_noise_rms=_resolve(None, cfg, sec, "mask_noise_rms", 0.05, float),
            min_pos_fraction=_resolve(None, cfg, sec, "min_pos_fraction", 0.0, float),
            coral_warmup_epochs=_resolve(None, cfg, sec, "coral_warmup_epochs",
                                         0, int),
            checkpoint_every=_resolve(None, cfg, sec, "checkpoint_every", 0, int),
        )
    except ValueError as e:
        raise CliError(str(e)) from None

    out = Path(args.out)
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    ckpt_path = out / f"{config.setup}.ckpt"
    log_path = out / f"{config.setup}-log.csv"
    resolved = {f: getattr(config, f) for f in (
        "setup", "epochs", "lr0", "momentum", "plateau_patience", "lr_decay",
        "lr_min", "batch_size", "cluster_quota", "seed", "channels", "d_emb",
        "mask_variants", "mask_mode", "mask_noise_rms", "min_pos_fraction",
        "coral_warmup_epochs", "checkpoint_every",
    )}
    resolved.update(manifest=manifest, out=out, jobs=jobs,
                    checkpoint=ckpt_path, log=log_path)
    _print_resolved("train", resolved)

    try:
        out.mkdir(parents=True, exist_ok=True)
        params, stats = trainer.train(
            config,
            manifest,
            log_path=log_path,
            checkpoint_path=ckpt_path,
            jobs=jobs,
            verbose=args.verbose,
        )
    except (RuntimeError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    last = stats[-1]
    print(
        f"trained {config.setup} for {len(stats)} epochs: "
        f"final mean ce {last.mean_ce:.6f}, checkpoint {ckpt_path}"
    )
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

_TEST_CHOICES = ("real", "real+synt-cw", "both")


def _test_sets_arg(choice: str):
    if choice == "both":
        return None
    return (choice,)


def _cmd_eval(args, cfg) -> int:
    sec = "eval"
    model = _require_file(args.model, "model checkpoint")
    manifest = _require_file(args.manifest, "manifest")
    test = _resolve(args.test, cfg, sec, "test", "both")
    if test not in _TEST_CHOICES:
        raise CliError(f"unknown test set {test!r}; valid: {', '.join(_TEST_CHOICES)}")
    stride = _resolve(args.stride, cfg, sec, "stride", 1, int)
    target = _resolve(args.target_fa, cfg, sec, "target_fa_per_hour", 1.0, float)
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    seed = args.seed if args.seed is not None else 0
    label = args.setup if args.setup is not None else model.stem
    out = Path(args.out)
    _print_resolved(
        "eval",
        {"model": model, "manifest": manifest, "out": out, "test": test,
         "stride": stride, "target_fa_per_hour": target, "jobs": jobs,
         "seed": seed, "setup": label},
    )

    try:
        params = nn.load_checkpoint(model)
        detector_config = DetectorConfig(window_frames=params.arch.in_h,
                                         stride=stride)
    except ValueError as e:
        raise CliError(str(e)) from None
    try:
        report = evaluation.evaluate(
            params,
            manifest,
            out_dir=out,
            setup_label=label,
            target_fa_per_hour=target,
            config=detector_config,
            jobs=jobs,
            test_sets=_test_sets_arg(test),
        )
    except ValueError as e:
        raise CliError(str(e)) from None
    except (RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print((out / "report.txt").read_text(), end="")
    return 0


# ---------------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------------


def _cmd_detect(args, cfg) -> int:
    sec = "detect"
    model = _require_file(args.model, "model checkpoint")
    if (args.manifest is None) == (args.wav is None):
        raise CliError("pass exactly one of --manifest or --wav")
    threshold = _resolve(args.threshold, cfg, sec, "threshold", 0.5, float)
    stride = _resolve(args.stride, cfg, sec, "stride", 1, int)
    chunk_s = _resolve(None, cfg, sec, "chunk_s", DEFAULT_CHUNK_S, float)
    hop_s = _resolve(None, cfg, sec, "hop_s", DEFAULT_HOP_S, float)
    refractory_s = _resolve(None, cfg, sec, "refractory_s",
                            DEFAULT_REFRACTORY_S, float)
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    seed = args.seed if args.seed is not None else 0
    source = args.manifest if args.manifest is not None else args.wav
    _print_resolved(
        "detect",
        {"model": model, "source": source, "out": args.out or "(stdout)",
         "threshold": threshold, "stride": stride, "chunk_s": chunk_s,
         "hop_s": hop_s, "refractory_s": refractory_s, "jobs": jobs,
         "seed": seed},
    )

    try:
        params = nn.load_checkpoint(model)
        detector_config = DetectorConfig(window_frames=params.arch.in_h,
                                         stride=stride, threshold=threshold)
    except ValueError as e:
        raise CliError(str(e)) from None

    try:
        rows = []
        if args.manifest is not None:
            manifest = _require_file(args.manifest, "manifest")
            scored = evaluation.score_manifest(
                params, parse_manifest(manifest), manifest.parent,
                config=detector_config, jobs=jobs,
            )
            for s in scored:
                trig = int(s.confidence >= threshold)
                rows.append(
                    f"{s.utterance_id},{s.confidence:.17g},"
                    f"{s.best_window_start},{trig}"
                )
        else:
            wav = _require_file(args.wav, "wav file")
            results = detect_stream(
                params, read_wav(wav), detector_config,
                utterance_id=wav.stem, chunk_s=chunk_s, hop_s=hop_s,
                refractory_s=refractory_s,
            )
            for r in results:
                rows.append(
                    f"{r.utterance_id},{r.confidence:.17g},"
                    f"{r.best_window_start},{int(r.triggered)}"
                )
    except (RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    header = "id,confidence,best_start_frame,triggered"
    if args.out is not None:
        with open(args.out, "w", newline="\n") as f:
            f.write(header + "\n")
            f.writelines(row + "\n" for row in rows)
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        print(header)
        for row in rows:
            print(row)
    return 0


# ---------------------------------------------------------------------------
# det-curve
# ---------------------------------------------------------------------------


def _read_scores_csv(path) -> dict[str, float]:
    scores = {}
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip()
        if not header.startswith("id,confidence"):
            raise CliError(
                f"{path}: expected a detect output CSV starting with "
                f"'id,confidence', got {header!r}"
            )
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise CliError(f"{path}:{lineno}: malformed row {line!r}")
            scores[parts[0]] = float(parts[1])
    return scores


def _cmd_det_curve(args, cfg) -> int:
    sec = "eval"
    scores_path = _require_file(args.scores, "scores CSV")
    manifest = _require_file(args.manifest, "manifest")
    test = _resolve(args.test, cfg, sec, "test", "both")
    if test not in _TEST_CHOICES:
        raise CliError(f"unknown test set {test!r}; valid: {', '.join(_TEST_CHOICES)}")
    target = _resolve(args.target_fa, cfg, sec, "target_fa_per_hour", 1.0, float)
    seed = args.seed if args.seed is not None else 0
    out = Path(args.out)
    _print_resolved(
        "det-curve",
        {"scores": scores_path, "manifest": manifest, "out": out,
         "test": test, "target_fa_per_hour": target, "seed": seed},
    )

    scores = _read_scores_csv(scores_path)
    entries = parse_manifest(manifest)
    missing = [e.utterance_id for e in entries if e.utterance_id not in scores]
    if missing:
        raise CliError(
            f"scores CSV lacks {len(missing)} manifest ids "
            f"(first: {missing[0]}); run detect over the same manifest"
        )

    pos = [scores[e.utterance_id] for e in entries if e.cluster == "real-pos"]
    real_neg = [(scores[e.utterance_id], e.duration_s)
                for e in entries if e.cluster == "real-neg"]
    synt_neg = [(scores[e.utterance_id], e.duration_s)
                for e in entries if e.cluster == "synt-neg"]

    wanted = _test_sets_arg(test)
    if wanted is None:
        names = [evaluation.REAL_SET] + (
            [evaluation.CONFUSION_SET] if synt_neg else []
        )
    else:
        names = list(wanted)
        if evaluation.CONFUSION_SET in names and not synt_neg:
            raise CliError(
                "test set real+synt-cw needs confusion utterances in the manifest"
            )

    try:
        out.mkdir(parents=True, exist_ok=True)
        curves = {}
        for name in names:
            neg = real_neg + (synt_neg if name == evaluation.CONFUSION_SET else [])
            points = evaluation.sweep(pos, neg)
            curves[name] = points
            evaluation.write_det_csv(
                points, out / f"det_{evaluation._set_slug(name)}.csv"
            )
            op = evaluation.fr_at_fa(points, target)
            flag = " (FA stays below target)" if op.below_target else ""
            print(
                f"{name}: FR {100.0 * op.fr_rate:.3f}% at {target:g} FA/h, "
                f"threshold {op.threshold:.6g}{flag}"
            )
        from .figures import save_det_curves

        save_det_curves(curves, out / "det_curves.png", target_fa_per_hour=target)
    except ValueError as e:
        raise CliError(str(e)) from None
    except (RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="kwskit",
        description="keyword-spotting toolkit: synthetic corpus, log-mel "
                    "features, CNN training, detection and DET-curve reports",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(p):
        p.add_argument("--config", default=None,
                       help="key = value config file (default: none)")
        p.add_argument("--seed", type=int, default=None,
                       help="base random seed (default: 0)")

    p = sub.add_parser(
        "gen-corpus", help="synthesize a labeled corpus of WAVs + manifest",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--speakers", type=int, default=None,
                   help="number of speakers (default: 10)")
    p.add_argument("--pos", type=int, default=None,
                   help="keyword utterances per speaker (default: 20)")
    p.add_argument("--neg", type=int, default=None,
                   help="plain negative utterances per speaker (default: 40)")
    p.add_argument("--confusion", type=int, default=None,
                   help="confusion-word utterances per speaker (default: 20)")
    p.set_defaults(func=_cmd_gen_corpus)

    p = sub.add_parser(
        "featurize", help="extract log-mel feature files for a manifest",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    common(p)
    p.add_argument("--manifest", required=True, help="corpus manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker threads (default: cpu count)")
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser(
        "augment", help="write masked variants of the positive utterances",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    common(p)
    p.add_argument("--manifest", required=True, help="corpus manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--variants", type=int, default=None,
                   help="masked variants per positive (default: 5)")
    p.add_argument("--mode", choices=augment.MASK_MODES, default=None,
                   help="mask the waveform or the feature segment "
                        "(default: waveform)")
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser(
        "train", help="train a keyword classifier under one setup",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    common(p)
    p.add_argument("--manifest", required=True, help="training manifest")
    p.add_argument("--out", required=True, help="checkpoint/log directory")
    p.add_argument("--setup", default=None, help=SETUP_HELP + " (default: baseline)")
    p.add_argument("--epochs", type=int, default=None,
                   help="training epochs (default: 100)")
    p.add_argument("--batch-size", type=int, default=None,
                   help="utterances per step (default: 32)")
    p.add_argument("--lr0", type=float, default=None,
                   help="initial learning rate (default: 0.01)")
    p.add_argument("--momentum", type=float, default=None,
                   help="momentum coefficient (default: 0.9)")
    p.add_argument("--channels", type=_int_tuple, default=None,
                   help="conv channel widths, comma separated "
                        "(default: 32,32,64)")
    p.add_argument("--d-emb", type=int, default=None,
                   help="embedding width (default: 128)")
    p.add_argument("--jobs", type=int, default=None,
                   help="loader threads (default: cpu count)")
    p.add_argument("--verbose", action="store_true",
                   help="per-epoch progress on stderr")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser(
        "eval", help="DET curves, operating points and report for a model",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    common(p)
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--manifest", required=True, help="test manifest")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--test", default=None, choices=_TEST_CHOICES,
                   help="which test set(s) to evaluate (default: both)")
    p.add_argument("--stride", type=int, default=None,
                   help="window stride in frames (default: 1)")
    p.add_argument("--target-fa", type=float, default=None,
                   help="operating-point false alarms per hour (default: 1.0)")
    p.add_argument("--setup", default=None,
                   help="setup label for the report (default: model file stem)")
    p.add_argument("--jobs", type=int, default=None,
                   help="scoring threads (default: cpu count)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser(
        "detect", help="score utterances or a long recording against a threshold",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    common(p)
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--manifest", default=None,
                   help="manifest of utterances to score")
    p.add_argument("--wav", default=None,
                   help="single WAV recording to scan in chunks")
    p.add_argument("--out", default=None,
                   help="output CSV path (default: stdout)")
    p.add_argument("--threshold", type=float, default=None,
                   help="trigger threshold (default: 0.5)")
    p.add_argument("--stride", type=int, default=None,
                   help="window stride in frames (default: 1)")
    p.add_argument("--jobs", type=int, default=None,
                   help="scoring threads (default: cpu count)")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser(
        "det-curve", help="build DET curves from a detect scores CSV",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    common(p)
    p.add_argument("--scores", required=True, help="CSV written by detect")
    p.add_argument("--manifest", required=True,
                   help="manifest with labels and durations")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--test", default=None, choices=_TEST_CHOICES,
                   help="which test set(s) to plot (default: both)")
    p.add_argument("--target-fa", type=float, default=None,
                   help="operating-point false alarms per hour (default: 1.0)")
    p.set_defaults(func=_cmd_det_curve)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, configparser.Error) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
