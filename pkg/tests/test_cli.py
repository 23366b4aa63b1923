import subprocess
import sys

import pytest

from kwskit.cli import run

TINY_TRAIN = """\
[train]
channels = 2,2,4
d_emb = 8
epochs = 2
batch_size = 8
"""


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_corpus")
    code = run([
        "gen-corpus", "--out", str(root), "--speakers", "2",
        "--pos", "2", "--neg", "2", "--confusion", "2", "--seed", "3",
    ])
    assert code == 0
    return root


@pytest.fixture(scope="module")
def tiny_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.ini"
    path.write_text(TINY_TRAIN)
    return path


@pytest.fixture(scope="module")
def trained(corpus, tiny_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt")
    code = run([
        "train", "--manifest", str(corpus / "manifest.txt"),
        "--out", str(out), "--config", str(tiny_config), "--seed", "0",
    ])
    assert code == 0
    return out / "baseline.ckpt"


def test_gen_corpus_output(corpus, capsys):
    assert (corpus / "manifest.txt").is_file()
    wavs = list(corpus.glob("**/*.wav"))
    assert len(wavs) == 12


def test_resolved_config_and_seed_printed(corpus, capsys):
    code = run([
        "detect", "--model", "nonexistent.ckpt",
        "--manifest", str(corpus / "manifest.txt"),
    ])
    assert code == 1  # missing model caught during validation
    code = run([
        "featurize", "--manifest", str(corpus / "manifest.txt"),
        "--out", str(corpus / "feats"), "--jobs", "2", "--seed", "9",
    ])
    captured = capsys.readouterr()
    assert code == 0
    assert "resolved config [featurize]" in captured.out
    assert "seed = 9" in captured.out
    assert len(list((corpus / "feats").glob("*.feat"))) == 12


def test_bogus_setup_exits_1_and_lists_names(corpus, tmp_path, capsys):
    code = run([
        "train", "--manifest", str(corpus / "manifest.txt"),
        "--out", str(tmp_path), "--setup", "bogus",
    ])
    captured = capsys.readouterr()
    assert code == 1
    for name in ("baseline", "mask", "synt-cw", "synt-cw-neg",
                 "synt-cw-coral", "full-coral"):
        assert name in captured.err


def test_unknown_flag_exits_1(capsys):
    code = run(["gen-corpus", "--out", "x", "--bogus-flag", "1"])
    captured = capsys.readouterr()
    assert code == 1
    assert "bogus-flag" in captured.err


def test_help_exits_0_everywhere(capsys):
    assert run(["--help"]) == 0
    for cmd in ("gen-corpus", "featurize", "augment", "train", "eval",
                "detect", "det-curve"):
        assert run([cmd, "--help"]) == 0
        out = capsys.readouterr().out
        assert "--seed" in out
        assert "default" in out


def test_missing_config_file_exits_1(capsys):
    code = run(["gen-corpus", "--out", "x", "--config", "no-such.ini"])
    captured = capsys.readouterr()
    assert code == 1
    assert "config file not found" in captured.err


def test_config_precedence(corpus, tmp_path, capsys):
    cfg = tmp_path / "cfg.ini"
    cfg.write_text("[train]\nepochs = 7\nchannels = 2,2,4\nd_emb = 8\n"
                   "batch_size = 8\n")
    code = run([
        "train", "--manifest", str(corpus / "manifest.txt"),
        "--out", str(tmp_path / "a"), "--config", str(cfg), "--epochs", "1",
    ])
    captured = capsys.readouterr()
    assert code == 0
    assert "epochs = 1" in captured.out  # flag beats config
    assert "channels = (2, 2, 4)" in captured.out  # config beats default


def test_train_then_eval_report(trained, corpus, tmp_path, capsys):
    out = tmp_path / "report"
    code = run([
        "eval", "--model", str(trained),
        "--manifest", str(corpus / "manifest.txt"), "--out", str(out),
    ])
    captured = capsys.readouterr()
    assert code == 0
    assert (out / "det_real.csv").is_file()
    assert (out / "det_real_synt_cw.csv").is_file()
    assert (out / "report.txt").is_file()
    assert (out / "report.csv").is_file()
    assert (out / "det_curves.png").is_file()
    assert "false alarm" in captured.out
    assert "baseline" in captured.out


def test_detect_manifest_and_det_curve(trained, corpus, tmp_path, capsys):
    scores = tmp_path / "scores.csv"
    code = run([
        "detect", "--model", str(trained),
        "--manifest", str(corpus / "manifest.txt"), "--out", str(scores),
    ])
    assert code == 0
    lines = scores.read_text().splitlines()
    assert lines[0] == "id,confidence,best_start_frame,triggered"
    assert len(lines) == 13

    curve_dir = tmp_path / "curves"
    code = run([
        "det-curve", "--scores", str(scores),
        "--manifest", str(corpus / "manifest.txt"), "--out", str(curve_dir),
    ])
    captured = capsys.readouterr()
    assert code == 0
    assert (curve_dir / "det_real.csv").is_file()
    assert (curve_dir / "det_curves.png").is_file()
    assert "FR" in captured.out


def test_detect_wav_stream(trained, corpus, capsys):
    wav = next(corpus.glob("**/*.wav"))
    code = run(["detect", "--model", str(trained), "--wav", str(wav)])
    captured = capsys.readouterr()
    assert code == 0
    body = captured.out.split("id,confidence,best_start_frame,triggered\n")[1]
    assert all(line.count(",") == 3 for line in body.splitlines())


def test_detect_needs_exactly_one_source(trained, corpus, capsys):
    code = run(["detect", "--model", str(trained)])
    assert code == 1
    code = run([
        "detect", "--model", str(trained),
        "--manifest", str(corpus / "manifest.txt"),
        "--wav", "x.wav",
    ])
    assert code == 1
    assert "exactly one" in capsys.readouterr().err


def test_eval_confusion_set_requires_confusion_entries(
        trained, corpus, tmp_path, capsys):
    from kwskit.corpus import parse_manifest, write_manifest

    entries = [e for e in parse_manifest(corpus / "manifest.txt")
               if e.cluster != "synt-neg"]
    clean_dir = tmp_path / "clean"
    clean_dir.mkdir()
    write_manifest(entries, clean_dir / "manifest.txt")
    for src in corpus.glob("**/*.wav"):
        rel = src.relative_to(corpus)
        dst = clean_dir / rel
        dst.parent.mkdir(parents=True, exist_ok=True)
        dst.write_bytes(src.read_bytes())
    code = run([
        "eval", "--model", str(trained),
        "--manifest", str(clean_dir / "manifest.txt"),
        "--out", str(tmp_path / "r"), "--test", "real+synt-cw",
    ])
    captured = capsys.readouterr()
    assert code == 1
    assert "confusion" in captured.err


def test_train_reruns_byte_identical(corpus, tiny_config, tmp_path):
    outs = []
    for sub, jobs in (("a", "1"), ("b", "8")):
        out = tmp_path / sub
        code = run([
            "train", "--manifest", str(corpus / "manifest.txt"),
            "--out", str(out), "--config", str(tiny_config),
            "--seed", "4", "--jobs", jobs,
        ])
        assert code == 0
        outs.append(out)
    a, b = outs
    assert (a / "baseline.ckpt").read_bytes() == (b / "baseline.ckpt").read_bytes()
    assert (a / "baseline-log.csv").read_bytes() == (b / "baseline-log.csv").read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "kwskit", "gen-corpus", "--out",
         str(tmp_path / "c"), "--speakers", "1", "--pos", "1",
         "--neg", "1", "--confusion", "0", "--seed", "1"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert (tmp_path / "c" / "manifest.txt").is_file()
