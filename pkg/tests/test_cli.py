"""Command-line interface: subcommands, exit codes, config files and reproducibility."""
from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import DALE
from punctmodel.cli import EXIT_EMPTY, EXIT_INPUT, EXIT_RELATIONS, main
from punctmodel.corpus import load_treebank, parse_conllu, write_conllu
from punctmodel.synthetic import planted_corpus, planted_model
from punctmodel.tasks import to_raw_sentence

COMMANDS = ("train", "train-correction", "inspect-channel", "perplexity", "restore", "correct",
            "rephrase", "recover", "eval-aed", "eval-f05", "trigram-ppl")


def write_corpus(path, sentences):
    path.write_text(write_conllu(to_raw_sentence(s) for s in sentences), encoding="utf-8")
    return str(path)


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    """A planted corpus on disk plus a model trained on it by the CLI."""
    d = tmp_path_factory.mktemp("cli")
    rng = np.random.default_rng(0)
    model = planted_model()
    files = {
        "train": write_corpus(d / "train.conllu", planted_corpus(model, 40, rng)),
        "dev": write_corpus(d / "dev.conllu", planted_corpus(model, 10, rng, "d")),
        "test": write_corpus(d / "test.conllu", planted_corpus(model, 6, rng, "t")),
        "model": str(d / "m.txt"),
        "dir": d,
    }
    code = main(["train", "--train", files["train"], "--dev", files["dev"], "--out",
                 files["model"], "--epochs", "2", "--per-epoch", "20", "--unk-threshold", "1"])
    assert code == 0
    return files


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestHelp:
    def test_top_level(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert all(c in out for c in COMMANDS)

    @pytest.mark.parametrize("command", COMMANDS)
    def test_subcommand_help(self, command, capsys):
        with pytest.raises(SystemExit) as exc:
            main([command, "--help"])
        assert exc.value.code == 0
        assert "--seed" in capsys.readouterr().out

    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["perplexity", "--model", "m", "--input", "x", "--bogus"])
        assert exc.value.code == 2

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "punctmodel.cli", "--help"],
                             capture_output=True, text=True)
        assert res.returncode == 0 and "restore" in res.stdout


class TestTrain:
    def test_outputs(self, work):
        d = work["dir"]
        assert (d / "m.txt").exists() and (d / "m.txt.best").exists()
        rows = (d / "m.txt.log.tsv").read_text().splitlines()
        assert rows[0].startswith("epoch") and len(rows) == 3

    def test_reproducible_across_processes(self, work, tmp_path):
        outs = []
        for hashseed in ("1", "2"):
            out = tmp_path / f"m{hashseed}"
            subprocess.run([sys.executable, "-m", "punctmodel.cli", "train", "--train",
                            work["dev"], "--out", str(out), "--epochs", "1", "--per-epoch", "10",
                            "--unk-threshold", "1"], check=True,
                           env={**os.environ, "PYTHONHASHSEED": hashseed})
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_empty_treebank(self, tmp_path, capsys):
        src = tmp_path / "e.conllu"
        src.write_text("")
        code, _, err = run(["train", "--train", str(src), "--out", str(tmp_path / "m")], capsys)
        assert code == EXIT_EMPTY and "no trainable" in err

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(["train", "--train", str(tmp_path / "nope"), "--out",
                            str(tmp_path / "m")], capsys)
        assert code == EXIT_INPUT and "cannot read" in err

    def test_malformed_conllu(self, tmp_path, capsys):
        src = tmp_path / "bad.conllu"
        src.write_text("1\tonly\tthree\n\n")
        code, _, _ = run(["train", "--train", str(src), "--out", str(tmp_path / "m")], capsys)
        assert code == EXIT_INPUT


class TestModelCommands:
    def test_perplexity(self, work, capsys):
        code, out, _ = run(["perplexity", "--model", work["model"], "--input", work["test"]],
                           capsys)
        header, row = out.splitlines()
        assert code == 0 and header.split("\t")[-1] == "perplexity"
        assert 1.0 <= float(row.split("\t")[-1]) < 10.0

    def test_corrupt_model(self, work, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("not a model\n")
        code, _, _ = run(["perplexity", "--model", str(bad), "--input", work["test"]], capsys)
        assert code == EXIT_INPUT

    def test_unknown_relation(self, work, tmp_path, capsys):
        src = tmp_path / "dale.conllu"
        src.write_text(DALE)
        argv = ["perplexity", "--model", work["model"], "--input", str(src)]
        code, _, err = run(argv + ["--no-backoff"], capsys)
        assert code == EXIT_RELATIONS and "relations unknown" in err
        assert run(argv, capsys)[0] == 0

    def test_restore_reproducible(self, work, tmp_path, capsys):
        outs = []
        for name in ("a", "b"):
            path = tmp_path / f"{name}.conllu"
            assert main(["restore", "--model", work["model"], "--input", work["test"],
                         "--output", str(path), "--samples", "30", "--seed", "4"]) == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]
        restored, rejected = load_treebank(parse_conllu(outs[0].decode()))
        assert len(restored) == 6 and not rejected

    def test_restore_trivial(self, work, capsys):
        code, out, _ = run(["restore", "--trivial", "--input", work["test"]], capsys)
        assert code == 0
        for s in load_treebank(parse_conllu(out))[0]:
            assert s.slots[-1] == (".",) and all(x == () for x in s.slots[:-1])

    def test_restore_needs_model(self, work, capsys):
        assert run(["restore", "--input", work["test"]], capsys)[0] == EXIT_INPUT

    def test_recover(self, work, capsys):
        code, out, _ = run(["recover", "--model", work["model"], "--input", work["test"]], capsys)
        assert code == 0 and "LPunct=" in out and "RPunct=" in out
        code, out, _ = run(["recover", "--model", work["model"], "--input", work["test"],
                            "--bracketed"], capsys)
        assert code == 0 and out.startswith("[")

    def test_inspect_channel(self, work, capsys):
        code, out, _ = run(["inspect-channel", "--model", work["model"], "--treebank",
                            work["test"]], capsys)
        rows = [r.split("\t") for r in out.splitlines()]
        assert code == 0 and rows[0][2:6] == ["keep", "leftAbsorb", "rightAbsorb", "transpose"]
        for r in rows[1:]:
            assert sum(float(v) for v in r[2:6]) == pytest.approx(1.0)

    @pytest.mark.parametrize("method", ["full", "half", "base"])
    def test_rephrase(self, work, method, capsys):
        argv = ["rephrase", "--input", work["test"], "--method", method, "--seed", "2"]
        if method != "base":
            argv += ["--model", work["model"]]
        code, out, _ = run(argv, capsys)
        assert code == 0
        assert len(parse_conllu(out)) == 6
        assert run(argv, capsys)[1] == out

    def test_rephrase_identity_argmax(self, work, capsys):
        code, out, _ = run(["rephrase", "--input", work["test"], "--model", work["model"],
                            "--identity", "--argmax"], capsys)
        assert code == 0
        words = lambda s: [t.form for t in s.tokens if t.upos != "PUNCT"]  # noqa: E731
        before = parse_conllu(open(work["test"], encoding="utf-8").read())
        assert [words(s) for s in parse_conllu(out)] == [words(s) for s in before]


class TestCorrection:
    def test_train_and_correct(self, work, capsys):
        out = str(work["dir"] / "c.txt")
        code, _, _ = run(["train-correction", "--train-esl", work["dev"], "--train-cesl",
                          work["dev"], "--esl-model", work["model"], "--cesl-model",
                          work["model"], "--out", out, "--epochs", "1", "--per-epoch", "10"],
                         capsys)
        assert code == 0
        code, text, _ = run(["correct", "--esl-model", work["model"], "--model", out, "--input",
                             work["test"], "--samples", "10"], capsys)
        assert code == 0 and len(parse_conllu(text)) == 6

    def test_disjoint_ids(self, work, capsys):
        code, _, err = run(["train-correction", "--train-esl", work["dev"], "--train-cesl",
                            work["test"], "--esl-model", work["model"], "--cesl-model",
                            work["model"], "--out", str(work["dir"] / "x")], capsys)
        assert code == EXIT_EMPTY and "no sentence ids" in err


class TestEvaluation:
    def test_aed_self(self, work, capsys):
        code, out, _ = run(["eval-aed", "--pred", work["test"], "--gold", work["test"]], capsys)
        assert code == 0 and float(out.splitlines()[1].split("\t")[-1]) == 0.0

    def test_aed_missing_sentence(self, work, capsys):
        code, _, err = run(["eval-aed", "--pred", work["dev"], "--gold", work["test"]], capsys)
        assert code == EXIT_INPUT and "missing" in err

    def test_f05_perfect(self, work, capsys):
        code, out, _ = run(["eval-f05", "--input", work["test"], "--pred", work["test"],
                            "--gold", work["test"]], capsys)
        assert code == 0 and float(out.splitlines()[1].split("\t")[-1]) == 1.0

    def test_trigram_text(self, tmp_path, capsys):
        src = tmp_path / "t.txt"
        src.write_text("a b\na c\n")
        code, out, _ = run(["trigram-ppl", "--train", str(src), "--eval", str(src), "--format",
                            "text", "--lam", "0.5"], capsys)
        assert code == 0 and float(out.splitlines()[1].split("\t")[-1]) > 1.0

    def test_trigram_empty_eval(self, tmp_path, capsys):
        src, empty = tmp_path / "t.txt", tmp_path / "e.txt"
        src.write_text("a b\n")
        empty.write_text("\n")
        code, _, _ = run(["trigram-ppl", "--train", str(src), "--eval", str(empty), "--format",
                          "text"], capsys)
        assert code == EXIT_INPUT


class TestConfigFile:
    def test_values_and_override(self, tmp_path, capsys):
        src = tmp_path / "t.txt"
        src.write_text("a b\na c\n")
        cfg = tmp_path / "c.ini"
        cfg.write_text("# defaults\nformat = text\nlam = 0.5\n")
        base = ["trigram-ppl", "--config", str(cfg), "--train", str(src), "--eval", str(src)]
        assert float(run(base, capsys)[1].splitlines()[1].split("\t")[2]) == 0.5
        assert float(run(base + ["--lam", "0.25"], capsys)[1].splitlines()[1].split("\t")[2]) \
            == 0.25

    @pytest.mark.parametrize("text", ["nonsense = 1\n", "lam = high\n", "format = xml\n",
                                      "no equals sign\n"])
    def test_bad_settings(self, tmp_path, text, capsys):
        cfg = tmp_path / "c.ini"
        cfg.write_text(text)
        code, _, err = run(["trigram-ppl", "--config", str(cfg), "--train", "x", "--eval", "y"],
                           capsys)
        assert code == EXIT_INPUT and str(cfg) in err

    def test_boolean(self, work, tmp_path, capsys):
        cfg = tmp_path / "c.ini"
        cfg.write_text("no-backoff = yes\n")
        src = tmp_path / "dale.conllu"
        src.write_text(DALE)
        code, _, _ = run(["perplexity", "--config", str(cfg), "--model", work["model"], "--input",
                          str(src)], capsys)
        assert code == EXIT_RELATIONS
