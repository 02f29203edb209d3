"""CLI: criterion grammar, option placement, and the four subcommands
exercised end to end on a tiny corpus."""

import json
import re

import pytest

from blockdec.criteria import AcceptanceCriterion
from blockdec.errors import ParseError
from blockdec.harness.cli import cli, parse_criterion
from blockdec.harness.corpus import load_corpus
from blockdec.models.checkpoint import load_checkpoint


class TestParseCriterion:
    def test_good_specs(self):
        assert parse_criterion("kind=exact") == AcceptanceCriterion("exact")
        assert parse_criterion("exact") == AcceptanceCriterion("exact")
        assert parse_criterion("kind=top_k,k=3") == AcceptanceCriterion("top_k", top_k_k=3)
        assert parse_criterion("top_k, k=2, min_block=2") == AcceptanceCriterion(
            "top_k", top_k_k=2, min_block=2)
        assert parse_criterion("kind=distance,eps=5") == AcceptanceCriterion(
            "distance", epsilon=5)

    def test_round_trips_describe(self):
        for spec in ("kind=exact", "kind=top_k,k=4", "kind=distance,eps=2,min_block=3"):
            criterion = parse_criterion(spec)
            assert parse_criterion(criterion.describe()) == criterion

    @pytest.mark.parametrize("bad", [
        "", "k=2", "kind=fuzzy", "kind=exact,k=2", "kind=top_k,eps=1",
        "kind=top_k,k=two", "kind=exact,kind=exact", "kind=top_k,k=2,k=3",
        "bogus",
    ])
    def test_bad_specs(self, bad):
        with pytest.raises(ParseError):
            parse_criterion(bad)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Corpus file plus a briefly trained checkpoint, shared across tests."""
    root = tmp_path_factory.mktemp("cliws")
    corpus_path = root / "corpus.json"
    corpus_path.write_text(json.dumps({
        "kind": "synthetic_pattern", "alphabet": 6, "rule": "repeat",
        "pairs": 32, "min_len": 2, "max_len": 3, "copies": 2, "seed": 4,
    }))
    ckpt = root / "model.ckpt"
    code = cli([
        "train", "--corpus", str(corpus_path), "--steps", "60",
        "--batch-size", "8", "--heads", "2", "--d-model", "16",
        "--d-hidden", "16", "--layers", "1", "--seed", "1", "--out", str(ckpt),
    ])
    assert code == 0
    return {"root": root, "corpus": corpus_path, "ckpt": ckpt}


class TestTrain:
    def test_checkpoint_written_and_loadable(self, workspace, capsys):
        model = load_checkpoint(workspace["ckpt"])
        assert model.config.vocab_size == 8
        assert model.config.num_heads == 2
        capsys.readouterr()

    def test_init_from_continues(self, workspace, tmp_path, capsys):
        out = tmp_path / "cont.ckpt"
        code = cli([
            "train", "--corpus", str(workspace["corpus"]), "--steps", "5",
            "--init-from", str(workspace["ckpt"]), "--seed", "2", "--out", str(out),
        ])
        assert code == 0
        assert "trained 5 steps" in capsys.readouterr().out
        assert load_checkpoint(out).config == load_checkpoint(workspace["ckpt"]).config


class TestDecode:
    def test_trace_and_stats(self, workspace, capsys):
        code = cli([
            "decode", "--model", str(workspace["ckpt"]), "--tokens", "1,2,3",
            "--block-size", "2", "--max-len", "8",
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert re.search(r"^Step 1: \d+ tokens \[", out, re.M)
        assert "output:" in out
        assert re.search(r"\d+ tokens in \d+ iterations, \d+ model invocations", out)

    def test_check_greedy_agrees(self, workspace, capsys):
        code = cli([
            "decode", "--model", str(workspace["ckpt"]), "--tokens", "2,4",
            "--block-size", "2", "--max-len", "8", "--check-greedy",
        ])
        assert code == 0
        assert "matches greedy: True" in capsys.readouterr().out

    def test_synthetic_perfect_full_blocks(self, capsys):
        code = cli([
            "decode", "--synthetic", "perfect_proposals", "--tokens", "1,2",
            "--block-size", "4", "--max-len", "8", "--vocab-size", "16",
            "--seed", "3",
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert "Step 1: 4 tokens [" in out
        assert "Step 2: 4 tokens [" in out
        assert "mean block 4.00" in out

    def test_no_trace_and_out_file(self, tmp_path, capsys):
        out_path = tmp_path / "decoded.txt"
        code = cli([
            "decode", "--synthetic", "random_table", "--tokens", "5",
            "--block-size", "2", "--max-len", "4", "--no-trace",
            "--out", str(out_path), "--seed", "0",
        ])
        text = capsys.readouterr().out
        assert code == 0
        assert "Step" not in text
        written = out_path.read_text().strip()
        assert re.fullmatch(r"\d+(,\d+)*", written)

    def test_seed_position_equivalent(self, capsys):
        args = ["decode", "--synthetic", "random_table", "--tokens", "7",
                "--block-size", "2", "--max-len", "6", "--no-trace"]
        outputs = []
        for argv in ([*args, "--seed", "9"], ["--seed", "9", *args]):
            assert cli(argv) == 0
            outputs.append(capsys.readouterr().out.splitlines()[0])
        assert outputs[0] == outputs[1]

    def test_env_seed_fallback(self, capsys, monkeypatch):
        args = ["decode", "--synthetic", "random_table", "--tokens", "7",
                "--block-size", "2", "--max-len", "6", "--no-trace"]
        monkeypatch.setenv("BLOCKDEC_SEED", "9")
        assert cli(args) == 0
        from_env = capsys.readouterr().out.splitlines()[0]
        monkeypatch.delenv("BLOCKDEC_SEED")
        assert cli([*args, "--seed", "9"]) == 0
        assert from_env == capsys.readouterr().out.splitlines()[0]


class TestDistill:
    def test_rewrites_targets(self, workspace, tmp_path, capsys):
        out = tmp_path / "distilled.json"
        code = cli([
            "distill", "--teacher", str(workspace["ckpt"]),
            "--corpus", str(workspace["corpus"]), "--max-len", "8",
            "--out", str(out),
        ])
        assert code == 0
        distilled = load_corpus(out)
        original = load_corpus(workspace["corpus"])
        assert distilled.vocab == original.vocab
        assert 0 < len(distilled) <= len(original)
        inputs = {inp for inp, _ in original.pairs}
        assert all(inp in inputs for inp, _ in distilled.pairs)
        capsys.readouterr()


class TestBench:
    def test_json_report_to_file(self, workspace, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = cli([
            "bench", "--synthetic", "random_table", "--corpus", str(workspace["corpus"]),
            "--block-sizes", "1,2", "--criteria", "kind=exact;kind=top_k,k=2",
            "--repeats", "1", "--max-pairs", "4", "--seed", "5", "--out", str(out),
        ])
        assert code == 0
        doc = json.loads(out.read_text())
        assert len(doc["rows"]) == 4
        assert doc["meta"]["pairs"] == 4
        assert doc["rows"][0]["scheme"] == "greedy"
        capsys.readouterr()

    def test_markdown_to_stdout(self, workspace, capsys):
        code = cli([
            "--report-format", "markdown",
            "bench", "--model", str(workspace["ckpt"]), "--corpus", str(workspace["corpus"]),
            "--block-sizes", "1,2", "--repeats", "1", "--max-pairs", "2",
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert out.startswith("### synthetic_pattern")
        assert "| k | criterion |" in out


class TestErrors:
    def test_missing_corpus_file(self, capsys):
        code = cli(["train", "--corpus", "/nonexistent/c.json", "--steps", "1"])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_criterion(self, workspace, capsys):
        code = cli([
            "decode", "--synthetic", "random_table", "--tokens", "1",
            "--criterion", "kind=fuzzy",
        ])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_tokens(self, capsys):
        code = cli(["decode", "--synthetic", "random_table", "--tokens", "1,x"])
        assert code == 2
        capsys.readouterr()

    def test_bad_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("BLOCKDEC_SEED", "nope")
        code = cli(["decode", "--synthetic", "random_table", "--tokens", "1"])
        assert code == 2
        capsys.readouterr()
