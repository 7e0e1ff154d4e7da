"""Command-line interface: flags, config files, exit codes, file contracts."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from fuzzaug.cli import EXIT_ENV, EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, main
from fuzzaug.metrics import EmbeddingTable, write_embeddings

from conftest import ADDER_CPP, HELLO_CPP


@pytest.fixture
def runner():
    return CliRunner()


def make_corpus(root, n_problems=8, n_programs=1):
    for p in range(1, n_problems + 1):
        d = root / str(p)
        d.mkdir(parents=True)
        for i in range(n_programs):
            (d / f"{i}.cpp").write_text(HELLO_CPP if i % 2 else ADDER_CPP)
    return root


@pytest.fixture
def ingested_ws(tmp_path, runner):
    corpus = make_corpus(tmp_path / "corpus")
    ws = tmp_path / "ws"
    res = runner.invoke(main, ["ingest", str(corpus), "-w", str(ws)])
    assert res.exit_code == EXIT_OK, res.output
    return ws


class TestHelp:
    def test_root_help(self, runner):
        res = runner.invoke(main, ["--help"])
        assert res.exit_code == EXIT_OK
        for cmd in ("ingest", "repair", "build", "fuzz", "harvest", "emit",
                    "split", "subsample", "eval", "pipeline"):
            assert cmd in res.output

    def test_unknown_command_is_usage_error(self, runner):
        res = runner.invoke(main, ["frobnicate"])
        assert res.exit_code == EXIT_USAGE


class TestIngest:
    def test_reports_counts(self, tmp_path, runner):
        corpus = make_corpus(tmp_path / "corpus", n_problems=3, n_programs=2)
        res = runner.invoke(main, ["ingest", str(corpus), "-w",
                                   str(tmp_path / "ws")])
        assert res.exit_code == EXIT_OK
        assert json.loads(res.output) == {"problems": 3, "programs": 6,
                                          "warnings": 0}

    def test_missing_root_is_usage_error(self, tmp_path, runner):
        res = runner.invoke(main, ["ingest", str(tmp_path / "nope"), "-w",
                                   str(tmp_path / "ws")])
        assert res.exit_code == EXIT_USAGE

    def test_config_file_applies(self, tmp_path, runner):
        corpus = make_corpus(tmp_path / "corpus", n_problems=2)
        cfg = tmp_path / "run.conf"
        cfg.write_text("seed = 42\ndecode_mode = raw_bytes  # comment\n\n")
        ws = tmp_path / "ws"
        res = runner.invoke(main, ["ingest", str(corpus), "-w", str(ws),
                                   "--config-file", str(cfg)])
        assert res.exit_code == EXIT_OK
        saved = json.loads((ws / "config.json").read_text())
        assert saved["seed"] == 42
        assert saved["decode_mode"] == "raw_bytes"

    def test_flag_overrides_config_file(self, tmp_path, runner):
        corpus = make_corpus(tmp_path / "corpus", n_problems=2)
        cfg = tmp_path / "run.conf"
        cfg.write_text("seed=42\n")
        ws = tmp_path / "ws"
        res = runner.invoke(main, ["ingest", str(corpus), "-w", str(ws),
                                   "--config-file", str(cfg), "--seed", "7"])
        assert res.exit_code == EXIT_OK
        assert json.loads((ws / "config.json").read_text())["seed"] == 7

    def test_unknown_config_key_is_usage_error(self, tmp_path, runner):
        corpus = make_corpus(tmp_path / "corpus", n_problems=2)
        cfg = tmp_path / "run.conf"
        cfg.write_text("warp_speed=9\n")
        res = runner.invoke(main, ["ingest", str(corpus), "-w",
                                   str(tmp_path / "ws"),
                                   "--config-file", str(cfg)])
        assert res.exit_code == EXIT_USAGE

    def test_malformed_config_line_is_usage_error(self, tmp_path, runner):
        corpus = make_corpus(tmp_path / "corpus", n_problems=2)
        cfg = tmp_path / "run.conf"
        cfg.write_text("just some words\n")
        res = runner.invoke(main, ["ingest", str(corpus), "-w",
                                   str(tmp_path / "ws"),
                                   "--config-file", str(cfg)])
        assert res.exit_code == EXIT_USAGE


class TestSplitAndSubsample:
    def test_split_exact_sizes(self, ingested_ws, runner):
        res = runner.invoke(main, ["split", "-w", str(ingested_ws),
                                   "--fractions", "1/2,1/4,1/4"])
        assert res.exit_code == EXIT_OK, res.output
        assert json.loads(res.output) == {"train": 4, "val": 2, "test": 2}
        manifest = json.loads((ingested_ws / "splits.json").read_text())
        assert manifest["spec"]["task"] == "clone_detection"

    def test_split_bad_fractions_usage_error(self, ingested_ws, runner):
        res = runner.invoke(main, ["split", "-w", str(ingested_ws),
                                   "--fractions", "1/2,1/2,1/2"])
        assert res.exit_code == EXIT_USAGE

    def test_subsample_requires_split(self, ingested_ws, runner):
        res = runner.invoke(main, ["subsample", "-w", str(ingested_ws),
                                   "--ratio", "1/2", "--unit", "problems"])
        assert res.exit_code == EXIT_USAGE

    def test_subsample_shrinks_train_val_only(self, ingested_ws, runner):
        runner.invoke(main, ["split", "-w", str(ingested_ws),
                             "--fractions", "1/2,1/4,1/4"])
        res = runner.invoke(main, ["subsample", "-w", str(ingested_ws),
                                   "--ratio", "1/2", "--unit", "problems"])
        assert res.exit_code == EXIT_OK, res.output
        assert json.loads(res.output) == {"train": 2, "val": 1, "test": 2}

    def test_workspace_must_exist(self, tmp_path, runner):
        res = runner.invoke(main, ["split", "-w", str(tmp_path / "nope")])
        assert res.exit_code == EXIT_USAGE


class TestEval:
    def make_embeddings(self, path):
        vectors = np.array([[1.0, 0], [1, 0.05], [0, 1], [0.05, 1]])
        table = EmbeddingTable(["a", "b", "c", "d"], ["p1", "p1", "p2", "p2"],
                               vectors)
        write_embeddings(table, path)

    def test_eval_reports_map(self, tmp_path, runner):
        emb = tmp_path / "emb.tsv"
        self.make_embeddings(emb)
        report = tmp_path / "report.json"
        csv_path = tmp_path / "breakdown.csv"
        res = runner.invoke(main, ["eval", str(emb), "--report", str(report),
                                   "--breakdown-csv", str(csv_path)])
        assert res.exit_code == EXIT_OK, res.output
        out = json.loads(res.output)
        assert out["map_at_r"] == pytest.approx(1.0)
        assert out["n_queries"] == 4
        assert json.loads(report.read_text())["map_at_r"] == pytest.approx(1.0)
        assert csv_path.read_text().splitlines()[0] == "problem_id,map_at_r"

    def test_malformed_embeddings_usage_error(self, tmp_path, runner):
        emb = tmp_path / "emb.tsv"
        emb.write_text("not a header\n")
        res = runner.invoke(main, ["eval", str(emb)])
        assert res.exit_code == EXIT_USAGE


class TestStageCommands:
    def test_repair_then_emit(self, ingested_ws, runner):
        res = runner.invoke(main, ["repair", "-w", str(ingested_ws)])
        assert res.exit_code == EXIT_OK, res.output
        out = json.loads(res.output)
        assert out == {"programs": 8, "failed": 0}
        res = runner.invoke(main, ["emit", "-w", str(ingested_ws),
                                   "--template", "none"])
        assert res.exit_code == EXIT_OK
        dataset = ingested_ws / "dataset.jsonl"
        assert dataset.exists()
        assert len(dataset.read_text().splitlines()) == 8

    def test_stage_on_uningested_workspace_fails(self, tmp_path, runner):
        ws = tmp_path / "ws"
        ws.mkdir()
        res = runner.invoke(main, ["repair", "-w", str(ws)])
        assert res.exit_code != EXIT_OK

    def test_missing_compiler_is_environment_error(self, ingested_ws, runner,
                                                   monkeypatch):
        from fuzzaug import repair as repair_mod

        def missing_compiler(*args, **kwargs):
            raise FileNotFoundError("g++: command not found")

        monkeypatch.setattr(repair_mod.subprocess, "run", missing_compiler)
        res = runner.invoke(main, ["repair", "-w", str(ingested_ws)])
        assert res.exit_code == EXIT_ENV
