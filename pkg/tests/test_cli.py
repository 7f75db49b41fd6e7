from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import pytest

from extsum.cli import build_parser, main

README = Path(__file__).resolve().parents[1] / "README.md"


@pytest.fixture(autouse=True)
def _isolated_cwd(tmp_path, monkeypatch):
    # default cache and output directories are relative to the working directory
    monkeypatch.chdir(tmp_path)


def common(tmp_path, out="out"):
    return ["--output-dir", str(tmp_path / out), "--cache-dir", str(tmp_path / "cache")]


def test_oracle_command(tmp_path, capsys):
    assert main(["oracle", "--dataset", "cnn_dm", "--output-dir", str(tmp_path)]) == 0
    lines = (tmp_path / "oracle.jsonl").read_text().splitlines()
    assert len(lines) == 20
    assert all(1 <= len(json.loads(ln)["indices"]) <= 3 for ln in lines)
    summary = json.loads((tmp_path / "oracle_summary.json").read_text())
    assert summary["m"] == 3 and summary["n"] == 20
    assert "ORACLE: n=20" in capsys.readouterr().out


def test_m_override_and_sample(tmp_path):
    assert main(["oracle", "--dataset", "pubmed", "--m", "1", "--sample", "4", "--output-dir", str(tmp_path)]) == 0
    lines = [json.loads(ln) for ln in (tmp_path / "oracle.jsonl").read_text().splitlines()]
    assert len(lines) == 4 and all(len(d["indices"]) == 1 for d in lines)


def test_summarize_and_analyze(tmp_path):
    assert main(["summarize", "--dataset", "xsum", *common(tmp_path, "ext")]) == 0
    records = tmp_path / "ext" / "records.jsonl"
    manifest = json.loads((tmp_path / "ext" / "records.manifest.json").read_text())
    assert manifest["n_records"] == 20 and manifest["config"]["label"] == "Ext" and manifest["config"]["m"] == 2
    assert main(["summarize", "--dataset", "xsum", "--schema", "abstractive", "--geval", *common(tmp_path, "abs")]) == 0
    assert main(["oracle", "--dataset", "xsum", "--output-dir", str(tmp_path / "orc")]) == 0
    assert main(["analyze", str(records), f"Abs={tmp_path / 'abs' / 'records.jsonl'}",
                 "--oracle", str(tmp_path / "orc" / "oracle.jsonl"), "--output-dir", str(tmp_path / "an")]) == 0
    table = list(csv.DictReader((tmp_path / "an" / "results_table.csv").open()))
    assert [r["label"] for r in table] == ["Ext", "Abs"]
    assert float(table[1]["geval_mean"]) == 5.0
    hist = list(csv.DictReader((tmp_path / "an" / "position_hist.csv").open()))
    # abstractive runs are unaligned unless asked, so they add no positions
    assert {r["source"] for r in hist} == {"Ext", "oracle"}
    for files in ("length_buckets.csv", "report.txt"):
        assert (tmp_path / "an" / files).exists()


def test_rerun_is_byte_identical(tmp_path):
    argv = ["summarize", "--dataset", "cnn_dm", "--schema", "ext-abs"]
    assert main(argv + common(tmp_path, "a")) == 0
    assert main(argv + common(tmp_path, "b")) == 0
    for name in ("records.jsonl", "records.manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_fewshot_runs(tmp_path):
    from extsum.cli import fixture_path

    shots = str(fixture_path("fewshot_cnn_dm"))
    assert main(["summarize", "--dataset", "cnn_dm", "--k", "3", "--fewshot", shots, "--with-reason",
                 "--sample", "3", *common(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "out" / "records.manifest.json").read_text())
    assert manifest["config"]["label"] == "+reason"


def test_evaluate_recomputes(tmp_path, capsys):
    assert main(["summarize", "--dataset", "reddit", *common(tmp_path, "ext")]) == 0
    path = tmp_path / "ext" / "records.jsonl"
    lines = [json.loads(ln) for ln in path.read_text().splitlines()]
    lines[0]["rouge"]["r1"]["f1"] = 0.123
    path.write_text("".join(json.dumps(d) + "\n" for d in lines))
    assert main(["evaluate", "--dataset", "reddit", "--records", str(path), *common(tmp_path, "ev")]) == 0
    assert "1 stored ROUGE scores differed" in capsys.readouterr().err
    fixed = [json.loads(ln) for ln in (tmp_path / "ev" / "evaluated.jsonl").read_text().splitlines()]
    assert any("rouge_recomputed" in d["flags"] for d in fixed)


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("dataset: xsum\nm: 1\nsample: 2\n")
    assert main(["oracle", "--config", str(cfg), "--m", "2", "--output-dir", str(tmp_path)]) == 0
    lines = [json.loads(ln) for ln in (tmp_path / "oracle.jsonl").read_text().splitlines()]
    assert len(lines) == 2 and json.loads((tmp_path / "oracle_summary.json").read_text())["m"] == 2


@pytest.mark.parametrize(
    "argv, code",
    [
        (["oracle"], 2),
        (["oracle", "--dataset", "arxiv"], 2),
        (["summarize", "--dataset", "cnn_dm", "--k", "2"], 2),
        (["summarize", "--dataset", "cnn_dm", "--k", "9", "--fewshot", "x"], 2),
        (["summarize", "--dataset", "cnn_dm", "--backend", "mock:nope"], 2),
        (["summarize", "--dataset", "cnn_dm", "--k", "1", "--fewshot", "/nonexistent/shots.jsonl"], 3),
        (["oracle", "--corpus", "/nonexistent/corpus.jsonl", "--m", "2"], 3),
        (["summarize", "--dataset", "cnn_dm", "--backend", "mock:empty", "--no-cache"], 4),
        (["analyze", "/nonexistent/records.jsonl"], 3),
        (["analyze", "/nonexistent/records.jsonl", "--bucket-edges", "5,1"], 3),
    ],
)
def test_exit_codes(tmp_path, argv, code):
    assert main(argv + ["--output-dir", str(tmp_path)]) == code


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("api_key: sk-secret\ndataset: xsum\n")
    assert main(["oracle", "--config", str(cfg), "--output-dir", str(tmp_path)]) == 2
    cfg.write_text("colour: blue\n")
    assert main(["oracle", "--config", str(cfg), "--output-dir", str(tmp_path)]) == 2


def test_missing_api_key_is_config_error(tmp_path, monkeypatch):
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    assert main(["summarize", "--dataset", "xsum", "--backend", "openai", *common(tmp_path)]) == 2


def test_unreachable_backend_exits_4(tmp_path, monkeypatch):
    monkeypatch.setenv("LOCAL_API_KEY", "sk-test")
    argv = ["summarize", "--dataset", "xsum", "--sample", "2", "--backend", "local", "--base-url",
            "http://127.0.0.1:9/v1", "--max-retries", "0", "--timeout", "2", "--no-cache"]
    assert main(argv + ["--output-dir", str(tmp_path)]) == 4
    text = (tmp_path / "records.jsonl").read_text()
    assert "sk-test" not in text and "sk-test" not in (tmp_path / "records.manifest.json").read_text()


def _subparsers():
    parser = build_parser()
    action = next(a for a in parser._actions if a.dest == "command")
    return action.choices


def test_readme_flag_tables_match_parser():
    text = README.read_text(encoding="utf-8")
    for name, sub in _subparsers().items():
        section = re.search(rf"^### `extsum {name}`\n(.*?)(?=^### |\Z)", text, re.S | re.M)
        assert section, f"README lacks a section for {name}"
        documented = set(re.findall(r"^\| `(--[a-z-]+)", section.group(1), re.M))
        actual = {opt for a in sub._actions for opt in a.option_strings if opt.startswith("--") and opt != "--help"}
        assert documented == actual, name
