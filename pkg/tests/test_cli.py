import json
import re
import shutil
import subprocess
import sys

import pytest

from namerec.cli import EXIT_FORMAT, EXIT_MISSING_INPUT, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, build_parser, main

FAST = ["--dim", "8", "--loops", "60", "--trace-every", "20"]


@pytest.fixture
def pipeline(tmp_path, fixtures_dir):
    corpus = tmp_path / "corpus"
    shutil.copytree(fixtures_dir / "corpus5", corpus)
    records, graph, emb = tmp_path / "r.jsonl", tmp_path / "g.acg", tmp_path / "t.emb"
    assert main(["extract", "--corpus", str(corpus), "--out", str(records)]) == EXIT_OK
    assert main(["graph", "--records", str(records), "--out", str(graph)]) == EXIT_OK
    trace = tmp_path / "trace.csv"
    assert main(["train", "--graph", str(graph), "--out", str(emb), "--trace", str(trace), *FAST]) == EXIT_OK
    return tmp_path


def test_pipeline_artifacts(pipeline, fixtures_dir):
    assert (pipeline / "g.acg").read_bytes() == (fixtures_dir / "corpus5.graph").read_bytes()
    lines = (pipeline / "r.jsonl").read_text().splitlines()
    assert len(lines) == 10 and all("demo.test" not in line for line in lines)
    trace = (pipeline / "trace.csv").read_text().splitlines()
    assert trace[0] == "step,loss" and [r.split(",")[0] for r in trace[1:]] == ["0", "20", "40", "60"]
    meta = json.loads((pipeline / "t.emb.meta.json").read_text())
    assert meta["stage"] == "embeddings" and meta["config"]["train"]["dim"] == 8
    assert (pipeline / "t.emb").read_text().startswith("20 8\n")


def test_recommend(pipeline, capsys):
    emb = str(pipeline / "t.emb")
    assert main(["recommend", "--embeddings", emb, "--top", "10", "--query-callees", "open,write,close"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert 1 <= len(doc["candidates"]) <= 10
    scores = [c["score"] for c in doc["candidates"]]
    assert scores == sorted(scores, reverse=True)

    out = pipeline / "rec.json"
    code = main(["recommend", "--embeddings", emb, "--top", "3", "--query", "open(); ghost();", "--out", str(out)])
    assert code == EXIT_OK
    doc = json.loads(out.read_text())
    assert len(doc["candidates"]) == 3 and doc["skipped"] == ["ghost"]

    assert main(["recommend", "--embeddings", emb, "--query-callees", "ghost"]) == EXIT_RUNTIME
    assert "no known callees" in capsys.readouterr().err


def test_stage_mismatch_and_tampering_rejected(pipeline, capsys):
    # an embedding file is not a graph
    assert main(["train", "--graph", str(pipeline / "t.emb"), "--out", str(pipeline / "x.emb")]) == EXIT_FORMAT
    graph = pipeline / "g.acg"
    graph.write_text(graph.read_text() + "a\tb\n")
    assert main(["train", "--graph", str(graph), "--out", str(pipeline / "x.emb")]) == EXIT_FORMAT
    assert "content hash" in capsys.readouterr().err


def test_unsidecarred_input_is_checked_for_format(tmp_path):
    bad = tmp_path / "g.acg"
    bad.write_text("#nodes 5 #edges 0\n")
    assert main(["train", "--graph", str(bad), "--out", str(tmp_path / "t.emb")]) == EXIT_FORMAT


def test_exit_codes(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["train", "--graph", str(tmp_path / "missing"), "--out", "x"]) == EXIT_MISSING_INPUT
    assert main(["extract", "--corpus", str(tmp_path / "missing"), "--out", "x"]) == EXIT_MISSING_INPUT
    assert main(["train", "--graph", "x", "--out", "y", "--alpha", "2"]) == EXIT_USAGE
    assert main(["evaluate", "--corpus", str(tmp_path), "--folds", "1"]) == EXIT_USAGE
    (tmp_path / "g.acg").write_text("#nodes 2 #edges 1\na\tb\n")
    code = main(["train", "--graph", str(tmp_path / "g.acg"), "--out", str(tmp_path / "t"), "--lr", "1e9",
                 "--lr-decay", "0", "--negatives", "0", "--loops", "500"])
    assert code == EXIT_RUNTIME
    assert re.search(r"step \d+", capsys.readouterr().err)


def test_help_lists_every_default():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.__class__.__name__ == "_SubParsersAction")
    for name, p in sub.choices.items():
        text = " ".join(p.format_help().split())
        for action in p._actions:
            if action.dest == "help" or action.default in (None, False) or not action.help:
                continue
            default = " ".join(str(action.default).split()) if not isinstance(action.default, list) else str(action.default)
            assert f"(default: {default})" in text, (name, action.dest)


def test_synth_and_evaluate(tmp_path):
    corpus = tmp_path / "synth"
    assert main(["synth", "--out", str(corpus), "--families", "3", "--methods-per-family", "4", "--pool-size", "5"]) == EXIT_OK
    out = tmp_path / "eval"
    code = main(["evaluate", "--corpus", str(corpus), "--out-dir", str(out), "--folds", "3", *FAST])
    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["methods"] == 12 and len(report["folds"]) == 3
    assert {p.name for p in out.iterdir()} >= {"report.json", "report.txt", "per_verb.csv", "fold1.emb", "fold3.emb"}


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "namerec", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("extract", "graph", "train", "recommend", "evaluate", "synth"):
        assert sub in proc.stdout
