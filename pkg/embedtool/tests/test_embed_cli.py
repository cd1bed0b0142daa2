"""Exporter CLIs: exit codes, outputs, and the cross-package pipeline."""

import json
import shutil
import subprocess

import pytest

from embedtool.cli import embed_main, embed_report_main

PHASE_TEXTS = {
    "recon": "scanning and target research",
    "weapon": "payload build and packing",
    "delivery": "phishing message with attachment",
    "exploit": "memory corruption trigger",
    "install": "persistence via scheduled task",
    "c2": "beacon traffic to rented server",
    "objectives": "data encrypted for impact",
}


def _write_catalog(tmp_path, per_phase=2):
    records = []
    for i, (phase, text) in enumerate(PHASE_TEXTS.items()):
        for k in range(per_phase):
            records.append(
                {
                    "id": f"T1{i:01d}{k:02d}",
                    "name": f"{text} variant {k}",
                    "phase": phase,
                    "description": f"{text}, observed in intrusion set {k}",
                }
            )
    path = tmp_path / "catalog.json"
    path.write_text(json.dumps(records, indent=2))
    return path, records


def test_embed_writes_loadable_rows(tmp_path):
    catalog, records = _write_catalog(tmp_path)
    out = tmp_path / "tech.jsonl"
    rc = embed_main(["--model", "hash:32", "--catalog", str(catalog), "--out", str(out)])
    assert rc == 0
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert [row["id"] for row in rows] == [record["id"] for record in records]
    assert all(len(row["vec"]) == 32 for row in rows)


def test_embed_missing_catalog_exits_2(tmp_path, capsys):
    rc = embed_main(
        ["--catalog", str(tmp_path / "nope.json"), "--out", str(tmp_path / "t.jsonl")]
    )
    assert rc == 2
    assert "nope.json" in capsys.readouterr().err


def test_embed_malformed_catalog_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{broken")
    rc = embed_main(["--catalog", str(bad), "--out", str(tmp_path / "t.jsonl")])
    assert rc == 1
    assert "malformed JSON" in capsys.readouterr().err


def test_embed_record_without_id_exits_1(tmp_path, capsys):
    bad = tmp_path / "noid.json"
    bad.write_text(json.dumps([{"name": "x"}]))
    rc = embed_main(["--catalog", str(bad), "--out", str(tmp_path / "t.jsonl")])
    assert rc == 1
    assert "no 'id'" in capsys.readouterr().err


def test_embed_bad_model_exits_1(tmp_path, capsys):
    catalog, _ = _write_catalog(tmp_path)
    rc = embed_main(
        ["--model", "hash:x", "--catalog", str(catalog), "--out", str(tmp_path / "t.jsonl")]
    )
    assert rc == 1
    assert "hash" in capsys.readouterr().err


def test_embed_report_writes_context_row(tmp_path):
    report = tmp_path / "report.txt"
    report.write_text("the actor encrypted file shares after exfiltration")
    out = tmp_path / "ctx.jsonl"
    rc = embed_report_main(["--in", str(report), "--out", str(out), "--model", "hash:32"])
    assert rc == 0
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(rows) == 1
    assert rows[0]["id"] == "__context__"
    assert len(rows[0]["vec"]) == 32


def test_embed_report_empty_file_exits_1(tmp_path, capsys):
    report = tmp_path / "empty.txt"
    report.write_text("  \n")
    rc = embed_report_main(["--in", str(report), "--out", str(tmp_path / "c.jsonl")])
    assert rc == 1
    assert "empty" in capsys.readouterr().err


def test_embed_report_missing_file_exits_2(tmp_path):
    rc = embed_report_main(
        ["--in", str(tmp_path / "nope.txt"), "--out", str(tmp_path / "c.jsonl")]
    )
    assert rc == 2


def test_console_scripts_run(tmp_path):
    embed_exe = shutil.which("embed")
    report_exe = shutil.which("embed-report")
    assert embed_exe and report_exe, "console scripts should be installed"
    catalog, _ = _write_catalog(tmp_path)
    report = tmp_path / "report.txt"
    report.write_text("beacon traffic preceded mass encryption")
    proc = subprocess.run(
        [embed_exe, "--catalog", str(catalog), "--out", str(tmp_path / "tech.jsonl")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "embed:" in proc.stderr
    proc = subprocess.run(
        [report_exe, "--in", str(report), "--out", str(tmp_path / "ctx.jsonl")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "ctx.jsonl").exists()


def test_full_pipeline_into_the_engine(tmp_path):
    engine_cli = pytest.importorskip("chainrecon.cli")

    catalog, _ = _write_catalog(tmp_path)
    report = tmp_path / "report.txt"
    report.write_text(
        "a phishing message delivered a packed payload; after exploitation the "
        "actor installed a scheduled task, beaconed to a rented server, and "
        "encrypted data for impact"
    )
    tech = tmp_path / "tech.jsonl"
    ctx = tmp_path / "ctx.jsonl"
    assert embed_main(["--catalog", str(catalog), "--out", str(tech)]) == 0
    assert embed_report_main(["--in", str(report), "--out", str(ctx)]) == 0

    corpus = tmp_path / "corpus.jsonl"
    corpus.write_bytes(tech.read_bytes() + ctx.read_bytes())
    config = tmp_path / "engine.json"
    config.write_text(
        json.dumps({"search": {"simulations": 64}, "rollout": {"num_rollouts": 4}})
    )
    chain = tmp_path / "chain.json"
    rc = engine_cli.main(
        [
            "infer",
            "--catalog", str(catalog),
            "--embeddings", str(corpus),
            "--config", str(config),
            "--seed", "0",
            "--out", str(chain),
        ]
    )
    assert rc == 0
    entries = json.loads(chain.read_text())
    assert len(entries) == 7
    assert [entry["phase"] for entry in entries] == list(PHASE_TEXTS)
