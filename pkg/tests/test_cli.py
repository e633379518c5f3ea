"""CLI: local runs, the scenario sweep, artifact replay, and the thin client."""

from __future__ import annotations

import csv
import json
import socket
import subprocess
import sys
import time
from pathlib import Path

import httpx
import pytest

from evisynth.cli import main

from conftest import happy_script


@pytest.fixture
def script_file(tmp_path: Path) -> Path:
    path = tmp_path / "script.json"
    path.write_text(json.dumps(happy_script()))
    return path


def run_dir_of(capsys) -> Path:
    captured = capsys.readouterr().out
    for line in captured.splitlines():
        if line.startswith("artifacts: "):
            return Path(line.split("artifacts: ", 1)[1])
    raise AssertionError(f"no artifacts line in output:\n{captured}")


class TestRunCommand:
    def test_scripted_fixture_run(self, tmp_path, fixture_dir, script_file, capsys):
        code = main(
            [
                "run",
                "--question", "What drives resistance?",
                "--genes", "TP53, BRAF",
                "--backend", "script",
                "--script", str(script_file),
                "--fixture-root", str(fixture_dir),
                "--runs-root", str(tmp_path / "runs"),
            ]
        )
        assert code == 0
        run_dir = run_dir_of(capsys)
        assert (run_dir / "report.md").exists()

    def test_auto_backend_scenario_run(self, tmp_path, capsys):
        code = main(
            [
                "run",
                "--question", "Which genes matter?",
                "--scenario", "s1",
                "--runs-root", str(tmp_path / "runs"),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "Completed" in out
        assert "genes: 13" in out

    def test_input_json_document(self, tmp_path, fixture_dir, capsys):
        doc = tmp_path / "input.json"
        doc.write_text(json.dumps({"context": "c", "question": "q", "genes": ["TP53"]}))
        code = main(
            [
                "run",
                "--input-json", str(doc),
                "--fixture-root", str(fixture_dir),
                "--runs-root", str(tmp_path / "runs"),
            ]
        )
        assert code == 0

    def test_invalid_submission_reports_fields(self, tmp_path, capsys):
        code = main(["run", "--genes", "TP@53", "--runs-root", str(tmp_path)])
        assert code == 2
        err = capsys.readouterr().err
        assert "question" in err and "genes" in err


class TestEvalCommand:
    def test_sweep_emits_csv_consistency_and_omissions(self, tmp_path, capsys):
        out_csv = tmp_path / "sweep.csv"
        code = main(
            [
                "eval",
                "--scenarios", "s1,s2",
                "--repeats", "3",
                "--runs-root", str(tmp_path / "runs"),
                "--out", str(out_csv),
            ]
        )
        assert code == 0
        rows = list(csv.DictReader(out_csv.open()))
        assert [r["scenario"] for r in rows] == ["s1", "s2"]
        s1 = rows[0]
        assert int(s1["words"]) == 1656
        assert float(s1["reading_minutes"]) == pytest.approx(8.28)
        assert float(s1["speedup"]) > 1
        out = capsys.readouterr().out
        assert "jaccard mean=1.000 min=1.000" in out
        assert "omissions: none" in out


class TestReplayCommand:
    def test_replay_rerenders_and_verifies_metrics(self, tmp_path, fixture_dir, script_file, capsys):
        main(
            [
                "run",
                "--question", "q",
                "--genes", "TP53, BRAF",
                "--backend", "script",
                "--script", str(script_file),
                "--fixture-root", str(fixture_dir),
                "--runs-root", str(tmp_path / "runs"),
            ]
        )
        run_dir = run_dir_of(capsys)
        (run_dir / "report.md").unlink()
        code = main(["replay", str(run_dir)])
        assert code == 0
        out = capsys.readouterr().out
        assert "metrics match the stored snapshot" in out
        assert (run_dir / "report.md").exists()
        assert (run_dir / "report.html").exists()

    def test_replay_missing_dir(self, tmp_path, capsys):
        assert main(["replay", str(tmp_path / "ghost")]) == 2


class TestServeAndSubmit:
    def test_thin_client_submits_and_follows_a_real_server(self, tmp_path, capsys):
        with socket.socket() as probe:
            probe.bind(("127.0.0.1", 0))
            port = probe.getsockname()[1]
        server = subprocess.Popen(
            [
                sys.executable, "-m", "evisynth.cli",
                "serve", "--port", str(port), "--runs-root", str(tmp_path / "runs"),
            ],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        base = f"http://127.0.0.1:{port}"
        try:
            for _ in range(50):
                try:
                    if httpx.get(f"{base}/healthz", timeout=1.0).status_code == 200:
                        break
                except httpx.TransportError:
                    time.sleep(0.2)
            else:
                pytest.fail("server never became healthy")

            code = main(
                ["submit", "--server", base, "--question", "Which genes matter?", "--scenario", "s1", "--follow"]
            )
            assert code == 0
            out = capsys.readouterr().out
            assert "accepted" in out
            assert "[civic]" in out and "[composer]" in out
            assert "run ended: Completed" in out

            code = main(["submit", "--server", base, "--question", ""])
            assert code == 2
            assert "ValidationFailed" in capsys.readouterr().err
        finally:
            server.terminate()
            server.wait(timeout=10)
