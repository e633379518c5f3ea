"""HTTP service: submission, status, reports, metrics, and event streaming."""

from __future__ import annotations

import asyncio
import json

import httpx

from evisynth.engine import Engine, RunSubmission
from evisynth.service import create_app

from conftest import auto_engine, happy_script, report_json, scripted_engine


def client_for(engine: Engine) -> httpx.AsyncClient:
    transport = httpx.ASGITransport(app=create_app(engine))
    return httpx.AsyncClient(transport=transport, base_url="http://svc")


async def submit_and_wait(client: httpx.AsyncClient, engine: Engine, body: dict) -> str:
    response = await client.post("/runs", json=body)
    assert response.status_code == 202, response.text
    run_id = response.json()["run_id"]
    await engine.get(run_id).task
    return run_id


def parse_sse(text: str) -> tuple[list[dict], list[dict]]:
    """Return (agent_event frames, end frames) from an SSE body."""
    events, ends = [], []
    current_event = None
    for line in text.splitlines():
        if line.startswith("event: "):
            current_event = line[len("event: "):]
        elif line.startswith("data: "):
            payload = json.loads(line[len("data: "):])
            (ends if current_event == "end" else events).append(payload)
    return events, ends


BODY = {"question": "What drives resistance?", "genes": "TP53, BRAF"}


class TestSubmission:
    def test_valid_submission_accepted(self, tmp_path, fixture_dir):
        async def run() -> None:
            engine = auto_engine(tmp_path, fixture_dir=fixture_dir)
            async with client_for(engine) as client:
                response = await client.post("/runs", json=BODY)
                assert response.status_code == 202
                body = response.json()
                assert set(body) == {"run_id", "status_url", "events_url", "report_url", "metrics_url"}
                await engine.get(body["run_id"]).task

        asyncio.run(run())

    def test_empty_question_rejected_with_field(self, tmp_path, fixture_dir):
        async def run() -> None:
            engine = auto_engine(tmp_path, fixture_dir=fixture_dir)
            async with client_for(engine) as client:
                response = await client.post("/runs", json={"genes": "TP53"})
                assert response.status_code == 422
                body = response.json()
                assert body["error"] == "ValidationFailed"
                assert "question" in body["fields"]

        asyncio.run(run())

    def test_bad_genes_rejected_with_field(self, tmp_path, fixture_dir):
        async def run() -> None:
            engine = auto_engine(tmp_path, fixture_dir=fixture_dir)
            async with client_for(engine) as client:
                response = await client.post("/runs", json={"question": "q", "genes": "TP@53"})
                assert response.status_code == 422
                assert "genes" in response.json()["fields"]
                response = await client.post("/runs", json={"question": "q"})
                assert "genes" in response.json()["fields"]
                response = await client.post("/runs", json={"question": "q", "scenario": "s99"})
                assert "scenario" in response.json()["fields"]

        asyncio.run(run())

    def test_upload_document_shape_posts_directly(self, tmp_path, fixture_dir):
        async def run() -> None:
            engine = auto_engine(tmp_path, fixture_dir=fixture_dir)
            async with client_for(engine) as client:
                document = {"context": "ctx", "question": "why?", "genes": ["TP53", "BRAF"]}
                run_id = await submit_and_wait(client, engine, document)
                status = (await client.get(f"/runs/{run_id}/status")).json()
                assert status["state"] == "Completed"

        asyncio.run(run())

    def test_missing_fixture_fails_run_not_submission(self, tmp_path):
        async def run() -> None:
            engine = auto_engine(tmp_path, fixture_dir=tmp_path / "nowhere")
            async with client_for(engine) as client:
                run_id = await submit_and_wait(client, engine, BODY)
                status = (await client.get(f"/runs/{run_id}/status")).json()
                assert status["state"] == "Failed"
                stream = await client.get(f"/runs/{run_id}/events")
                events, _ = parse_sse(stream.text)
                anomalies = [e for e in events if e["kind"] == "Anomaly"]
                assert any("FixtureMissing" in e["payload"] for e in anomalies)

        asyncio.run(run())


class TestRunResources:
    def test_unknown_run_404(self, tmp_path, fixture_dir):
        async def run() -> None:
            engine = auto_engine(tmp_path, fixture_dir=fixture_dir)
            async with client_for(engine) as client:
                for url in ("/runs/ghost/status", "/runs/ghost/metrics", "/runs/ghost/report.json"):
                    response = await client.get(url)
                    assert response.status_code == 404
                    assert response.json()["error"] == "UnknownRun"

        asyncio.run(run())

    def test_report_not_ready_while_pending(self, tmp_path, fixture_dir):
        async def run() -> None:
            engine = auto_engine(tmp_path, fixture_dir=fixture_dir)
            async with client_for(engine) as client:
                record = engine.submit(RunSubmission(question="q", genes="TP53"))
                response = await client.get(f"/runs/{record.run_id}/report.json")
                assert response.status_code == 409
                assert response.json()["error"] == "NotReady"

        asyncio.run(run())

    def test_report_formats_and_metrics(self, tmp_path, fixture_dir):
        async def run() -> None:
            engine = auto_engine(tmp_path, fixture_dir=fixture_dir)
            async with client_for(engine) as client:
                run_id = await submit_and_wait(client, engine, BODY)

                as_json = await client.get(f"/runs/{run_id}/report.json")
                assert as_json.status_code == 200
                payload = as_json.json()
                assert set(payload) >= {"version", "novel_biomarkers", "conclusions"}
                assert as_json.headers["X-Run-State"] == "Completed"

                as_md = await client.get(f"/runs/{run_id}/report.md")
                assert "# Integrated Evidence Report" in as_md.text

                as_html = await client.get(f"/runs/{run_id}/report.html")
                assert as_html.text.startswith("<!doctype html>")

                metrics = (await client.get(f"/runs/{run_id}/metrics")).json()
                assert metrics["genes_analyzed"] == 2
                assert metrics["total_prompt_tokens"] > 0

        asyncio.run(run())

    def test_s1_scenario_reports_13_genes(self, tmp_path):
        async def run() -> None:
            engine = auto_engine(tmp_path)
            async with client_for(engine) as client:
                run_id = await submit_and_wait(client, engine, {"question": "q", "scenario": "s1"})
                metrics = (await client.get(f"/runs/{run_id}/metrics")).json()
                assert metrics["genes_analyzed"] == 13

        asyncio.run(run())

    def test_exhausted_run_serves_last_report_with_state_header(self, tmp_path, fixture_dir):
        async def run() -> None:
            script = happy_script()
            script["integration.report_composer/*"] = report_json(["civ-1"])
            script["integration.critical_reviewer/*"] = "NOT APPROVED\n- never satisfied"
            del script["integration.report_composer/1"]
            del script["integration.critical_reviewer/1"]
            engine = scripted_engine(tmp_path, fixture_dir, script)
            async with client_for(engine) as client:
                run_id = await submit_and_wait(client, engine, BODY)
                response = await client.get(f"/runs/{run_id}/report.json")
                assert response.status_code == 200
                assert response.headers["X-Run-State"] == "ExhaustedIterations"
                assert response.json()["version"] == 3

        asyncio.run(run())


class TestEventStream:
    def test_full_replay_then_end(self, tmp_path, fixture_dir):
        async def run() -> None:
            engine = auto_engine(tmp_path, fixture_dir=fixture_dir)
            async with client_for(engine) as client:
                run_id = await submit_and_wait(client, engine, BODY)
                response = await client.get(f"/runs/{run_id}/events")
                events, ends = parse_sse(response.text)
                ledger = engine.get(run_id).ledger
                assert [e["seq"] for e in events] == list(range(1, ledger.last_seq + 1))
                assert ends == [{"state": "Completed"}]
                assert all("channel" in e for e in events)

        asyncio.run(run())

    def test_from_seq_resumes_after_cursor(self, tmp_path, fixture_dir):
        async def run() -> None:
            engine = auto_engine(tmp_path, fixture_dir=fixture_dir)
            async with client_for(engine) as client:
                run_id = await submit_and_wait(client, engine, BODY)
                response = await client.get(f"/runs/{run_id}/events", params={"from_seq": 5})
                events, _ = parse_sse(response.text)
                assert events[0]["seq"] == 6

        asyncio.run(run())

    def test_live_subscription_sees_every_event_once(self, tmp_path, fixture_dir):
        async def run() -> None:
            engine = auto_engine(tmp_path, fixture_dir=fixture_dir)
            async with client_for(engine) as client:
                response = await client.post("/runs", json=BODY)
                run_id = response.json()["run_id"]
                seqs: list[int] = []
                async with client.stream("GET", f"/runs/{run_id}/events") as stream:
                    async for line in stream.aiter_lines():
                        if line.startswith("data: "):
                            frame = json.loads(line[len("data: "):])
                            if "seq" in frame:
                                seqs.append(frame["seq"])
                await engine.get(run_id).task
                assert seqs == list(range(1, engine.get(run_id).ledger.last_seq + 1))

        asyncio.run(run())

    def test_disconnect_and_resume_is_exactly_once(self, tmp_path, fixture_dir):
        async def run() -> None:
            engine = auto_engine(tmp_path, fixture_dir=fixture_dir)
            async with client_for(engine) as client:
                run_id = await submit_and_wait(client, engine, BODY)
                total = engine.get(run_id).ledger.last_seq
                cut = total // 2
                observed: list[int] = []
                async with client.stream("GET", f"/runs/{run_id}/events") as stream:
                    async for line in stream.aiter_lines():
                        if line.startswith("data: "):
                            frame = json.loads(line[len("data: "):])
                            if "seq" in frame:
                                observed.append(frame["seq"])
                                if frame["seq"] == cut:
                                    break
                response = await client.get(f"/runs/{run_id}/events", params={"from_seq": cut})
                tail, ends = parse_sse(response.text)
                observed.extend(e["seq"] for e in tail)
                assert observed == list(range(1, total + 1))
                assert ends

        asyncio.run(run())


class TestConcurrentRuns:
    def test_parallel_runs_are_isolated(self, tmp_path, fixture_dir):
        async def run() -> None:
            engine = auto_engine(tmp_path, fixture_dir=fixture_dir)
            async with client_for(engine) as client:
                responses = await asyncio.gather(
                    *(client.post("/runs", json=BODY) for _ in range(4))
                )
                run_ids = [r.json()["run_id"] for r in responses]
                assert len(set(run_ids)) == 4
                await asyncio.gather(*(engine.get(rid).task for rid in run_ids))
                for rid in run_ids:
                    ledger = engine.get(rid).ledger
                    assert [e.seq for e in ledger.events()] == list(range(1, ledger.last_seq + 1))
                    assert all(e.run_id == rid for e in ledger.events())

        asyncio.run(run())
