"""HTTP service: run submission, live event streaming, reports, and metrics.

Endpoints:

    POST /runs                         submit a run (202 + run_id)
    GET  /runs/{id}/events?from_seq=N  server-sent event stream of the audit trail
    GET  /runs/{id}/report.{json|md|html}
    GET  /runs/{id}/metrics
    GET  /runs/{id}/status
    GET  /healthz

Event streaming pushes every ledger event exactly once, in sequence order,
tagged with its terminal channel. ``from_seq`` resumes a dropped connection
after the given sequence number; streams of completed runs replay the full
trail and then end. Consumers poll the ledger, so a slow client can never
stall a running workflow.
"""

from __future__ import annotations

import asyncio
import json
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.responses import HTMLResponse, JSONResponse, PlainTextResponse, Response, StreamingResponse
from fastapi.staticfiles import StaticFiles

from ..channels import channel_for
from ..domain import report_payload
from ..engine import Engine, EngineConfig, RunSubmission, SubmissionInvalid
from ..ledger import AgentEvent, UnknownRun
from ..render import render_report
from .schemas import (
    MetricsResponse,
    RunAccepted,
    RunRequest,
    RunStatusResponse,
    ValidationFailedBody,
)

STREAM_POLL_SECONDS = 0.02


def _event_frame(event: AgentEvent) -> str:
    data = event.model_dump(mode="json")
    data["channel"] = channel_for(event.agent_id).value
    return f"id: {event.seq}\nevent: agent_event\ndata: {json.dumps(data, ensure_ascii=False)}\n\n"


def _end_frame(state: str) -> str:
    return f"event: end\ndata: {json.dumps({'state': state})}\n\n"


def create_app(
    engine: Optional[Engine] = None,
    *,
    config: Optional[EngineConfig] = None,
    ui_dir: Optional[Path] = None,
) -> FastAPI:
    engine = engine or Engine(config or EngineConfig.from_env())
    app = FastAPI(title="evisynth", version="0.1.0")
    app.state.engine = engine

    @app.exception_handler(UnknownRun)
    async def unknown_run_handler(_: Request, exc: UnknownRun) -> JSONResponse:
        return JSONResponse(status_code=404, content={"error": "UnknownRun", "detail": str(exc)})

    @app.get("/healthz")
    async def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/runs", status_code=202, response_model=RunAccepted, responses={422: {"model": ValidationFailedBody}})
    async def submit_run(request: RunRequest) -> JSONResponse | RunAccepted:
        try:
            record = engine.submit(
                RunSubmission(
                    question=request.question,
                    context=request.context,
                    genes=request.genes,
                    scenario=request.scenario,
                    source_mode=request.source_mode,
                    max_iterations=request.max_iterations,
                    token_ceiling=request.token_ceiling,
                )
            )
        except SubmissionInvalid as exc:
            return JSONResponse(
                status_code=422,
                content=ValidationFailedBody(fields=exc.fields).model_dump(),
            )
        record.task = asyncio.create_task(engine.execute(record))
        return RunAccepted(
            run_id=record.run_id,
            status_url=f"/runs/{record.run_id}/status",
            events_url=f"/runs/{record.run_id}/events",
            report_url=f"/runs/{record.run_id}/report.json",
            metrics_url=f"/runs/{record.run_id}/metrics",
        )

    @app.get("/runs/{run_id}/status", response_model=RunStatusResponse)
    async def run_status(run_id: str) -> RunStatusResponse:
        record = engine.get(run_id)
        status = record.status
        return RunStatusResponse(
            run_id=run_id,
            state=status.state.value,
            terminal=status.terminal,
            iterations=status.iterations,
            report_version=record.report.version if record.report else None,
        )

    @app.get("/runs/{run_id}/metrics", response_model=MetricsResponse)
    async def run_metrics(run_id: str) -> MetricsResponse:
        metrics = engine.metrics(run_id)
        return MetricsResponse(run_id=run_id, **metrics.model_dump())

    @app.get("/runs/{run_id}/report.{fmt}")
    async def run_report(run_id: str, fmt: str) -> Response:
        record = engine.get(run_id)
        if fmt not in ("json", "md", "html"):
            return JSONResponse(status_code=404, content={"error": "UnknownFormat", "detail": fmt})
        if not record.ledger.is_terminal or record.report is None:
            return JSONResponse(
                status_code=409,
                content={"error": "NotReady", "detail": f"run is {record.ledger.state.value}"},
            )
        headers = {"X-Run-State": record.ledger.state.value}
        if fmt == "json":
            return JSONResponse(content=report_payload(record.report), headers=headers)
        if fmt == "md":
            return PlainTextResponse(
                render_report(record.report, "markdown"),
                media_type="text/markdown",
                headers=headers,
            )
        return HTMLResponse(render_report(record.report, "html"), headers=headers)

    @app.get("/runs/{run_id}/events")
    async def run_events(run_id: str, from_seq: int = Query(default=0, ge=0)) -> StreamingResponse:
        record = engine.get(run_id)
        ledger = record.ledger

        async def stream():
            cursor = from_seq
            while True:
                for event in ledger.events(from_seq=cursor):
                    cursor = event.seq
                    yield _event_frame(event)
                if ledger.is_terminal and cursor >= ledger.last_seq:
                    yield _end_frame(ledger.state.value)
                    return
                await asyncio.sleep(STREAM_POLL_SECONDS)

        return StreamingResponse(
            stream(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-store", "X-Accel-Buffering": "no"},
        )

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
