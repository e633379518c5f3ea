"""Command-line interface.

    evisynth run     execute one workflow locally and print the artifact paths
    evisynth eval    sweep the bundled scenarios; CSV timing + consistency summary
    evisynth replay  re-render artifacts from a persisted run directory
    evisynth serve   start the HTTP service
    evisynth submit  thin client: post a run to a server and follow its events
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import io
import json
import sys
from pathlib import Path

from .domain import report_from_payload
from .engine import BackendSpec, Engine, EngineConfig, RunSubmission, SubmissionInvalid
from .evaluation import consistency, nesting_check, reading_time, speedup
from .ledger import load_events, snapshot_metrics
from .render import render_report
from .scenarios import load_scenarios


def _engine_config(args: argparse.Namespace) -> EngineConfig:
    config = EngineConfig.from_file(args.config) if getattr(args, "config", None) else EngineConfig.from_env()
    if getattr(args, "backend", None):
        if args.backend == "http":
            # url/model/key come from the env or config file
            config.backend.kind = "http"
        else:
            config.backend = BackendSpec(kind=args.backend, script_path=getattr(args, "script", None))
    if getattr(args, "fixture_root", None):
        config.fixture_root = Path(args.fixture_root)
    if getattr(args, "runs_root", None):
        config.runs_root = Path(args.runs_root)
    return config


def _submission(args: argparse.Namespace) -> RunSubmission:
    genes = args.genes
    context = args.context or ""
    question = args.question or ""
    if args.input_json:
        doc = json.loads(Path(args.input_json).read_text(encoding="utf-8"))
        question = question or doc.get("question", "")
        context = context or doc.get("context", "")
        genes = genes or doc.get("genes")
    return RunSubmission(
        question=question,
        context=context,
        genes=genes,
        scenario=args.scenario,
        source_mode=args.mode,
        max_iterations=args.max_iterations,
        token_ceiling=args.token_ceiling,
    )


def cmd_run(args: argparse.Namespace) -> int:
    engine = Engine(_engine_config(args))
    try:
        record = engine.submit(_submission(args))
    except SubmissionInvalid as exc:
        for field, message in sorted(exc.fields.items()):
            print(f"invalid {field}: {message}", file=sys.stderr)
        return 2
    asyncio.run(engine.execute(record))
    metrics = engine.metrics(record.run_id)
    state = record.ledger.state.value
    print(f"run {record.run_id}: {state}")
    print(f"artifacts: {record.run_dir}")
    if record.report:
        print(f"report: {record.run_dir / 'report.md'} (version {record.report.version})")
    print(
        f"tokens: {metrics.total_prompt_tokens} prompt / {metrics.total_completion_tokens} completion; "
        f"cost: {metrics.cost:.4f}; genes: {metrics.genes_analyzed}; iterations: {metrics.iterations}"
    )
    return 0 if state != "Failed" else 1


def cmd_eval(args: argparse.Namespace) -> int:
    config = _engine_config(args)
    names = args.scenarios.split(",") if args.scenarios else None
    scenarios = [s for s in load_scenarios() if names is None or s.name in names]
    if not scenarios:
        print(f"no scenarios matched {args.scenarios!r}", file=sys.stderr)
        return 2

    engine = Engine(config)
    rows = []
    reports_by_scenario = {}
    consistency_lines = []

    async def sweep() -> None:
        for scenario in scenarios:
            reports = []
            words = 0
            generation_minutes = 0.0
            for repeat in range(args.repeats):
                record = await engine.submit_and_execute(
                    RunSubmission(
                        question=args.question,
                        context=args.context or "",
                        scenario=scenario.name,
                    )
                )
                if record.report is None:
                    print(f"warning: {scenario.name} repeat {repeat} ended {record.ledger.state.value}", file=sys.stderr)
                    continue
                reports.append(record.report)
                if repeat == 0:
                    events = record.ledger.events()
                    words = sum(b.total_words for b in record.bundles.values())
                    generation_minutes = max(events[-1].timestamp - events[0].timestamp, 1e-9) / 60.0
            if not reports:
                continue
            reports_by_scenario[scenario.name] = reports[0]
            read_minutes = reading_time(words)
            rows.append(
                {
                    "scenario": scenario.name,
                    "words": words,
                    "reading_minutes": f"{read_minutes:.3f}",
                    "generation_minutes": f"{generation_minutes:.4f}",
                    "speedup": f"{speedup(read_minutes, generation_minutes):.1f}",
                }
            )
            if len(reports) >= 2:
                stats = consistency(reports, scenario.genes)
                consistency_lines.append(
                    f"{scenario.name}: jaccard mean={stats.mean:.3f} min={stats.min:.3f} over {len(reports)} runs"
                )

    asyncio.run(sweep())

    buffer = io.StringIO()
    writer = csv.DictWriter(
        buffer, fieldnames=["scenario", "words", "reading_minutes", "generation_minutes", "speedup"]
    )
    writer.writeheader()
    writer.writerows(rows)
    csv_text = buffer.getvalue()
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(csv_text, end="")

    for line in consistency_lines:
        print(line)
    swept = [s for s in scenarios if s.name in reports_by_scenario]
    if len(swept) >= 2:
        omissions = nesting_check(swept, reports_by_scenario)
        if omissions:
            for o in omissions:
                print(f"omission: {o.gene} highlighted in {o.from_scenario} but not {o.to_scenario}")
        else:
            print("omissions: none (all highlighted genes preserved while scaling up)")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    events_path = run_dir / "events.jsonl"
    if not events_path.exists():
        print(f"no events.jsonl under {run_dir}", file=sys.stderr)
        return 2
    events = load_events(events_path)
    inputs = json.loads((run_dir / "inputs.json").read_text(encoding="utf-8"))
    metrics = snapshot_metrics(events, genes_analyzed=len(inputs.get("genes", [])))
    stored = json.loads((run_dir / "metrics.json").read_text(encoding="utf-8"))
    recomputed = metrics.model_dump(mode="json")
    drift = {k: (stored.get(k), recomputed[k]) for k in recomputed if stored.get(k) != recomputed[k] and k != "cost"}
    print(f"replayed {len(events)} events; final state: {events[-1].payload}")
    if drift:
        print(f"metrics drift vs stored snapshot: {drift}", file=sys.stderr)
    else:
        print("metrics match the stored snapshot")

    payload = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
    if payload is None:
        print("no report in this run")
        return 0
    report = report_from_payload(payload)
    for fmt, suffix in (("markdown", "md"), ("html", "html")):
        if args.format in (suffix, "all"):
            out = run_dir / f"report.{suffix}"
            out.write_text(render_report(report, fmt), encoding="utf-8")
            print(f"rendered {out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    config = _engine_config(args)
    ui_dir = Path(args.ui_dir) if args.ui_dir else None
    app = create_app(Engine(config), ui_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_submit(args: argparse.Namespace) -> int:
    import httpx

    body = {
        "question": args.question or "",
        "context": args.context or "",
        "genes": args.genes,
        "scenario": args.scenario,
    }
    if args.input_json:
        doc = json.loads(Path(args.input_json).read_text(encoding="utf-8"))
        body = {**doc, **{k: v for k, v in body.items() if v}}
    server = args.server.rstrip("/")
    with httpx.Client(timeout=30.0) as client:
        response = client.post(f"{server}/runs", json=body)
        if response.status_code == 422:
            print(f"rejected: {response.json()}", file=sys.stderr)
            return 2
        response.raise_for_status()
        accepted = response.json()
        run_id = accepted["run_id"]
        print(f"run {run_id} accepted")
        if not args.follow:
            return 0
        with client.stream("GET", f"{server}/runs/{run_id}/events", timeout=None) as stream:
            for line in stream.iter_lines():
                if line.startswith("data: "):
                    frame = json.loads(line[len("data: "):])
                    if "state" in frame and "agent_id" not in frame:
                        print(f"== run ended: {frame['state']} ==")
                    else:
                        preview = frame["payload"].split("\n", 1)[0][:100]
                        print(f"[{frame['channel']}] #{frame['seq']} {frame['kind']} {frame['agent_id']}: {preview}")
    return 0


def _add_run_inputs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--question", help="research question")
    parser.add_argument("--context", help="analysis context")
    parser.add_argument("--genes", help="comma/space separated gene symbols")
    parser.add_argument("--input-json", help="JSON document with context/question/genes")
    parser.add_argument("--scenario", help="bundled scenario name (s1..s4)")


def _add_engine_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--backend", choices=["auto", "script", "http"], help="chat backend kind")
    parser.add_argument("--script", help="mock script file for --backend script")
    parser.add_argument("--fixture-root", help="directory with civic/pharmgkb/enrichment fixtures")
    parser.add_argument("--runs-root", help="directory for persisted run artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evisynth", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one workflow locally")
    _add_run_inputs(p_run)
    _add_engine_options(p_run)
    p_run.add_argument("--mode", choices=["fixture", "live"], help="evidence source mode")
    p_run.add_argument("--max-iterations", type=int)
    p_run.add_argument("--token-ceiling", type=int)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="scenario sweep with timing and consistency")
    _add_engine_options(p_eval)
    p_eval.add_argument("--scenarios", help="comma separated scenario names (default: all)")
    p_eval.add_argument("--repeats", type=int, default=5)
    p_eval.add_argument("--question", default="Which of these genes are actionable biomarkers?")
    p_eval.add_argument("--context", default="Benchmark sweep over the bundled scenarios.")
    p_eval.add_argument("--out", help="write the CSV here instead of stdout")
    p_eval.set_defaults(func=cmd_eval)

    p_replay = sub.add_parser("replay", help="re-render artifacts from a run directory")
    p_replay.add_argument("run_dir")
    p_replay.add_argument("--format", choices=["md", "html", "all"], default="all")
    p_replay.set_defaults(func=cmd_replay)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    _add_engine_options(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--ui-dir", help="serve a built console UI from this directory at /ui")
    p_serve.set_defaults(func=cmd_serve)

    p_submit = sub.add_parser("submit", help="post a run to a server and follow it")
    _add_run_inputs(p_submit)
    p_submit.add_argument("--server", default="http://127.0.0.1:8000")
    p_submit.add_argument("--follow", action="store_true", help="stream events until the run ends")
    p_submit.set_defaults(func=cmd_submit)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
