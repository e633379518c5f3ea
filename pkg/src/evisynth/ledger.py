"""Append-only audit trail for runs, metrics aggregation, and persistence.

Every prompt, response, verdict, status change, and anomaly in a run becomes
an AgentEvent with a strictly increasing, gap-free sequence number. Events
are never mutated or deleted; metrics are always recomputed from the event
stream so the ledger stays the single source of truth.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field

from .domain import (
    IntegratedReport,
    RunState,
    TERMINAL_STATES,
    report_payload,
    state_transition_allowed,
)
from .gateway import DEFAULT_PRICE_TABLE, PriceTable, estimate_cost
from .render import render_report

#: Agent id used for run-level lifecycle events.
RUN_ORCHESTRATOR = "run.orchestrator"

REDACTED_PAYLOAD = "[payload redacted]"


class LedgerError(Exception):
    pass


class RunClosed(LedgerError):
    """Append attempted after the terminal status event."""


class UnknownRun(LedgerError):
    pass


class EventKind(str, Enum):
    PROMPT = "Prompt"
    RESPONSE = "Response"
    VERDICT = "Verdict"
    STATUS = "Status"
    ANOMALY = "Anomaly"


class TokenUsage(BaseModel):
    model_config = ConfigDict(frozen=True)

    prompt: int = Field(ge=0)
    completion: int = Field(ge=0)


class AgentEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    run_id: str
    seq: int = Field(ge=1)
    timestamp: float
    agent_id: str
    kind: EventKind
    payload: str
    token_usage: Optional[TokenUsage] = None


class RunMetrics(BaseModel):
    """Aggregated accounting for one run, recomputed from its events."""

    model_config = ConfigDict(frozen=True)

    total_prompt_tokens: int = Field(ge=0)
    total_completion_tokens: int = Field(ge=0)
    wall_time: float = Field(ge=0.0)
    cost: float = Field(ge=0.0)
    genes_analyzed: int = Field(ge=0)
    iterations: dict[str, int] = Field(default_factory=dict)


class RunLedger:
    """Linearizable per-run event log.

    Appends are serialized under a lock, so concurrent pipelines receive
    distinct consecutive sequence numbers and readers always see a
    consistent prefix. After the terminal run-level status event the ledger
    refuses further appends.
    """

    def __init__(self, run_id: str, *, clock: Callable[[], float] = time.time) -> None:
        self.run_id = run_id
        self._clock = clock
        self._events: list[AgentEvent] = []
        self._lock = threading.Lock()
        self._state = RunState.PENDING

    def append(
        self,
        kind: EventKind,
        agent_id: str,
        payload: str,
        token_usage: Optional[TokenUsage] = None,
    ) -> AgentEvent:
        """Persist one event with the next sequence number."""
        with self._lock:
            if self._state in TERMINAL_STATES:
                raise RunClosed(f"run {self.run_id} is terminal; no further events accepted")
            event = AgentEvent(
                run_id=self.run_id,
                seq=len(self._events) + 1,
                timestamp=self._clock(),
                agent_id=agent_id,
                kind=kind,
                payload=payload,
                token_usage=token_usage,
            )
            self._events.append(event)
            return event

    def set_state(self, state: RunState) -> AgentEvent:
        """Record a run-level state change, enforcing monotone progression."""
        with self._lock:
            if not state_transition_allowed(self._state, state):
                raise LedgerError(f"illegal state transition {self._state} -> {state}")
            event = AgentEvent(
                run_id=self.run_id,
                seq=len(self._events) + 1,
                timestamp=self._clock(),
                agent_id=RUN_ORCHESTRATOR,
                kind=EventKind.STATUS,
                payload=state.value,
                token_usage=None,
            )
            self._events.append(event)
            self._state = state
            return event

    @property
    def state(self) -> RunState:
        with self._lock:
            return self._state

    @property
    def is_terminal(self) -> bool:
        return self.state in TERMINAL_STATES

    @property
    def last_seq(self) -> int:
        with self._lock:
            return len(self._events)

    def events(self, from_seq: int = 0) -> list[AgentEvent]:
        """Events with seq > from_seq, in order (a consistent snapshot)."""
        with self._lock:
            return self._events[from_seq:]


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def pipeline_iterations(events: Sequence[AgentEvent]) -> dict[str, int]:
    """Per-pipeline generator rounds, derived from the event stream."""
    counts = {"civic": 0, "pharmgkb": 0, "enrichment": 0, "integration": 0}
    for event in events:
        if event.kind != EventKind.RESPONSE:
            continue
        if event.agent_id.endswith(".bioexpert"):
            counts[event.agent_id.split(".", 1)[0]] += 1
        elif event.agent_id == "integration.report_composer":
            counts["integration"] += 1
    return counts


def snapshot_metrics(
    events: Sequence[AgentEvent],
    *,
    genes_analyzed: int,
    backend_id: str = "mock",
    price_table: PriceTable = DEFAULT_PRICE_TABLE,
) -> RunMetrics:
    """Recompute metrics from an event stream (never from cached counters)."""
    prompt_total = sum(e.token_usage.prompt for e in events if e.token_usage)
    completion_total = sum(e.token_usage.completion for e in events if e.token_usage)
    wall_time = events[-1].timestamp - events[0].timestamp if len(events) > 1 else 0.0
    cost = estimate_cost({backend_id: (prompt_total, completion_total)}, price_table)
    return RunMetrics(
        total_prompt_tokens=prompt_total,
        total_completion_tokens=completion_total,
        wall_time=max(wall_time, 0.0),
        cost=cost,
        genes_analyzed=genes_analyzed,
        iterations=pipeline_iterations(events),
    )


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    sha256: str


def _dump_event(event: AgentEvent, *, redact: bool) -> str:
    data = event.model_dump(mode="json")
    if redact and event.kind in (EventKind.PROMPT, EventKind.RESPONSE):
        data["payload"] = REDACTED_PAYLOAD
    return json.dumps(data, ensure_ascii=False, sort_keys=True)


def load_events(path: str | Path) -> list[AgentEvent]:
    """Read an events.jsonl file back into ordered AgentEvents."""
    events = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                events.append(AgentEvent.model_validate_json(line))
    return events


def persist_run(
    *,
    run_id: str,
    events: Sequence[AgentEvent],
    report: Optional[IntegratedReport],
    metrics: RunMetrics,
    inputs: dict[str, Any],
    root: str | Path,
    redact_payloads: bool = False,
) -> list[ManifestEntry]:
    """Write the complete artifact set for a terminal run.

    Produces events.jsonl, report.json, report.md, metrics.json, and
    inputs.json under ``root``/``run_id`` and returns a manifest of paths
    with content hashes. Re-persisting an unchanged run yields identical
    hashes.
    """
    if not events or events[-1].kind != EventKind.STATUS or events[-1].payload not in {
        s.value for s in TERMINAL_STATES
    }:
        raise LedgerError("run is not terminal; refusing to persist a partial trail")

    run_dir = Path(root) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)

    files: dict[str, str] = {
        "events.jsonl": "".join(_dump_event(e, redact=redact_payloads) + "\n" for e in events),
        "report.json": json.dumps(
            report_payload(report) if report else None,
            ensure_ascii=False,
            sort_keys=True,
            indent=2,
        )
        + "\n",
        "report.md": render_report(report, "markdown") if report else "No report was produced by this run.\n",
        "metrics.json": json.dumps(metrics.model_dump(mode="json"), ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        "inputs.json": json.dumps(inputs, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
    }

    manifest: list[ManifestEntry] = []
    for name, content in files.items():
        data = content.encode("utf-8")
        (run_dir / name).write_bytes(data)
        manifest.append(ManifestEntry(path=str(run_dir / name), sha256=hashlib.sha256(data).hexdigest()))
    return manifest
