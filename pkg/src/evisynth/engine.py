"""Run engine: submission validation, workflow execution, run registry.

A run proceeds Pending -> Retrieving -> Analyzing -> Integrating -> terminal.
Retrieval and the three evidence pipelines run concurrently; the pipelines
share only the per-run gateway (token accounting) and the per-run ledger
(event trail), both of which serialize access internally. Runs are fully
isolated from each other: separate ledgers, budgets, and artifacts.
"""

from __future__ import annotations

import asyncio
import json
import logging
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .analysis import PipelineConfig, run_analysis
from .domain import (
    EmptyGeneList,
    EvidenceBundle,
    GeneSet,
    InvalidSymbol,
    ResearchBrief,
    RunState,
    RunStatus,
    SOURCES,
    SourceId,
    parse_gene_list,
)
from .gateway import (
    AutoApprovalBackend,
    ChatBackend,
    DEFAULT_PRICE_TABLE,
    DEFAULT_PROMPT_BUDGET,
    HttpChatBackend,
    PriceTable,
    RunGateway,
    ScriptedMockBackend,
    TokenBudget,
)
from .integration import consolidate, run_integration
from .ledger import (
    EventKind,
    LedgerError,
    RUN_ORCHESTRATOR,
    RunLedger,
    RunMetrics,
    UnknownRun,
    persist_run,
    pipeline_iterations,
    snapshot_metrics,
)
from .scenarios import get_scenario, scenario_fixture_dir
from .sources import (
    CivicAdapter,
    FixtureAdapter,
    GProfilerAdapter,
    PharmGkbAdapter,
    RetrievalLog,
    SourceAdapter,
    retrieve,
)

logger = logging.getLogger(__name__)


class SubmissionInvalid(Exception):
    """Submission rejected with field-level messages."""

    def __init__(self, fields: dict[str, str]) -> None:
        self.fields = fields
        super().__init__("; ".join(f"{k}: {v}" for k, v in sorted(fields.items())))


@dataclass
class BackendSpec:
    """Which chat backend a deployment talks to."""

    kind: str = "auto"  # auto | script | http
    script: Optional[dict[str, str]] = None
    script_path: Optional[str] = None
    url: Optional[str] = None
    model: Optional[str] = None
    api_key: Optional[str] = None


@dataclass
class EngineConfig:
    backend: BackendSpec = field(default_factory=BackendSpec)
    fixture_root: Optional[Path] = None
    runs_root: Path = Path("runs")
    source_mode: str = "fixture"
    max_iterations: int = 3
    token_ceiling: Optional[int] = None
    prompt_budget: int = DEFAULT_PROMPT_BUDGET
    price_table: PriceTable = DEFAULT_PRICE_TABLE
    max_items_per_gene: int = 25
    request_timeout: float = 30.0
    redact_payloads: bool = False

    @classmethod
    def from_env(cls, env: Optional[dict[str, str]] = None) -> "EngineConfig":
        """Build a config from EVISYNTH_* environment variables."""
        env = dict(os.environ if env is None else env)
        config = cls()
        config.backend = BackendSpec(
            kind=env.get("EVISYNTH_BACKEND", "auto"),
            script_path=env.get("EVISYNTH_MOCK_SCRIPT"),
            url=env.get("EVISYNTH_BACKEND_URL"),
            model=env.get("EVISYNTH_MODEL"),
            api_key=env.get("EVISYNTH_API_KEY"),
        )
        if env.get("EVISYNTH_FIXTURE_ROOT"):
            config.fixture_root = Path(env["EVISYNTH_FIXTURE_ROOT"])
        if env.get("EVISYNTH_RUNS_ROOT"):
            config.runs_root = Path(env["EVISYNTH_RUNS_ROOT"])
        if env.get("EVISYNTH_SOURCE_MODE"):
            config.source_mode = env["EVISYNTH_SOURCE_MODE"]
        if env.get("EVISYNTH_MAX_ITERATIONS"):
            config.max_iterations = int(env["EVISYNTH_MAX_ITERATIONS"])
        if env.get("EVISYNTH_TOKEN_CEILING"):
            config.token_ceiling = int(env["EVISYNTH_TOKEN_CEILING"])
        if env.get("EVISYNTH_PROMPT_BUDGET"):
            config.prompt_budget = int(env["EVISYNTH_PROMPT_BUDGET"])
        if env.get("EVISYNTH_PRICE_TABLE"):
            rates = json.loads(env["EVISYNTH_PRICE_TABLE"])
            config.price_table = PriceTable(
                rates={k: (float(v[0]), float(v[1])) for k, v in rates.items()}
            )
        if env.get("EVISYNTH_REDACT_PAYLOADS", "").lower() in ("1", "true", "yes"):
            config.redact_payloads = True
        return config

    @classmethod
    def from_file(cls, path: str | Path) -> "EngineConfig":
        """Build a config from a JSON file (same keys as the env variables)."""
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_env({k: str(v) for k, v in payload.items()})


@dataclass
class RunSubmission:
    question: str = ""
    context: str = ""
    genes: Optional[str | list[str]] = None
    scenario: Optional[str] = None
    source_mode: Optional[str] = None
    max_iterations: Optional[int] = None
    token_ceiling: Optional[int] = None


class RunRecord:
    """Everything the engine tracks about one run."""

    def __init__(
        self,
        run_id: str,
        brief: ResearchBrief,
        *,
        scenario: Optional[str],
        source_mode: str,
        max_iterations: int,
        token_ceiling: Optional[int],
        ledger: RunLedger,
        gateway: RunGateway,
    ) -> None:
        self.run_id = run_id
        self.brief = brief
        self.scenario = scenario
        self.source_mode = source_mode
        self.max_iterations = max_iterations
        self.token_ceiling = token_ceiling
        self.ledger = ledger
        self.gateway = gateway
        self.bundles: dict[SourceId, EvidenceBundle] = {}
        self.retrieval_logs: dict[SourceId, RetrievalLog] = {}
        self.outcomes = []
        self.report = None
        self.run_dir: Optional[Path] = None
        self.task: Optional[asyncio.Task] = None

    @property
    def status(self) -> RunStatus:
        return RunStatus(
            state=self.ledger.state,
            iterations=pipeline_iterations(self.ledger.events()),
        )

    def inputs(self) -> dict:
        return {
            "context": self.brief.context,
            "question": self.brief.question,
            "genes": list(self.brief.genes),
            "scenario": self.scenario,
            "source_mode": self.source_mode,
            "max_iterations": self.max_iterations,
            "token_ceiling": self.token_ceiling,
        }


class Engine:
    """Creates, executes, and serves runs. Safe for concurrent runs."""

    def __init__(
        self,
        config: Optional[EngineConfig] = None,
        *,
        clock: Callable[[], float] = time.time,
        id_factory: Callable[[], str] = lambda: uuid.uuid4().hex[:12],
    ) -> None:
        self.config = config or EngineConfig()
        self._clock = clock
        self._id_factory = id_factory
        self._runs: dict[str, RunRecord] = {}
        self._lock = threading.Lock()
        self.backend = self._build_backend(self.config.backend)

    @staticmethod
    def _build_backend(spec: BackendSpec) -> ChatBackend:
        if spec.kind == "auto":
            return AutoApprovalBackend()
        if spec.kind == "script":
            if spec.script is not None:
                return ScriptedMockBackend(spec.script)
            if spec.script_path:
                return ScriptedMockBackend.from_file(spec.script_path)
            raise ValueError("backend kind 'script' requires a script or script_path")
        if spec.kind == "http":
            if not spec.url or not spec.model:
                raise ValueError("backend kind 'http' requires url and model")
            return HttpChatBackend(spec.url, spec.model, api_key=spec.api_key)
        raise ValueError(f"unknown backend kind '{spec.kind}'")

    # -- submission ---------------------------------------------------------

    def submit(self, submission: RunSubmission, *, run_id: Optional[str] = None) -> RunRecord:
        """Validate a submission and register a new run (not yet executed).

        Raises SubmissionInvalid with field-level messages on bad input.
        """
        fields: dict[str, str] = {}

        question = (submission.question or "").strip()
        if not question:
            fields["question"] = "a non-empty research question is required"

        scenario_name = submission.scenario
        if scenario_name is not None:
            try:
                get_scenario(scenario_name)
            except Exception:
                fields["scenario"] = f"unknown scenario '{scenario_name}'"
                scenario_name = None

        genes: Optional[GeneSet] = None
        raw_genes = submission.genes
        if isinstance(raw_genes, list):
            raw_genes = ", ".join(str(g) for g in raw_genes)
        if raw_genes is not None and str(raw_genes).strip():
            try:
                genes = parse_gene_list(str(raw_genes))
            except InvalidSymbol as error:
                fields["genes"] = str(error)
            except EmptyGeneList:
                fields["genes"] = "no valid gene symbols found"
        elif scenario_name is not None and "scenario" not in fields:
            genes = get_scenario(scenario_name).genes
        else:
            fields["genes"] = "provide a gene list or a scenario name"

        source_mode = submission.source_mode or self.config.source_mode
        if source_mode not in ("fixture", "live"):
            fields["source_mode"] = f"source_mode must be 'fixture' or 'live', got '{source_mode}'"

        max_iterations = (
            self.config.max_iterations
            if submission.max_iterations is None
            else submission.max_iterations
        )
        if max_iterations < 1:
            fields["max_iterations"] = "max_iterations must be >= 1"

        token_ceiling = (
            self.config.token_ceiling
            if submission.token_ceiling is None
            else submission.token_ceiling
        )
        if token_ceiling is not None and token_ceiling < 1:
            fields["token_ceiling"] = "token_ceiling must be >= 1"

        if fields:
            raise SubmissionInvalid(fields)

        brief = ResearchBrief(
            context=submission.context or "", question=question, genes=genes
        )
        run_id = run_id or self._id_factory()
        ledger = RunLedger(run_id, clock=self._clock)
        ledger.append(EventKind.STATUS, RUN_ORCHESTRATOR, RunState.PENDING.value)
        gateway = RunGateway(self.backend, budget=TokenBudget(token_ceiling))
        record = RunRecord(
            run_id,
            brief,
            scenario=submission.scenario,
            source_mode=source_mode,
            max_iterations=max_iterations,
            token_ceiling=token_ceiling,
            ledger=ledger,
            gateway=gateway,
        )
        with self._lock:
            if run_id in self._runs:
                raise SubmissionInvalid({"run_id": f"run '{run_id}' already exists"})
            self._runs[run_id] = record
        return record

    def get(self, run_id: str) -> RunRecord:
        with self._lock:
            record = self._runs.get(run_id)
        if record is None:
            raise UnknownRun(f"no run with id '{run_id}'")
        return record

    def run_ids(self) -> list[str]:
        with self._lock:
            return list(self._runs)

    # -- execution ----------------------------------------------------------

    def _adapters(self, record: RunRecord) -> dict[SourceId, SourceAdapter]:
        if record.source_mode == "live":
            return {
                SourceId.CIVIC: CivicAdapter(
                    timeout=self.config.request_timeout,
                    max_items_per_gene=self.config.max_items_per_gene,
                ),
                SourceId.PHARMGKB: PharmGkbAdapter(
                    timeout=self.config.request_timeout,
                    max_items_per_gene=self.config.max_items_per_gene,
                ),
                SourceId.ENRICHMENT: GProfilerAdapter(
                    timeout=self.config.request_timeout,
                    max_items_per_gene=self.config.max_items_per_gene,
                ),
            }
        if record.scenario:
            fixture_dir = scenario_fixture_dir(record.scenario)
        elif self.config.fixture_root:
            fixture_dir = Path(self.config.fixture_root)
        else:
            fixture_dir = scenario_fixture_dir("s1")
        return {
            source: FixtureAdapter(
                source,
                fixture_dir / f"{source.value.lower()}.json",
                max_items_per_gene=self.config.max_items_per_gene,
                clock=self._clock,
            )
            for source in SOURCES
        }

    async def _retrieve_all(self, record: RunRecord) -> None:
        adapters = self._adapters(record)
        genes = record.brief.genes
        if record.source_mode == "fixture":
            # Sequential in source order: cheap, and keeps mock runs byte-stable.
            results = [retrieve(adapters[s], genes, clock=self._clock) for s in SOURCES]
        else:
            results = await asyncio.gather(
                *(
                    asyncio.to_thread(retrieve, adapters[s], genes, clock=self._clock)
                    for s in SOURCES
                )
            )
        for source, (bundle, log) in zip(SOURCES, results):
            record.bundles[source] = bundle
            record.retrieval_logs[source] = log
            record.ledger.append(
                EventKind.STATUS,
                f"{source.value.lower()}.orchestrator",
                f"retrieved {len(bundle.items)} items ({bundle.total_words} words); {log.summary()}",
            )

    async def _run_workflow(self, record: RunRecord) -> None:
        ledger = record.ledger
        ledger.set_state(RunState.RETRIEVING)
        await self._retrieve_all(record)

        ledger.set_state(RunState.ANALYZING)
        outcomes = await asyncio.gather(
            *(
                run_analysis(
                    record.brief,
                    record.bundles[source],
                    PipelineConfig(
                        max_iterations=record.max_iterations,
                        source_id=source,
                        prompt_budget=self.config.prompt_budget,
                    ),
                    record.gateway,
                    ledger,
                )
                for source in SOURCES
            )
        )
        record.outcomes = list(outcomes)

        ledger.set_state(RunState.INTEGRATING)
        consolidated = consolidate(record.outcomes, record.brief)
        report, final_state = await run_integration(
            consolidated,
            PipelineConfig(
                max_iterations=record.max_iterations,
                prompt_budget=self.config.prompt_budget,
            ),
            record.gateway,
            ledger,
        )
        record.report = report
        ledger.set_state(final_state)

    async def execute(self, record: RunRecord) -> RunRecord:
        """Run the full workflow; never raises, always reaches a terminal state."""
        try:
            await self._run_workflow(record)
        except Exception as error:  # noqa: BLE001 - terminal safety net
            logger.exception("run %s failed", record.run_id)
            if not record.ledger.is_terminal:
                record.ledger.append(
                    EventKind.ANOMALY,
                    RUN_ORCHESTRATOR,
                    f"{type(error).__name__}: {error}",
                )
                record.ledger.set_state(RunState.FAILED)
        try:
            self.persist(record)
        except Exception:  # noqa: BLE001 - artifacts are best-effort on failure
            logger.exception("failed to persist run %s", record.run_id)
        return record

    async def submit_and_execute(
        self, submission: RunSubmission, *, run_id: Optional[str] = None
    ) -> RunRecord:
        return await self.execute(self.submit(submission, run_id=run_id))

    # -- artifacts and metrics ----------------------------------------------

    def metrics(self, run_id: str) -> RunMetrics:
        record = self.get(run_id)
        return snapshot_metrics(
            record.ledger.events(),
            genes_analyzed=len(record.brief.genes),
            backend_id=self.backend.backend_id,
            price_table=self.config.price_table,
        )

    def persist(self, record: RunRecord) -> list:
        if not record.ledger.is_terminal:
            raise LedgerError("run is not terminal; nothing persisted")
        manifest = persist_run(
            run_id=record.run_id,
            events=record.ledger.events(),
            report=record.report,
            metrics=self.metrics(record.run_id),
            inputs=record.inputs(),
            root=self.config.runs_root,
            redact_payloads=self.config.redact_payloads,
        )
        record.run_dir = Path(self.config.runs_root) / record.run_id
        return manifest
