"""Evidence integration: consolidation, composition, parallel review, consensus.

The integration orchestrator is plain code (no model calls): it merges the
per-source analyses, asks the composer for a four-section report, runs the
deterministic structural check, then dispatches the three reviewers
concurrently. Only unanimous approval completes the run; otherwise the
reviewers' combined feedback drives the next composition round, up to the
iteration cap.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Sequence

from .analysis import AnalysisOutcome, UnrecognizedVerdict, parse_verdict, PipelineConfig
from .domain import (
    CitationRef,
    GeneSet,
    IntegratedReport,
    ResearchBrief,
    RunState,
    SOURCES,
    SourceId,
    StructureError,
    Verdict,
    VerdictDecision,
    analysis_payload,
    serialize_report,
    validate_report_structure,
)
from .gateway import (
    GatewayError,
    RunGateway,
    build_initial_prompt,
    build_review_prompt,
    build_revision_prompt,
    render_envelope,
    role,
)
from .ledger import EventKind, RunLedger, TokenUsage


class IntegrationError(Exception):
    pass


class MissingSource(IntegrationError):
    def __init__(self, source_id: SourceId) -> None:
        self.source_id = source_id
        super().__init__(f"no analysis outcome for source {source_id.value}")


class DuplicateSource(IntegrationError):
    def __init__(self, source_id: SourceId) -> None:
        self.source_id = source_id
        super().__init__(f"multiple analysis outcomes for source {source_id.value}")


class WrongArity(IntegrationError):
    pass


class ReviewerId(str, Enum):
    CONTENT_VALIDATOR = "content_validator"
    CRITICAL_REVIEWER = "critical_reviewer"
    RELEVANCE_VALIDATOR = "relevance_validator"


#: Fixed order used whenever reviewer feedback is concatenated.
REVIEWER_ORDER: tuple[ReviewerId, ...] = (
    ReviewerId.CONTENT_VALIDATOR,
    ReviewerId.CRITICAL_REVIEWER,
    ReviewerId.RELEVANCE_VALIDATOR,
)

#: Label used for synthetic feedback from the deterministic structural check.
STRUCTURE_CHECK_LABEL = "orchestrator"

COMPOSER_ID = "integration.report_composer"
ORCHESTRATOR_ID = "integration.orchestrator"


@dataclass(frozen=True)
class ConsolidatedEvidence:
    """Deterministic merge of the per-source analyses for one run.

    ``flagged`` marks sources whose pipeline exhausted its iterations; their
    analyses are still included (dropping them would break traceability) but
    the composer prompt labels them unapproved.
    """

    analyses: Mapping[SourceId, Optional[object]]  # StructuredAnalysis | None
    flagged: frozenset[SourceId]
    citations: tuple[CitationRef, ...]
    brief: ResearchBrief

    @property
    def genes(self) -> GeneSet:
        return self.brief.genes

    def evidence_ids(self) -> frozenset[str]:
        return frozenset(ref.evidence_id for ref in self.citations)


def consolidate(outcomes: Sequence[AnalysisOutcome], brief: ResearchBrief) -> ConsolidatedEvidence:
    """Merge exactly one outcome per configured source; no model calls.

    Raises MissingSource / DuplicateSource on arity violations.
    """
    by_source: dict[SourceId, AnalysisOutcome] = {}
    for outcome in outcomes:
        if outcome.source_id in by_source:
            raise DuplicateSource(outcome.source_id)
        by_source[outcome.source_id] = outcome
    for source in SOURCES:
        if source not in by_source:
            raise MissingSource(source)

    citations: list[CitationRef] = []
    seen: set[str] = set()
    for source in SOURCES:
        final = by_source[source].final
        if final is None:
            continue
        for ref in final.citations:
            if ref.evidence_id not in seen:
                seen.add(ref.evidence_id)
                citations.append(ref)

    return ConsolidatedEvidence(
        analyses={source: by_source[source].final for source in SOURCES},
        flagged=frozenset(s for s in SOURCES if not by_source[s].approved),
        citations=tuple(citations),
        brief=brief,
    )


def serialize_consolidated(consolidated: ConsolidatedEvidence) -> str:
    """Stable textual form of the consolidated evidence for prompt embedding."""
    blocks = []
    for source in SOURCES:
        analysis = consolidated.analyses[source]
        status = "unapproved upstream analysis" if source in consolidated.flagged else "approved"
        blocks.append(
            {
                "source_id": source.value,
                "status": status,
                "analysis": analysis_payload(analysis) if analysis is not None else None,
            }
        )
    return json.dumps(
        {
            "analyses": blocks,
            "available_citations": [
                {"evidence_id": ref.evidence_id, "url": ref.url} for ref in consolidated.citations
            ],
        },
        ensure_ascii=False,
        indent=2,
    )


@dataclass(frozen=True)
class ReviewOutcome:
    reviewer_id: ReviewerId
    verdict: Verdict
    latency: float


@dataclass(frozen=True)
class ConsensusResult:
    approved: bool
    combined_feedback: tuple[tuple[ReviewerId, str], ...]


def consensus(outcomes: Sequence[ReviewOutcome]) -> ConsensusResult:
    """Unanimity gate: approved iff all three reviewers approved.

    Rejections concatenate each rejecting reviewer's bullets in the fixed
    reviewer order, so revision prompts are byte-stable regardless of the
    order in which parallel reviews completed.
    """
    if len(outcomes) != 3 or {o.reviewer_id for o in outcomes} != set(REVIEWER_ORDER):
        raise WrongArity("consensus requires exactly one outcome per reviewer")
    by_reviewer = {o.reviewer_id: o for o in outcomes}
    approved = all(by_reviewer[r].verdict.approved for r in REVIEWER_ORDER)
    if approved:
        return ConsensusResult(approved=True, combined_feedback=())
    feedback = tuple(
        (reviewer, bullet)
        for reviewer in REVIEWER_ORDER
        for bullet in by_reviewer[reviewer].verdict.feedback
    )
    return ConsensusResult(approved=False, combined_feedback=feedback)


async def compose_report(
    consolidated: ConsolidatedEvidence,
    feedback: Optional[Sequence[tuple[str, str]]],
    version: int,
    gateway: RunGateway,
    *,
    previous: Optional[str] = None,
    ledger: Optional[RunLedger] = None,
) -> str:
    """Ask the composer for report draft ``version``; returns raw text.

    Version 1 must have no feedback; later versions must carry both the
    previous draft and the labeled feedback bullets that rejected it.
    """
    if version == 1 and feedback:
        raise ValueError("the first draft cannot carry feedback")
    if version >= 2 and (not feedback or previous is None):
        raise ValueError("revision drafts require previous output and feedback")

    evidence = serialize_consolidated(consolidated)
    if version == 1:
        envelope = build_initial_prompt(
            role("report_composer"), consolidated.brief, evidence, agent_id=COMPOSER_ID
        )
    else:
        labeled = [f"[{label}] {bullet}" for label, bullet in feedback or ()]
        envelope = build_revision_prompt(
            role("report_composer"),
            consolidated.brief,
            evidence,
            previous or "",
            labeled,
            version,
            agent_id=COMPOSER_ID,
        )
    if ledger:
        ledger.append(EventKind.PROMPT, COMPOSER_ID, render_envelope(envelope))
    result = await gateway.complete(envelope)
    if ledger:
        ledger.append(
            EventKind.RESPONSE,
            COMPOSER_ID,
            result.text,
            TokenUsage(prompt=result.prompt_tokens, completion=result.completion_tokens),
        )
    return result.text


async def _review_one(
    reviewer: ReviewerId,
    candidate: str,
    consolidated: ConsolidatedEvidence,
    gateway: RunGateway,
    iteration: int,
    ledger: Optional[RunLedger],
    timer,
) -> ReviewOutcome:
    agent_id = f"integration.{reviewer.value}"
    envelope = build_review_prompt(
        role(reviewer.value),
        consolidated.brief,
        serialize_consolidated(consolidated),
        candidate,
        iteration,
        agent_id=agent_id,
    )
    if ledger:
        ledger.append(EventKind.PROMPT, agent_id, render_envelope(envelope))
    started = timer()
    try:
        result = await gateway.complete(envelope)
    except GatewayError as error:
        # Failure isolation: a dead reviewer counts as a rejection with an
        # anomaly note; the other reviewers and the run itself continue.
        if ledger:
            ledger.append(EventKind.ANOMALY, agent_id, f"reviewer call failed: {error}")
        verdict = Verdict(
            decision=VerdictDecision.NOT_APPROVED,
            feedback=(f"reviewer unavailable ({error}); rerun required",),
        )
        if ledger:
            ledger.append(EventKind.VERDICT, agent_id, f"NOT APPROVED\n- {verdict.feedback[0]}")
        return ReviewOutcome(reviewer_id=reviewer, verdict=verdict, latency=timer() - started)
    if ledger:
        ledger.append(
            EventKind.RESPONSE,
            agent_id,
            result.text,
            TokenUsage(prompt=result.prompt_tokens, completion=result.completion_tokens),
        )
    try:
        verdict = parse_verdict(result.text)
    except UnrecognizedVerdict:
        if ledger:
            ledger.append(
                EventKind.ANOMALY,
                agent_id,
                f"unrecognized verdict treated as rejection: {result.text[:200]}",
            )
        verdict = Verdict(
            decision=VerdictDecision.NOT_APPROVED,
            feedback=("reviewer output unparseable; restate verdict",),
        )
    if ledger:
        ledger.append(EventKind.VERDICT, agent_id, result.text)
    return ReviewOutcome(reviewer_id=reviewer, verdict=verdict, latency=timer() - started)


async def review_parallel(
    report: IntegratedReport,
    consolidated: ConsolidatedEvidence,
    gateway: RunGateway,
    *,
    iteration: int = 1,
    ledger: Optional[RunLedger] = None,
) -> list[ReviewOutcome]:
    """Dispatch the three reviewers concurrently; all complete regardless."""
    candidate = serialize_report(report)
    timer = gateway.timer
    coros = [
        _review_one(reviewer, candidate, consolidated, gateway, iteration, ledger, timer)
        for reviewer in REVIEWER_ORDER
    ]
    return list(await asyncio.gather(*coros))


async def run_integration(
    consolidated: ConsolidatedEvidence,
    config: PipelineConfig,
    gateway: RunGateway,
    ledger: RunLedger,
) -> tuple[Optional[IntegratedReport], RunState]:
    """Compose/validate/review rounds until unanimous approval or the cap.

    Draft versions are the round numbers; structural-check failures skip the
    reviewers and feed synthetic feedback into the next round. The final
    report, when the cap is reached, is the last draft that passed the
    structural check.
    """
    ledger.append(
        EventKind.STATUS,
        ORCHESTRATOR_ID,
        f"integration started over {len(consolidated.citations)} consolidated citations",
    )
    feedback: Optional[list[tuple[str, str]]] = None
    previous: Optional[str] = None
    last_valid: Optional[IntegratedReport] = None

    for version in range(1, config.max_iterations + 1):
        raw = await compose_report(
            consolidated, feedback, version, gateway, previous=previous, ledger=ledger
        )
        previous = raw
        try:
            report = validate_report_structure(
                raw, consolidated.evidence_ids(), version=version
            )
        except StructureError as error:
            bullet = f"structural validation failed: {error}"
            ledger.append(EventKind.VERDICT, ORCHESTRATOR_ID, f"NOT APPROVED\n- {bullet}")
            feedback = [(STRUCTURE_CHECK_LABEL, bullet)]
            continue
        last_valid = report

        outcomes = await review_parallel(
            report, consolidated, gateway, iteration=version, ledger=ledger
        )
        result = consensus(outcomes)
        if result.approved:
            ledger.append(EventKind.STATUS, ORCHESTRATOR_ID, "Completed")
            return report, RunState.COMPLETED
        feedback = [(reviewer.value, bullet) for reviewer, bullet in result.combined_feedback]

    ledger.append(EventKind.STATUS, ORCHESTRATOR_ID, "ExhaustedIterations")
    return last_valid, RunState.EXHAUSTED_ITERATIONS
