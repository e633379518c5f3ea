"""Per-source evidence analysis: the bounded generate/critique/revise loop.

One pipeline drives one evidence stream. The coordinating step is plain
code and never calls the model: it sequences the generator (BioExpert) and
the critic (Evaluator), runs the deterministic structural check in between,
and threads rejection feedback into the next revision prompt, up to the
iteration cap. Every prompt, response, verdict, and terminal status is
appended to the run ledger.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .domain import (
    EvidenceBundle,
    ResearchBrief,
    SourceId,
    StructureError,
    StructuredAnalysis,
    Verdict,
    VerdictDecision,
    validate_structured_analysis,
)
from .gateway import (
    DEFAULT_PROMPT_BUDGET,
    RunGateway,
    build_initial_prompt,
    build_review_prompt,
    build_revision_prompt,
    render_envelope,
    role,
    serialize_evidence,
)
from .ledger import EventKind, RunLedger, TokenUsage

#: Feedback substituted when a critic's verdict cannot be parsed.
UNPARSEABLE_VERDICT_FEEDBACK = "evaluator output unparseable; restate verdict"

BULLET_PREFIXES = ("-", "•", "*")


class UnrecognizedVerdict(Exception):
    """The critic's response starts with neither APPROVED nor NOT APPROVED."""


def parse_verdict(raw: str) -> Verdict:
    """Parse a critic response into a binary verdict plus feedback bullets.

    Matching is case-insensitive after trimming. Rejections collect the
    subsequent bullet lines; a non-bulleted remainder becomes one bullet,
    and an empty remainder yields a single placeholder bullet so rejections
    always carry actionable feedback.
    """
    text = raw.strip()
    upper = text.upper()
    if upper.startswith("NOT APPROVED"):
        remainder = text[len("NOT APPROVED"):]
        bullets = []
        plain = []
        for line in remainder.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith(BULLET_PREFIXES):
                bullets.append(line.lstrip("".join(BULLET_PREFIXES)).strip())
            else:
                plain.append(line)
        if not bullets:
            joined = " ".join(plain).strip(" :;,-")
            bullets = [joined] if joined else ["no specific feedback provided"]
        return Verdict(decision=VerdictDecision.NOT_APPROVED, feedback=tuple(bullets))
    if upper.startswith("APPROVED"):
        return Verdict(decision=VerdictDecision.APPROVED, feedback=())
    raise UnrecognizedVerdict(f"verdict must start with APPROVED or NOT APPROVED: {text[:80]!r}")


@dataclass(frozen=True)
class PipelineConfig:
    """Loop bounds for one pipeline; ``source_id`` is None for integration."""

    max_iterations: int = 3
    source_id: Optional[SourceId] = None
    prompt_budget: int = DEFAULT_PROMPT_BUDGET

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


class AnalysisOutcome(BaseModel):
    """Terminal result of one evidence pipeline.

    ``final`` is None only when every iteration failed the deterministic
    structural check, i.e. no validated analysis ever existed.
    """

    model_config = ConfigDict(frozen=True)

    source_id: SourceId
    final: Optional[StructuredAnalysis]
    status: str  # "Approved" | "ExhaustedIterations"
    iterations_used: int = Field(ge=1)
    verdict_history: tuple[Verdict, ...]

    @model_validator(mode="after")
    def _check_consistency(self) -> "AnalysisOutcome":
        if self.status not in ("Approved", "ExhaustedIterations"):
            raise ValueError(f"unknown outcome status {self.status!r}")
        if len(self.verdict_history) != self.iterations_used:
            raise ValueError("one verdict per iteration is required")
        if self.status == "Approved":
            if not self.verdict_history or not self.verdict_history[-1].approved:
                raise ValueError("approved outcomes must end on an approving verdict")
            if self.final is None:
                raise ValueError("approved outcomes carry a validated analysis")
        else:
            if any(v.approved for v in self.verdict_history):
                raise ValueError("exhausted outcomes contain only rejections")
        return self

    @property
    def approved(self) -> bool:
        return self.status == "Approved"


def _structural_feedback(error: StructureError) -> str:
    return f"structural validation failed: {error}"


async def run_analysis(
    brief: ResearchBrief,
    bundle: EvidenceBundle,
    config: PipelineConfig,
    gateway: RunGateway,
    ledger: RunLedger,
) -> AnalysisOutcome:
    """Run the bounded revision loop for one evidence stream.

    Iteration 1 sends the initial generator prompt; later iterations embed
    the previous output and all feedback. Generator output first passes the
    deterministic structural check; failures short-circuit into a synthetic
    rejection without spending a critic call. The loop ends on approval or
    when the iteration cap is reached. An empty bundle still runs: the
    generator must report the absence of evidence.
    """
    source = config.source_id or bundle.source_id
    if source != bundle.source_id:
        raise ValueError(f"bundle is {bundle.source_id}, pipeline configured for {source}")
    prefix = source.value.lower()
    generator_id = f"{prefix}.bioexpert"
    critic_id = f"{prefix}.evaluator"
    orchestrator_id = f"{prefix}.orchestrator"

    evidence = serialize_evidence(bundle)
    ledger.append(
        EventKind.STATUS,
        orchestrator_id,
        f"analysis started over {len(bundle.items)} evidence items ({bundle.total_words} words)",
    )

    verdicts: list[Verdict] = []
    feedback: tuple[str, ...] = ()
    previous_text = ""
    validated: Optional[StructuredAnalysis] = None
    analysis: Optional[StructuredAnalysis] = None
    iterations_used = 0

    for iteration in range(1, config.max_iterations + 1):
        iterations_used = iteration
        if iteration == 1:
            envelope = build_initial_prompt(
                role("bioexpert"),
                brief,
                evidence,
                agent_id=generator_id,
                prompt_budget=config.prompt_budget,
            )
        else:
            envelope = build_revision_prompt(
                role("bioexpert"),
                brief,
                evidence,
                previous_text,
                feedback,
                iteration,
                agent_id=generator_id,
                prompt_budget=config.prompt_budget,
            )
        ledger.append(EventKind.PROMPT, generator_id, render_envelope(envelope))
        result = await gateway.complete(envelope)
        ledger.append(
            EventKind.RESPONSE,
            generator_id,
            result.text,
            TokenUsage(prompt=result.prompt_tokens, completion=result.completion_tokens),
        )
        previous_text = result.text

        try:
            analysis = validate_structured_analysis(
                result.text, bundle, brief.genes, iteration=iteration
            )
        except StructureError as error:
            # Deterministic check failed: synthesize the rejection ourselves
            # instead of spending a critic call on a malformed draft.
            bullet = _structural_feedback(error)
            verdict = Verdict(decision=VerdictDecision.NOT_APPROVED, feedback=(bullet,))
            ledger.append(EventKind.VERDICT, orchestrator_id, f"NOT APPROVED\n- {bullet}")
            verdicts.append(verdict)
            feedback = verdict.feedback
            continue
        validated = analysis

        review = build_review_prompt(
            role("evaluator"),
            brief,
            evidence,
            result.text,
            iteration,
            agent_id=critic_id,
            prompt_budget=config.prompt_budget,
        )
        ledger.append(EventKind.PROMPT, critic_id, render_envelope(review))
        critic_result = await gateway.complete(review)
        ledger.append(
            EventKind.RESPONSE,
            critic_id,
            critic_result.text,
            TokenUsage(
                prompt=critic_result.prompt_tokens,
                completion=critic_result.completion_tokens,
            ),
        )
        try:
            verdict = parse_verdict(critic_result.text)
        except UnrecognizedVerdict:
            ledger.append(
                EventKind.ANOMALY,
                critic_id,
                f"unrecognized verdict treated as rejection: {critic_result.text[:200]}",
            )
            verdict = Verdict(
                decision=VerdictDecision.NOT_APPROVED,
                feedback=(UNPARSEABLE_VERDICT_FEEDBACK,),
            )
        ledger.append(EventKind.VERDICT, critic_id, critic_result.text)
        verdicts.append(verdict)

        if verdict.approved:
            ledger.append(EventKind.STATUS, orchestrator_id, "Approved")
            return AnalysisOutcome(
                source_id=source,
                final=analysis,
                status="Approved",
                iterations_used=iteration,
                verdict_history=tuple(verdicts),
            )
        feedback = verdict.feedback

    ledger.append(EventKind.STATUS, orchestrator_id, "ExhaustedIterations")
    return AnalysisOutcome(
        source_id=source,
        final=validated,
        status="ExhaustedIterations",
        iterations_used=iterations_used,
        verdict_history=tuple(verdicts),
    )
