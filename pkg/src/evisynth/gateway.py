"""Prompt assembly, chat-completion backends, and token accounting.

Prompts follow one structure for every agent and iteration: a role-specific
system message (always ending with the shared anti-hallucination clause) and
a user message carrying, in order, the analysis context, the research
question, the gene set, and the evidence. Revision rounds append the
previous output and the reviewer feedback; review rounds append the
candidate output under review.

Backends are pluggable: a scripted mock keyed by (agent_id, iteration), a
self-scripting mock that approves everything (for offline demos), and an
HTTP client for the de facto chat-completion wire shape.
"""

from __future__ import annotations

import asyncio
import json
import re
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Awaitable, Callable, Mapping, NamedTuple, Optional, Protocol, Sequence

import httpx

from .domain import EvidenceBundle, ResearchBrief, word_count

#: Single fixed sentence appended to every system message.
ANTI_HALLUCINATION_CLAUSE = (
    "Use only the evidence provided; do not introduce outside information."
)

DEFAULT_PROMPT_BUDGET = 100_000

CONTEXT_HEADER = "## Analysis context"
QUESTION_HEADER = "## Research question"
GENES_HEADER = "## Gene set"
EVIDENCE_HEADER = "## Evidence"
CANDIDATE_HEADER = "## Candidate output under review"
PREVIOUS_HEADER = "## Previous output"
FEEDBACK_HEADER = "## Reviewer feedback"

PRESERVE_INSTRUCTION = (
    "Address each feedback point above and revise your previous output "
    "accordingly, preserving any valid content from prior iterations."
)


class GatewayError(Exception):
    pass


class EvidenceTooLarge(GatewayError):
    """Serialized evidence exceeds the per-call prompt budget; nothing is truncated."""


class BackendUnavailable(GatewayError):
    pass


class BudgetExceeded(GatewayError):
    pass


class UnknownBackend(GatewayError):
    pass


class MockScriptMiss(GatewayError):
    """The mock script has no entry for a requested (agent_id, iteration)."""


# ---------------------------------------------------------------------------
# Roles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoleSpec:
    """One LLM agent role: its name and versioned instruction text."""

    name: str
    instructions: str

    @property
    def system_message(self) -> str:
        return f"{self.instructions.rstrip()}\n\n{ANTI_HALLUCINATION_CLAUSE}"


def _load_role(name: str) -> RoleSpec:
    text = resources.files("evisynth.prompts").joinpath(f"{name}.md").read_text("utf-8")
    return RoleSpec(name=name, instructions=text)


ROLE_SPECS: dict[str, RoleSpec] = {
    name: _load_role(name)
    for name in (
        "bioexpert",
        "evaluator",
        "report_composer",
        "content_validator",
        "critical_reviewer",
        "relevance_validator",
    )
}


def role(name: str) -> RoleSpec:
    try:
        return ROLE_SPECS[name]
    except KeyError:
        raise KeyError(f"unknown agent role '{name}'; known: {sorted(ROLE_SPECS)}") from None


# ---------------------------------------------------------------------------
# Envelopes and builders
# ---------------------------------------------------------------------------


class IterationMode(str, Enum):
    INITIAL = "Initial"
    REVISION = "Revision"


@dataclass(frozen=True)
class PromptEnvelope:
    """One fully assembled request to the model.

    Invariants: revision envelopes are for iteration >= 2 and carry both the
    previous-output and feedback blocks; initial envelopes carry neither.
    """

    agent_id: str
    system_message: str
    user_message: str
    iteration_mode: IterationMode
    iteration: int

    def __post_init__(self) -> None:
        if self.iteration < 1:
            raise ValueError("iteration must be >= 1")
        has_previous = PREVIOUS_HEADER in self.user_message
        has_feedback = FEEDBACK_HEADER in self.user_message
        if self.iteration_mode == IterationMode.REVISION:
            if self.iteration < 2:
                raise ValueError("revision envelopes require iteration >= 2")
            if not (has_previous and has_feedback):
                raise ValueError("revision envelopes must carry previous output and feedback")
        elif has_previous or has_feedback:
            raise ValueError("initial envelopes must not carry revision blocks")


def serialize_evidence(bundle: EvidenceBundle) -> str:
    """Stable textual form of a bundle for prompt embedding (no timestamps)."""
    return json.dumps(
        {
            "source_id": bundle.source_id.value,
            "items": [
                {
                    "id": item.id,
                    "genes": list(item.genes),
                    "title": item.title,
                    "body": item.body,
                    "citation_url": item.citation_url,
                }
                for item in bundle.items
            ],
        },
        ensure_ascii=False,
        indent=2,
    )


def _check_prompt_budget(evidence: str, prompt_budget: int) -> None:
    tokens = word_count(evidence)
    if tokens > prompt_budget:
        raise EvidenceTooLarge(
            f"serialized evidence is {tokens} tokens, over the {prompt_budget}-token budget; "
            f"reduce the gene set or raise the budget"
        )


def _base_user_message(brief: ResearchBrief, evidence: str) -> str:
    context = brief.context.strip() or "(none provided)"
    return (
        f"{CONTEXT_HEADER}\n{context}\n\n"
        f"{QUESTION_HEADER}\n{brief.question}\n\n"
        f"{GENES_HEADER}\n{brief.genes.render()}\n\n"
        f"{EVIDENCE_HEADER}\n{evidence}"
    )


def build_initial_prompt(
    role_spec: RoleSpec,
    brief: ResearchBrief,
    evidence: str,
    *,
    agent_id: Optional[str] = None,
    prompt_budget: int = DEFAULT_PROMPT_BUDGET,
) -> PromptEnvelope:
    """First-iteration envelope: context, question, gene set, evidence.

    Raises EvidenceTooLarge when the serialized evidence exceeds the budget.
    """
    if role_spec.name not in ROLE_SPECS:
        raise KeyError(f"unknown agent role '{role_spec.name}'")
    _check_prompt_budget(evidence, prompt_budget)
    return PromptEnvelope(
        agent_id=agent_id or role_spec.name,
        system_message=role_spec.system_message,
        user_message=_base_user_message(brief, evidence),
        iteration_mode=IterationMode.INITIAL,
        iteration=1,
    )


def build_revision_prompt(
    role_spec: RoleSpec,
    brief: ResearchBrief,
    evidence: str,
    previous: str,
    feedback: Sequence[str],
    iteration: int,
    *,
    agent_id: Optional[str] = None,
    prompt_budget: int = DEFAULT_PROMPT_BUDGET,
) -> PromptEnvelope:
    """Revision envelope embedding the previous output and every feedback bullet."""
    if iteration < 2:
        raise ValueError("revision prompts require iteration >= 2")
    if not feedback:
        raise ValueError("revision prompts require non-empty feedback")
    if role_spec.name not in ROLE_SPECS:
        raise KeyError(f"unknown agent role '{role_spec.name}'")
    _check_prompt_budget(evidence, prompt_budget)
    bullets = "\n".join(f"- {b}" for b in feedback)
    user = (
        f"{_base_user_message(brief, evidence)}\n\n"
        f"{PREVIOUS_HEADER}\n{previous}\n\n"
        f"{FEEDBACK_HEADER}\n{bullets}\n\n"
        f"{PRESERVE_INSTRUCTION}"
    )
    return PromptEnvelope(
        agent_id=agent_id or role_spec.name,
        system_message=role_spec.system_message,
        user_message=user,
        iteration_mode=IterationMode.REVISION,
        iteration=iteration,
    )


def build_review_prompt(
    role_spec: RoleSpec,
    brief: ResearchBrief,
    evidence: str,
    candidate: str,
    iteration: int,
    *,
    agent_id: Optional[str] = None,
    prompt_budget: int = DEFAULT_PROMPT_BUDGET,
) -> PromptEnvelope:
    """Review-package envelope: context, question, evidence, candidate output."""
    if role_spec.name not in ROLE_SPECS:
        raise KeyError(f"unknown agent role '{role_spec.name}'")
    _check_prompt_budget(evidence, prompt_budget)
    user = f"{_base_user_message(brief, evidence)}\n\n{CANDIDATE_HEADER}\n{candidate}"
    return PromptEnvelope(
        agent_id=agent_id or role_spec.name,
        system_message=role_spec.system_message,
        user_message=user,
        iteration_mode=IterationMode.INITIAL,
        iteration=iteration,
    )


def render_envelope(envelope: PromptEnvelope) -> str:
    """Full prompt text as stored in the audit trail."""
    return (
        f"=== system ===\n{envelope.system_message}\n"
        f"=== user ===\n{envelope.user_message}"
    )


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


class Usage(NamedTuple):
    prompt: int
    completion: int


class ChatBackend(Protocol):
    backend_id: str

    async def chat(self, envelope: PromptEnvelope) -> tuple[str, Optional[Usage]]:
        """Return (response text, token usage or None when unreported)."""
        ...


def _mock_usage(envelope: PromptEnvelope, text: str) -> Usage:
    return Usage(
        prompt=word_count(envelope.system_message, envelope.user_message),
        completion=word_count(text),
    )


class ScriptedMockBackend:
    """Deterministic backend driven by an explicit script.

    Script keys are "agent_id/iteration"; "agent_id/*" acts as a fallback for
    any iteration of that agent. Token counts are whitespace token counts of
    the messages and the response, so accounting is exactly reproducible.
    """

    backend_id = "mock"

    def __init__(self, script: Mapping[str, str]) -> None:
        self.script = dict(script)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedMockBackend":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(payload, dict) or not all(
            isinstance(v, str) for v in payload.values()
        ):
            raise ValueError(f"mock script {path} must map 'agent_id/iteration' to text")
        return cls(payload)

    async def chat(self, envelope: PromptEnvelope) -> tuple[str, Optional[Usage]]:
        for key in (f"{envelope.agent_id}/{envelope.iteration}", f"{envelope.agent_id}/*"):
            if key in self.script:
                text = self.script[key]
                return text, _mock_usage(envelope, text)
        raise MockScriptMiss(
            f"no scripted response for {envelope.agent_id!r} iteration {envelope.iteration}"
        )


_ITEM_ID_RE = re.compile(r'"id":\s*"([^"]+)"')
_CITATION_ID_RE = re.compile(r'"evidence_id":\s*"([^"]+)"')
_GENES_LINE_RE = re.compile(rf"{GENES_HEADER}\n([^\n]*)")


def _unique(values: list[str]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for v in values:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


class AutoApprovalBackend:
    """Self-scripting mock: generators emit valid structured output derived
    from the envelope itself, critics always approve.

    Useful for offline demos and determinism checks of the full stack; it
    reads evidence ids and the gene set straight out of the prompt, so its
    citations always resolve.
    """

    backend_id = "mock"

    async def chat(self, envelope: PromptEnvelope) -> tuple[str, Optional[Usage]]:
        agent = envelope.agent_id.rsplit(".", 1)[-1]
        if agent == "bioexpert":
            text = self._analysis(envelope)
        elif agent == "report_composer":
            text = self._report(envelope)
        else:
            text = "APPROVED"
        return text, _mock_usage(envelope, text)

    @staticmethod
    def _genes(envelope: PromptEnvelope) -> list[str]:
        match = _GENES_LINE_RE.search(envelope.user_message)
        if not match:
            return []
        return [g.strip() for g in match.group(1).split(",") if g.strip()]

    def _analysis(self, envelope: PromptEnvelope) -> str:
        ids = _unique(_ITEM_ID_RE.findall(envelope.user_message))
        genes = self._genes(envelope)
        if not ids:
            payload = {
                "relevance_explanations": [],
                "summary": "No evidence was retrieved from this source for the given gene set.",
                "conclusions": [],
                "citations": [],
            }
        else:
            payload = {
                "relevance_explanations": [
                    {"gene": g, "text": f"{g} is covered by the retrieved evidence."}
                    for g in genes[:3]
                ],
                "summary": (
                    f"The retrieved evidence covers {len(ids)} records relevant to "
                    f"the question across the submitted gene set."
                ),
                "conclusions": [
                    "The evidence supports an association between the highlighted genes and the question."
                ],
                "citations": [{"evidence_id": i, "url": None} for i in ids],
            }
        return json.dumps(payload, ensure_ascii=False)

    def _report(self, envelope: PromptEnvelope) -> str:
        ids = _unique(_CITATION_ID_RE.findall(envelope.user_message))
        genes = self._genes(envelope)
        if not ids or not genes:
            payload = {
                "novel_biomarkers": [],
                "implications": [],
                "well_known_interactions": [],
                "conclusions": [
                    {"text": "No citable evidence was available; no findings can be reported.", "citations": []}
                ],
            }
        else:
            first, second = genes[0], genes[1] if len(genes) > 1 else genes[0]
            cite_a = [{"evidence_id": ids[0], "url": None}]
            cite_b = [{"evidence_id": ids[1 % len(ids)], "url": None}]
            payload = {
                "novel_biomarkers": [
                    {"text": f"{first} emerges as a candidate novel biomarker for the stated question.", "citations": cite_a}
                ],
                "implications": [
                    {"text": "The combined evidence streams point in a consistent direction for the question.", "citations": cite_a}
                ],
                "well_known_interactions": [
                    {"text": f"{second} shows well-established interactions supported by the retrieved evidence.", "citations": cite_b}
                ],
                "conclusions": [
                    {"text": "The integrated evidence answers the question affirmatively within the retrieved scope.", "citations": []}
                ],
            }
        return json.dumps(payload, ensure_ascii=False)


class HttpChatBackend:
    """Chat-completion client for {model, messages} endpoints.

    Sends {"model", "messages": [{"role", "content"}]} and accepts either
    {"choices": [{"message": {"content"}}]} or a top-level {"text"} reply,
    with optional {"usage": {"prompt_tokens", "completion_tokens"}}.
    Transient failures (transport errors and 5xx) are retried with
    exponential backoff; other HTTP errors fail immediately.
    """

    def __init__(
        self,
        url: str,
        model: str,
        *,
        api_key: Optional[str] = None,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff: Sequence[float] = (1.0, 2.0, 4.0),
        transport: Optional[httpx.AsyncBaseTransport] = None,
        sleep: Callable[[float], Awaitable[None]] = asyncio.sleep,
    ) -> None:
        self.backend_id = model
        self.url = url
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = tuple(backoff)
        self._transport = transport
        self._sleep = sleep

    async def chat(self, envelope: PromptEnvelope) -> tuple[str, Optional[Usage]]:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": envelope.system_message},
                {"role": "user", "content": envelope.user_message},
            ],
        }
        last_error: Exception | None = None
        async with httpx.AsyncClient(timeout=self.timeout, transport=self._transport) as client:
            for attempt in range(self.max_attempts):
                try:
                    response = await client.post(self.url, json=body, headers=headers)
                    if response.status_code >= 500:
                        last_error = BackendUnavailable(
                            f"backend returned {response.status_code}"
                        )
                    else:
                        response.raise_for_status()
                        return self._parse(response.json())
                except httpx.TransportError as exc:
                    last_error = exc
                except httpx.HTTPStatusError as exc:
                    raise BackendUnavailable(f"backend rejected request: {exc}") from exc
                if attempt + 1 < self.max_attempts:
                    await self._sleep(self.backoff[min(attempt, len(self.backoff) - 1)])
        raise BackendUnavailable(
            f"backend unreachable after {self.max_attempts} attempts: {last_error}"
        )

    @staticmethod
    def _parse(data: dict) -> tuple[str, Optional[Usage]]:
        text: Optional[str] = None
        if isinstance(data.get("text"), str):
            text = data["text"]
        else:
            try:
                text = data["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError):
                text = None
        if not isinstance(text, str):
            raise BackendUnavailable("backend response carries neither 'text' nor 'choices'")
        usage = data.get("usage") or {}
        if "prompt_tokens" in usage and "completion_tokens" in usage:
            return text, Usage(int(usage["prompt_tokens"]), int(usage["completion_tokens"]))
        return text, None


# ---------------------------------------------------------------------------
# Budgets, accounting, cost
# ---------------------------------------------------------------------------


class TokenBudget:
    """Per-run token ceiling with atomic check-and-reserve.

    The reservation uses the whitespace token estimate of the outgoing
    messages; actual usage is settled after the call. A concurrent pipeline
    can therefore never double-spend the remaining budget.
    """

    def __init__(self, ceiling: Optional[int] = None) -> None:
        self.ceiling = ceiling
        self._used = 0
        self._lock = threading.Lock()

    @property
    def used(self) -> int:
        with self._lock:
            return self._used

    def reserve(self, estimated: int) -> int:
        with self._lock:
            if self.ceiling is not None and self._used + estimated > self.ceiling:
                raise BudgetExceeded(
                    f"run token ceiling {self.ceiling} would be exceeded: "
                    f"{self._used} used, {estimated} requested"
                )
            self._used += estimated
            return estimated

    def settle(self, reserved: int, actual: int) -> None:
        with self._lock:
            self._used += actual - reserved


@dataclass(frozen=True)
class CompletionResult:
    """One model response plus its accounting metadata."""

    text: str
    prompt_tokens: int
    completion_tokens: int
    latency: float
    backend_id: str


@dataclass(frozen=True)
class GatewayCall:
    agent_id: str
    envelope: PromptEnvelope
    result: CompletionResult


class RunGateway:
    """Per-run funnel for model calls: budget enforcement plus a call log.

    Every completion in a run passes through exactly one RunGateway, so the
    call log is the ground truth that ledger accounting is checked against.
    """

    def __init__(
        self,
        backend: ChatBackend,
        *,
        budget: Optional[TokenBudget] = None,
        timer: Callable[[], float] = time.perf_counter,
    ) -> None:
        self.backend = backend
        self.budget = budget
        self.timer = timer
        self.calls: list[GatewayCall] = []

    async def complete(self, envelope: PromptEnvelope) -> CompletionResult:
        estimated = word_count(envelope.system_message, envelope.user_message)
        reserved = self.budget.reserve(estimated) if self.budget else 0
        started = self.timer()
        try:
            text, usage = await self.backend.chat(envelope)
        except BaseException:
            if self.budget:
                self.budget.settle(reserved, 0)
            raise
        latency = self.timer() - started
        if usage is None:
            usage = Usage(prompt=estimated, completion=word_count(text))
        if self.budget:
            self.budget.settle(reserved, usage.prompt + usage.completion)
        result = CompletionResult(
            text=text,
            prompt_tokens=usage.prompt,
            completion_tokens=usage.completion,
            latency=latency,
            backend_id=self.backend.backend_id,
        )
        self.calls.append(GatewayCall(envelope.agent_id, envelope, result))
        return result

    @property
    def total_prompt_tokens(self) -> int:
        return sum(c.result.prompt_tokens for c in self.calls)

    @property
    def total_completion_tokens(self) -> int:
        return sum(c.result.completion_tokens for c in self.calls)


@dataclass(frozen=True)
class PriceTable:
    """Cost per 1K prompt/completion tokens, by backend id."""

    rates: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for backend_id, (prompt_rate, completion_rate) in self.rates.items():
            if prompt_rate < 0 or completion_rate < 0:
                raise ValueError(f"negative rate for backend '{backend_id}'")


#: Mock backends are free by definition.
DEFAULT_PRICE_TABLE = PriceTable(rates={"mock": (0.0, 0.0)})


def estimate_cost(usage: Mapping[str, tuple[int, int]], table: PriceTable) -> float:
    """Sum prompt/completion costs over backends.

    ``usage`` maps backend_id to (prompt_tokens, completion_tokens).
    Raises UnknownBackend when a backend has no rates in the table.
    """
    total = 0.0
    for backend_id, (prompt_tokens, completion_tokens) in usage.items():
        if backend_id not in table.rates:
            raise UnknownBackend(f"no rates configured for backend '{backend_id}'")
        prompt_rate, completion_rate = table.rates[backend_id]
        total += prompt_tokens / 1000 * prompt_rate + completion_tokens / 1000 * completion_rate
    return total
