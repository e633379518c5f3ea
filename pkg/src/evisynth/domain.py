"""Core domain types and deterministic validation of structured agent output.

Every type here is an immutable value record, safe to share across the
concurrently running evidence pipelines. The validators are deliberately
plain code: structural checks on model output must never depend on a model.

Conventions baked in:
- gene symbols are uppercase ASCII restricted to [A-Z0-9-]; aliases are not
  resolved
- word counts are whitespace-delimited token counts
- structured agent output is UTF-8 JSON with fixed snake_case keys; empty
  sections serialize as empty lists so "all sections present" stays
  machine-checkable
"""

from __future__ import annotations

import json
import re
from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, computed_field, model_validator


class SourceId(str, Enum):
    """The three evidence streams."""

    CIVIC = "CIVIC"
    PHARMGKB = "PHARMGKB"
    ENRICHMENT = "ENRICHMENT"


#: Every run analyzes exactly these sources, in this order.
SOURCES: tuple[SourceId, ...] = (SourceId.CIVIC, SourceId.PHARMGKB, SourceId.ENRICHMENT)

_SYMBOL_RE = re.compile(r"^[A-Z0-9-]+$")
_SPLIT_RE = re.compile(r"[,\s]+")
_FENCE_RE = re.compile(r"^```[a-zA-Z0-9_-]*\s*\n(.*)\n```\s*$", re.DOTALL)


def word_count(*texts: str) -> int:
    """Whitespace-delimited token count, summed over ``texts``."""
    return sum(len(t.split()) for t in texts)


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class DomainError(Exception):
    """Base class for domain-level failures."""


class EmptyGeneList(DomainError):
    """No valid gene symbol remained after normalization."""


class InvalidSymbol(DomainError):
    """A gene token contains characters outside [A-Za-z0-9-]."""

    def __init__(self, token: str) -> None:
        self.token = token
        super().__init__(f"invalid gene symbol: {token!r}")


class StructureError(DomainError):
    """Base class for deterministic validation failures of agent output.

    Each failure renders as a single feedback bullet so pipelines can route
    it back to the generating agent without an extra reviewer call.
    """


class ParseError(StructureError):
    """Candidate output (or a fixture) is not well-formed."""


class MissingSection(StructureError):
    def __init__(self, section: str) -> None:
        self.section = section
        super().__init__(f"missing required section '{section}'")


class DanglingCitation(StructureError):
    def __init__(self, evidence_id: str) -> None:
        self.evidence_id = evidence_id
        super().__init__(f"citation references unknown evidence id '{evidence_id}'")


class OutOfSetGene(StructureError):
    def __init__(self, symbol: str) -> None:
        self.symbol = symbol
        super().__init__(f"gene '{symbol}' is not part of the submitted gene set")


class UncitedNovelClaim(StructureError):
    """A finding in a citation-required section carries no citation."""

    def __init__(self, section: str, index: int) -> None:
        self.section = section
        self.index = index
        super().__init__(f"finding {index + 1} in '{section}' has no supporting citation")


# ---------------------------------------------------------------------------
# Input types
# ---------------------------------------------------------------------------


class GeneSet(BaseModel):
    """Ordered, de-duplicated set of uppercase gene symbols.

    Invariants: at least one symbol; symbols are unique, uppercase,
    whitespace-free, and restricted to [A-Z0-9-]. Insertion order is
    preserved so prompts and fixtures stay byte-reproducible.
    """

    model_config = ConfigDict(frozen=True)

    symbols: tuple[str, ...]

    @model_validator(mode="after")
    def _check_symbols(self) -> "GeneSet":
        if not self.symbols:
            raise ValueError("gene set must contain at least one symbol")
        seen: set[str] = set()
        for sym in self.symbols:
            if not sym or sym != sym.strip():
                raise ValueError(f"symbol {sym!r} is empty or carries whitespace")
            if not _SYMBOL_RE.match(sym):
                raise ValueError(f"symbol {sym!r} is not an uppercase [A-Z0-9-] token")
            if sym in seen:
                raise ValueError(f"duplicate symbol {sym!r}")
            seen.add(sym)
        return self

    def __contains__(self, symbol: object) -> bool:
        return symbol in self.symbols

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def render(self) -> str:
        """Canonical comma-separated form; parse_gene_list() round-trips it."""
        return ", ".join(self.symbols)


def parse_gene_list(raw: str) -> GeneSet:
    """Normalize free text into a GeneSet.

    Tokens may be separated by commas, whitespace, or newlines. They are
    trimmed, uppercased, and de-duplicated preserving first occurrence.

    Raises:
        InvalidSymbol: a token contains characters outside [A-Za-z0-9-].
        EmptyGeneList: no valid token remains.
    """
    symbols: list[str] = []
    seen: set[str] = set()
    for token in _SPLIT_RE.split(raw):
        if not token:
            continue
        upper = token.upper()
        if not _SYMBOL_RE.match(upper):
            raise InvalidSymbol(token)
        if upper not in seen:
            seen.add(upper)
            symbols.append(upper)
    if not symbols:
        raise EmptyGeneList("no gene symbols found in input")
    return GeneSet(symbols=tuple(symbols))


class ResearchBrief(BaseModel):
    """The root input of every run: context, question, and gene set."""

    model_config = ConfigDict(frozen=True)

    context: str = ""
    question: str
    genes: GeneSet

    @model_validator(mode="after")
    def _check_question(self) -> "ResearchBrief":
        if not self.question.strip():
            raise ValueError("question must be non-empty")
        return self


def brief_from_upload(document: str | dict[str, Any]) -> ResearchBrief:
    """Build a ResearchBrief from an uploaded JSON document.

    Accepted shape: {"context": string, "question": string, "genes": [string]}.
    ``context`` is optional; ``genes`` may also be a single string of
    separator-delimited symbols.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"uploaded document is not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ParseError("uploaded document must be a JSON object")
    question = document.get("question")
    if not isinstance(question, str) or not question.strip():
        raise ParseError("uploaded document must carry a non-empty 'question' string")
    context = document.get("context", "")
    if not isinstance(context, str):
        raise ParseError("'context' must be a string when present")
    genes = document.get("genes")
    if isinstance(genes, list):
        if not all(isinstance(g, str) for g in genes):
            raise ParseError("'genes' must be a list of strings")
        genes = ", ".join(genes)
    if not isinstance(genes, str):
        raise ParseError("uploaded document must carry 'genes' as a list or string")
    return ResearchBrief(context=context, question=question, genes=parse_gene_list(genes))


# ---------------------------------------------------------------------------
# Evidence types
# ---------------------------------------------------------------------------


class EvidenceItem(BaseModel):
    """One retrieved evidence record from a single source.

    ``word_count`` is derived from title+body on construction, so the
    recomputation invariant holds by definition.
    """

    model_config = ConfigDict(frozen=True)

    id: str
    source_id: SourceId
    genes: tuple[str, ...]
    title: str
    body: str
    citation_url: Optional[str] = None

    @computed_field  # type: ignore[prop-decorator]
    @property
    def word_count(self) -> int:
        return word_count(self.title, self.body)


class EvidenceBundle(BaseModel):
    """All evidence retrieved from one source for one run."""

    model_config = ConfigDict(frozen=True)

    source_id: SourceId
    items: tuple[EvidenceItem, ...]
    retrieved_at: float = 0.0

    @model_validator(mode="after")
    def _check_items(self) -> "EvidenceBundle":
        for item in self.items:
            if item.source_id != self.source_id:
                raise ValueError(
                    f"item {item.id!r} carries source {item.source_id}, bundle is {self.source_id}"
                )
        return self

    @computed_field  # type: ignore[prop-decorator]
    @property
    def total_words(self) -> int:
        return sum(item.word_count for item in self.items)

    def item_ids(self) -> frozenset[str]:
        return frozenset(item.id for item in self.items)


# ---------------------------------------------------------------------------
# Agent output types
# ---------------------------------------------------------------------------


class CitationRef(BaseModel):
    """Reference to an evidence item, with a direct link when available."""

    model_config = ConfigDict(frozen=True)

    evidence_id: str
    url: Optional[str] = None


class GeneRelevance(BaseModel):
    model_config = ConfigDict(frozen=True)

    gene: str
    text: str


class StructuredAnalysis(BaseModel):
    """Validated per-source analysis produced by a generator agent."""

    model_config = ConfigDict(frozen=True)

    source_id: SourceId
    iteration: int = Field(ge=1)
    relevance_explanations: tuple[GeneRelevance, ...]
    summary: str
    conclusions: tuple[str, ...]
    citations: tuple[CitationRef, ...]


class VerdictDecision(str, Enum):
    APPROVED = "Approved"
    NOT_APPROVED = "NotApproved"


class Verdict(BaseModel):
    """A critic's binary decision. Feedback is non-empty iff not approved."""

    model_config = ConfigDict(frozen=True)

    decision: VerdictDecision
    feedback: tuple[str, ...] = ()

    @model_validator(mode="after")
    def _check_feedback(self) -> "Verdict":
        if self.decision == VerdictDecision.APPROVED and self.feedback:
            raise ValueError("approved verdicts carry no feedback")
        if self.decision == VerdictDecision.NOT_APPROVED and not self.feedback:
            raise ValueError("rejections must carry feedback")
        return self

    @property
    def approved(self) -> bool:
        return self.decision == VerdictDecision.APPROVED


class Finding(BaseModel):
    model_config = ConfigDict(frozen=True)

    text: str
    citations: tuple[CitationRef, ...] = ()


#: Fixed report section order; serialized keys are always present.
REPORT_SECTIONS: tuple[str, ...] = (
    "novel_biomarkers",
    "implications",
    "well_known_interactions",
    "conclusions",
)

#: Sections whose findings must carry at least one citation.
CITED_SECTIONS: tuple[str, ...] = ("novel_biomarkers", "well_known_interactions")

ANALYSIS_SECTIONS: tuple[str, ...] = (
    "relevance_explanations",
    "summary",
    "conclusions",
    "citations",
)


class IntegratedReport(BaseModel):
    """Final four-section report. Novel and well-known findings are cited."""

    model_config = ConfigDict(frozen=True)

    version: int = Field(ge=1)
    novel_biomarkers: tuple[Finding, ...]
    implications: tuple[Finding, ...]
    well_known_interactions: tuple[Finding, ...]
    conclusions: tuple[Finding, ...]

    @model_validator(mode="after")
    def _check_citations(self) -> "IntegratedReport":
        for section in CITED_SECTIONS:
            for idx, finding in enumerate(getattr(self, section)):
                if not finding.citations:
                    raise ValueError(f"finding {idx + 1} in '{section}' has no citation")
        return self

    def cited_ids(self) -> frozenset[str]:
        ids: set[str] = set()
        for section in REPORT_SECTIONS:
            for finding in getattr(self, section):
                ids.update(ref.evidence_id for ref in finding.citations)
        return frozenset(ids)


class RunState(str, Enum):
    PENDING = "Pending"
    RETRIEVING = "Retrieving"
    ANALYZING = "Analyzing"
    INTEGRATING = "Integrating"
    COMPLETED = "Completed"
    EXHAUSTED_ITERATIONS = "ExhaustedIterations"
    FAILED = "Failed"


TERMINAL_STATES = frozenset(
    {RunState.COMPLETED, RunState.EXHAUSTED_ITERATIONS, RunState.FAILED}
)

_STATE_RANK = {
    RunState.PENDING: 0,
    RunState.RETRIEVING: 1,
    RunState.ANALYZING: 2,
    RunState.INTEGRATING: 3,
    RunState.COMPLETED: 4,
    RunState.EXHAUSTED_ITERATIONS: 4,
    RunState.FAILED: 4,
}


def state_transition_allowed(current: RunState, new: RunState) -> bool:
    """Monotone progression; Failed is reachable from any non-terminal state."""
    if current in TERMINAL_STATES:
        return False
    if new == RunState.FAILED:
        return True
    return _STATE_RANK[new] > _STATE_RANK[current]


class RunStatus(BaseModel):
    """Live view of one run: current state plus per-pipeline iteration counts."""

    model_config = ConfigDict(frozen=True)

    state: RunState
    iterations: dict[str, int] = Field(default_factory=dict)

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL_STATES


# ---------------------------------------------------------------------------
# Deterministic validators
# ---------------------------------------------------------------------------


def _strip_code_fence(text: str) -> str:
    text = text.strip()
    match = _FENCE_RE.match(text)
    return match.group(1) if match else text


def _load_candidate(candidate: str) -> dict[str, Any]:
    try:
        parsed = json.loads(_strip_code_fence(candidate))
    except json.JSONDecodeError as exc:
        raise ParseError(f"output is not valid JSON: {exc}") from exc
    if not isinstance(parsed, dict):
        raise ParseError("output must be a JSON object")
    return parsed


def _parse_citations(raw: Any, known_ids: frozenset[str]) -> tuple[CitationRef, ...]:
    if not isinstance(raw, list):
        raise ParseError("'citations' must be a list")
    refs: list[CitationRef] = []
    for entry in raw:
        if not isinstance(entry, dict) or not isinstance(entry.get("evidence_id"), str):
            raise ParseError("each citation must be an object with an 'evidence_id' string")
        evidence_id = entry["evidence_id"]
        if evidence_id not in known_ids:
            raise DanglingCitation(evidence_id)
        url = entry.get("url")
        if url is not None and not isinstance(url, str):
            raise ParseError(f"citation url for '{evidence_id}' must be a string or null")
        refs.append(CitationRef(evidence_id=evidence_id, url=url))
    return tuple(refs)


def validate_structured_analysis(
    candidate: str,
    bundle: EvidenceBundle,
    genes: GeneSet,
    *,
    iteration: int = 1,
) -> StructuredAnalysis:
    """Validate raw generator output against its evidence bundle and gene set.

    Checks, in order: JSON well-formedness, presence of all required
    sections, citation resolution against the bundle, and gene membership.

    Raises:
        ParseError, MissingSection, DanglingCitation, OutOfSetGene.
    """
    parsed = _load_candidate(candidate)
    for section in ANALYSIS_SECTIONS:
        if section not in parsed:
            raise MissingSection(section)

    raw_relevance = parsed["relevance_explanations"]
    if not isinstance(raw_relevance, list):
        raise ParseError("'relevance_explanations' must be a list")
    relevance: list[GeneRelevance] = []
    for entry in raw_relevance:
        if not isinstance(entry, dict) or not isinstance(entry.get("gene"), str):
            raise ParseError("each relevance explanation must be an object with a 'gene' string")
        symbol = entry["gene"]
        if symbol not in genes:
            raise OutOfSetGene(symbol)
        relevance.append(GeneRelevance(gene=symbol, text=str(entry.get("text", ""))))

    if not isinstance(parsed["summary"], str):
        raise ParseError("'summary' must be a string")
    raw_conclusions = parsed["conclusions"]
    if not isinstance(raw_conclusions, list) or not all(isinstance(c, str) for c in raw_conclusions):
        raise ParseError("'conclusions' must be a list of strings")

    citations = _parse_citations(parsed["citations"], bundle.item_ids())

    try:
        return StructuredAnalysis(
            source_id=bundle.source_id,
            iteration=iteration,
            relevance_explanations=tuple(relevance),
            summary=parsed["summary"],
            conclusions=tuple(raw_conclusions),
            citations=citations,
        )
    except ValidationError as exc:
        raise ParseError(f"analysis failed type checks: {exc}") from exc


def analysis_payload(analysis: StructuredAnalysis) -> dict[str, Any]:
    """Candidate-shaped dict for an analysis; re-validating it round-trips."""
    return {
        "relevance_explanations": [
            {"gene": r.gene, "text": r.text} for r in analysis.relevance_explanations
        ],
        "summary": analysis.summary,
        "conclusions": list(analysis.conclusions),
        "citations": [
            {"evidence_id": c.evidence_id, "url": c.url} for c in analysis.citations
        ],
    }


def serialize_analysis(analysis: StructuredAnalysis) -> str:
    return json.dumps(analysis_payload(analysis), ensure_ascii=False, indent=2)


def validate_report_structure(
    candidate: str,
    evidence_ids: frozenset[str],
    *,
    version: int = 1,
) -> IntegratedReport:
    """Validate raw composer output before any reviewer sees it.

    All four sections must be present (empty lists allowed), every citation
    must resolve against ``evidence_ids``, and findings in the novel and
    well-known sections must carry at least one citation.

    Raises:
        ParseError, MissingSection, DanglingCitation, UncitedNovelClaim.
    """
    parsed = _load_candidate(candidate)
    sections: dict[str, tuple[Finding, ...]] = {}
    for section in REPORT_SECTIONS:
        if section not in parsed:
            raise MissingSection(section)
        raw = parsed[section]
        if not isinstance(raw, list):
            raise ParseError(f"'{section}' must be a list")
        findings: list[Finding] = []
        for idx, entry in enumerate(raw):
            if not isinstance(entry, dict) or not isinstance(entry.get("text"), str):
                raise ParseError(f"each finding in '{section}' must be an object with a 'text' string")
            citations = _parse_citations(entry.get("citations", []), evidence_ids)
            if section in CITED_SECTIONS and not citations:
                raise UncitedNovelClaim(section, idx)
            findings.append(Finding(text=entry["text"], citations=citations))
        sections[section] = tuple(findings)

    try:
        return IntegratedReport(version=version, **sections)
    except ValidationError as exc:
        raise ParseError(f"report failed type checks: {exc}") from exc


def report_payload(report: IntegratedReport) -> dict[str, Any]:
    """Fixed-key dict for serialization; all four section keys always present."""
    payload: dict[str, Any] = {"version": report.version}
    for section in REPORT_SECTIONS:
        payload[section] = [
            {
                "text": finding.text,
                "citations": [
                    {"evidence_id": c.evidence_id, "url": c.url} for c in finding.citations
                ],
            }
            for finding in getattr(report, section)
        ]
    return payload


def serialize_report(report: IntegratedReport) -> str:
    return json.dumps(report_payload(report), ensure_ascii=False, indent=2)


def report_from_payload(payload: dict[str, Any]) -> IntegratedReport:
    """Rebuild a report from its fixed-key JSON payload (e.g. report.json)."""
    try:
        return IntegratedReport(
            version=payload["version"],
            **{
                section: tuple(
                    Finding(
                        text=entry["text"],
                        citations=tuple(
                            CitationRef(evidence_id=c["evidence_id"], url=c.get("url"))
                            for c in entry.get("citations", [])
                        ),
                    )
                    for entry in payload[section]
                )
                for section in REPORT_SECTIONS
            },
        )
    except (KeyError, TypeError, ValidationError) as exc:
        raise ParseError(f"malformed report payload: {exc}") from exc
