"""Evaluation harness: reading-time baseline, speedup, and cross-run consistency.

Pure functions over completed-run artifacts. The baseline assumes an expert
reading speed of 200 words per minute over the same evidence the agents saw;
consistency compares the gene symbols highlighted in the novel and
well-known report sections across repeated runs of an identical brief.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from .domain import CITED_SECTIONS, GeneSet, IntegratedReport
from .scenarios import NonNestedScenarios, Scenario

DEFAULT_WPM = 200.0

_GENE_TOKEN_RE = re.compile(r"[A-Za-z0-9-]+")


class EvaluationError(Exception):
    pass


class NonPositiveWpm(EvaluationError):
    pass


class NonPositiveInput(EvaluationError):
    pass


class TooFewReports(EvaluationError):
    pass


def reading_time(total_words: int, wpm: float = DEFAULT_WPM) -> float:
    """Minutes a human needs to read ``total_words`` at ``wpm`` words/minute."""
    if wpm <= 0:
        raise NonPositiveWpm(f"words-per-minute must be positive, got {wpm}")
    if total_words < 0:
        raise NonPositiveInput(f"word count must be non-negative, got {total_words}")
    return total_words / wpm


def speedup(reading_minutes: float, generation_minutes: float) -> float:
    """How many times faster generation was than reading the evidence."""
    if reading_minutes <= 0 or generation_minutes <= 0:
        raise NonPositiveInput(
            f"both durations must be positive, got {reading_minutes} and {generation_minutes}"
        )
    return reading_minutes / generation_minutes


def highlighted_genes(report: IntegratedReport, genes: GeneSet) -> frozenset[str]:
    """In-set gene symbols mentioned in the novel or well-known sections.

    Matching is by exact symbol against whole tokens of the finding text.
    """
    highlighted: set[str] = set()
    for section in CITED_SECTIONS:
        for finding in getattr(report, section):
            for token in _GENE_TOKEN_RE.findall(finding.text):
                symbol = token.upper()
                if symbol in genes:
                    highlighted.add(symbol)
    return frozenset(highlighted)


def jaccard(a: frozenset[str] | set[str], b: frozenset[str] | set[str]) -> float:
    """|A ∩ B| / |A ∪ B|; two empty sets count as identical (1.0)."""
    union = set(a) | set(b)
    if not union:
        return 1.0
    return len(set(a) & set(b)) / len(union)


@dataclass(frozen=True)
class ConsistencyStats:
    """Pairwise agreement of highlighted genes across repeated runs."""

    pairwise: tuple[float, ...]
    mean: float
    min: float


def consistency(reports: Sequence[IntegratedReport], genes: GeneSet) -> ConsistencyStats:
    """Pairwise Jaccard over highlighted genes for >= 2 same-brief reports."""
    if len(reports) < 2:
        raise TooFewReports("consistency requires at least two reports")
    highlights = [highlighted_genes(r, genes) for r in reports]
    pairwise = tuple(
        jaccard(highlights[i], highlights[j])
        for i in range(len(highlights))
        for j in range(i + 1, len(highlights))
    )
    return ConsistencyStats(pairwise=pairwise, mean=sum(pairwise) / len(pairwise), min=min(pairwise))


@dataclass(frozen=True)
class Omission:
    """A gene highlighted in a smaller scenario but lost in the next one."""

    from_scenario: str
    to_scenario: str
    gene: str


def nesting_check(
    scenarios: Sequence[Scenario],
    reports: Mapping[str, IntegratedReport],
) -> list[Omission]:
    """Find findings lost while scaling up through nested scenarios.

    For each consecutive scenario pair, reports the genes highlighted in the
    smaller run that are absent from the larger run's highlights. Raises
    NonNestedScenarios when the gene lists do not form a chain.
    """
    omissions: list[Omission] = []
    for smaller, larger in zip(scenarios, scenarios[1:]):
        dropped = [g for g in smaller.genes if g not in larger.genes]
        if dropped:
            raise NonNestedScenarios(
                f"scenario {larger.name} does not contain {smaller.name}: missing {dropped}"
            )
        small_hl = highlighted_genes(reports[smaller.name], smaller.genes)
        large_hl = highlighted_genes(reports[larger.name], larger.genes)
        omissions.extend(
            Omission(from_scenario=smaller.name, to_scenario=larger.name, gene=g)
            for g in sorted(small_hl - large_hl)
        )
    return omissions
