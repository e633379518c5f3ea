"""Source adapter contract plus the deterministic retrieval pipeline.

An adapter only fetches raw items in its source's native rank order;
gene filtering, per-gene capping, and ordering live here so every source
behaves identically and fixture-mode runs stay byte-reproducible.
"""

from __future__ import annotations

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from ..domain import EvidenceBundle, EvidenceItem, GeneSet, SourceId


class SourceError(Exception):
    """Base class for retrieval failures."""


class SourceUnavailable(SourceError):
    """The source could not be reached or answered with an error."""


class SchemaDrift(SourceError):
    """A live payload no longer carries an expected field."""

    def __init__(self, source_id: SourceId, path: str) -> None:
        self.source_id = source_id
        self.path = path
        super().__init__(f"{source_id.value} payload is missing expected field at '{path}'")


class AdapterMode(str, Enum):
    LIVE = "Live"
    FIXTURE = "Fixture"


class SourceAdapter(ABC):
    """One evidence source. Fixture adapters never touch the network."""

    source_id: SourceId
    mode: AdapterMode
    endpoint_or_path: str
    timeout: float = 30.0
    max_items_per_gene: int = 25

    @abstractmethod
    def fetch(self, genes: GeneSet) -> list[EvidenceItem]:
        """Return raw items in the source's native rank order."""


@dataclass
class RetrievalLog:
    """Bookkeeping for one retrieval: per-gene hits, drops, and timing."""

    source_id: SourceId
    hits_per_gene: dict[str, int] = field(default_factory=dict)
    dropped_items: int = 0
    elapsed: float = 0.0

    def summary(self) -> str:
        hits = sum(self.hits_per_gene.values())
        covered = sum(1 for n in self.hits_per_gene.values() if n)
        return (
            f"{self.source_id.value}: {hits} gene hits across {covered} genes, "
            f"{self.dropped_items} items dropped"
        )


def _ordered(items: list[EvidenceItem]) -> list[EvidenceItem]:
    # Native rank is the fetch order; lexicographic id breaks duplicates.
    deduped: dict[str, EvidenceItem] = {}
    for item in items:
        deduped.setdefault(item.id, item)
    return list(deduped.values())


def retrieve(
    adapter: SourceAdapter,
    genes: GeneSet,
    *,
    clock: Callable[[], float] = time.time,
) -> tuple[EvidenceBundle, RetrievalLog]:
    """Fetch, filter, and cap evidence for a gene set.

    The returned bundle contains only items whose genes intersect the set,
    with at most ``adapter.max_items_per_gene`` items per gene. An item is
    kept only while every in-set gene it mentions is still under the cap,
    walking items in native rank order, so the cap holds for all genes.

    Raises:
        SourceUnavailable: network or fixture failure (adapter-dependent).
        SchemaDrift: a live payload lacks an expected field.
    """
    started = time.perf_counter()
    raw = adapter.fetch(genes)
    log = RetrievalLog(source_id=adapter.source_id, hits_per_gene={g: 0 for g in genes})
    cap = adapter.max_items_per_gene
    kept: list[EvidenceItem] = []
    for item in _ordered(raw):
        in_set = [g for g in item.genes if g in genes]
        if not in_set:
            log.dropped_items += 1
            continue
        if any(log.hits_per_gene[g] >= cap for g in in_set):
            log.dropped_items += 1
            continue
        for g in in_set:
            log.hits_per_gene[g] += 1
        kept.append(item)
    log.elapsed = time.perf_counter() - started
    bundle = EvidenceBundle(source_id=adapter.source_id, items=tuple(kept), retrieved_at=clock())
    return bundle, log


def filter_relevant(bundle: EvidenceBundle, genes: GeneSet) -> EvidenceBundle:
    """Retain only items mentioning at least one in-set gene; stable order."""
    kept = tuple(item for item in bundle.items if any(g in genes for g in item.genes))
    return EvidenceBundle(
        source_id=bundle.source_id, items=kept, retrieved_at=bundle.retrieved_at
    )
