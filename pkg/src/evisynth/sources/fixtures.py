"""Fixture-backed evidence source for offline, reproducible runs.

Fixture file format (JSON):

    {
      "source_id": "CIVIC" | "PHARMGKB" | "ENRICHMENT",
      "items": [
        {"id": str, "genes": [str], "title": str, "body": str,
         "citation_url": str | null}
      ],
      "total_words": int   // optional; verified against the items when present
    }

Items are ranked by their position in the file.
"""

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Callable

from ..domain import EvidenceBundle, EvidenceItem, GeneSet, ParseError, SourceId, word_count
from .base import AdapterMode, SourceAdapter, SourceUnavailable


class FixtureMissing(SourceUnavailable):
    """The fixture file does not exist."""

    def __init__(self, path: str | Path) -> None:
        self.path = str(path)
        super().__init__(f"fixture file not found: {path}")


def load_fixture(path: str | Path, *, clock: Callable[[], float] = time.time) -> EvidenceBundle:
    """Parse a fixture file into an EvidenceBundle, enforcing invariants.

    Raises:
        FixtureMissing: the file is absent.
        ParseError: malformed JSON, wrong shape, or a declared total_words
            that disagrees with the items (the message carries the fix).
    """
    path = Path(path)
    if not path.exists():
        raise FixtureMissing(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"fixture {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ParseError(f"fixture {path} must be a JSON object")
    try:
        source_id = SourceId(payload["source_id"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"fixture {path} lacks a valid 'source_id'") from exc
    raw_items = payload.get("items")
    if not isinstance(raw_items, list):
        raise ParseError(f"fixture {path} must carry an 'items' list")

    items: list[EvidenceItem] = []
    for idx, entry in enumerate(raw_items):
        if not isinstance(entry, dict):
            raise ParseError(f"fixture {path}: item {idx} is not an object")
        try:
            items.append(
                EvidenceItem(
                    id=str(entry["id"]),
                    source_id=source_id,
                    genes=tuple(str(g) for g in entry["genes"]),
                    title=str(entry["title"]),
                    body=str(entry["body"]),
                    citation_url=entry.get("citation_url"),
                )
            )
        except KeyError as exc:
            raise ParseError(f"fixture {path}: item {idx} lacks required field {exc}") from exc

    declared = payload.get("total_words")
    if declared is not None:
        actual = sum(word_count(i.title, i.body) for i in items)
        if declared != actual:
            raise ParseError(
                f"fixture {path} declares total_words={declared} but items sum to {actual}; "
                f"update the declaration or drop it"
            )

    return EvidenceBundle(source_id=source_id, items=tuple(items), retrieved_at=clock())


class FixtureAdapter(SourceAdapter):
    """Reads evidence from a local fixture file; never performs network access."""

    mode = AdapterMode.FIXTURE

    def __init__(
        self,
        source_id: SourceId,
        path: str | Path,
        *,
        max_items_per_gene: int = 25,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.source_id = source_id
        self.endpoint_or_path = str(path)
        self.max_items_per_gene = max_items_per_gene
        self._clock = clock

    def fetch(self, genes: GeneSet) -> list[EvidenceItem]:
        bundle = load_fixture(self.endpoint_or_path, clock=self._clock)
        if bundle.source_id != self.source_id:
            raise ParseError(
                f"fixture {self.endpoint_or_path} carries source {bundle.source_id.value}, "
                f"adapter expects {self.source_id.value}"
            )
        return list(bundle.items)
