"""Live adapter for g:Profiler over-representation (gost) analysis.

Unlike the per-gene sources, gost takes the whole gene set in one call:

    POST https://biit.cs.ut.ee/gprofiler/api/gost/profile/
    {"organism": "hsapiens", "query": [genes], "no_evidences": false}

Each enriched term becomes one evidence item. Term name, p-value, and term
size are flattened into the body so downstream agents see the same shape as
any other evidence stream. The ``intersections`` array is aligned with the
query gene list; a gene belongs to a term when its entry is non-empty.
"""

from __future__ import annotations

import httpx

from ..domain import EvidenceItem, GeneSet, SourceId
from .base import AdapterMode, SchemaDrift, SourceAdapter, SourceUnavailable

DEFAULT_ENDPOINT = "https://biit.cs.ut.ee/gprofiler/api/gost/profile/"


class GProfilerAdapter(SourceAdapter):
    source_id = SourceId.ENRICHMENT
    mode = AdapterMode.LIVE

    def __init__(
        self,
        endpoint: str = DEFAULT_ENDPOINT,
        *,
        organism: str = "hsapiens",
        timeout: float = 30.0,
        max_items_per_gene: int = 25,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.endpoint_or_path = endpoint
        self.organism = organism
        self.timeout = timeout
        self.max_items_per_gene = max_items_per_gene
        self._transport = transport

    def fetch(self, genes: GeneSet) -> list[EvidenceItem]:
        query = list(genes)
        try:
            with httpx.Client(timeout=self.timeout, transport=self._transport) as client:
                response = client.post(
                    self.endpoint_or_path,
                    json={
                        "organism": self.organism,
                        "query": query,
                        "no_evidences": False,
                    },
                )
                response.raise_for_status()
        except httpx.HTTPError as exc:
            raise SourceUnavailable(f"g:Profiler request failed: {exc}") from exc
        payload = response.json()
        results = payload.get("result")
        if results is None:
            raise SchemaDrift(self.source_id, "result")
        items = []
        for idx, term in enumerate(results):
            items.append(self._to_item(idx, term, query))
        return items

    def _to_item(self, idx: int, term: dict, query: list[str]) -> EvidenceItem:
        for field in ("native", "name", "p_value", "term_size", "source"):
            if field not in term:
                raise SchemaDrift(self.source_id, f"result[{idx}].{field}")
        intersections = term.get("intersections")
        if intersections is not None and len(intersections) == len(query):
            matched = tuple(g for g, hits in zip(query, intersections) if hits)
        else:
            matched = tuple(query)
        body = (
            f"Over-representation of the {term['source']} term {term['native']} "
            f"({term['name']}): p-value {term['p_value']:.3g}, term size {term['term_size']}. "
            f"Matched genes: {', '.join(matched) if matched else 'none'}."
        )
        return EvidenceItem(
            id=f"gprofiler-{term['native']}",
            source_id=self.source_id,
            genes=matched,
            title=f"Enriched term {term['native']}",
            body=body,
            citation_url=f"https://biit.cs.ut.ee/gplink/l/{term['native']}",
        )
