"""Live adapter for the PharmGKB pharmacogenomics knowledge base.

Queries the public REST API once per gene:

    GET https://api.pharmgkb.org/v1/data/gene?symbol={gene}&view=max

Each returned gene object becomes one evidence item; the body combines the
record's summary markdown when present. Optional; tests use fixtures.
"""

from __future__ import annotations

import httpx

from ..domain import EvidenceItem, GeneSet, SourceId
from .base import AdapterMode, SchemaDrift, SourceAdapter, SourceUnavailable

DEFAULT_ENDPOINT = "https://api.pharmgkb.org/v1/data/gene"


class PharmGkbAdapter(SourceAdapter):
    source_id = SourceId.PHARMGKB
    mode = AdapterMode.LIVE

    def __init__(
        self,
        endpoint: str = DEFAULT_ENDPOINT,
        *,
        timeout: float = 30.0,
        max_items_per_gene: int = 25,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.endpoint_or_path = endpoint
        self.timeout = timeout
        self.max_items_per_gene = max_items_per_gene
        self._transport = transport

    def fetch(self, genes: GeneSet) -> list[EvidenceItem]:
        items: list[EvidenceItem] = []
        with httpx.Client(timeout=self.timeout, transport=self._transport) as client:
            for gene in genes:
                items.extend(self._to_items(gene, self._query_gene(client, gene)))
        return items

    def _query_gene(self, client: httpx.Client, gene: str) -> dict | None:
        try:
            response = client.get(
                self.endpoint_or_path, params={"symbol": gene, "view": "max"}
            )
            if response.status_code == 404:
                return None
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise SourceUnavailable(f"PharmGKB request for {gene} failed: {exc}") from exc
        return response.json()

    def _to_items(self, gene: str, payload: dict | None) -> list[EvidenceItem]:
        if payload is None:
            return []
        records = payload.get("data")
        if records is None:
            raise SchemaDrift(self.source_id, "data")
        items = []
        for idx, record in enumerate(records):
            if not isinstance(record, dict) or "id" not in record:
                raise SchemaDrift(self.source_id, f"data[{idx}].id")
            name = record.get("name") or gene
            summary = record.get("summary") or {}
            body = summary.get("html") or summary.get("markdown") or "" if isinstance(summary, dict) else str(summary)
            items.append(
                EvidenceItem(
                    id=f"pharmgkb-{record['id']}",
                    source_id=self.source_id,
                    genes=(gene,),
                    title=f"PharmGKB gene record for {name}",
                    body=body,
                    citation_url=f"https://www.pharmgkb.org/gene/{record['id']}",
                )
            )
        return items
