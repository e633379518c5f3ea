"""Live adapter for the CIViC clinical variant knowledge base.

Queries the public GraphQL endpoint once per gene:

    POST https://civicdb.org/api/graphql
    query ($name: String!) {
      genes(name: $name, first: 1) {
        nodes { id name description link }
      }
    }

Each matching gene node becomes one evidence item whose body is the curated
gene description. Optional; all tests run against fixtures instead.
"""

from __future__ import annotations

import httpx

from ..domain import EvidenceItem, GeneSet, SourceId
from .base import AdapterMode, SchemaDrift, SourceAdapter, SourceUnavailable

_QUERY = """
query ($name: String!) {
  genes(name: $name, first: 1) {
    nodes { id name description link }
  }
}
""".strip()

DEFAULT_ENDPOINT = "https://civicdb.org/api/graphql"


class CivicAdapter(SourceAdapter):
    source_id = SourceId.CIVIC
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
                payload = self._query_gene(client, gene)
                items.extend(self._to_items(gene, payload))
        return items

    def _query_gene(self, client: httpx.Client, gene: str) -> dict:
        try:
            response = client.post(
                self.endpoint_or_path,
                json={"query": _QUERY, "variables": {"name": gene}},
            )
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise SourceUnavailable(f"CIVIC request for {gene} failed: {exc}") from exc
        return response.json()

    def _to_items(self, gene: str, payload: dict) -> list[EvidenceItem]:
        try:
            nodes = payload["data"]["genes"]["nodes"]
        except (KeyError, TypeError) as exc:
            raise SchemaDrift(self.source_id, "data.genes.nodes") from exc
        items = []
        for idx, node in enumerate(nodes):
            if not isinstance(node, dict) or "name" not in node or "id" not in node:
                raise SchemaDrift(self.source_id, f"data.genes.nodes[{idx}].name")
            description = node.get("description") or ""
            link = node.get("link")
            items.append(
                EvidenceItem(
                    id=f"civic-gene-{node['id']}",
                    source_id=self.source_id,
                    genes=(gene,),
                    title=f"CIViC gene record for {node['name']}",
                    body=description,
                    citation_url=f"https://civicdb.org{link}" if link else None,
                )
            )
        return items
