"""Shared test fixtures: mini evidence fixtures, scripted engines, test clock."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from evisynth.domain import EvidenceBundle, EvidenceItem, GeneSet, ResearchBrief, SourceId
from evisynth.engine import BackendSpec, Engine, EngineConfig


class TickClock:
    """Deterministic clock: each call advances one second from t0."""

    def __init__(self, start: float = 1_700_000_000.0) -> None:
        self.now = start

    def __call__(self) -> float:
        self.now += 1.0
        return self.now


@pytest.fixture
def clock() -> TickClock:
    return TickClock()


@pytest.fixture
def genes() -> GeneSet:
    return GeneSet(symbols=("TP53", "BRAF"))


@pytest.fixture
def brief(genes: GeneSet) -> ResearchBrief:
    return ResearchBrief(
        context="Resistance cohort follow-up.",
        question="Which of these genes drive treatment resistance?",
        genes=genes,
    )


def make_item(
    item_id: str,
    source: SourceId = SourceId.CIVIC,
    genes: tuple[str, ...] = ("TP53",),
    title: str = "Curated record",
    body: str = "Evidence body text for the record.",
    url: str | None = None,
) -> EvidenceItem:
    return EvidenceItem(
        id=item_id, source_id=source, genes=genes, title=title, body=body, citation_url=url
    )


def make_bundle(
    source: SourceId = SourceId.CIVIC,
    items: tuple[EvidenceItem, ...] | None = None,
    retrieved_at: float = 1_700_000_000.0,
) -> EvidenceBundle:
    if items is None:
        items = (
            make_item("civ-1", source, ("TP53",)),
            make_item("civ-2", source, ("BRAF",)),
        )
    return EvidenceBundle(source_id=source, items=items, retrieved_at=retrieved_at)


FIXTURE_ITEMS = {
    "civic": [
        {
            "id": "civ-1",
            "genes": ["TP53"],
            "title": "CIViC record for TP53",
            "body": "Somatic TP53 variants are linked to therapy resistance in several cohorts.",
            "citation_url": "https://civicdb.org/genes/TP53/summary",
        },
        {
            "id": "civ-2",
            "genes": ["BRAF"],
            "title": "CIViC record for BRAF",
            "body": "BRAF V600E predicts response to targeted inhibition.",
            "citation_url": "https://civicdb.org/genes/BRAF/summary",
        },
    ],
    "pharmgkb": [
        {
            "id": "pgkb-1",
            "genes": ["TP53"],
            "title": "PharmGKB annotation for TP53",
            "body": "Annotated drug response phenotypes for TP53 variation.",
            "citation_url": "https://www.pharmgkb.org/gene/TP53",
        }
    ],
    "enrichment": [
        {
            "id": "enr-1",
            "genes": ["TP53", "BRAF"],
            "title": "Enriched term MOD:0001",
            "body": "Over-representation of the DNA damage response module. Matched genes: TP53, BRAF.",
            "citation_url": "https://biit.cs.ut.ee/gplink/l/MOD:0001",
        }
    ],
}


@pytest.fixture
def fixture_dir(tmp_path: Path) -> Path:
    """Three small fixture files covering the TP53/BRAF gene set."""
    root = tmp_path / "fixtures"
    root.mkdir()
    for source, items in FIXTURE_ITEMS.items():
        payload = {"source_id": source.upper(), "items": items}
        (root / f"{source}.json").write_text(json.dumps(payload), encoding="utf-8")
    return root


def analysis_json(item_ids: list[str], gene: str = "TP53", note: str = "") -> str:
    """Valid generator output citing the given evidence ids."""
    return json.dumps(
        {
            "relevance_explanations": [{"gene": gene, "text": f"{gene} appears in the evidence."}],
            "summary": f"The evidence links the gene set to the question. {note}".strip(),
            "conclusions": ["The association is supported by the retrieved records."],
            "citations": [{"evidence_id": i, "url": None} for i in item_ids],
        }
    )


def report_json(
    cite_ids: list[str],
    novel_gene: str = "TP53",
    known_gene: str = "BRAF",
    note: str = "",
) -> str:
    """Valid composer output citing the given evidence ids."""
    cite_a = [{"evidence_id": cite_ids[0], "url": None}] if cite_ids else []
    cite_b = [{"evidence_id": cite_ids[-1], "url": None}] if cite_ids else []
    return json.dumps(
        {
            "novel_biomarkers": (
                [{"text": f"{novel_gene} is a candidate novel biomarker. {note}".strip(), "citations": cite_a}]
                if cite_ids
                else []
            ),
            "implications": [
                {"text": "The evidence streams agree on the resistance mechanism.", "citations": cite_a}
            ],
            "well_known_interactions": (
                [{"text": f"{known_gene} interactions are well established.", "citations": cite_b}]
                if cite_ids
                else []
            ),
            "conclusions": [{"text": "The question is answered by the integrated evidence.", "citations": []}],
        }
    )


FIXTURE_CITE_IDS = ["civ-1", "civ-2", "pgkb-1", "enr-1"]


def happy_script() -> dict[str, str]:
    """Mock script approving everything on the first round, keyed per agent."""
    script: dict[str, str] = {}
    for source, ids in (
        ("civic", ["civ-1", "civ-2"]),
        ("pharmgkb", ["pgkb-1"]),
        ("enrichment", ["enr-1"]),
    ):
        script[f"{source}.bioexpert/1"] = analysis_json(ids)
        script[f"{source}.evaluator/1"] = "APPROVED"
    script["integration.report_composer/1"] = report_json(FIXTURE_CITE_IDS)
    for reviewer in ("content_validator", "critical_reviewer", "relevance_validator"):
        script[f"integration.{reviewer}/1"] = "APPROVED"
    return script


def scripted_engine(
    tmp_path: Path,
    fixture_dir: Path,
    script: dict[str, str],
    *,
    clock=None,
    max_iterations: int = 3,
    token_ceiling: int | None = None,
) -> Engine:
    config = EngineConfig(
        backend=BackendSpec(kind="script", script=script),
        fixture_root=fixture_dir,
        runs_root=tmp_path / "runs",
        max_iterations=max_iterations,
        token_ceiling=token_ceiling,
    )
    kwargs = {"clock": clock} if clock else {}
    return Engine(config, **kwargs)


def auto_engine(tmp_path: Path, *, fixture_dir: Path | None = None, clock=None) -> Engine:
    config = EngineConfig(
        backend=BackendSpec(kind="auto"),
        fixture_root=fixture_dir,
        runs_root=tmp_path / "runs",
    )
    kwargs = {"clock": clock} if clock else {}
    return Engine(config, **kwargs)
