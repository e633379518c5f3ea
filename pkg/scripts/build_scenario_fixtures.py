#!/usr/bin/env python3
"""Regenerate the bundled scenario fixtures.

Produces synthetic evidence fixtures for the nested demo scenarios with
exact, pinned word totals (whitespace token counts) per scenario:

    s1: 1,656 words across the three sources
    s4: 81,627 words across the three sources

s2 and s3 get proportional intermediate volumes. Run from the repo root:

    python scripts/build_scenario_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from evisynth.domain import word_count  # noqa: E402

OUT = ROOT / "src" / "evisynth" / "fixtures" / "scenarios"

S1 = [
    "TP53", "KRAS", "EGFR", "BRAF", "PIK3CA", "PTEN", "MYC", "RB1", "APC",
    "BRCA1", "BRCA2", "ALK", "NRAS",
]
S2 = S1 + [
    "KIT", "RET", "MET", "ERBB2", "FGFR1", "FGFR2", "FGFR3", "IDH1", "IDH2",
    "JAK2", "STK11", "SMAD4", "CDKN2A", "NOTCH1", "VHL",
]
S3 = S2 + [
    "ATM", "ATR", "CHEK2", "PALB2", "MLH1", "MSH2", "MSH6", "PMS2", "POLE",
    "POLD1", "CTNNB1", "GNAS", "GNAQ", "GNA11", "HRAS", "MAP2K1", "MAP2K2",
    "AKT1", "AKT2", "MTOR", "TSC1", "TSC2", "NF1", "NF2",
]
S4 = S3 + [
    "FLT3", "NPM1", "DNMT3A", "TET2", "ASXL1", "RUNX1", "CEBPA", "WT1",
    "KMT2A", "EZH2", "ARID1A", "ARID1B", "SMARCA4", "SMARCB1", "BAP1",
    "PBRM1", "SETD2", "KDM6A", "CREBBP", "EP300", "STAT3", "JAK1", "JAK3",
    "MPL", "CALR", "CSF3R", "SF3B1", "SRSF2", "U2AF1", "ZRSR2",
]

# (scenario, genes, civic words, pharmgkb words, enrichment words)
PLANS = [
    ("s1", S1, 600, 556, 500),
    ("s2", S2, 2900, 2650, 2300),
    ("s3", S3, 10500, 9600, 8300),
    ("s4", S4, 30000, 27627, 24000),
]

FILLER_POOL = (
    "The curated record further documents assay context, cohort composition, "
    "effect direction, replication status, and annotation provenance for this entry."
).split()


def filler(n: int) -> str:
    return " ".join(FILLER_POOL[i % len(FILLER_POOL)] for i in range(n))


def pad_body(body: str, title: str, target: int) -> str:
    have = word_count(title, body)
    if have > target:
        raise SystemExit(f"item template too long: {have} > {target} ({title})")
    if have == target:
        return body
    return f"{body} {filler(target - have)}"


def split_target(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def civic_items(genes: list[str], total_words: int) -> list[dict]:
    targets = split_target(total_words, len(genes))
    items = []
    for gene, target in zip(genes, targets):
        title = f"CIViC clinical variant evidence for {gene}"
        body = (
            f"Clinical variant curation for {gene} links recurrent somatic alterations "
            f"to therapeutic response, resistance mechanisms, and prognosis across solid "
            f"and hematologic malignancies."
        )
        items.append(
            {
                "id": f"civic-{gene}-1",
                "genes": [gene],
                "title": title,
                "body": pad_body(body, title, target),
                "citation_url": f"https://civicdb.org/genes/{gene}/summary",
            }
        )
    return items


def pharmgkb_items(genes: list[str], total_words: int) -> list[dict]:
    targets = split_target(total_words, len(genes))
    items = []
    for gene, target in zip(genes, targets):
        title = f"PharmGKB pharmacogenomic annotation for {gene}"
        body = (
            f"Pharmacogenomic annotations connect {gene} variation with drug response "
            f"phenotypes, dosing guidance, and clinical annotation levels of evidence."
        )
        items.append(
            {
                "id": f"pharmgkb-{gene}-1",
                "genes": [gene],
                "title": title,
                "body": pad_body(body, title, target),
                "citation_url": f"https://www.pharmgkb.org/gene/{gene}",
            }
        )
    return items


def enrichment_items(genes: list[str], total_words: int) -> list[dict]:
    chunks = [genes[i : i + 4] for i in range(0, len(genes), 4)]
    targets = split_target(total_words, len(chunks))
    items = []
    for idx, (chunk, target) in enumerate(zip(chunks, targets), start=1):
        term = f"MOD:{idx:04d}"
        title = f"Enriched term {term}"
        body = (
            f"Over-representation of pathway module {idx} ({term}): the submitted gene "
            f"set is enriched for this functional module. Matched genes: {', '.join(chunk)}."
        )
        items.append(
            {
                "id": f"gprofiler-{term}",
                "genes": chunk,
                "title": title,
                "body": pad_body(body, title, target),
                "citation_url": f"https://biit.cs.ut.ee/gplink/l/{term}",
            }
        )
    return items


def write_fixture(directory: Path, source_id: str, items: list[dict], expect: int) -> None:
    actual = sum(word_count(i["title"], i["body"]) for i in items)
    if actual != expect:
        raise SystemExit(f"{directory.name}/{source_id}: built {actual} words, wanted {expect}")
    payload = {"source_id": source_id, "total_words": actual, "items": items}
    path = directory / f"{source_id.lower()}.json"
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {path} ({actual} words, {len(items)} items)")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    index = {"scenarios": []}
    for name, genes, civic_w, pharmgkb_w, enrich_w in PLANS:
        directory = OUT / name
        directory.mkdir(exist_ok=True)
        write_fixture(directory, "CIVIC", civic_items(genes, civic_w), civic_w)
        write_fixture(directory, "PHARMGKB", pharmgkb_items(genes, pharmgkb_w), pharmgkb_w)
        write_fixture(directory, "ENRICHMENT", enrichment_items(genes, enrich_w), enrich_w)
        index["scenarios"].append({"name": name, "genes": genes, "total_words": civic_w + pharmgkb_w + enrich_w})
    (OUT / "scenarios.json").write_text(
        json.dumps(index, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {OUT / 'scenarios.json'}")


if __name__ == "__main__":
    main()
