"""Bundled demo scenarios: nested gene lists plus offline evidence fixtures.

The shipped quartet s1..s4 uses synthetic evidence (not sourced from the
live databases) over gene lists of sizes 13, 28, 52, and 82, where each
scenario extends the previous one. Custom scenario roots follow the same
layout: a scenarios.json index plus one directory of fixture files per
scenario.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict

from .domain import GeneSet, ParseError

CANONICAL_SIZES = {"s1": 13, "s2": 28, "s3": 52, "s4": 82}


class NonNestedScenarios(Exception):
    """Scenario gene lists must form a chain: each contains its predecessor."""


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    genes: GeneSet


def scenarios_root() -> Path:
    return Path(__file__).parent / "fixtures" / "scenarios"


def load_scenarios(root: Optional[str | Path] = None) -> list[Scenario]:
    """Read the scenario index, enforcing nesting (and sizes for s1..s4)."""
    root = Path(root) if root else scenarios_root()
    index = root / "scenarios.json"
    if not index.exists():
        raise ParseError(f"scenario index not found: {index}")
    payload = json.loads(index.read_text(encoding="utf-8"))
    entries = payload.get("scenarios")
    if not isinstance(entries, list):
        raise ParseError(f"{index} must carry a 'scenarios' list")

    scenarios = [
        Scenario(name=str(e["name"]), genes=GeneSet(symbols=tuple(e["genes"])))
        for e in entries
    ]
    previous: Optional[Scenario] = None
    for scenario in scenarios:
        expected = CANONICAL_SIZES.get(scenario.name)
        if expected is not None and len(scenario.genes) != expected:
            raise ParseError(
                f"scenario {scenario.name} must contain {expected} genes, "
                f"found {len(scenario.genes)}"
            )
        if previous is not None:
            missing = [g for g in previous.genes if g not in scenario.genes]
            if missing:
                raise NonNestedScenarios(
                    f"scenario {scenario.name} drops genes from {previous.name}: {missing}"
                )
        previous = scenario
    return scenarios


def scenario_fixture_dir(name: str, root: Optional[str | Path] = None) -> Path:
    root = Path(root) if root else scenarios_root()
    directory = root / name
    if not directory.is_dir():
        known = sorted(p.name for p in root.iterdir() if p.is_dir()) if root.is_dir() else []
        raise ParseError(f"unknown scenario '{name}'; available: {known}")
    return directory


def get_scenario(name: str, root: Optional[str | Path] = None) -> Scenario:
    for scenario in load_scenarios(root):
        if scenario.name == name:
            return scenario
    raise ParseError(f"scenario '{name}' is not defined in the scenario index")
