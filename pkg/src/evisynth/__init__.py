"""evisynth: auditable multi-agent evidence synthesis for gene sets."""

from .domain import (
    EvidenceBundle,
    EvidenceItem,
    GeneSet,
    IntegratedReport,
    ResearchBrief,
    RunState,
    SourceId,
    StructuredAnalysis,
    Verdict,
    parse_gene_list,
)
from .engine import Engine, EngineConfig, RunSubmission

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "EngineConfig",
    "EvidenceBundle",
    "EvidenceItem",
    "GeneSet",
    "IntegratedReport",
    "ResearchBrief",
    "RunState",
    "RunSubmission",
    "SourceId",
    "StructuredAnalysis",
    "Verdict",
    "parse_gene_list",
    "__version__",
]
