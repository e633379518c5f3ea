from .base import (
    AdapterMode,
    RetrievalLog,
    SchemaDrift,
    SourceAdapter,
    SourceError,
    SourceUnavailable,
    filter_relevant,
    retrieve,
)
from .civic import CivicAdapter
from .fixtures import FixtureAdapter, FixtureMissing, load_fixture
from .gprofiler import GProfilerAdapter
from .pharmgkb import PharmGkbAdapter

__all__ = [
    "AdapterMode",
    "CivicAdapter",
    "FixtureAdapter",
    "FixtureMissing",
    "GProfilerAdapter",
    "PharmGkbAdapter",
    "RetrievalLog",
    "SchemaDrift",
    "SourceAdapter",
    "SourceError",
    "SourceUnavailable",
    "filter_relevant",
    "load_fixture",
    "retrieve",
]
