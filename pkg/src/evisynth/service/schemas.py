"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field

from ..ledger import RunMetrics


class RunRequest(BaseModel):
    """Body of POST /runs.

    Matches the JSON upload shape {"context", "question", "genes"} directly,
    so uploaded input documents can be posted as-is. ``genes`` accepts both
    separator-delimited text and a list of symbols; a known scenario name may
    stand in for an explicit gene list.
    """

    question: str = ""
    context: str = ""
    genes: Optional[Union[str, list[str]]] = None
    scenario: Optional[str] = None
    source_mode: Optional[Literal["fixture", "live"]] = None
    max_iterations: Optional[int] = Field(default=None, ge=1)
    token_ceiling: Optional[int] = Field(default=None, ge=1)


class RunAccepted(BaseModel):
    run_id: str
    status_url: str
    events_url: str
    report_url: str
    metrics_url: str


class ValidationFailedBody(BaseModel):
    error: Literal["ValidationFailed"] = "ValidationFailed"
    fields: dict[str, str]


class RunStatusResponse(BaseModel):
    run_id: str
    state: str
    terminal: bool
    iterations: dict[str, int]
    report_version: Optional[int] = None


class MetricsResponse(RunMetrics):
    run_id: str
