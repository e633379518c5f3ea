"""The seven operator-facing terminal channels and the agent-id partition.

Each evidence pipeline collapses its orchestrator/generator/critic roles
into one terminal; the integration layer contributes the composer terminal
(which also carries its orchestrator and run-level lifecycle messages) plus
one terminal per reviewer. Every agent id maps to exactly one channel, so
streaming the union of channels reproduces the whole run.
"""

from __future__ import annotations

from enum import Enum


class Channel(str, Enum):
    CIVIC = "civic"
    PHARMGKB = "pharmgkb"
    ENRICHMENT = "enrichment"
    COMPOSER = "composer"
    CONTENT_VALIDATOR = "content_validator"
    CRITICAL_REVIEWER = "critical_reviewer"
    RELEVANCE_VALIDATOR = "relevance_validator"


_REVIEWER_CHANNELS = {
    "content_validator": Channel.CONTENT_VALIDATOR,
    "critical_reviewer": Channel.CRITICAL_REVIEWER,
    "relevance_validator": Channel.RELEVANCE_VALIDATOR,
}

_SOURCE_CHANNELS = {
    "civic": Channel.CIVIC,
    "pharmgkb": Channel.PHARMGKB,
    "enrichment": Channel.ENRICHMENT,
}


def channel_for(agent_id: str) -> Channel:
    """Map an agent id to its terminal channel.

    Raises LookupError for ids outside the known naming scheme; producers
    are all internal, so an unknown id is a programming error, not data.
    """
    prefix, _, rest = agent_id.partition(".")
    if prefix in _SOURCE_CHANNELS:
        return _SOURCE_CHANNELS[prefix]
    if prefix == "integration":
        return _REVIEWER_CHANNELS.get(rest, Channel.COMPOSER)
    if prefix == "run":
        return Channel.COMPOSER
    raise LookupError(f"agent id '{agent_id}' maps to no terminal channel")
