"""Verdict parsing and the bounded generate/critique/revise loop."""

from __future__ import annotations

import asyncio
import json

import pytest

from evisynth.analysis import (
    PipelineConfig,
    UNPARSEABLE_VERDICT_FEEDBACK,
    UnrecognizedVerdict,
    parse_verdict,
    run_analysis,
)
from evisynth.domain import SourceId, VerdictDecision
from evisynth.gateway import RunGateway, ScriptedMockBackend
from evisynth.ledger import EventKind, RunLedger

from conftest import analysis_json, make_bundle


class TestParseVerdict:
    def test_approved(self):
        verdict = parse_verdict("APPROVED")
        assert verdict.decision == VerdictDecision.APPROVED
        assert verdict.feedback == ()

    def test_not_approved_with_bullets(self):
        verdict = parse_verdict("NOT APPROVED\n- cite CIViC item for BRAF claim\n- clarify summary")
        assert verdict.decision == VerdictDecision.NOT_APPROVED
        assert verdict.feedback == ("cite CIViC item for BRAF claim", "clarify summary")

    def test_case_and_whitespace_normalized(self):
        assert parse_verdict("  approved -- nice work").approved

    def test_unrecognized(self):
        with pytest.raises(UnrecognizedVerdict):
            parse_verdict("maybe fine")

    def test_star_and_dot_bullets(self):
        verdict = parse_verdict("NOT APPROVED\n* first\n• second")
        assert verdict.feedback == ("first", "second")

    def test_non_bulleted_remainder_becomes_one_bullet(self):
        verdict = parse_verdict("NOT APPROVED: the summary misstates the cohort")
        assert verdict.feedback == ("the summary misstates the cohort",)

    def test_bare_rejection_gets_placeholder_bullet(self):
        verdict = parse_verdict("NOT APPROVED")
        assert verdict.feedback == ("no specific feedback provided",)


def run_pipeline(script: dict[str, str], *, max_iterations: int = 3, bundle=None):
    from evisynth.domain import GeneSet, ResearchBrief

    genes = GeneSet(symbols=("TP53", "BRAF"))
    brief = ResearchBrief(question="What drives resistance?", genes=genes)
    bundle = bundle if bundle is not None else make_bundle()
    gateway = RunGateway(ScriptedMockBackend(script))
    ledger = RunLedger("test-run")
    config = PipelineConfig(max_iterations=max_iterations, source_id=SourceId.CIVIC)
    outcome = asyncio.run(run_analysis(brief, bundle, config, gateway, ledger))
    return outcome, gateway, ledger


def calls_by_agent(gateway: RunGateway, suffix: str) -> int:
    return sum(1 for c in gateway.calls if c.agent_id.endswith(suffix))


class TestRunAnalysis:
    def test_approved_first_round(self):
        outcome, gateway, ledger = run_pipeline(
            {
                "civic.bioexpert/1": analysis_json(["civ-1"]),
                "civic.evaluator/1": "APPROVED",
            }
        )
        assert outcome.status == "Approved"
        assert outcome.iterations_used == 1
        assert [v.approved for v in outcome.verdict_history] == [True]
        assert calls_by_agent(gateway, ".bioexpert") == 1
        assert calls_by_agent(gateway, ".evaluator") == 1
        assert ledger.events()[-1].payload == "Approved"

    def test_exhausted_after_max_iterations(self):
        script = {"civic.bioexpert/*": analysis_json(["civ-1"]), "civic.evaluator/*": "NOT APPROVED\n- x"}
        outcome, gateway, _ = run_pipeline(script, max_iterations=3)
        assert outcome.status == "ExhaustedIterations"
        assert outcome.iterations_used == 3
        assert calls_by_agent(gateway, ".bioexpert") == 3
        assert calls_by_agent(gateway, ".evaluator") == 3
        assert all(not v.approved for v in outcome.verdict_history)
        assert outcome.final is not None  # last structurally valid draft retained

    def test_structural_failure_short_circuits_evaluator(self):
        invalid = json.dumps({"summary": "missing sections"})
        script = {
            "civic.bioexpert/1": invalid,
            "civic.bioexpert/2": analysis_json(["civ-1"]),
            "civic.evaluator/2": "APPROVED",
        }
        outcome, gateway, ledger = run_pipeline(script)
        assert outcome.status == "Approved"
        assert outcome.iterations_used == 2
        assert calls_by_agent(gateway, ".evaluator") == 1
        # The synthetic structural feedback is threaded into the revision prompt.
        revision = next(
            c.envelope for c in gateway.calls if c.agent_id == "civic.bioexpert" and c.envelope.iteration == 2
        )
        assert "structural validation failed" in revision.user_message
        assert "missing required section" in revision.user_message
        synthetic = [e for e in ledger.events() if e.kind == EventKind.VERDICT and e.agent_id == "civic.orchestrator"]
        assert len(synthetic) == 1

    def test_feedback_bullets_thread_verbatim(self):
        script = {
            "civic.bioexpert/*": analysis_json(["civ-1"]),
            "civic.evaluator/1": "NOT APPROVED\n- cite the BRAF record\n- shorten the summary",
            "civic.evaluator/2": "APPROVED",
        }
        outcome, gateway, _ = run_pipeline(script)
        assert outcome.iterations_used == 2
        revision = next(
            c.envelope for c in gateway.calls if c.agent_id == "civic.bioexpert" and c.envelope.iteration == 2
        )
        assert "cite the BRAF record" in revision.user_message
        assert "shorten the summary" in revision.user_message

    def test_unrecognized_verdict_becomes_rejection_with_anomaly(self):
        script = {
            "civic.bioexpert/*": analysis_json(["civ-1"]),
            "civic.evaluator/1": "perhaps",
            "civic.evaluator/2": "APPROVED",
        }
        outcome, _, ledger = run_pipeline(script)
        assert outcome.iterations_used == 2
        assert outcome.verdict_history[0].feedback == (UNPARSEABLE_VERDICT_FEEDBACK,)
        assert any(e.kind == EventKind.ANOMALY for e in ledger.events())

    def test_empty_bundle_still_runs(self):
        empty = make_bundle(items=())
        script = {
            "civic.bioexpert/1": analysis_json([], gene="TP53"),
            "civic.evaluator/1": "APPROVED",
        }
        outcome, _, _ = run_pipeline(script, bundle=empty)
        assert outcome.status == "Approved"
        assert outcome.final.citations == ()

    def test_never_valid_draft_leaves_no_final(self):
        script = {"civic.bioexpert/*": "not even json"}
        outcome, gateway, _ = run_pipeline(script, max_iterations=2)
        assert outcome.status == "ExhaustedIterations"
        assert outcome.final is None
        assert calls_by_agent(gateway, ".evaluator") == 0

    def test_orchestrator_never_calls_the_model(self):
        script = {"civic.bioexpert/*": analysis_json(["civ-1"]), "civic.evaluator/*": "NOT APPROVED\n- x"}
        _, gateway, _ = run_pipeline(script)
        assert all(".orchestrator" not in c.agent_id for c in gateway.calls)

    def test_event_sequence_is_strictly_increasing_and_ends_terminal(self):
        script = {"civic.bioexpert/1": analysis_json(["civ-1"]), "civic.evaluator/1": "APPROVED"}
        _, _, ledger = run_pipeline(script)
        seqs = [e.seq for e in ledger.events()]
        assert seqs == list(range(1, len(seqs) + 1))
        assert ledger.events()[-1].kind == EventKind.STATUS

    def test_prompt_events_precede_their_responses(self):
        script = {"civic.bioexpert/1": analysis_json(["civ-1"]), "civic.evaluator/1": "APPROVED"}
        _, _, ledger = run_pipeline(script)
        events = ledger.events()
        for i, event in enumerate(events):
            if event.kind == EventKind.RESPONSE:
                prior = [e for e in events[:i] if e.agent_id == event.agent_id and e.kind == EventKind.PROMPT]
                assert prior, f"response without prompt for {event.agent_id}"
