"""Prompt assembly, backends, budgets, and cost accounting."""

from __future__ import annotations

import asyncio
import json

import httpx
import pytest
from hypothesis import given, strategies as st

from evisynth.domain import GeneSet, ResearchBrief
from evisynth.gateway import (
    ANTI_HALLUCINATION_CLAUSE,
    AutoApprovalBackend,
    BackendUnavailable,
    BudgetExceeded,
    DEFAULT_PRICE_TABLE,
    EvidenceTooLarge,
    HttpChatBackend,
    IterationMode,
    MockScriptMiss,
    PriceTable,
    PromptEnvelope,
    RunGateway,
    ScriptedMockBackend,
    TokenBudget,
    UnknownBackend,
    build_initial_prompt,
    build_review_prompt,
    build_revision_prompt,
    estimate_cost,
    role,
    serialize_evidence,
)

from conftest import make_bundle


@pytest.fixture
def evidence(genes):
    return serialize_evidence(make_bundle())


class TestPromptBuilders:
    def test_initial_contains_question_and_item_ids(self, brief, evidence):
        envelope = build_initial_prompt(role("bioexpert"), brief, evidence)
        assert brief.question in envelope.user_message
        for item_id in ("civ-1", "civ-2"):
            assert item_id in envelope.user_message
        assert envelope.iteration == 1
        assert envelope.iteration_mode == IterationMode.INITIAL

    def test_every_role_carries_anti_hallucination_clause(self, brief, evidence):
        for name in ("bioexpert", "evaluator", "report_composer", "content_validator", "critical_reviewer", "relevance_validator"):
            envelope = build_initial_prompt(role(name), brief, evidence)
            assert ANTI_HALLUCINATION_CLAUSE in envelope.system_message

    def test_evidence_over_budget_fails_loudly(self, brief):
        with pytest.raises(EvidenceTooLarge):
            build_initial_prompt(role("bioexpert"), brief, "word " * 50, prompt_budget=10)

    def test_revision_contains_feedback_and_previous(self, brief, evidence):
        envelope = build_revision_prompt(
            role("bioexpert"), brief, evidence, "earlier draft", ["fix one", "fix two"], 2
        )
        assert envelope.iteration_mode == IterationMode.REVISION
        assert "earlier draft" in envelope.user_message
        assert "fix one" in envelope.user_message and "fix two" in envelope.user_message
        assert "preserving any valid content" in envelope.user_message

    def test_revision_requires_feedback(self, brief, evidence):
        with pytest.raises(ValueError):
            build_revision_prompt(role("bioexpert"), brief, evidence, "prev", [], 2)

    def test_revision_requires_iteration_ge_2(self, brief, evidence):
        with pytest.raises(ValueError):
            build_revision_prompt(role("bioexpert"), brief, evidence, "prev", ["b"], 1)

    def test_review_prompt_carries_candidate(self, brief, evidence):
        envelope = build_review_prompt(role("evaluator"), brief, evidence, "the candidate", 2)
        assert "the candidate" in envelope.user_message
        assert envelope.iteration == 2
        assert envelope.iteration_mode == IterationMode.INITIAL

    def test_envelope_invariants_enforced(self):
        with pytest.raises(ValueError):
            PromptEnvelope(
                agent_id="x",
                system_message="s",
                user_message="## Previous output\nstale",
                iteration_mode=IterationMode.INITIAL,
                iteration=1,
            )
        with pytest.raises(ValueError):
            PromptEnvelope(
                agent_id="x",
                system_message="s",
                user_message="no blocks",
                iteration_mode=IterationMode.REVISION,
                iteration=2,
            )

    @given(st.lists(st.text(alphabet="abcdefgh XYZ09.,", min_size=1).map(str.strip).filter(bool), min_size=1, max_size=6))
    def test_every_feedback_bullet_appears_verbatim(self, bullets):
        brief = ResearchBrief(question="why?", genes=GeneSet(symbols=("TP53",)))
        envelope = build_revision_prompt(role("bioexpert"), brief, "[]", "prev", bullets, 2)
        for bullet in bullets:
            assert bullet in envelope.user_message


class TestScriptedMockBackend:
    def test_exact_key_then_wildcard(self):
        backend = ScriptedMockBackend({"a.evaluator/1": "APPROVED", "a.evaluator/*": "NOT APPROVED\n- x"})
        envelope1 = build_review_prompt(
            role("evaluator"),
            ResearchBrief(question="q", genes=GeneSet(symbols=("TP53",))),
            "[]",
            "cand",
            1,
            agent_id="a.evaluator",
        )
        text, usage = asyncio.run(backend.chat(envelope1))
        assert text == "APPROVED"
        assert usage.prompt > 0 and usage.completion == 1

    def test_miss_raises(self):
        backend = ScriptedMockBackend({})
        envelope = build_initial_prompt(
            role("bioexpert"),
            ResearchBrief(question="q", genes=GeneSet(symbols=("TP53",))),
            "[]",
            agent_id="a.bioexpert",
        )
        with pytest.raises(MockScriptMiss):
            asyncio.run(backend.chat(envelope))

    def test_from_file(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(json.dumps({"a.evaluator/*": "APPROVED"}))
        backend = ScriptedMockBackend.from_file(path)
        assert backend.script["a.evaluator/*"] == "APPROVED"


class TestAutoApprovalBackend:
    def test_generator_output_cites_prompt_ids(self, brief):
        backend = AutoApprovalBackend()
        envelope = build_initial_prompt(
            role("bioexpert"), brief, serialize_evidence(make_bundle()), agent_id="civic.bioexpert"
        )
        text, _ = asyncio.run(backend.chat(envelope))
        payload = json.loads(text)
        assert {c["evidence_id"] for c in payload["citations"]} == {"civ-1", "civ-2"}
        assert all(r["gene"] in ("TP53", "BRAF") for r in payload["relevance_explanations"])

    def test_critic_always_approves(self, brief):
        backend = AutoApprovalBackend()
        envelope = build_review_prompt(
            role("evaluator"), brief, "[]", "cand", 1, agent_id="civic.evaluator"
        )
        text, _ = asyncio.run(backend.chat(envelope))
        assert text == "APPROVED"


class TestHttpChatBackend:
    def _envelope(self):
        return build_initial_prompt(
            role("bioexpert"),
            ResearchBrief(question="q", genes=GeneSet(symbols=("TP53",))),
            "[]",
            agent_id="civic.bioexpert",
        )

    def test_passthrough_usage(self):
        def handler(request: httpx.Request) -> httpx.Response:
            body = json.loads(request.content)
            assert body["messages"][0]["role"] == "system"
            return httpx.Response(
                200,
                json={
                    "choices": [{"message": {"content": "hello"}}],
                    "usage": {"prompt_tokens": 1200, "completion_tokens": 340},
                },
            )

        backend = HttpChatBackend("http://backend/chat", "m1", transport=httpx.MockTransport(handler))
        text, usage = asyncio.run(backend.chat(self._envelope()))
        assert text == "hello"
        assert usage == (1200, 340)

    def test_retries_5xx_then_succeeds(self):
        calls = {"n": 0}
        naps: list[float] = []

        def handler(request: httpx.Request) -> httpx.Response:
            calls["n"] += 1
            if calls["n"] < 3:
                return httpx.Response(500)
            return httpx.Response(200, json={"text": "ok"})

        async def nap(seconds: float) -> None:
            naps.append(seconds)

        backend = HttpChatBackend(
            "http://backend/chat", "m1", transport=httpx.MockTransport(handler), sleep=nap
        )
        text, usage = asyncio.run(backend.chat(self._envelope()))
        assert text == "ok"
        assert usage is None
        assert calls["n"] == 3
        assert naps == [1.0, 2.0]

    def test_gives_up_after_attempts(self):
        async def nap(seconds: float) -> None:
            pass

        backend = HttpChatBackend(
            "http://backend/chat",
            "m1",
            transport=httpx.MockTransport(lambda r: httpx.Response(502)),
            sleep=nap,
        )
        with pytest.raises(BackendUnavailable):
            asyncio.run(backend.chat(self._envelope()))

    def test_4xx_fails_without_retry(self):
        calls = {"n": 0}

        def handler(request: httpx.Request) -> httpx.Response:
            calls["n"] += 1
            return httpx.Response(401)

        backend = HttpChatBackend("http://backend/chat", "m1", transport=httpx.MockTransport(handler))
        with pytest.raises(BackendUnavailable):
            asyncio.run(backend.chat(self._envelope()))
        assert calls["n"] == 1


class TestBudgetAndGateway:
    def _envelope(self, agent_id="civic.bioexpert"):
        return build_initial_prompt(
            role("bioexpert"),
            ResearchBrief(question="q", genes=GeneSet(symbols=("TP53",))),
            "[]",
            agent_id=agent_id,
        )

    def test_ceiling_blocks_before_any_call(self):
        backend = ScriptedMockBackend({"civic.bioexpert/1": "response"})
        gateway = RunGateway(backend, budget=TokenBudget(10))
        with pytest.raises(BudgetExceeded):
            asyncio.run(gateway.complete(self._envelope()))
        assert gateway.calls == []
        assert gateway.budget.used == 0

    def test_accounting_matches_mock_usage(self):
        from evisynth.domain import word_count

        backend = ScriptedMockBackend({"civic.bioexpert/1": "three word reply"})
        gateway = RunGateway(backend, budget=TokenBudget(100_000))
        envelope = self._envelope()
        result = asyncio.run(gateway.complete(envelope))
        assert result.prompt_tokens == word_count(envelope.system_message, envelope.user_message)
        assert result.completion_tokens == 3
        assert result.backend_id == "mock"
        assert gateway.budget.used == result.prompt_tokens + result.completion_tokens
        assert gateway.total_prompt_tokens == result.prompt_tokens

    def test_failed_call_releases_reservation(self):
        backend = ScriptedMockBackend({})
        gateway = RunGateway(backend, budget=TokenBudget(100_000))
        with pytest.raises(MockScriptMiss):
            asyncio.run(gateway.complete(self._envelope()))
        assert gateway.budget.used == 0
        assert gateway.calls == []


class TestCost:
    def test_zero_usage_costs_nothing(self):
        assert estimate_cost({"mock": (0, 0)}, DEFAULT_PRICE_TABLE) == 0.0

    def test_arithmetic(self):
        table = PriceTable(rates={"m1": (0.40, 1.60)})
        assert estimate_cost({"m1": (1000, 1000)}, table) == pytest.approx(2.00)

    def test_unknown_backend(self):
        with pytest.raises(UnknownBackend):
            estimate_cost({"mystery": (10, 10)}, DEFAULT_PRICE_TABLE)

    def test_negative_rates_rejected(self):
        with pytest.raises(ValueError):
            PriceTable(rates={"m1": (-0.1, 0.0)})
