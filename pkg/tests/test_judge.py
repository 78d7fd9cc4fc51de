from __future__ import annotations

import json
import threading

import httpx
import pytest

from noteval.agreement import Verdict
from noteval.judge import (
    AmbiguousVerdict,
    ChatClient,
    Criterion,
    ExemplarShortage,
    JudgeConfig,
    NoVerdict,
    ShotExemplar,
    TransportError,
    VerdictError,
    build_prompt,
    default_exemplars,
    default_system_prompts,
    judge_corpus,
    judge_note,
    parse_exemplar_file,
    parse_verdict,
)
from noteval.notes import Provenance

from conftest import make_note


def stub_cfg(**kwargs) -> JudgeConfig:
    defaults = dict(endpoint="stub:always-true", model_name="stub-model")
    defaults.update(kwargs)
    return JudgeConfig(**defaults)


def scripted_client(cfg: JudgeConfig, responses: list[str]) -> tuple[ChatClient, list[dict]]:
    """Client whose transport replays canned responses and records requests."""
    seen: list[dict] = []
    lock = threading.Lock()

    def handler(request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content.decode("utf-8"))
        with lock:
            seen.append(payload)
            index = min(len(seen), len(responses)) - 1
        content = responses[index]
        return httpx.Response(
            200, json={"choices": [{"message": {"role": "assistant", "content": content}}]}
        )

    return ChatClient(cfg, transport=httpx.MockTransport(handler)), seen


SAMPLE = make_note(
    note_id="enc01::genmod",
    provenance=Provenance.GENMOD,
    cc="Left foot pain.",
    hpi="The patient is a 60-year-old male with left foot pain.",
    ap="Chronic left foot pain. Supportive care.",
)


class TestCriterion:
    def test_exactly_four(self):
        assert [c.value for c in Criterion] == ["age", "gender", "body_part", "coherence"]

    def test_default_prompts_match_packaged_files(self):
        from importlib import resources

        prompts = default_system_prompts()
        for criterion in Criterion:
            packaged = (
                resources.files("noteval") / "prompts" / f"{criterion.value}.txt"
            ).read_text("utf-8")
            assert prompts[criterion] == packaged
            assert prompts[criterion].strip()


class TestBuildPrompt:
    def test_zero_shot_age(self):
        bundle = build_prompt(Criterion.AGE, SAMPLE, stub_cfg(shots=0))
        assert len(bundle.messages) == 2
        system = bundle.messages[0]
        assert system.role == "system"
        assert system.content.startswith("You are a medical assistant")
        assert "Only pay attention to ages that are explicitly stated" in system.content
        assert bundle.messages[1].role == "user"

    def test_two_shot_structure(self):
        for criterion in Criterion:
            bundle = build_prompt(criterion, SAMPLE, stub_cfg(shots=2))
            assert len(bundle.messages) == 6
            answers = [
                parse_verdict(m.content) for m in bundle.messages if m.role == "assistant"
            ]
            assert sorted(v.value for v in answers) == ["FALSE", "TRUE"]

    def test_exemplar_shortage(self):
        with pytest.raises(ExemplarShortage):
            build_prompt(Criterion.AGE, SAMPLE, stub_cfg(shots=4))

    def test_target_note_is_tag_free_and_last(self):
        bundle = build_prompt(Criterion.GENDER, SAMPLE, stub_cfg(shots=3))
        final = bundle.messages[-1]
        assert final.role == "user"
        assert "<" not in final.content
        assert "Left foot pain." in final.content

    def test_message_order_alternates(self):
        bundle = build_prompt(Criterion.COHERENCE, SAMPLE, stub_cfg(shots=3))
        roles = [m.role for m in bundle.messages]
        assert roles == ["system", "user", "assistant", "user", "assistant", "user", "assistant", "user"]

    def test_payload_shape(self):
        bundle = build_prompt(Criterion.AGE, SAMPLE, stub_cfg())
        payload = bundle.to_payload("m", 0.0)
        assert set(payload) == {"model", "messages", "temperature"}
        assert payload["messages"][0]["role"] == "system"


class TestParseVerdict:
    def test_bare_true(self):
        assert parse_verdict("TRUE") is Verdict.CONSISTENT

    def test_sentence_with_lowercase_true(self):
        assert parse_verdict("The note is consistent, so the answer is true.") is Verdict.CONSISTENT

    def test_bare_false(self):
        assert parse_verdict("FALSE") is Verdict.INCONSISTENT

    def test_both_tokens_ambiguous(self):
        with pytest.raises(AmbiguousVerdict):
            parse_verdict("TRUE for age but FALSE overall")

    def test_neither_token(self):
        with pytest.raises(NoVerdict):
            parse_verdict("the note is fine")

    def test_substring_does_not_match(self):
        with pytest.raises(NoVerdict):
            parse_verdict("that is untrue and falsely stated")

    def test_repeated_agreeing_tokens(self):
        assert parse_verdict("TRUE. Yes, true.") is Verdict.CONSISTENT


class TestExemplars:
    def test_defaults_have_three_each_inconsistent_first(self):
        exemplars = default_exemplars()
        for criterion in Criterion:
            answers = [e.answer for e in exemplars[criterion]]
            assert len(answers) == 3
            assert answers[0] is Verdict.INCONSISTENT
            assert Verdict.CONSISTENT in answers

    def test_explanations_end_with_answer(self):
        for entries in default_exemplars().values():
            for exemplar in entries:
                assert parse_verdict(exemplar.explanation) is exemplar.answer

    def test_exemplar_notes_are_tag_free(self):
        for entries in default_exemplars().values():
            for exemplar in entries:
                assert "<" not in exemplar.note_text

    def test_parse_exemplar_file_format(self):
        text = "---\nanswers: TRUE, FALSE\n---\nnote one\n~~~\nGood. TRUE\n===\nnote two\n~~~\nBad. FALSE\n"
        exemplars = parse_exemplar_file(text)
        assert [e.answer.value for e in exemplars] == ["TRUE", "FALSE"]
        assert exemplars[0].note_text == "note one"

    def test_answer_count_mismatch_rejected(self):
        text = "---\nanswers: TRUE\n---\na\n~~~\nTRUE\n===\nb\n~~~\nTRUE\n"
        with pytest.raises(ValueError, match="bodies"):
            parse_exemplar_file(text)

    def test_explanation_must_end_with_answer(self):
        with pytest.raises(ValueError, match="end with"):
            ShotExemplar(note_text="n", answer=Verdict.CONSISTENT, explanation="it is FALSE")


class TestJudgeConfig:
    def test_rater_id_encodes_model_and_shots(self):
        assert stub_cfg(shots=2).rater_id == "stub-model@2shot"

    def test_validate_rejects_out_of_range_shots(self):
        with pytest.raises(ValueError, match="between 0 and 3"):
            stub_cfg(shots=4).validate()

    def test_validate_requires_polarity_mix_for_two_shots(self):
        only_true = {
            c: tuple(
                ShotExemplar("n", Verdict.CONSISTENT, "ok TRUE") for _ in range(2)
            )
            for c in Criterion
        }
        cfg = stub_cfg(shots=2, exemplars=only_true)
        with pytest.raises(ValueError, match="inconsistent"):
            cfg.validate()

    def test_from_file_round_trip(self, tmp_path):
        path = tmp_path / "judge.json"
        path.write_text(
            json.dumps({"endpoint": "stub:hash", "model_name": "m", "shots": 1, "parallelism": 2})
        )
        cfg = JudgeConfig.from_file(path)
        assert cfg.endpoint == "stub:hash"
        assert cfg.shots == 1
        cfg.validate()


class TestJudgeNote:
    def test_stub_true(self):
        cfg = stub_cfg()
        result = judge_note(SAMPLE, Criterion.AGE, cfg)
        assert result.verdict is Verdict.CONSISTENT
        assert result.attempts == 1
        assert result.raw_response == "TRUE"

    def test_garbage_then_false_takes_two_attempts(self):
        cfg = stub_cfg()
        client, seen = scripted_client(cfg, ["no idea", "FALSE"])
        result = judge_note(SAMPLE, Criterion.AGE, cfg, client=client)
        assert result.verdict is Verdict.INCONSISTENT
        assert result.attempts == 2
        # The retry appends the model's reply and a clarification request.
        retry_messages = seen[1]["messages"]
        assert retry_messages[-2]["content"] == "no idea"
        assert "single word" in retry_messages[-1]["content"]

    def test_all_attempts_unparseable(self):
        cfg = stub_cfg(verdict_retries=1)
        client, _ = scripted_client(cfg, ["hmm", "still no"])
        with pytest.raises(VerdictError):
            judge_note(SAMPLE, Criterion.AGE, cfg, client=client)

    def test_unreachable_endpoint(self):
        cfg = JudgeConfig(
            endpoint="http://127.0.0.1:1/v1/chat",
            model_name="m",
            timeout_s=0.2,
            transport_retries=0,
        )
        with pytest.raises(TransportError):
            judge_note(SAMPLE, Criterion.AGE, cfg)

    def test_http_error_retried_then_raised(self):
        cfg = stub_cfg(transport_retries=1)
        calls = []

        def handler(request: httpx.Request) -> httpx.Response:
            calls.append(request)
            return httpx.Response(500, text="boom")

        client = ChatClient(cfg, transport=httpx.MockTransport(handler))
        with pytest.raises(TransportError):
            judge_note(SAMPLE, Criterion.AGE, cfg, client=client)
        assert len(calls) == 2


class TestJudgeCorpus:
    def make_notes(self, count: int):
        notes = []
        for i in range(count):
            provenance = Provenance.GENMOD if i % 2 == 0 else Provenance.SPECMOD
            notes.append(
                make_note(
                    note_id=f"enc{i:02d}::{provenance.value.lower()}",
                    provenance=provenance,
                    cc=f"Complaint {i}.",
                    hpi=f"History {i} for the patient.",
                    ap=f"Plan {i}.",
                )
            )
        return notes

    def test_counts_and_matrix_shape(self):
        notes = self.make_notes(2)
        cfg = stub_cfg()
        with ChatClient(cfg) as client:
            run = judge_corpus(notes, list(Criterion), cfg, client=client)
            assert client.request_count == 8
        assert len(run.results) == 8
        for criterion in Criterion:
            matrix = run.matrices[criterion]
            assert matrix.items == tuple(n.note_id for n in notes)
            assert matrix.raters == (cfg.rater_id,)
            assert matrix.missing_count() == 0

    def test_distinct_shot_settings_are_distinct_raters(self):
        notes = self.make_notes(1)
        run0 = judge_corpus(notes, [Criterion.AGE], stub_cfg(shots=0))
        run2 = judge_corpus(notes, [Criterion.AGE], stub_cfg(shots=2))
        assert run0.rater_id != run2.rater_id
        merged = run0.matrices[Criterion.AGE].merged(run2.matrices[Criterion.AGE])
        assert len(merged.raters) == 2

    def test_one_failing_call_leaves_one_missing_cell(self):
        notes = self.make_notes(3)
        cfg = stub_cfg(verdict_retries=0, parallelism=1)
        poison = notes[1].note_id

        def handler(request: httpx.Request) -> httpx.Response:
            payload = json.loads(request.content.decode("utf-8"))
            target = payload["messages"][-1]["content"]
            text = "garbage" if "History 1" in target else "TRUE"
            return httpx.Response(
                200, json={"choices": [{"message": {"content": text}}]}
            )

        client = ChatClient(cfg, transport=httpx.MockTransport(handler))
        run = judge_corpus(notes, [Criterion.AGE], cfg, client=client)
        matrix = run.matrices[Criterion.AGE]
        assert matrix.missing_count() == 1
        assert matrix.get(poison, cfg.rater_id) is None
        assert len(run.failures) == 1
        assert run.failures[0].note_id == poison

    def test_duplicate_ids_rejected(self):
        notes = self.make_notes(1) * 2
        with pytest.raises(ValueError, match="unique"):
            judge_corpus(notes, [Criterion.AGE], stub_cfg())

    def test_statelessness_under_corpus_permutation(self):
        notes = self.make_notes(6)
        cfg = stub_cfg(endpoint="stub:hash")
        forward = judge_corpus(notes, list(Criterion), cfg)
        backward = judge_corpus(list(reversed(notes)), list(Criterion), cfg)
        for criterion in Criterion:
            for note in notes:
                assert forward.matrices[criterion].get(note.note_id, cfg.rater_id) == (
                    backward.matrices[criterion].get(note.note_id, cfg.rater_id)
                )

    def test_blindness_sentinel_never_reaches_prompts(self):
        sentinel = "ZEBRA-SENTINEL-42"
        notes = self.make_notes(2)
        cfg = stub_cfg()
        for criterion in Criterion:
            for note in notes:
                bundle = build_prompt(criterion, note, cfg)
                assert all(sentinel not in m.content for m in bundle.messages)
