"""Criterion prompts, chat-endpoint client, verdict parsing, corpus judging.

The judge is a client of any chat-completion endpoint: it builds one
criterion-specific prompt per request (system prompt, optional worked
exemplars, then the bare note), sends it with a fresh context every time,
and reads back a single-word TRUE/FALSE verdict.  Each (model, shot count)
configuration acts as one rater.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import httpx

from .agreement import RatingMatrix, Verdict
from .notes import Note, render_note

#: Environment variable holding a bearer token for the chat endpoint.
API_KEY_ENV = "NOTEVAL_API_KEY"

_CLARIFICATION = "Please answer again in a single word, either TRUE or FALSE."


class Criterion(str, Enum):
    """The four consistency criteria a note is judged on."""

    AGE = "age"
    GENDER = "gender"
    BODY_PART = "body_part"
    COHERENCE = "coherence"

    @property
    def label(self) -> str:
        return {"age": "Age", "gender": "Gender", "body_part": "Body Part", "coherence": "Coherence"}[
            self.value
        ]


class JudgeError(Exception):
    pass


class ExemplarShortage(JudgeError):
    """Requested more shots than there are exemplars for some criterion."""


class VerdictParseError(JudgeError):
    pass


class NoVerdict(VerdictParseError):
    """Neither TRUE nor FALSE appeared as a standalone word."""


class AmbiguousVerdict(VerdictParseError):
    """Both TRUE and FALSE appeared."""


class VerdictError(JudgeError):
    """Every attempt produced an unparseable response."""


class TransportError(JudgeError):
    """The endpoint could not be reached (after retries)."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class PromptBundle:
    """Ordered chat messages for one (criterion, note) request."""

    criterion: Criterion
    note_id: str
    messages: tuple[ChatMessage, ...]

    def to_payload(self, model_name: str, temperature: float) -> dict:
        return {
            "model": model_name,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": temperature,
        }


@dataclass(frozen=True)
class ShotExemplar:
    """A worked example: a tag-free note, its verdict, and an explanation.

    The explanation must end with the verdict word so a model shown the
    exemplar sees the expected answer format.
    """

    note_text: str
    answer: Verdict
    explanation: str

    def __post_init__(self) -> None:
        if not self.note_text.strip():
            raise ValueError("exemplar note text is empty")
        tail = self.explanation.rstrip().rstrip(".!").rstrip()
        if not tail.upper().endswith(self.answer.value):
            raise ValueError(
                f"exemplar explanation must end with {self.answer.value}: {tail[-40:]!r}"
            )


def _prompt_root():
    return resources.files("noteval") / "prompts"


def default_system_prompts() -> dict[Criterion, str]:
    """The shipped per-criterion system prompts, read verbatim."""
    return {
        criterion: (_prompt_root() / f"{criterion.value}.txt").read_text(encoding="utf-8")
        for criterion in Criterion
    }


def parse_exemplar_file(text: str) -> list[ShotExemplar]:
    """Parse the exemplar file format.

    A front-matter block delimited by ``---`` lines declares the ordered
    answers (``answers: FALSE, TRUE, TRUE``); exemplar bodies follow,
    separated by ``===`` lines, each split into note text and explanation
    by a ``~~~`` line.
    """
    lines = text.splitlines()
    if not lines or lines[0].strip() != "---":
        raise ValueError("exemplar file must start with a --- front-matter block")
    try:
        end = next(i for i in range(1, len(lines)) if lines[i].strip() == "---")
    except StopIteration:
        raise ValueError("unterminated front-matter block") from None
    answers: list[Verdict] | None = None
    for line in lines[1:end]:
        key, _, value = line.partition(":")
        if key.strip() == "answers":
            answers = [Verdict(tok.strip().upper()) for tok in value.split(",") if tok.strip()]
    if answers is None:
        raise ValueError("front matter must declare 'answers:'")
    body = "\n".join(lines[end + 1 :])
    blocks = [b for b in re.split(r"(?m)^===\s*$", body)]
    if len(blocks) != len(answers):
        raise ValueError(f"{len(answers)} answers declared but {len(blocks)} exemplar bodies found")
    exemplars = []
    for answer, block in zip(answers, blocks):
        parts = re.split(r"(?m)^~~~\s*$", block)
        if len(parts) != 2:
            raise ValueError("each exemplar body needs exactly one ~~~ separator")
        exemplars.append(
            ShotExemplar(note_text=parts[0].strip(), answer=answer, explanation=parts[1].strip())
        )
    return exemplars


def default_exemplars() -> dict[Criterion, tuple[ShotExemplar, ...]]:
    """The shipped synthetic exemplars (inconsistent example first)."""
    out = {}
    for criterion in Criterion:
        text = (_prompt_root() / "exemplars" / f"{criterion.value}.txt").read_text("utf-8")
        out[criterion] = tuple(parse_exemplar_file(text))
    return out


@dataclass
class JudgeConfig:
    """Everything a judging run needs; one config = one rater identity."""

    endpoint: str
    model_name: str
    shots: int = 0
    temperature: float = 0.0
    timeout_s: float = 30.0
    transport_retries: int = 2
    verdict_retries: int = 2
    parallelism: int = 4
    system_prompts: Mapping[Criterion, str] = field(default_factory=default_system_prompts)
    exemplars: Mapping[Criterion, tuple[ShotExemplar, ...]] = field(default_factory=default_exemplars)

    @property
    def rater_id(self) -> str:
        return f"{self.model_name}@{self.shots}shot"

    def validate(self) -> None:
        if not (0 <= self.shots <= 3):
            raise ValueError("shots must be between 0 and 3")
        for criterion in Criterion:
            if not self.system_prompts.get(criterion, "").strip():
                raise ValueError(f"missing system prompt for {criterion.value}")
            available = self.exemplars.get(criterion, ())
            if self.shots > len(available):
                raise ExemplarShortage(
                    f"{criterion.value}: {self.shots} shots requested, "
                    f"{len(available)} exemplars available"
                )
            if self.shots >= 2:
                used = {ex.answer for ex in available[: self.shots]}
                if used != {Verdict.CONSISTENT, Verdict.INCONSISTENT}:
                    raise ValueError(
                        f"{criterion.value}: {self.shots}-shot prompts need at least one "
                        "consistent and one inconsistent exemplar"
                    )

    def with_shots(self, shots: int) -> "JudgeConfig":
        return replace(self, shots=shots)

    @classmethod
    def from_file(cls, path: str | Path) -> "JudgeConfig":
        """Load a config from JSON; prompt/exemplar directories may override
        the shipped defaults with one ``<criterion>.txt`` file each."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        kwargs = {
            key: data[key]
            for key in (
                "endpoint",
                "model_name",
                "shots",
                "temperature",
                "timeout_s",
                "transport_retries",
                "verdict_retries",
                "parallelism",
            )
            if key in data
        }
        cfg = cls(**kwargs)
        prompt_dir = data.get("prompt_dir")
        if prompt_dir:
            cfg.system_prompts = {
                c: (Path(prompt_dir) / f"{c.value}.txt").read_text("utf-8") for c in Criterion
            }
        exemplar_dir = data.get("exemplar_dir")
        if exemplar_dir:
            cfg.exemplars = {
                c: tuple(
                    parse_exemplar_file((Path(exemplar_dir) / f"{c.value}.txt").read_text("utf-8"))
                )
                for c in Criterion
            }
        return cfg


def build_prompt(criterion: Criterion, note: Note, cfg: JudgeConfig) -> PromptBundle:
    """Assemble the chat messages for one judgment request.

    Order: criterion system prompt, then user/assistant turns for the first
    ``cfg.shots`` exemplars, then the target note rendered without tags.
    Reference notes and transcripts are never part of the bundle.
    """
    available = cfg.exemplars.get(criterion, ())
    if cfg.shots > len(available):
        raise ExemplarShortage(
            f"{criterion.value}: {cfg.shots} shots requested, {len(available)} exemplars available"
        )
    messages = [ChatMessage("system", cfg.system_prompts[criterion])]
    for exemplar in available[: cfg.shots]:
        messages.append(ChatMessage("user", exemplar.note_text))
        messages.append(ChatMessage("assistant", exemplar.explanation))
    messages.append(ChatMessage("user", render_note(note, with_tags=False)))
    return PromptBundle(criterion=criterion, note_id=note.note_id, messages=tuple(messages))


_WORD = re.compile(r"\b(true|false)\b", re.IGNORECASE)


def parse_verdict(response: str) -> Verdict:
    """Scan a response for standalone TRUE/FALSE tokens.

    All occurrences must agree; substrings such as "untrue" do not count.
    """
    found = {match.group(1).upper() for match in _WORD.finditer(response)}
    if found == {"TRUE"}:
        return Verdict.CONSISTENT
    if found == {"FALSE"}:
        return Verdict.INCONSISTENT
    if not found:
        raise NoVerdict(f"no TRUE/FALSE token in response: {response[:80]!r}")
    raise AmbiguousVerdict(f"both TRUE and FALSE in response: {response[:80]!r}")


def _stub_responder(name: str):
    """Deterministic in-process endpoints for offline runs and tests.

    ``stub:always-true`` / ``stub:always-false`` answer constantly;
    ``stub:hash`` answers from a hash of the full message list (so the
    criterion's system prompt participates), making verdicts stable,
    criterion-dependent, and order-independent.
    """
    import hashlib

    def handler(request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content.decode("utf-8"))
        if name == "always-true":
            text = "TRUE"
        elif name == "always-false":
            text = "FALSE"
        elif name == "hash":
            blob = "\x1e".join(m["content"] for m in payload["messages"])
            digest = hashlib.sha256(blob.encode("utf-8")).digest()
            text = "TRUE" if digest[0] % 4 else "FALSE"
        else:
            raise ValueError(f"unknown stub endpoint {name!r}")
        return httpx.Response(
            200, json={"choices": [{"message": {"role": "assistant", "content": text}}]}
        )

    return handler


def _extract_content(data: object) -> str:
    if isinstance(data, dict):
        choices = data.get("choices")
        if isinstance(choices, list) and choices:
            first = choices[0]
            if isinstance(first, dict):
                message = first.get("message")
                if isinstance(message, dict) and isinstance(message.get("content"), str):
                    return message["content"]
                if isinstance(first.get("text"), str):
                    return first["text"]
        message = data.get("message")
        if isinstance(message, dict) and isinstance(message.get("content"), str):
            return message["content"]
        for key in ("content", "text"):
            if isinstance(data.get(key), str):
                return data[key]
    raise TransportError(f"response carries no completion text: {str(data)[:120]!r}")


class ChatClient:
    """Thin chat-completion client; counts every request it issues.

    Endpoints of the form ``stub:<name>`` are served by an in-process
    deterministic responder through the same HTTP machinery, which keeps
    offline runs faithful to real ones.
    """

    def __init__(self, cfg: JudgeConfig, transport: httpx.BaseTransport | None = None):
        self._cfg = cfg
        self._lock = threading.Lock()
        self._requests = 0
        url = cfg.endpoint
        if url.startswith("stub:"):
            if transport is None:
                name = url[len("stub:") :].lstrip("/")
                transport = httpx.MockTransport(_stub_responder(name))
            url = "http://stub.invalid/v1/chat/completions"
        headers = {}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._url = url
        self._client = httpx.Client(transport=transport, timeout=cfg.timeout_s, headers=headers)

    @property
    def request_count(self) -> int:
        with self._lock:
            return self._requests

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        payload = {
            "model": self._cfg.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": self._cfg.temperature,
        }
        last_error: Exception | None = None
        for _ in range(self._cfg.transport_retries + 1):
            with self._lock:
                self._requests += 1
            try:
                response = self._client.post(self._url, json=payload)
                response.raise_for_status()
                return _extract_content(response.json())
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last_error = exc
        raise TransportError(f"endpoint unreachable after retries: {last_error}")

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "ChatClient":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


@dataclass(frozen=True)
class JudgedResult:
    """Outcome of judging one note on one criterion."""

    note_id: str
    criterion: Criterion
    verdict: Verdict
    raw_response: str
    latency_s: float
    attempts: int


def judge_note(
    note: Note,
    criterion: Criterion,
    cfg: JudgeConfig,
    client: ChatClient | None = None,
) -> JudgedResult:
    """Issue one fresh judgment request (plus clarification retries).

    Nothing from previous judgments is carried over.  An unparseable
    response is retried up to ``cfg.verdict_retries`` times with the model's
    own reply and a clarification request appended.
    """
    bundle = build_prompt(criterion, note, cfg)
    messages = list(bundle.messages)
    own_client = client is None
    active = client if client is not None else ChatClient(cfg)
    started = time.perf_counter()
    try:
        raw = ""
        for attempt in range(1, cfg.verdict_retries + 2):
            raw = active.complete(messages)
            try:
                verdict = parse_verdict(raw)
            except VerdictParseError:
                messages.append(ChatMessage("assistant", raw))
                messages.append(ChatMessage("user", _CLARIFICATION))
                continue
            return JudgedResult(
                note_id=note.note_id,
                criterion=criterion,
                verdict=verdict,
                raw_response=raw,
                latency_s=time.perf_counter() - started,
                attempts=attempt,
            )
        raise VerdictError(
            f"{note.note_id}/{criterion.value}: no parseable verdict after "
            f"{cfg.verdict_retries + 1} attempts; last response {raw[:80]!r}"
        )
    finally:
        if own_client:
            active.close()


@dataclass(frozen=True)
class JudgeFailure:
    note_id: str
    criterion: Criterion
    error: str


@dataclass(frozen=True)
class JudgeRun:
    """All results of judging a corpus with one configuration."""

    rater_id: str
    matrices: Mapping[Criterion, RatingMatrix]
    results: tuple[JudgedResult, ...]
    failures: tuple[JudgeFailure, ...]


def judge_corpus(
    notes: Sequence[Note],
    criteria: Iterable[Criterion],
    cfg: JudgeConfig,
    client: ChatClient | None = None,
) -> JudgeRun:
    """Judge every note on every criterion, with bounded parallelism.

    Failed judgments become missing matrix cells (never guessed verdicts)
    and the run always completes the remaining calls.  The rater id encodes
    the model name and shot count, so different shot settings land in
    distinct rater columns downstream.
    """
    ids = [note.note_id for note in notes]
    if len(set(ids)) != len(ids):
        raise ValueError("note ids must be unique")
    criteria = list(criteria)
    own_client = client is None
    active = client if client is not None else ChatClient(cfg)
    results: dict[tuple[str, Criterion], JudgedResult] = {}
    failures: list[JudgeFailure] = []
    try:
        with ThreadPoolExecutor(max_workers=max(1, cfg.parallelism)) as pool:
            futures = {
                (note.note_id, criterion): pool.submit(judge_note, note, criterion, cfg, active)
                for note in notes
                for criterion in criteria
            }
            for key, future in futures.items():
                try:
                    results[key] = future.result()
                except JudgeError as exc:
                    failures.append(JudgeFailure(key[0], key[1], str(exc)))
    finally:
        if own_client:
            active.close()

    matrices = {}
    for criterion in criteria:
        cells = {
            (note_id, cfg.rater_id): results[(note_id, criterion)].verdict
            for note_id in ids
            if (note_id, criterion) in results
        }
        matrices[criterion] = RatingMatrix(
            criterion=criterion.value,
            items=tuple(ids),
            raters=(cfg.rater_id,),
            cells=cells,
        )
    ordered = tuple(
        results[(note_id, criterion)]
        for note_id in ids
        for criterion in criteria
        if (note_id, criterion) in results
    )
    return JudgeRun(
        rater_id=cfg.rater_id,
        matrices=matrices,
        results=ordered,
        failures=tuple(failures),
    )
