"""Beam search with a no-repeat-n-gram ban over pluggable token distributions.

The language-model abstraction is a deterministic map from a token prefix to
a next-token distribution; real neural decoding is out of scope.  Two note
generation styles are built on top of it: single-pass (one decode produces
the whole tagged note, so the ban applies across section boundaries) and
per-section (one independent decode per section, assembled afterwards).
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Protocol, Sequence

from .notes import (
    Note,
    Provenance,
    SectionKind,
    TagViolation,
    parse_note_lenient,
)

Tokens = tuple[str, ...]


class GenerationMode(str, Enum):
    SINGLE_PASS = "single_pass"
    PER_SECTION = "per_section"


@dataclass(frozen=True)
class GenerationConfig:
    """Decoder settings; nrns = 0 disables the no-repeat-n-gram ban."""

    beam_size: int = 4
    nrns: int = 5
    max_len: int = 64
    mode: GenerationMode = GenerationMode.SINGLE_PASS

    def __post_init__(self) -> None:
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.nrns < 0:
            raise ValueError("nrns must be >= 0")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")


class AllTokensBanned(RuntimeError):
    """Every candidate token was banned for every live hypothesis."""


class LmSource(Protocol):
    """Deterministic next-token distribution over a fixed vocabulary.

    ``next_distribution`` receives the full prefix (conditioning prompt plus
    generated tokens) and returns token -> probability summing to 1; the
    vocabulary must include ``eos_token``.
    """

    eos_token: str

    def next_distribution(self, prefix: Tokens) -> Mapping[str, float]: ...


@dataclass(frozen=True)
class ScriptedLm:
    """Table-driven source: an explicit distribution per prefix.

    Prefixes not in the table fall back to the ``*`` entry if one was given,
    else to end-of-sequence with probability 1.
    """

    table: Mapping[Tokens, Mapping[str, float]]
    eos_token: str = "<eos>"
    default: Mapping[str, float] | None = None

    def next_distribution(self, prefix: Tokens) -> Mapping[str, float]:
        dist = self.table.get(tuple(prefix))
        if dist is None:
            dist = self.default if self.default is not None else {self.eos_token: 1.0}
        return dist

    @classmethod
    def from_table(cls, text: str, eos_token: str = "<eos>") -> "ScriptedLm":
        """Parse the plain-text table format.

        One entry per line: ``prefix tokens | token:prob,token:prob,...``;
        the left side is space-separated (empty for the start-of-sequence
        entry) and a left side of ``*`` declares the fallback distribution.
        Blank lines and ``#`` comments are skipped.
        """
        table: dict[Tokens, dict[str, float]] = {}
        default: dict[str, float] | None = None
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "|" not in line:
                raise ValueError(f"line {line_no}: expected 'prefix | token:prob,...'")
            left, right = line.split("|", 1)
            dist: dict[str, float] = {}
            for part in right.strip().split(","):
                token, _, prob = part.strip().rpartition(":")
                if not token:
                    raise ValueError(f"line {line_no}: malformed entry {part!r}")
                dist[token] = float(prob)
            total = sum(dist.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"line {line_no}: probabilities sum to {total}, not 1")
            if any(p < 0 for p in dist.values()):
                raise ValueError(f"line {line_no}: negative probability")
            prefix_text = left.strip()
            if prefix_text == "*":
                default = dist
            else:
                table[tuple(prefix_text.split())] = dist
        return cls(table=table, eos_token=eos_token, default=default)


@dataclass(frozen=True)
class SeededLm:
    """Pseudo-random but fully deterministic source for randomized suites.

    The distribution for a prefix is derived from a SHA-256 of the seed and
    the prefix, so it is stable across processes and independent of call
    order.
    """

    seed: int
    vocab: Tokens
    eos_token: str = "<eos>"
    eos_bias: float = 0.15

    def next_distribution(self, prefix: Tokens) -> Mapping[str, float]:
        key = hashlib.sha256(
            ("%d\x00%s" % (self.seed, "\x1f".join(prefix))).encode("utf-8")
        ).digest()
        rng = random.Random(int.from_bytes(key[:8], "big"))
        weights = {token: rng.random() for token in self.vocab}
        weights[self.eos_token] = weights.get(self.eos_token, 0.0) + self.eos_bias
        total = sum(weights.values())
        return {token: w / total for token, w in weights.items()}


@dataclass(frozen=True)
class PreferredPathLm:
    """Source that walks a fixed token script with a low-probability fallback.

    At generated position ``i`` the script token gets ``p_preferred`` and the
    fallback token the rest; past the end of the script, end-of-sequence has
    probability 1.  Useful for forcing decoding down a known path while still
    giving beam search an escape hatch when the preferred token is banned.
    """

    script: Tokens
    fallback: str = "unspecified"
    eos_token: str = "<eos>"
    p_preferred: float = 0.8
    prompt_len: int = 0

    def next_distribution(self, prefix: Tokens) -> Mapping[str, float]:
        position = len(prefix) - self.prompt_len
        if position < 0 or position >= len(self.script):
            return {self.eos_token: 1.0}
        preferred = self.script[position]
        if preferred == self.fallback:
            return {preferred: 1.0}
        return {preferred: self.p_preferred, self.fallback: 1.0 - self.p_preferred}


def banned_next_tokens(prefix: Sequence[str], nrns: int) -> frozenset[str]:
    """Tokens that would complete an n-gram of size ``nrns`` already in ``prefix``.

    The ban key is the last ``nrns - 1`` prefix tokens; a token is banned when
    key + token occurs among the prefix's n-grams.  ``nrns = 0`` means no ban,
    and a prefix shorter than ``nrns - 1`` cannot form a key.
    """
    if nrns == 0 or len(prefix) < nrns - 1:
        return frozenset()
    completions: dict[Tokens, set[str]] = {}
    for i in range(len(prefix) - nrns + 1):
        gram = tuple(prefix[i : i + nrns])
        completions.setdefault(gram[:-1], set()).add(gram[-1])
    key = tuple(prefix[len(prefix) - (nrns - 1) :])
    return frozenset(completions.get(key, set()))


@dataclass(frozen=True)
class BeamHypothesis:
    """One beam entry; the log score is the sum of chosen-token log probs."""

    tokens: Tokens
    log_score: float
    finished: bool

    def sort_key(self) -> tuple[float, int, Tokens]:
        # Higher score first, then shorter, then lexicographically smaller.
        return (-self.log_score, len(self.tokens), self.tokens)


def beam_search(lm: LmSource, prompt: Sequence[str], cfg: GenerationConfig) -> Tokens:
    """Standard beam search under the no-repeat-n-gram ban.

    Scores are raw log-probability sums (no length normalization).  A
    hypothesis finishes on end-of-sequence or at ``max_len`` tokens.  Ties
    are broken toward shorter, then lexicographically smaller sequences.
    The returned sequence excludes the prompt and any trailing end token;
    it never contains a repeated n-gram of size ``cfg.nrns`` when the ban
    is active.

    Raises :class:`AllTokensBanned` if decoding dead-ends with no finished
    hypothesis: at some step every positive-probability token is banned for
    every live hypothesis.
    """
    prompt = tuple(prompt)
    live = [BeamHypothesis(tokens=(), log_score=0.0, finished=False)]
    best: BeamHypothesis | None = None

    for _ in range(cfg.max_len):
        if not live:
            break
        expansions: list[BeamHypothesis] = []
        for hyp in live:
            banned = banned_next_tokens(hyp.tokens, cfg.nrns)
            dist = lm.next_distribution(prompt + hyp.tokens)
            for token, prob in dist.items():
                if prob <= 0.0 or token in banned:
                    continue
                tokens = hyp.tokens + (token,)
                expansions.append(
                    BeamHypothesis(
                        tokens=tokens,
                        log_score=hyp.log_score + math.log(prob),
                        finished=token == lm.eos_token or len(tokens) == cfg.max_len,
                    )
                )
        if not expansions:
            if best is None:
                raise AllTokensBanned(
                    f"no admissible continuation for any of {len(live)} hypotheses"
                )
            break
        expansions.sort(key=BeamHypothesis.sort_key)
        live = []
        for hyp in expansions:
            if hyp.finished:
                if best is None or hyp.sort_key() < best.sort_key():
                    best = hyp
            elif len(live) < cfg.beam_size:
                live.append(hyp)
        # Scores only fall as tokens are appended, so once the best finished
        # hypothesis strictly beats every live one it can never be overtaken.
        if best is not None and live and best.log_score > live[0].log_score:
            break

    if best is None:
        raise AllTokensBanned("decoding ended with no finished hypothesis")
    tokens = best.tokens
    if tokens and tokens[-1] == lm.eos_token:
        tokens = tokens[:-1]
    return tokens


@dataclass(frozen=True)
class NoteGeneration:
    """A generated note plus anything that went wrong while producing it."""

    note: Note
    violations: tuple[TagViolation, ...] = ()
    section_errors: Mapping[SectionKind, str] = field(default_factory=dict)


def generate_genmod_note(
    lm: LmSource,
    conversation_prompt: Sequence[str],
    cfg: GenerationConfig,
    note_id: str = "genmod",
) -> NoteGeneration:
    """Single-pass generation: one decode emits the whole tagged note.

    The tag tokens are ordinary vocabulary items, so the no-repeat ban spans
    section boundaries.  The decoded text is parsed leniently and any tag
    violations are reported with the note.
    """
    if cfg.mode is not GenerationMode.SINGLE_PASS:
        raise ValueError("generate_genmod_note requires mode=SINGLE_PASS")
    tokens = beam_search(lm, conversation_prompt, cfg)
    text = " ".join(tokens)
    note, violations = parse_note_lenient(text, note_id, Provenance.GENMOD)
    return NoteGeneration(note=note, violations=tuple(violations))


def generate_specmod_note(
    lms: Mapping[SectionKind, LmSource],
    conversation_prompt: Sequence[str],
    cfg: GenerationConfig,
    note_id: str = "specmod",
) -> NoteGeneration:
    """Per-section generation: one independent decode per section.

    Each decode starts with fresh no-repeat state, so an n-gram may legally
    appear in several sections.  A section whose decode dead-ends is dropped
    and reported; the remaining sections are still assembled.
    """
    if cfg.mode is not GenerationMode.PER_SECTION:
        raise ValueError("generate_specmod_note requires mode=PER_SECTION")
    sections: list[tuple[SectionKind, str]] = []
    errors: dict[SectionKind, str] = {}
    for kind in SectionKind:
        lm = lms.get(kind)
        if lm is None:
            continue
        try:
            tokens = beam_search(lm, conversation_prompt, cfg)
        except AllTokensBanned as exc:
            errors[kind] = str(exc)
            continue
        sections.append((kind, " ".join(tokens)))
    note = Note(note_id=note_id, provenance=Provenance.SPECMOD, sections=tuple(sections))
    return NoteGeneration(note=note, section_errors=errors)
