"""ROUGE-1/2/3/L over word tokens, per section and for the whole note.

No stemming and no stopword removal: scores are reproducible from the token
split alone.  ROUGE-L uses the longest common subsequence over the full token
sequence (no sentence splitting).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import re

from .notes import Note, SectionKind, render_note

# Maximal runs of alphanumeric characters; everything else is a separator.
_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split into alphanumeric word tokens.

    >>> tokenize("60-year-old male")
    ['60', 'year', 'old', 'male']
    """
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class PrfScore:
    """Precision / recall / F1 triple, each in [0, 1].

    F1 is the harmonic mean, defined as 0 when precision + recall = 0.
    """

    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, overlap: float, candidate_total: int, reference_total: int) -> "PrfScore":
        precision = overlap / candidate_total if candidate_total > 0 else 0.0
        recall = overlap / reference_total if reference_total > 0 else 0.0
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        return cls(precision=precision, recall=recall, f1=f1)


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: list[str], reference: list[str], n: int) -> PrfScore:
    """ROUGE-N: multiset n-gram overlap.

    overlap  = |candidate n-grams ∩ reference n-grams|  (multiset intersection)
    precision = overlap / #candidate n-grams
    recall    = overlap / #reference n-grams

    A side with zero n-grams contributes 0 to its component.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cand = _ngram_counts(candidate, n)
    ref = _ngram_counts(reference, n)
    overlap = sum((cand & ref).values())
    return PrfScore.from_counts(overlap, sum(cand.values()), sum(ref.values()))


def lcs_length(a: list[str], b: list[str]) -> int:
    """Length of the longest common subsequence, O(len(a) * len(b))."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                curr[j] = prev[j - 1] + 1
            else:
                curr[j] = max(prev[j], curr[j - 1])
        prev = curr
    return prev[-1]


def rouge_l(candidate: list[str], reference: list[str]) -> PrfScore:
    """ROUGE-L: LCS length scored against each side's length."""
    lcs = lcs_length(candidate, reference)
    return PrfScore.from_counts(lcs, len(candidate), len(reference))


#: Metric keys in report order.
ROUGE_KEYS = ("r1", "r2", "r3", "rl")


@dataclass(frozen=True)
class RougeScores:
    """The four ROUGE variants for one candidate/reference pair."""

    r1: PrfScore
    r2: PrfScore
    r3: PrfScore
    rl: PrfScore

    @classmethod
    def compute(cls, candidate: list[str], reference: list[str]) -> "RougeScores":
        return cls(
            r1=rouge_n(candidate, reference, 1),
            r2=rouge_n(candidate, reference, 2),
            r3=rouge_n(candidate, reference, 3),
            rl=rouge_l(candidate, reference),
        )

    def get(self, key: str) -> PrfScore:
        return getattr(self, key)


@dataclass(frozen=True)
class RougeReport:
    """Per-section scores plus full-note scores for one note pair.

    The per-section map holds only sections present in both notes; the
    full-note entry is always present and is computed on the tag-free
    rendering so tag tokens can never inflate the overlap.
    """

    per_section: Mapping[SectionKind, RougeScores]
    full_note: RougeScores


def score_note(candidate: Note, reference: Note) -> RougeReport:
    """Score a candidate note against a reference note."""
    per_section: dict[SectionKind, RougeScores] = {}
    for kind in SectionKind:
        cand_text = candidate.section(kind)
        ref_text = reference.section(kind)
        if cand_text is None or ref_text is None:
            continue
        per_section[kind] = RougeScores.compute(tokenize(cand_text), tokenize(ref_text))
    full = RougeScores.compute(
        tokenize(render_note(candidate, with_tags=False)),
        tokenize(render_note(reference, with_tags=False)),
    )
    return RougeReport(per_section=MappingProxyType(per_section), full_note=full)
