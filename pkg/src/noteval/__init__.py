"""noteval: consistency and summarization-quality evaluation for clinical notes."""

from .agreement import (
    RatingMatrix,
    Verdict,
    cohen_kappa,
    consensus,
    consistency_rate,
    fleiss_kappa,
    percent_agreement,
)
from .decoding import GenerationConfig, GenerationMode, banned_next_tokens, beam_search
from .judge import Criterion, JudgeConfig, build_prompt, judge_corpus, judge_note, parse_verdict
from .notes import (
    Note,
    Provenance,
    SectionKind,
    TagViolation,
    parse_note,
    parse_note_lenient,
    render_note,
    validate_tagged_text,
)
from .rouge import PrfScore, RougeReport, rouge_l, rouge_n, score_note, tokenize

__version__ = "0.1.0"

__all__ = [
    "Criterion",
    "GenerationConfig",
    "GenerationMode",
    "JudgeConfig",
    "Note",
    "PrfScore",
    "Provenance",
    "RatingMatrix",
    "RougeReport",
    "SectionKind",
    "TagViolation",
    "Verdict",
    "banned_next_tokens",
    "beam_search",
    "build_prompt",
    "cohen_kappa",
    "consensus",
    "consistency_rate",
    "fleiss_kappa",
    "judge_corpus",
    "judge_note",
    "parse_note",
    "parse_note_lenient",
    "parse_verdict",
    "percent_agreement",
    "render_note",
    "rouge_l",
    "rouge_n",
    "score_note",
    "tokenize",
    "validate_tagged_text",
]
