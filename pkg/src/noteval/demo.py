"""Toy generation demo: how the no-repeat ban interacts with note layout.

A scripted source prefers a fixed token stream in which one 5-token phrase
occurs in both the HPI and the A&P section.  Decoding the whole note in one
pass bans the second occurrence (the ban window spans sections); decoding
each section independently keeps both.  Relaxing the ban size past the
phrase length restores the phrase in single-pass output too.
"""

from __future__ import annotations

from dataclasses import dataclass

from .decoding import (
    GenerationConfig,
    GenerationMode,
    NoteGeneration,
    PreferredPathLm,
    generate_genmod_note,
    generate_specmod_note,
)
from .notes import Note, SectionKind

#: The phrase scripted to appear in both HPI and A&P.
SHARED_PHRASE: tuple[str, ...] = ("fracture", "of", "the", "left", "tibia")

_CC_BODY = ("left", "tibia", "pain")
_HPI_BODY = ("patient", "reports", *SHARED_PHRASE, "since", "march")
_AP_BODY = ("imaging", "confirms", *SHARED_PHRASE, "and", "follow", "up", "in", "clinic")

_SECTION_BODIES = {
    SectionKind.CHIEF_COMPLAINT: _CC_BODY,
    SectionKind.HISTORY_OF_PRESENT_ILLNESS: _HPI_BODY,
    SectionKind.ASSESSMENT_AND_PLAN: _AP_BODY,
}


def single_pass_source() -> PreferredPathLm:
    """Source whose preferred path is the full tagged three-section note."""
    script: list[str] = []
    for kind, body in _SECTION_BODIES.items():
        script.append(kind.open_tag)
        script.extend(body)
        script.append(kind.close_tag)
    return PreferredPathLm(script=tuple(script))


def per_section_sources() -> dict[SectionKind, PreferredPathLm]:
    """One source per section, each preferring just that section's body."""
    return {kind: PreferredPathLm(script=tuple(body)) for kind, body in _SECTION_BODIES.items()}


def sections_containing_phrase(note: Note) -> list[SectionKind]:
    phrase = " ".join(SHARED_PHRASE)
    return [kind for kind, text in note.sections if phrase in text]


@dataclass(frozen=True)
class DemoResult:
    single_pass: NoteGeneration
    per_section: NoteGeneration
    phrase_sections_single: tuple[SectionKind, ...]
    phrase_sections_per_section: tuple[SectionKind, ...]


def run_demo(nrns: int = 5, beam_size: int = 4, max_len: int = 64) -> DemoResult:
    """Generate both variants at the given ban size and locate the phrase."""
    single_cfg = GenerationConfig(
        beam_size=beam_size, nrns=nrns, max_len=max_len, mode=GenerationMode.SINGLE_PASS
    )
    per_cfg = GenerationConfig(
        beam_size=beam_size, nrns=nrns, max_len=max_len, mode=GenerationMode.PER_SECTION
    )
    single = generate_genmod_note(single_pass_source(), (), single_cfg, note_id="demo-single")
    per = generate_specmod_note(per_section_sources(), (), per_cfg, note_id="demo-per-section")
    return DemoResult(
        single_pass=single,
        per_section=per,
        phrase_sections_single=tuple(sections_containing_phrase(single.note)),
        phrase_sections_per_section=tuple(sections_containing_phrase(per.note)),
    )
