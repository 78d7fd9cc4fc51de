from __future__ import annotations

import pytest

from noteval.corpus import synthetic_corpus_path
from noteval.notes import Note, Provenance


def make_note(
    note_id: str = "n1",
    provenance: Provenance = Provenance.OTHER,
    cc: str | None = None,
    hpi: str | None = None,
    ap: str | None = None,
) -> Note:
    return Note.from_sections(note_id, provenance, cc=cc, hpi=hpi, ap=ap)


@pytest.fixture
def shipped_corpus_path():
    path = synthetic_corpus_path()
    assert path.exists()
    return path
