"""Encounter corpus ingestion (JSONL) and external score attachment.

One JSONL line per encounter: an id, up to two hypothesis notes (single-pass
and per-section), an optional reference note, and optional metadata.  All
note fields hold tagged text and are validated strictly on load.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .notes import Note, Provenance, parse_note, validate_tagged_text

_HYPOTHESIS_FIELDS = (("genmod_note", Provenance.GENMOD), ("specmod_note", Provenance.SPECMOD))


class FormatError(ValueError):
    """The corpus file itself is unusable (as opposed to one bad line)."""


def note_id_for(record_id: str, provenance: Provenance) -> str:
    return f"{record_id}::{provenance.value.lower()}"


def model_from_note_id(note_id: str) -> str | None:
    """Recover the model label from a hypothesis note id, if present."""
    _, _, suffix = note_id.rpartition("::")
    upper = suffix.upper()
    if upper in (Provenance.GENMOD.value, Provenance.SPECMOD.value):
        return upper
    return None


@dataclass(frozen=True)
class EncounterRecord:
    """One encounter's notes; at least one hypothesis note is present."""

    record_id: str
    genmod_note: str | None = None
    specmod_note: str | None = None
    reference_note: str | None = None
    specialty: str | None = None
    transcript: str | None = None

    def __post_init__(self) -> None:
        if self.genmod_note is None and self.specmod_note is None:
            raise ValueError(f"record {self.record_id!r} has no hypothesis note")

    def hypothesis_notes(self) -> list[Note]:
        """Parsed hypothesis notes with provenance-qualified ids."""
        notes = []
        for field_name, provenance in _HYPOTHESIS_FIELDS:
            tagged = getattr(self, field_name)
            if tagged is not None:
                notes.append(parse_note(tagged, note_id_for(self.record_id, provenance), provenance))
        return notes

    def reference(self) -> Note | None:
        if self.reference_note is None:
            return None
        return parse_note(
            self.reference_note, note_id_for(self.record_id, Provenance.REFERENCE), Provenance.REFERENCE
        )


@dataclass(frozen=True)
class CorpusIssue:
    line_no: int
    record_id: str | None
    message: str

    def __str__(self) -> str:
        owner = self.record_id or "?"
        return f"line {self.line_no} ({owner}): {self.message}"


@dataclass(frozen=True)
class CorpusLoad:
    """Loaded records plus per-line problems (offending lines are skipped)."""

    records: tuple[EncounterRecord, ...]
    issues: tuple[CorpusIssue, ...]
    digest: str

    def all_hypothesis_notes(self) -> list[Note]:
        return [note for record in self.records for note in record.hypothesis_notes()]


def load_corpus(path: str | Path) -> CorpusLoad:
    """Load and strictly validate a JSONL corpus.

    A line with malformed JSON, invalid tags, or a missing hypothesis is
    skipped and reported.  A duplicate record id aborts the load with
    :class:`FormatError` since downstream joins would be ambiguous.
    """
    path = Path(path)
    raw = path.read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    records: list[EncounterRecord] = []
    issues: list[CorpusIssue] = []
    seen_ids: dict[str, int] = {}
    for line_no, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            issues.append(CorpusIssue(line_no, None, f"invalid JSON: {exc}"))
            continue
        record_id = data.get("id")
        if not isinstance(record_id, str) or not record_id:
            issues.append(CorpusIssue(line_no, None, "missing or non-string 'id'"))
            continue
        if record_id in seen_ids:
            raise FormatError(
                f"duplicate record id {record_id!r} on lines {seen_ids[record_id]} and {line_no}"
            )
        seen_ids[record_id] = line_no

        note_problems = []
        for field_name in ("genmod_note", "specmod_note", "reference_note"):
            tagged = data.get(field_name)
            if tagged is None:
                continue
            if not isinstance(tagged, str):
                note_problems.append(f"{field_name} is not text")
                continue
            violations = validate_tagged_text(tagged)
            if violations:
                listing = "; ".join(str(v) for v in violations)
                note_problems.append(f"{field_name}: {listing}")
        if note_problems:
            issues.append(CorpusIssue(line_no, record_id, "; ".join(note_problems)))
            continue
        try:
            records.append(
                EncounterRecord(
                    record_id=record_id,
                    genmod_note=data.get("genmod_note"),
                    specmod_note=data.get("specmod_note"),
                    reference_note=data.get("reference_note"),
                    specialty=data.get("specialty"),
                    transcript=data.get("transcript"),
                )
            )
        except ValueError as exc:
            issues.append(CorpusIssue(line_no, record_id, str(exc)))
    return CorpusLoad(records=tuple(records), issues=tuple(issues), digest=digest)


@dataclass(frozen=True)
class ScoreAttachment:
    scores: dict[str, float]
    warnings: tuple[str, ...]


def attach_external_scores(records: tuple[EncounterRecord, ...], scores_path: str | Path) -> ScoreAttachment:
    """Join externally computed per-note scores (CSV: note_id,score).

    Scores produced by tooling outside this package (for example a trained
    factual-consistency scorer) are matched to hypothesis note ids; unmatched
    ids are reported as warnings, never errors.
    """
    path = Path(scores_path)
    known = {
        note_id_for(record.record_id, provenance)
        for record in records
        for field_name, provenance in _HYPOTHESIS_FIELDS
        if getattr(record, field_name) is not None
    }
    scores: dict[str, float] = {}
    warnings: list[str] = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        rows = [row for row in reader if row]
    if not rows:
        return ScoreAttachment(scores={}, warnings=("score file is empty",))
    header = tuple(f.strip() for f in rows[0])
    if header != ("note_id", "score"):
        raise FormatError(f"{path}: expected header note_id,score, got {','.join(header)}")
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise FormatError(f"{path}:{line_no}: expected 2 fields")
        note_id, value = row[0].strip(), row[1].strip()
        try:
            score = float(value)
        except ValueError:
            raise FormatError(f"{path}:{line_no}: score {value!r} is not a number") from None
        if note_id not in known:
            warnings.append(f"unmatched note id {note_id!r}")
            continue
        scores[note_id] = score
    if not scores and not warnings:
        warnings.append("score file has a header but no rows")
    return ScoreAttachment(scores=scores, warnings=tuple(warnings))


def synthetic_corpus_path() -> Path:
    """Path of the packaged 10-encounter synthetic corpus."""
    return Path(str(resources.files("noteval") / "data" / "synthetic_corpus.jsonl"))


def default_rater_groups_path() -> Path:
    """Path of the packaged example rater-group metadata."""
    return Path(str(resources.files("noteval") / "data" / "rater_groups.json"))
