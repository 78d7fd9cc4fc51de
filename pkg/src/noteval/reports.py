"""Corpus-level evaluation runs and report compilation.

Reports are pure functions of their inputs: every number in the markdown
document can be recomputed from the rating CSVs and ROUGE tables written
alongside it, and recompiling from saved inputs is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .agreement import (
    AgreementError,
    RatingMatrix,
    Verdict,
    cohen_kappa,
    consensus,
    fleiss_kappa,
    percent_agreement,
    read_rating_csv,
    write_rating_csv,
)
from .corpus import CorpusLoad, EncounterRecord, model_from_note_id
from .judge import ChatClient, Criterion, JudgeConfig, judge_corpus
from .notes import Provenance, SectionKind
from .rouge import ROUGE_KEYS, PrfScore, RougeScores, score_note

FULL_NOTE = "Full Note"

#: Criterion column order in all report tables.
CRITERION_ORDER = tuple(c.value for c in Criterion)


class MissingReference(ValueError):
    def __init__(self, record_ids: Sequence[str]):
        self.record_ids = list(record_ids)
        super().__init__(f"records without reference notes: {', '.join(self.record_ids)}")


class MissingInput(ValueError):
    """A report section's input is absent; the message names it."""


@dataclass(frozen=True)
class RougeTableRow:
    model: str
    section: str
    count: int
    scores: Mapping[str, PrfScore]


@dataclass(frozen=True)
class RougeTable:
    """Mean ROUGE scores for one model, one row per section plus full note."""

    rows: tuple[RougeTableRow, ...]

    def csv_rows(self) -> list[list[str]]:
        out = [["model", "section", "count"]]
        for key in ROUGE_KEYS:
            out[0] += [f"{key}_precision", f"{key}_recall", f"{key}_f1"]
        for row in self.rows:
            cells = [row.model, row.section, str(row.count)]
            for key in ROUGE_KEYS:
                score = row.scores[key]
                cells += [repr(score.precision), repr(score.recall), repr(score.f1)]
            out.append(cells)
        return out


def _mean_scores(reports: Sequence[RougeScores]) -> dict[str, PrfScore]:
    means = {}
    for key in ROUGE_KEYS:
        scores = [r.get(key) for r in reports]
        n = len(scores)
        means[key] = PrfScore(
            precision=sum(s.precision for s in scores) / n,
            recall=sum(s.recall for s in scores) / n,
            f1=sum(s.f1 for s in scores) / n,
        )
    return means


def run_rouge_eval(records: Sequence[EncounterRecord], which: Provenance) -> RougeTable:
    """Score every ``which``-model note against its reference and average.

    Per-section rows average over the records where both sides carry the
    section; the full-note row covers every scored record.
    """
    if which not in (Provenance.GENMOD, Provenance.SPECMOD):
        raise ValueError("which must be GENMOD or SPECMOD")
    field_name = "genmod_note" if which is Provenance.GENMOD else "specmod_note"
    scored = [r for r in records if getattr(r, field_name) is not None]
    missing = [r.record_id for r in scored if r.reference_note is None]
    if missing:
        raise MissingReference(missing)

    per_section: dict[SectionKind, list[RougeScores]] = {kind: [] for kind in SectionKind}
    full: list[RougeScores] = []
    for record in scored:
        candidate = next(
            note for note in record.hypothesis_notes() if note.provenance is which
        )
        report = score_note(candidate, record.reference())
        full.append(report.full_note)
        for kind, scores in report.per_section.items():
            per_section[kind].append(scores)

    rows = []
    for kind in SectionKind:
        scores = per_section[kind]
        if scores:
            rows.append(
                RougeTableRow(
                    model=which.value, section=kind.label, count=len(scores),
                    scores=_mean_scores(scores),
                )
            )
    rows.append(
        RougeTableRow(
            model=which.value, section=FULL_NOTE, count=len(full), scores=_mean_scores(full)
        )
    )
    return RougeTable(rows=tuple(rows))


def run_judge_eval(
    corpus: CorpusLoad,
    cfg: JudgeConfig,
    client: ChatClient | None = None,
    human_csv_paths: Iterable[str | Path] = (),
) -> dict[str, RatingMatrix]:
    """Judge every hypothesis note on all criteria; merge human CSVs if given.

    Judge failures surface as missing cells, never as aborted runs.
    """
    notes = corpus.all_hypothesis_notes()
    run = judge_corpus(notes, list(Criterion), cfg, client=client)
    matrices = {criterion.value: matrix for criterion, matrix in run.matrices.items()}
    for path in human_csv_paths:
        for criterion_value, human_matrix in read_rating_csv(path).items():
            if criterion_value in matrices:
                matrices[criterion_value] = matrices[criterion_value].merged(human_matrix)
            else:
                matrices[criterion_value] = human_matrix
    return matrices


@dataclass(frozen=True)
class RaterGroups:
    """Rater-to-group assignments; raters not listed are judge columns."""

    consensus_group: str
    raters: Mapping[str, tuple[str, ...]]

    @classmethod
    def from_file(cls, path: str | Path) -> "RaterGroups":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        raters = {
            rater: tuple(groups) for rater, groups in data.get("raters", {}).items()
        }
        return cls(consensus_group=data.get("consensus_group", "human"), raters=raters)

    def group_names(self) -> list[str]:
        names: list[str] = []
        for groups in self.raters.values():
            for name in groups:
                if name not in names:
                    names.append(name)
        return names

    def members(self, group: str) -> list[str]:
        return [rater for rater, groups in self.raters.items() if group in groups]

    def judge_raters(self, all_raters: Iterable[str]) -> list[str]:
        return [rater for rater in all_raters if rater not in self.raters]


@dataclass(frozen=True)
class RunManifest:
    """Provenance for one run: what was evaluated, with which settings."""

    run_id: str
    created_utc: str
    corpus_digest: str
    config: Mapping[str, object] = field(default_factory=dict)

    @classmethod
    def create(cls, run_id: str, corpus_digest: str, config: Mapping[str, object]) -> "RunManifest":
        return cls(
            run_id=run_id,
            created_utc=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            corpus_digest=corpus_digest,
            config=dict(config),
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "run_id": self.run_id,
                "created_utc": self.created_utc,
                "corpus_digest": self.corpus_digest,
                "config": self.config,
            },
            indent=2,
            sort_keys=True,
        )


def _criteria_order(matrices: Mapping[str, RatingMatrix]) -> list[str]:
    ordered = [c for c in CRITERION_ORDER if c in matrices]
    ordered += sorted(c for c in matrices if c not in CRITERION_ORDER)
    return ordered


def _models_present(matrices: Mapping[str, RatingMatrix]) -> list[str]:
    found = {
        model_from_note_id(item) or "OTHER"
        for matrix in matrices.values()
        for item in matrix.items
    }
    return [m for m in ("GENMOD", "SPECMOD", "OTHER") if m in found]


def _pooled_rate(matrix: RatingMatrix, raters: Sequence[str], model: str) -> float | None:
    """Fraction of consistent verdicts pooled over the given raters and model."""
    votes = [
        matrix.cells[(item, rater)]
        for item in matrix.items
        if (model_from_note_id(item) or "OTHER") == model
        for rater in raters
        if (item, rater) in matrix.cells
    ]
    if not votes:
        return None
    return sum(1 for v in votes if v is Verdict.CONSISTENT) / len(votes)


def _consensus_rate(matrix: RatingMatrix, members: Sequence[str], model: str) -> float | None:
    present = [r for r in members if r in matrix.raters]
    if not present:
        return None
    sub = matrix.restricted(present)
    keep = [
        item
        for item in sub.items
        if (model_from_note_id(item) or "OTHER") == model
        and any((item, rater) in sub.cells for rater in sub.raters)
    ]
    if not keep:
        return None
    majority = consensus(
        RatingMatrix(
            sub.criterion,
            tuple(keep),
            sub.raters,
            {k: v for k, v in sub.cells.items() if k[0] in set(keep)},
        )
    )
    votes = list(majority.values())
    return sum(1 for v in votes if v is Verdict.CONSISTENT) / len(votes)


def _fmt_pct(value: float | None) -> str:
    return "-" if value is None else f"{value * 100:.2f}%"


def _fmt_kappa(value: float | None) -> str:
    return "undefined" if value is None else f"{value:.2f}"


def _md_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(" --- " for _ in header) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return "\n".join(lines)


def compile_report(
    matrices: Mapping[str, RatingMatrix],
    rater_groups: RaterGroups,
    rouge_tables: Sequence[RougeTable] = (),
    external_scores: Mapping[str, float] | None = None,
    run_id: str = "run",
) -> str:
    """Assemble the markdown report.

    Sections: pooled consistency rates by rater group, model deltas, Fleiss
    kappa and mean pairwise agreement per group, Cohen kappa of every judge
    column against the human consensus, then optional ROUGE and external
    score tables.
    """
    if not matrices:
        raise MissingInput("rating matrices")
    if rater_groups is None:
        raise MissingInput("rater groups")

    criteria = _criteria_order(matrices)
    models = _models_present(matrices)
    all_raters: list[str] = []
    for value in criteria:
        for rater in matrices[value].raters:
            if rater not in all_raters:
                all_raters.append(rater)
    judge_raters = rater_groups.judge_raters(all_raters)
    consensus_members = rater_groups.members(rater_groups.consensus_group)

    criterion_labels = {c.value: c.label for c in Criterion}
    header = ["Rater", "Model"] + [criterion_labels.get(c, c) for c in criteria]

    def rate_row(label: str, raters: Sequence[str], model: str, use_consensus: bool) -> list[str]:
        cells = [label, model]
        for value in criteria:
            matrix = matrices[value]
            rate = (
                _consensus_rate(matrix, raters, model)
                if use_consensus
                else _pooled_rate(matrix, raters, model)
            )
            cells.append(_fmt_pct(rate))
        return cells

    rate_sources: list[tuple[str, Sequence[str], bool]] = [
        (group, rater_groups.members(group), False) for group in rater_groups.group_names()
    ]
    if consensus_members:
        rate_sources.append(
            (f"consensus ({rater_groups.consensus_group})", consensus_members, True)
        )
    rate_sources += [(rater, [rater], False) for rater in judge_raters]

    rate_rows = [
        rate_row(label, raters, model, use_consensus)
        for label, raters, use_consensus in rate_sources
        for model in models
    ]

    delta_rows = []
    if "GENMOD" in models and "SPECMOD" in models:
        for label, raters, use_consensus in rate_sources:
            cells = [label]
            for value in criteria:
                matrix = matrices[value]
                fn = _consensus_rate if use_consensus else _pooled_rate
                a = fn(matrix, raters, "GENMOD")
                b = fn(matrix, raters, "SPECMOD")
                cells.append("-" if a is None or b is None else f"{(a - b) * 100:+.2f}")
            delta_rows.append(cells)

    kappa_rows = []
    agreement_rows = []
    for group in rater_groups.group_names():
        members = rater_groups.members(group)
        if len(members) < 2:
            continue
        fk_cells = [group]
        pa_cells = [group]
        for value in criteria:
            matrix = matrices[value]
            present = [r for r in members if r in matrix.raters]
            if len(present) < 2:
                fk_cells.append("-")
                pa_cells.append("-")
                continue
            sub = matrix.restricted(present)
            try:
                fk_cells.append(_fmt_kappa(fleiss_kappa(sub)))
            except AgreementError:
                fk_cells.append("-")
            try:
                pa_cells.append(_fmt_pct(percent_agreement(sub)))
            except AgreementError:
                pa_cells.append("-")
        kappa_rows.append(fk_cells)
        agreement_rows.append(pa_cells)

    judge_kappa_rows = []
    for rater in judge_raters:
        cells = [rater]
        for value in criteria:
            matrix = matrices[value]
            present = [r for r in consensus_members if r in matrix.raters]
            if rater not in matrix.raters or not present:
                cells.append("-")
                continue
            majority = consensus(matrix.restricted(present))
            consensus_column = [majority.get(item) for item in matrix.items]
            try:
                cells.append(_fmt_kappa(cohen_kappa(matrix.column(rater), consensus_column)))
            except AgreementError:
                cells.append("-")
        judge_kappa_rows.append(cells)

    parts = [f"# Note consistency evaluation report\n\nRun: `{run_id}`"]
    parts.append("## Consistency rates (% of verdicts marked consistent)\n\n" + _md_table(header, rate_rows))
    if delta_rows:
        parts.append(
            "## GENMOD minus SPECMOD consistency (percentage points)\n\n"
            + _md_table(["Rater"] + [criterion_labels.get(c, c) for c in criteria], delta_rows)
        )
    if kappa_rows:
        parts.append(
            "## Fleiss kappa by rater group\n\n"
            + _md_table(["Group"] + [criterion_labels.get(c, c) for c in criteria], kappa_rows)
        )
        parts.append(
            "## Mean pairwise percent agreement by rater group\n\n"
            + _md_table(["Group"] + [criterion_labels.get(c, c) for c in criteria], agreement_rows)
        )
    if judge_kappa_rows:
        parts.append(
            "## Cohen kappa: judge vs human consensus\n\n"
            + _md_table(["Judge"] + [criterion_labels.get(c, c) for c in criteria], judge_kappa_rows)
        )
    if rouge_tables:
        rouge_rows = [
            [row.model, row.section] + [f"{row.scores[key].f1 * 100:.2f}" for key in ROUGE_KEYS]
            for table in rouge_tables
            for row in table.rows
        ]
        parts.append(
            "## ROUGE F1 against reference notes (x100)\n\n"
            + _md_table(["Model", "Section", "R-1", "R-2", "R-3", "R-L"], rouge_rows)
        )
    if external_scores is not None:
        by_model: dict[str, list[float]] = {}
        for note_id, score in external_scores.items():
            by_model.setdefault(model_from_note_id(note_id) or "OTHER", []).append(score)
        score_rows = [
            [model, f"{sum(values) / len(values):.4f}", str(len(values))]
            for model, values in sorted(by_model.items())
        ]
        parts.append(
            "## External per-note scores\n\n"
            + _md_table(["Model", "Mean score", "Notes"], score_rows)
        )
    return "\n\n".join(parts) + "\n"


def write_report_bundle(
    out_dir: str | Path,
    report_markdown: str,
    matrices: Mapping[str, RatingMatrix],
    rouge_tables: Sequence[RougeTable] = (),
    manifest: RunManifest | None = None,
) -> list[Path]:
    """Write the report plus every input needed to recompute it."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    report_path = out / "report.md"
    report_path.write_text(report_markdown, encoding="utf-8")
    written.append(report_path)
    ratings_path = out / "ratings.csv"
    write_rating_csv([matrices[c] for c in _criteria_order(matrices)], ratings_path)
    written.append(ratings_path)
    if rouge_tables:
        rouge_path = out / "rouge.csv"
        rows: list[list[str]] = []
        for i, table in enumerate(rouge_tables):
            table_rows = table.csv_rows()
            rows.extend(table_rows if i == 0 else table_rows[1:])
        rouge_path.write_text(
            "\n".join(",".join(row) for row in rows) + "\n", encoding="utf-8"
        )
        written.append(rouge_path)
    if manifest is not None:
        manifest_path = out / "manifest.json"
        manifest_path.write_text(manifest.to_json() + "\n", encoding="utf-8")
        written.append(manifest_path)
    return written
