"""Verdict data model, rating matrices, and inter-rater agreement statistics.

Verdicts are binary (consistent / inconsistent).  A rating matrix holds the
verdicts of several raters over a set of notes for one criterion; cells may
be missing.  Missing-data policy: Cohen's kappa and percent agreement use the
pairwise-complete items for each rater pair, Fleiss' kappa uses the items
rated by every rater.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence


class Verdict(str, Enum):
    """Binary consistency judgment; the value is the CSV/wire token."""

    CONSISTENT = "TRUE"
    INCONSISTENT = "FALSE"

    @classmethod
    def from_bool(cls, consistent: bool) -> "Verdict":
        return cls.CONSISTENT if consistent else cls.INCONSISTENT


class AgreementError(ValueError):
    """Base class for agreement-statistics errors."""


class InsufficientRaters(AgreementError):
    pass


class InsufficientData(AgreementError):
    pass


class EmptyOverlap(AgreementError):
    pass


@dataclass
class RatingMatrix:
    """items x raters table of verdicts for one criterion; cells may be missing."""

    criterion: str
    items: tuple[str, ...]
    raters: tuple[str, ...]
    cells: dict[tuple[str, str], Verdict] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.items or not self.raters:
            raise InsufficientData("a rating matrix needs at least one item and one rater")
        if len(set(self.items)) != len(self.items):
            raise ValueError("duplicate item ids")
        if len(set(self.raters)) != len(self.raters):
            raise ValueError("duplicate rater ids")
        for item, rater in self.cells:
            if item not in self._item_set or rater not in self._rater_set:
                raise ValueError(f"cell ({item!r}, {rater!r}) outside the matrix")

    @property
    def _item_set(self) -> frozenset[str]:
        return frozenset(self.items)

    @property
    def _rater_set(self) -> frozenset[str]:
        return frozenset(self.raters)

    @classmethod
    def from_records(
        cls, criterion: str, records: Iterable[tuple[str, str, Verdict]]
    ) -> "RatingMatrix":
        """Build a matrix from (item, rater, verdict) rows, first-seen order."""
        items: list[str] = []
        raters: list[str] = []
        seen_items: set[str] = set()
        seen_raters: set[str] = set()
        cells: dict[tuple[str, str], Verdict] = {}
        for item, rater, verdict in records:
            if item not in seen_items:
                seen_items.add(item)
                items.append(item)
            if rater not in seen_raters:
                seen_raters.add(rater)
                raters.append(rater)
            if (item, rater) in cells:
                raise ValueError(f"duplicate rating for ({item!r}, {rater!r})")
            cells[(item, rater)] = verdict
        return cls(criterion=criterion, items=tuple(items), raters=tuple(raters), cells=cells)

    def get(self, item: str, rater: str) -> Verdict | None:
        return self.cells.get((item, rater))

    def column(self, rater: str) -> list[Verdict | None]:
        if rater not in self._rater_set:
            raise KeyError(rater)
        return [self.cells.get((item, rater)) for item in self.items]

    def complete_items(self) -> list[str]:
        """Items rated by every rater."""
        return [
            item
            for item in self.items
            if all((item, rater) in self.cells for rater in self.raters)
        ]

    def missing_count(self) -> int:
        return len(self.items) * len(self.raters) - len(self.cells)

    def restricted(self, raters: Sequence[str]) -> "RatingMatrix":
        """Sub-matrix over a subset of raters (same items, same order)."""
        keep = [r for r in self.raters if r in set(raters)]
        if not keep:
            raise InsufficientData(f"none of {list(raters)!r} rate criterion {self.criterion!r}")
        cells = {
            (item, rater): verdict
            for (item, rater), verdict in self.cells.items()
            if rater in set(keep)
        }
        return RatingMatrix(self.criterion, self.items, tuple(keep), cells)

    def merged(self, other: "RatingMatrix") -> "RatingMatrix":
        """Union of two matrices for the same criterion and item universe."""
        if other.criterion != self.criterion:
            raise ValueError(f"cannot merge criteria {self.criterion!r} and {other.criterion!r}")
        items = list(self.items) + [i for i in other.items if i not in self._item_set]
        raters = list(self.raters) + [r for r in other.raters if r not in self._rater_set]
        cells = dict(self.cells)
        for key, verdict in other.cells.items():
            if key in cells and cells[key] != verdict:
                raise ValueError(f"conflicting verdicts for {key!r}")
            cells[key] = verdict
        return RatingMatrix(self.criterion, tuple(items), tuple(raters), cells)

    def iter_rows(self) -> Iterator[tuple[str, str, str, str]]:
        """CSV rows (note_id, rater_id, criterion, verdict), item-major."""
        for item in self.items:
            for rater in self.raters:
                verdict = self.cells.get((item, rater))
                if verdict is not None:
                    yield (item, rater, self.criterion, verdict.value)


CSV_HEADER = ("note_id", "rater_id", "criterion", "verdict")


def write_rating_csv(matrices: Iterable[RatingMatrix], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        for matrix in matrices:
            writer.writerows(matrix.iter_rows())


def read_rating_csv(path: str | Path) -> dict[str, RatingMatrix]:
    """Read a ratings CSV into one matrix per criterion, first-seen order."""
    path = Path(path)
    per_criterion: dict[str, list[tuple[str, str, Verdict]]] = {}
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            return {}
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{line_no}: expected 4 fields, got {len(row)}")
            note_id, rater_id, criterion, token = (f.strip() for f in row)
            try:
                verdict = Verdict(token)
            except ValueError:
                raise ValueError(f"{path}:{line_no}: verdict must be TRUE or FALSE") from None
            per_criterion.setdefault(criterion, []).append((note_id, rater_id, verdict))
    return {
        criterion: RatingMatrix.from_records(criterion, records)
        for criterion, records in per_criterion.items()
    }


def _paired(
    a: Sequence[Verdict | None], b: Sequence[Verdict | None]
) -> list[tuple[Verdict, Verdict]]:
    if len(a) != len(b):
        raise ValueError("columns must cover the same items")
    return [(x, y) for x, y in zip(a, b) if x is not None and y is not None]


def percent_agreement(matrix: RatingMatrix) -> float:
    """Mean pairwise raw agreement.

    For every unordered rater pair, the agreement rate is the fraction of
    items rated by both on which the verdicts match; the statistic is the
    mean of the per-pair rates.  On a complete matrix this equals the grand
    fraction of matching comparisons over all rater pairs and items.
    """
    if len(matrix.raters) < 2:
        raise InsufficientRaters("percent agreement needs at least 2 raters")
    rates = []
    for i, a in enumerate(matrix.raters):
        col_a = matrix.column(a)
        for b in matrix.raters[i + 1 :]:
            pairs = _paired(col_a, matrix.column(b))
            if pairs:
                rates.append(sum(1 for x, y in pairs if x == y) / len(pairs))
    if not rates:
        raise InsufficientData("no rater pair shares any rated item")
    return sum(rates) / len(rates)


def cohen_kappa(a: Sequence[Verdict | None], b: Sequence[Verdict | None]) -> float:
    """Cohen's kappa between two rater columns.

                Po - Pe
    kappa  =  -----------
                1 - Pe

    Po is the observed match rate and Pe the chance match rate from the two
    raters' marginal distributions, both over the pairwise-complete items.
    Degenerate marginals (Pe = 1) yield 1.0 on perfect agreement, else 0.0,
    so a constant rater scores 0 against any non-identical column.
    """
    pairs = _paired(a, b)
    if not pairs:
        raise EmptyOverlap("no items rated by both raters")
    n = len(pairs)
    observed = sum(1 for x, y in pairs if x == y) / n
    expected = 0.0
    for category in Verdict:
        marginal_a = sum(1 for x, _ in pairs if x == category) / n
        marginal_b = sum(1 for _, y in pairs if y == category) / n
        expected += marginal_a * marginal_b
    if expected >= 1.0:
        return 1.0 if observed == 1.0 else 0.0
    return (observed - expected) / (1.0 - expected)


def pairwise_cohen(matrix: RatingMatrix) -> dict[tuple[str, str], float]:
    """Cohen's kappa for every unordered rater pair with overlapping items."""
    if len(matrix.raters) < 2:
        raise InsufficientRaters("pairwise kappa needs at least 2 raters")
    out: dict[tuple[str, str], float] = {}
    for i, a in enumerate(matrix.raters):
        for b in matrix.raters[i + 1 :]:
            try:
                out[(a, b)] = cohen_kappa(matrix.column(a), matrix.column(b))
            except EmptyOverlap:
                continue
    return out


def fleiss_kappa(matrix: RatingMatrix) -> float | None:
    """Fleiss' kappa over the items rated by every rater.

    With n raters and n_ij ratings of category j on item i:

        P_i  = (sum_j n_ij^2 - n) / (n (n - 1))
        Pbar = mean_i P_i
        Pe   = sum_j p_j^2          (p_j pooled over all ratings)
        kappa = (Pbar - Pe) / (1 - Pe)

    Returns 1.0 when Pbar = Pe = 1 and None (undefined) when Pe = 1 with
    Pbar < 1.  Items with missing cells are excluded.
    """
    n = len(matrix.raters)
    if n < 2:
        raise InsufficientRaters("Fleiss kappa needs at least 2 raters")
    items = matrix.complete_items()
    if not items:
        raise InsufficientData("no item is rated by every rater")
    categories = list(Verdict)
    per_item = []
    pooled = {c: 0 for c in categories}
    for item in items:
        counts = {c: 0 for c in categories}
        for rater in matrix.raters:
            verdict = matrix.cells[(item, rater)]
            counts[verdict] += 1
            pooled[verdict] += 1
        per_item.append((sum(v * v for v in counts.values()) - n) / (n * (n - 1)))
    p_bar = sum(per_item) / len(per_item)
    total = n * len(items)
    p_e = sum((pooled[c] / total) ** 2 for c in categories)
    if p_e >= 1.0:
        return 1.0 if p_bar == 1.0 else None
    return (p_bar - p_e) / (1.0 - p_e)


def consensus(matrix: RatingMatrix) -> dict[str, Verdict]:
    """Strict-majority verdict per item; an exact tie counts as inconsistent.

    The tie rule is conservative: an item that splits the raters is treated
    as flagged.
    """
    out: dict[str, Verdict] = {}
    for item in matrix.items:
        votes = [matrix.cells[(item, r)] for r in matrix.raters if (item, r) in matrix.cells]
        if not votes:
            raise InsufficientData(f"item {item!r} has no ratings")
        consistent = sum(1 for v in votes if v is Verdict.CONSISTENT)
        out[item] = Verdict.from_bool(consistent * 2 > len(votes))
    return out


def consistency_rate(column: Iterable[Verdict | None]) -> float:
    """Fraction of consistent verdicts among the non-missing ones."""
    votes = [v for v in column if v is not None]
    if not votes:
        raise InsufficientData("no verdicts")
    return sum(1 for v in votes if v is Verdict.CONSISTENT) / len(votes)


@dataclass(frozen=True)
class AgreementReport:
    """All agreement statistics for one matrix."""

    criterion: str
    percent_agreement: float
    cohen_kappa: Mapping[tuple[str, str], float]
    fleiss_kappa: float | None
    consensus: Mapping[str, Verdict]
    consistency_rates: Mapping[str, float]
    consensus_consistency_rate: float
    excluded_items: int


def agreement_report(matrix: RatingMatrix) -> AgreementReport:
    """Compute the full statistic set for one criterion matrix."""
    majority = consensus(matrix)
    return AgreementReport(
        criterion=matrix.criterion,
        percent_agreement=percent_agreement(matrix),
        cohen_kappa=pairwise_cohen(matrix),
        fleiss_kappa=fleiss_kappa(matrix),
        consensus=majority,
        consistency_rates={
            rater: consistency_rate(matrix.column(rater)) for rater in matrix.raters
        },
        consensus_consistency_rate=consistency_rate(majority.values()),
        excluded_items=len(matrix.items) - len(matrix.complete_items()),
    )
