"""Pure evaluation metrics: line-overlap IoU, hit rate, human-annotation
summaries, and Cohen's kappa.

All set metrics use exact rational arithmetic (:class:`fractions.Fraction`)
so aggregation order can never introduce drift; percentages are plain floats
computed at the last step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import AnnotationImportError, EmptyLabel


@dataclass(frozen=True)
class HitVerdict:
    """The judge's answer for one sample."""

    sample_id: str
    hit: bool
    judge_raw: str = ""  # raw reply text, kept for audit
    parse_failed: bool = False  # reply never produced a clean YES/NO


@dataclass(frozen=True)
class HumanAnnotation:
    """One rater's verdict on one sample."""

    sample_id: str
    rater_id: str
    human_hit: bool  # comment matches the ground-truth issue
    human_valuable: bool  # comment is useful regardless of the match


def iou(label: Iterable[int], predict: Iterable[int]) -> Fraction:
    """Intersection-over-union of two 1-based line sets, as an exact rational.

    Raises :class:`EmptyLabel` when the ground-truth set is empty; an empty
    prediction simply scores 0.
    """
    label_set = set(label)
    predict_set = set(predict)
    if not label_set:
        raise EmptyLabel("ground-truth line set is empty")
    for s in (label_set, predict_set):
        for line in s:
            if not isinstance(line, int) or line < 1:
                raise ValueError(f"line numbers must be integers >= 1, got {line!r}")
    union = label_set | predict_set
    inter = label_set & predict_set
    return Fraction(len(inter), len(union))


def hit_rate(verdicts: Sequence[HitVerdict]) -> float:
    """Percentage of hits over all verdicts. Empty input is an error."""
    if not verdicts:
        raise ValueError("hit_rate needs at least one verdict")
    hits = sum(1 for v in verdicts if v.hit)
    return 100.0 * hits / len(verdicts)


def human_metrics(annotations: Sequence[HumanAnnotation]) -> tuple[float, float]:
    """(human_hit %, human_valuable %) over distinct (rater, sample) rows.

    Duplicate (rater, sample) pairs mean the import was bad, not that a rater
    voted twice, so they raise :class:`AnnotationImportError`.
    """
    if not annotations:
        raise AnnotationImportError("no annotation rows")
    seen: set[tuple[str, str]] = set()
    for a in annotations:
        key = (a.rater_id, a.sample_id)
        if key in seen:
            raise AnnotationImportError(f"duplicate annotation for rater={a.rater_id} sample={a.sample_id}")
        seen.add(key)
    total = len(annotations)
    hit_pct = 100.0 * sum(1 for a in annotations if a.human_hit) / total
    valuable_pct = 100.0 * sum(1 for a in annotations if a.human_valuable) / total
    return hit_pct, valuable_pct


def cohens_kappa(rater_a: Sequence, rater_b: Sequence) -> float:
    """Chance-corrected agreement between two aligned label sequences.

    kappa = (p_o - p_e) / (1 - p_e), with expected agreement from the product
    of the raters' marginal label distributions. When both raters are constant
    (p_e = 1) the statistic is undefined; identical constant vectors count as
    perfect agreement (1.0), differing ones raise ``ValueError``.
    """
    if len(rater_a) != len(rater_b):
        raise ValueError("label sequences must be aligned (same length)")
    n = len(rater_a)
    if n == 0:
        raise ValueError("kappa needs at least one pair of labels")

    labels = sorted(set(rater_a) | set(rater_b), key=repr)
    observed = Fraction(sum(1 for x, y in zip(rater_a, rater_b) if x == y), n)
    expected = Fraction(0)
    for lab in labels:
        pa = Fraction(sum(1 for x in rater_a if x == lab), n)
        pb = Fraction(sum(1 for y in rater_b if y == lab), n)
        expected += pa * pb
    if expected == 1:
        if observed == 1:
            return 1.0
        raise ValueError("expected agreement is 1 but raters disagree; kappa undefined")
    return float((observed - expected) / (1 - expected))


def kappa_from_contingency(table: Sequence[Sequence[int]]) -> float:
    """Kappa from a square contingency table (rows: rater A, cols: rater B)."""
    size = len(table)
    if size == 0 or any(len(row) != size for row in table):
        raise ValueError("contingency table must be square")
    a_labels: list[int] = []
    b_labels: list[int] = []
    for i, row in enumerate(table):
        for j, count in enumerate(row):
            if count < 0:
                raise ValueError("counts must be non-negative")
            a_labels.extend([i] * count)
            b_labels.extend([j] * count)
    return cohens_kappa(a_labels, b_labels)


def load_annotations(path: str) -> list[HumanAnnotation]:
    """Read a delimited annotation table.

    Expected header: sample_id, rater_id, human_hit, human_valuable. Flags
    accept 0/1, true/false, yes/no (any case). Duplicate (rater, sample)
    rows raise :class:`AnnotationImportError`.
    """
    truthy = {"1", "true", "yes", "y"}
    falsy = {"0", "false", "no", "n"}

    def parse_flag(raw: str, line_no: int) -> bool:
        token = raw.strip().lower()
        if token in truthy:
            return True
        if token in falsy:
            return False
        raise AnnotationImportError(f"bad flag value {raw!r}", line_numbers=[line_no])

    rows: list[HumanAnnotation] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"sample_id", "rater_id", "human_hit", "human_valuable"}
        if reader.fieldnames is None or not required.issubset(set(reader.fieldnames)):
            raise AnnotationImportError(
                f"annotation file must have columns {sorted(required)}, got {reader.fieldnames}"
            )
        for line_no, row in enumerate(reader, start=2):
            rows.append(
                HumanAnnotation(
                    sample_id=row["sample_id"].strip(),
                    rater_id=row["rater_id"].strip(),
                    human_hit=parse_flag(row["human_hit"], line_no),
                    human_valuable=parse_flag(row["human_valuable"], line_no),
                )
            )
    seen: set[tuple[str, str]] = set()
    for a in rows:
        key = (a.rater_id, a.sample_id)
        if key in seen:
            raise AnnotationImportError(f"duplicate annotation for rater={a.rater_id} sample={a.sample_id}")
        seen.add(key)
    return rows


def rater_overlap_kappa(annotations: Sequence[HumanAnnotation]) -> tuple[float, str, str, int] | None:
    """Agreement on human_hit for the rater pair sharing the most samples.

    Returns (kappa, rater_a, rater_b, overlap size) or None when no two
    raters share a sample or the statistic is undefined for every pair.
    Pairs are scanned largest-overlap first with lexicographic tie-breaking,
    so the result is deterministic.
    """
    by_rater: dict[str, dict[str, bool]] = {}
    for a in annotations:
        by_rater.setdefault(a.rater_id, {})[a.sample_id] = a.human_hit
    raters = sorted(by_rater)
    candidates: list[tuple[int, str, str]] = []
    for i, ra in enumerate(raters):
        for rb in raters[i + 1 :]:
            shared = sorted(set(by_rater[ra]) & set(by_rater[rb]))
            if shared:
                candidates.append((len(shared), ra, rb))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    for _, ra, rb in candidates:
        shared = sorted(set(by_rater[ra]) & set(by_rater[rb]))
        va = [by_rater[ra][s] for s in shared]
        vb = [by_rater[rb][s] for s in shared]
        try:
            return cohens_kappa(va, vb), ra, rb, len(shared)
        except ValueError:
            continue
    return None
