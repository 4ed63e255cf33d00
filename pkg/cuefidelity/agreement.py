"""
Dual-annotation consensus workflow: annotation files, disagreement listing,
consensus merging and Krippendorff's alpha for nominal data.
"""

import logging
from collections import Counter
from typing import Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .exceptions import (
    FormatError,
    InvalidInput,
    NoPairableValues,
    UnresolvedDisagreements,
)
from .labels import LABEL_ORDER, CueLabel

logger = logging.getLogger(__name__)

CONSENSUS_ANNOTATOR = "consensus"
DEFAULT_THRESHOLD = 0.70


class Annotation(BaseModel):
    model_config = ConfigDict(frozen=True)

    utterance_index: int = Field(ge=0)
    char_start: int = Field(ge=0)
    char_end: int
    label: CueLabel

    @model_validator(mode="after")
    def check_span(self) -> "Annotation":
        if self.char_end <= self.char_start:
            raise ValueError("char_start must be smaller than char_end")
        return self

    @property
    def span(self) -> Tuple[int, int]:
        return (self.char_start, self.char_end)

    def overlaps(self, other: "Annotation") -> bool:
        return self.utterance_index == other.utterance_index and max(
            self.char_start, other.char_start
        ) < min(self.char_end, other.char_end)


class AnnotationSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    doc_id: str = Field(min_length=1)
    annotator_id: str = Field(min_length=1)
    annotations: Tuple[Annotation, ...] = ()


class Disagreement(BaseModel):
    """
    Two overlapping spans with different labels, or a span only one annotator marked.
    """

    model_config = ConfigDict(frozen=True)

    disagreement_id: str
    doc_id: str
    utterance_index: int
    span_a: Optional[Tuple[int, int]] = None
    span_b: Optional[Tuple[int, int]] = None
    label_a: Optional[CueLabel] = None
    label_b: Optional[CueLabel] = None
    resolution: Optional[CueLabel] = None

    @property
    def one_sided(self) -> bool:
        return self.span_a is None or self.span_b is None

    @property
    def merged_span(self) -> Tuple[int, int]:
        spans = [span for span in (self.span_a, self.span_b) if span is not None]
        return (min(span[0] for span in spans), max(span[1] for span in spans))


class AgreementResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: Optional[float]
    n_pairable_values: int
    categories: Tuple[str, ...]
    coincidence_matrix: Tuple[Tuple[float, ...], ...]
    observed_disagreement: float
    expected_disagreement: float
    threshold: float
    passes_gate: bool
    degenerate: bool = False


def passes_gate(alpha: Optional[float], threshold: float = DEFAULT_THRESHOLD) -> bool:
    """
    Alpha must exceed the threshold. An undefined alpha (no expected disagreement)
    passes.
    """

    return alpha is None or alpha > threshold


def krippendorff_alpha(
    units: Sequence[Sequence[Optional[Hashable]]],
    categories: Sequence[Hashable] = LABEL_ORDER,
    threshold: float = DEFAULT_THRESHOLD,
) -> AgreementResult:
    """
    Krippendorff's alpha for nominal data, from the coincidence matrix of pairable
    values.

    Each unit lists the values assigned to one item, one per annotator; None marks a
    missing value. Units with fewer than two values are not pairable and are skipped.
    """

    index = {category: position for position, category in enumerate(categories)}
    if len(index) != len(categories):
        raise InvalidInput("Categories must be distinct")

    coincidences = np.zeros((len(categories), len(categories)), dtype=np.float64)
    n_pairable = 0

    for unit in units:
        values = [value for value in unit if value is not None]
        if len(values) < 2:
            continue

        unknown = [value for value in values if value not in index]
        if unknown:
            raise InvalidInput(f"Value {unknown[0]!r} is not one of the categories")

        counts = np.zeros(len(categories), dtype=np.float64)
        for value in values:
            counts[index[value]] += 1

        # Ordered pairs of distinct values within the unit, weighted by 1 / (m_u - 1).
        pairs = np.outer(counts, counts) - np.diag(counts)
        coincidences += pairs / (len(values) - 1)
        n_pairable += len(values)

    if n_pairable == 0:
        raise NoPairableValues("No unit has two or more assigned values")

    n = float(n_pairable)
    marginals = coincidences.sum(axis=1)
    observed = (coincidences.sum() - np.trace(coincidences)) / n
    expected = (n * n - float(np.sum(marginals * marginals))) / (n * (n - 1))

    degenerate = expected == 0
    if degenerate:
        alpha = None
        logger.warning("All pairable values are identical; alpha is undefined")
    else:
        alpha = float(1.0 - observed / expected)

    return AgreementResult(
        alpha=alpha,
        n_pairable_values=n_pairable,
        categories=tuple(str(getattr(c, "value", c)) for c in categories),
        coincidence_matrix=tuple(tuple(float(x) for x in row) for row in coincidences),
        observed_disagreement=float(observed),
        expected_disagreement=float(expected),
        threshold=threshold,
        passes_gate=passes_gate(alpha, threshold),
        degenerate=degenerate,
    )


def utterance_labels(annotation_set: AnnotationSet) -> Dict[int, CueLabel]:
    """
    One label per annotated utterance; the longest span decides, ties go to label order.
    """

    best: Dict[int, Tuple[int, int, CueLabel]] = {}
    for annotation in annotation_set.annotations:
        key = (
            -(annotation.char_end - annotation.char_start),
            LABEL_ORDER.index(annotation.label),
            annotation.label,
        )
        current = best.get(annotation.utterance_index)
        if current is None or key[:2] < current[:2]:
            best[annotation.utterance_index] = key

    return {index: key[2] for index, key in best.items()}


def utterance_units(
    a: AnnotationSet, b: AnnotationSet, utterance_count: Optional[int] = None
) -> List[List[CueLabel]]:
    """
    Utterance-level units for alpha. Both annotators covered the document, so an
    utterance one of them left unannotated counts as NONE for that annotator.

    Without utterance_count only utterances annotated by at least one side are units.
    """

    labels_a = utterance_labels(a)
    labels_b = utterance_labels(b)

    if utterance_count is None:
        indices = sorted(set(labels_a) | set(labels_b))
    else:
        indices = list(range(utterance_count))

    return [
        [labels_a.get(index, CueLabel.NONE), labels_b.get(index, CueLabel.NONE)]
        for index in indices
    ]


def _span_id(span: Optional[Tuple[int, int]]) -> str:
    return "-" if span is None else f"{span[0]}-{span[1]}"


def _disagreement(
    doc_id: str,
    utterance_index: int,
    a: Optional[Annotation],
    b: Optional[Annotation],
) -> Disagreement:
    span_a = a.span if a else None
    span_b = b.span if b else None
    return Disagreement(
        disagreement_id="/".join(
            [doc_id, str(utterance_index), _span_id(span_a), _span_id(span_b)]
        ),
        doc_id=doc_id,
        utterance_index=utterance_index,
        span_a=span_a,
        span_b=span_b,
        label_a=a.label if a else None,
        label_b=b.label if b else None,
    )


def diff_annotations(a: AnnotationSet, b: AnnotationSet) -> List[Disagreement]:
    if a.doc_id != b.doc_id:
        raise InvalidInput(
            "Cannot compare annotations of different documents: "
            f"'{a.doc_id}' and '{b.doc_id}'"
        )

    disagreements: Dict[str, Disagreement] = {}

    for annotation in a.annotations:
        counterparts = [other for other in b.annotations if annotation.overlaps(other)]
        if not counterparts:
            found = _disagreement(
                a.doc_id, annotation.utterance_index, annotation, None
            )
            disagreements[found.disagreement_id] = found
        for other in counterparts:
            if other.label != annotation.label:
                found = _disagreement(
                    a.doc_id, annotation.utterance_index, annotation, other
                )
                disagreements[found.disagreement_id] = found

    for other in b.annotations:
        if not any(other.overlaps(annotation) for annotation in a.annotations):
            found = _disagreement(a.doc_id, other.utterance_index, None, other)
            disagreements[found.disagreement_id] = found

    return sorted(
        disagreements.values(),
        key=lambda item: (item.utterance_index, item.merged_span, item.disagreement_id),
    )


def merge_consensus(
    a: AnnotationSet, b: AnnotationSet, resolutions: Mapping[str, CueLabel]
) -> AnnotationSet:
    """
    Agreed spans pass through from the first annotator; every disagreement takes its
    resolved label over the union of the disputed spans.
    """

    disagreements = diff_annotations(a, b)
    unresolved = [
        item.disagreement_id
        for item in disagreements
        if item.disagreement_id not in resolutions
    ]
    if unresolved:
        raise UnresolvedDisagreements(unresolved)

    known = {item.disagreement_id for item in disagreements}
    for disagreement_id in resolutions:
        if disagreement_id not in known:
            logger.warning(
                "Ignoring resolution for unknown disagreement %s", disagreement_id
            )

    disputed = set()
    for item in disagreements:
        if item.span_a is not None:
            disputed.add((item.utterance_index, item.span_a))

    merged = {
        (annotation.utterance_index, annotation.span, annotation.label): annotation
        for annotation in a.annotations
        if (annotation.utterance_index, annotation.span) not in disputed
    }

    for item in disagreements:
        start, end = item.merged_span
        resolved = Annotation(
            utterance_index=item.utterance_index,
            char_start=start,
            char_end=end,
            label=resolutions[item.disagreement_id],
        )
        merged[(resolved.utterance_index, resolved.span, resolved.label)] = resolved

    ordered = sorted(
        merged.values(),
        key=lambda annotation: (
            annotation.utterance_index,
            annotation.span,
            LABEL_ORDER.index(annotation.label),
        ),
    )

    return AnnotationSet(
        doc_id=a.doc_id, annotator_id=CONSENSUS_ANNOTATOR, annotations=tuple(ordered)
    )


def parse_annotations(source: str) -> List[AnnotationSet]:
    """
    Parses an annotation file into one set per (doc_id, annotator_id), in file order.
    """

    grouped: Dict[Tuple[str, str], List[Annotation]] = {}

    for number, line in enumerate(source.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue

        fields = line.split("\t")
        if len(fields) != 6:
            raise FormatError(
                f"Expected 6 tab-separated fields, found {len(fields)}", line=number
            )

        doc_id, annotator_id, utterance_index, char_start, char_end, label = fields

        numbers = {}
        for name, value in (
            ("utterance_index", utterance_index),
            ("char_start", char_start),
            ("char_end", char_end),
        ):
            try:
                numbers[name] = int(value)
            except ValueError:
                raise FormatError(
                    f"'{value}' is not an integer", line=number, field=name
                )

        try:
            annotation = Annotation(label=CueLabel.parse(label), **numbers)
        except InvalidInput as error:
            raise FormatError(error.message, line=number, field="label")
        except ValueError as error:
            raise FormatError(
                f"Invalid span {char_start}-{char_end}: {error}", line=number
            )

        if not doc_id or not annotator_id:
            raise FormatError("doc_id and annotator_id must not be empty", line=number)

        grouped.setdefault((doc_id, annotator_id), []).append(annotation)

    return [
        AnnotationSet(
            doc_id=doc_id, annotator_id=annotator_id, annotations=tuple(items)
        )
        for (doc_id, annotator_id), items in grouped.items()
    ]


def render_annotations(annotation_sets: Sequence[AnnotationSet]) -> str:
    lines = []
    for annotation_set in annotation_sets:
        for annotation in annotation_set.annotations:
            lines.append(
                "\t".join(
                    [
                        annotation_set.doc_id,
                        annotation_set.annotator_id,
                        str(annotation.utterance_index),
                        str(annotation.char_start),
                        str(annotation.char_end),
                        annotation.label.value,
                    ]
                )
            )
    return "".join(f"{line}\n" for line in lines)


def parse_resolutions(source: str) -> Dict[str, CueLabel]:
    resolutions: Dict[str, CueLabel] = {}

    for number, line in enumerate(source.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue

        fields = line.split("\t")
        if len(fields) != 2:
            raise FormatError(
                f"Expected 2 tab-separated fields, found {len(fields)}", line=number
            )

        disagreement_id, label = fields
        if disagreement_id in resolutions:
            raise FormatError(
                f"Duplicate resolution for '{disagreement_id}'", line=number
            )
        try:
            resolutions[disagreement_id] = CueLabel.parse(label)
        except InvalidInput as error:
            raise FormatError(error.message, line=number, field="label")

    return resolutions


def render_disagreements(disagreements: Sequence[Disagreement]) -> str:
    """
    Adjudication worksheet: disagreement_id, label_a, label_b ("-" when absent).
    """

    lines = ["# disagreement_id\tlabel_a\tlabel_b"]
    for item in disagreements:
        lines.append(
            "\t".join(
                [
                    item.disagreement_id,
                    item.label_a.value if item.label_a else "-",
                    item.label_b.value if item.label_b else "-",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def pair_annotation_sets(
    first: Sequence[AnnotationSet], second: Sequence[AnnotationSet]
) -> List[Tuple[AnnotationSet, AnnotationSet]]:
    """
    Pairs two annotators' sets by doc_id. A document only one side annotated is paired
    with an empty set for the other side.
    """

    by_doc_a = {item.doc_id: item for item in first}
    by_doc_b = {item.doc_id: item for item in second}

    for sets in (first, second):
        counts = Counter(item.doc_id for item in sets)
        duplicates = [doc_id for doc_id, count in counts.items() if count > 1]
        if duplicates:
            raise InvalidInput(
                "Each file must hold one annotator per document; "
                f"'{duplicates[0]}' repeats"
            )

    annotator_a = first[0].annotator_id if first else "a"
    annotator_b = second[0].annotator_id if second else "b"

    pairs = []
    for doc_id in sorted(set(by_doc_a) | set(by_doc_b)):
        pairs.append(
            (
                by_doc_a.get(
                    doc_id, AnnotationSet(doc_id=doc_id, annotator_id=annotator_a)
                ),
                by_doc_b.get(
                    doc_id, AnnotationSet(doc_id=doc_id, annotator_id=annotator_b)
                ),
            )
        )
    return pairs
