"""
Model-agnostic evaluation of cue predictions against gold labels.

Predictions come from any classifier, including external models, through the
predictions file format: one ``example_id<TAB>LABEL`` line per example.
"""

import logging
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from sklearn.metrics import confusion_matrix, f1_score, precision_recall_fscore_support

from .corpus import Corpus
from .exceptions import FormatError, InvalidInput, MissingPredictions
from .labels import DISCIPLINE_ORDER, LABEL_ORDER, CueLabel

logger = logging.getLogger(__name__)

AVERAGE_ROW = "Average"
LABEL_VALUES = [label.value for label in LABEL_ORDER]
LABEL_POSITIONS = list(range(len(LABEL_ORDER)))


class AverageMode(str, Enum):
    MACRO = "macro"
    MICRO = "micro"
    WEIGHTED = "weighted"


class ConfusionMatrix(BaseModel):
    """
    counts[gold][predicted] in label order GUIDED, DIRECTED, NONE.
    """

    model_config = ConfigDict(frozen=True)

    labels: Tuple[CueLabel, ...] = LABEL_ORDER
    counts: Tuple[Tuple[int, ...], ...]

    @model_validator(mode="after")
    def check_counts(self) -> "ConfusionMatrix":
        if self.labels != LABEL_ORDER:
            raise ValueError("confusion labels must be GUIDED, DIRECTED, NONE")
        size = len(LABEL_ORDER)
        if len(self.counts) != size or any(len(row) != size for row in self.counts):
            raise ValueError(f"confusion counts must be a {size}x{size} matrix")
        if any(value < 0 for row in self.counts for value in row):
            raise ValueError("confusion counts must not be negative")
        return self

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.as_array().sum())

    def gold_counts(self) -> Dict[CueLabel, int]:
        return dict(zip(LABEL_ORDER, (int(v) for v in self.as_array().sum(axis=1))))

    def predicted_counts(self) -> Dict[CueLabel, int]:
        return dict(zip(LABEL_ORDER, (int(v) for v in self.as_array().sum(axis=0))))

    def accuracy(self) -> float:
        return float(np.trace(self.as_array())) / self.total


class ClassScores(BaseModel):
    model_config = ConfigDict(frozen=True)

    precision: float = Field(ge=0, le=1)
    recall: float = Field(ge=0, le=1)
    f1: float = Field(ge=0, le=1)
    support: int = Field(ge=0)
    absent: bool = False


class EvalResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: AverageMode
    n: int
    accuracy: float
    averaged_f1: float
    per_class: Dict[CueLabel, ClassScores]
    matrix: ConfusionMatrix


class DisciplineRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    discipline: str
    n: int
    f1: float


class DisciplineTable(BaseModel):
    """
    One row per discipline present plus an Average row, the unweighted mean of the
    discipline scores. ``pooled`` is the score over all examples at once.
    """

    model_config = ConfigDict(frozen=True)

    mode: AverageMode
    rows: Tuple[DisciplineRow, ...]
    pooled: float

    @property
    def average(self) -> DisciplineRow:
        return self.rows[-1]


class ErrorBreakdown(BaseModel):
    model_config = ConfigDict(frozen=True)

    mislabeled_per_gold_class: Dict[CueLabel, int]
    wrong_predictions_per_predicted_class: Dict[CueLabel, int]

    @model_validator(mode="after")
    def check_sums(self) -> "ErrorBreakdown":
        if sum(self.mislabeled_per_gold_class.values()) != sum(
            self.wrong_predictions_per_predicted_class.values()
        ):
            raise ValueError("both error views must count the same errors")
        return self

    @property
    def total(self) -> int:
        return sum(self.mislabeled_per_gold_class.values())


class MetricsReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: AverageMode
    n: int
    accuracy: float
    averaged_f1: float
    per_class: Dict[CueLabel, ClassScores]
    confusion: ConfusionMatrix
    by_discipline: Optional[DisciplineTable] = None
    error_breakdown: ErrorBreakdown


def _check_lengths(gold: Sequence[CueLabel], pred: Sequence[CueLabel]) -> None:
    if len(gold) != len(pred):
        raise InvalidInput(
            "Gold and predicted label lists differ in length "
            f"({len(gold)} vs {len(pred)})"
        )


def confusion(gold: Sequence[CueLabel], pred: Sequence[CueLabel]) -> ConfusionMatrix:
    _check_lengths(gold, pred)
    if not gold:
        raise InvalidInput("Cannot build a confusion matrix from no examples")

    counts = confusion_matrix(
        [label.value for label in gold],
        [label.value for label in pred],
        labels=LABEL_VALUES,
    )

    return ConfusionMatrix(counts=tuple(tuple(int(v) for v in row) for row in counts))


def _label_positions(matrix: ConfusionMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gold and predicted label positions that reproduce the matrix cell by cell.
    """

    cells = matrix.as_array().ravel()
    size = len(LABEL_ORDER)
    gold = np.repeat(np.repeat(np.arange(size), size), cells)
    predicted = np.repeat(np.tile(np.arange(size), size), cells)
    return gold, predicted


def per_class_prf(matrix: ConfusionMatrix) -> Dict[CueLabel, ClassScores]:
    """
    Precision, recall and F1 per label. A zero denominator scores 0; a label that is
    neither gold nor predicted anywhere is flagged absent.
    """

    if matrix.total == 0:
        raise InvalidInput("Cannot score an empty confusion matrix")

    gold, predicted = _label_positions(matrix)
    precision, recall, f1, support = precision_recall_fscore_support(
        gold, predicted, labels=LABEL_POSITIONS, average=None, zero_division=0
    )
    predicted_totals = matrix.predicted_counts()
    supports = [int(value) for value in support]

    return {
        label: ClassScores(
            precision=float(precision[position]),
            recall=float(recall[position]),
            f1=float(f1[position]),
            support=supports[position],
            absent=supports[position] == 0 and predicted_totals[label] == 0,
        )
        for position, label in enumerate(LABEL_ORDER)
    }


def averaged_f1(
    matrix: ConfusionMatrix, mode: AverageMode = AverageMode.MACRO
) -> float:
    if matrix.total == 0:
        raise InvalidInput("Cannot score an empty confusion matrix")

    gold, predicted = _label_positions(matrix)
    return float(
        f1_score(
            gold,
            predicted,
            labels=LABEL_POSITIONS,
            average=AverageMode(mode).value,
            zero_division=0,
        )
    )


def evaluate(
    gold: Sequence[CueLabel],
    pred: Sequence[CueLabel],
    mode: AverageMode = AverageMode.MACRO,
) -> EvalResult:
    matrix = confusion(gold, pred)
    return EvalResult(
        mode=mode,
        n=matrix.total,
        accuracy=matrix.accuracy(),
        averaged_f1=averaged_f1(matrix, mode),
        per_class=per_class_prf(matrix),
        matrix=matrix,
    )


def align_predictions(
    gold: Corpus, predictions: Mapping[str, CueLabel]
) -> Tuple[List[CueLabel], List[CueLabel]]:
    """
    Gold and predicted labels in corpus order. Predictions for unknown ids are ignored.
    """

    missing = [
        example.example_id
        for example in gold.examples
        if example.example_id not in predictions
    ]
    if missing:
        raise MissingPredictions(missing)

    extra = len(set(predictions) - {example.example_id for example in gold.examples})
    if extra:
        logger.warning(
            "Ignoring %d prediction(s) for ids not in the gold corpus", extra
        )

    return (
        gold.labels(),
        [predictions[example.example_id] for example in gold.examples],
    )


def evaluate_by_discipline(
    gold: Corpus,
    predictions: Mapping[str, CueLabel],
    mode: AverageMode = AverageMode.MACRO,
) -> DisciplineTable:
    if not gold.examples:
        raise InvalidInput("Cannot evaluate an empty gold corpus")

    gold_labels, predicted_labels = align_predictions(gold, predictions)

    rows = []
    for discipline in DISCIPLINE_ORDER:
        positions = [
            position
            for position, example in enumerate(gold.examples)
            if example.discipline is discipline
        ]
        if not positions:
            continue

        matrix = confusion(
            [gold_labels[p] for p in positions],
            [predicted_labels[p] for p in positions],
        )
        rows.append(
            DisciplineRow(
                discipline=discipline.value,
                n=len(positions),
                f1=averaged_f1(matrix, mode),
            )
        )

    average = DisciplineRow(
        discipline=AVERAGE_ROW,
        n=len(gold_labels),
        f1=sum(row.f1 for row in rows) / len(rows),
    )
    return DisciplineTable(
        mode=mode,
        rows=tuple(rows) + (average,),
        pooled=averaged_f1(confusion(gold_labels, predicted_labels), mode),
    )


def error_breakdown(
    gold: Sequence[CueLabel], pred: Sequence[CueLabel]
) -> ErrorBreakdown:
    _check_lengths(gold, pred)

    mislabeled = {label: 0 for label in LABEL_ORDER}
    wrong = {label: 0 for label in LABEL_ORDER}
    for gold_label, predicted_label in zip(gold, pred):
        if gold_label is not predicted_label:
            mislabeled[gold_label] += 1
            wrong[predicted_label] += 1

    return ErrorBreakdown(
        mislabeled_per_gold_class=mislabeled,
        wrong_predictions_per_predicted_class=wrong,
    )


def build_metrics_report(
    gold: Corpus,
    predictions: Mapping[str, CueLabel],
    mode: AverageMode = AverageMode.MACRO,
    by_discipline: bool = False,
) -> MetricsReport:
    gold_labels, predicted_labels = align_predictions(gold, predictions)
    result = evaluate(gold_labels, predicted_labels, mode)

    return MetricsReport(
        mode=mode,
        n=result.n,
        accuracy=result.accuracy,
        averaged_f1=result.averaged_f1,
        per_class=result.per_class,
        confusion=result.matrix,
        by_discipline=(
            evaluate_by_discipline(gold, predictions, mode) if by_discipline else None
        ),
        error_breakdown=error_breakdown(gold_labels, predicted_labels),
    )


def render_metrics(report: MetricsReport) -> str:
    return report.model_dump_json(indent=2) + "\n"


def load_predictions(source: str) -> Dict[str, CueLabel]:
    predictions: Dict[str, CueLabel] = {}
    first_seen: Dict[str, int] = {}

    for number, line in enumerate(source.splitlines(), start=1):
        if not line.strip():
            continue

        fields = line.split("\t")
        if len(fields) != 2 or not fields[0]:
            raise FormatError(
                f"Expected 'example_id<TAB>LABEL', found {len(fields)} field(s)",
                line=number,
            )

        example_id, label = fields
        if example_id in predictions:
            raise FormatError(
                f"Duplicate prediction for '{example_id}' "
                f"(first on line {first_seen[example_id]})",
                line=number,
                field="example_id",
            )
        try:
            predictions[example_id] = CueLabel.parse(label)
        except InvalidInput as error:
            raise FormatError(error.message, line=number, field="label")
        first_seen[example_id] = number

    return predictions


def render_predictions(predictions: Mapping[str, CueLabel]) -> str:
    return "".join(
        f"{example_id}\t{label.value}\n" for example_id, label in predictions.items()
    )
