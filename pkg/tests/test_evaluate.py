import json
import random

import numpy as np
import pytest
from sklearn.metrics import f1_score

from cuefidelity.corpus import Corpus, GoldExample
from cuefidelity.evaluate import (
    AverageMode,
    ConfusionMatrix,
    averaged_f1,
    build_metrics_report,
    confusion,
    error_breakdown,
    evaluate,
    evaluate_by_discipline,
    load_predictions,
    per_class_prf,
    render_metrics,
    render_predictions,
)
from cuefidelity.exceptions import FormatError, InvalidInput, MissingPredictions
from cuefidelity.labels import LABEL_ORDER, CueLabel, Discipline

G, D, N = CueLabel.GUIDED, CueLabel.DIRECTED, CueLabel.NONE


def reference_scores(counts):
    """
    Precision, recall and F1 straight from the matrix, one label at a time.
    """

    f1s, supports = [], []
    for k in range(3):
        tp = counts[k][k]
        predicted = sum(counts[g][k] for g in range(3))
        actual = sum(counts[k])
        precision = tp / predicted if predicted else 0.0
        recall = tp / actual if actual else 0.0
        total = precision + recall
        f1 = 2 * precision * recall / total if total else 0.0
        f1s.append(f1)
        supports.append(actual)
    return f1s, supports


def gold_corpus(items):
    return Corpus(
        examples=tuple(
            GoldExample(
                example_id=f"e{i}",
                text="some words",
                label=label,
                discipline=discipline,
                session_id=f"{discipline.value}-s",
            )
            for i, (label, discipline) in enumerate(items)
        )
    )


def test_worked_example():
    result = evaluate([G, G, D, N], [G, D, D, N])

    assert result.averaged_f1 == pytest.approx(7 / 9, abs=1e-12)
    assert result.per_class[G].f1 == pytest.approx(2 / 3)
    assert result.per_class[D].f1 == pytest.approx(2 / 3)
    assert result.per_class[N].f1 == pytest.approx(1.0)
    assert result.accuracy == pytest.approx(0.75)
    assert result.matrix.counts == ((1, 1, 0), (0, 1, 0), (0, 0, 1))


def test_averages_match_a_direct_computation():
    rng = random.Random(31)

    for _ in range(1000):
        counts = [[rng.randint(0, 20) for _ in range(3)] for _ in range(3)]
        if sum(map(sum, counts)) == 0:
            counts[0][0] = 1
        matrix = ConfusionMatrix(counts=tuple(tuple(row) for row in counts))
        f1s, supports = reference_scores(counts)
        total = sum(supports)

        assert averaged_f1(matrix, AverageMode.MACRO) == pytest.approx(
            sum(f1s) / 3, abs=1e-12
        )
        assert averaged_f1(matrix, AverageMode.WEIGHTED) == pytest.approx(
            sum(f * s for f, s in zip(f1s, supports)) / total, abs=1e-12
        )
        micro = averaged_f1(matrix, AverageMode.MICRO)
        assert micro == pytest.approx(matrix.accuracy(), abs=1e-12)
        for score in per_class_prf(matrix).values():
            assert 0.0 <= score.f1 <= 1.0


def test_modes_are_accepted_by_name():
    matrix = confusion([G, G, D, N], [G, D, D, N])

    assert averaged_f1(matrix, "micro") == averaged_f1(matrix, AverageMode.MICRO)
    assert averaged_f1(matrix, "weighted") == averaged_f1(matrix, AverageMode.WEIGHTED)


def test_absent_label_scores_zero_and_is_flagged():
    scores = per_class_prf(confusion([G, D, G], [G, D, D]))

    assert scores[N].absent
    assert scores[N].f1 == 0.0
    assert not scores[G].absent


def test_confusion_rejects_mismatched_lengths():
    with pytest.raises(InvalidInput):
        confusion([G, D], [G])
    with pytest.raises(InvalidInput):
        confusion([], [])


def test_confusion_counts_sum_to_n():
    rng = random.Random(3)
    gold = [rng.choice(LABEL_ORDER) for _ in range(250)]
    pred = [rng.choice(LABEL_ORDER) for _ in range(250)]

    matrix = confusion(gold, pred)

    assert matrix.total == 250
    assert matrix.gold_counts()[G] == gold.count(G)
    assert matrix.predicted_counts()[N] == pred.count(N)


def test_error_breakdown_views_count_the_same_errors():
    transitions = {
        (G, D): 46,
        (G, N): 20,
        (D, G): 20,
        (D, N): 12,
        (N, G): 19,
        (N, D): 39,
        (G, G): 100,
        (D, D): 90,
        (N, N): 80,
    }
    gold, pred = [], []
    for (gold_label, predicted_label), count in transitions.items():
        gold += [gold_label] * count
        pred += [predicted_label] * count

    breakdown = error_breakdown(gold, pred)

    assert breakdown.mislabeled_per_gold_class == {G: 66, D: 32, N: 58}
    assert breakdown.wrong_predictions_per_predicted_class == {G: 39, D: 85, N: 32}
    assert breakdown.total == 156


def test_error_breakdown_of_a_swap():
    breakdown = error_breakdown([G, D], [D, G])

    assert breakdown.mislabeled_per_gold_class == {G: 1, D: 1, N: 0}
    assert breakdown.wrong_predictions_per_predicted_class == {G: 1, D: 1, N: 0}


def test_by_discipline_table():
    items = (
        [(G, Discipline.OT)] * 4
        + [(D, Discipline.PT)] * 4
        + [(N, Discipline.SLP)] * 2
        + [(G, Discipline.SLP)] * 2
    )
    gold = gold_corpus(items)
    predictions = {e.example_id: e.label for e in gold.examples}
    predictions["e11"] = N

    table = evaluate_by_discipline(gold, predictions)

    assert [row.discipline for row in table.rows] == ["OT", "PT", "SLP", "Average"]
    assert [row.n for row in table.rows] == [4, 4, 4, 12]
    assert table.rows[0].f1 == pytest.approx(1 / 3)
    assert table.average.f1 == pytest.approx(sum(r.f1 for r in table.rows[:3]) / 3)
    assert table.pooled == pytest.approx(
        averaged_f1(confusion(gold.labels(), [predictions[f"e{i}"] for i in range(12)]))
    )


def test_by_discipline_with_one_discipline():
    gold = gold_corpus([(G, Discipline.OT), (D, Discipline.OT), (N, Discipline.OT)])
    predictions = {e.example_id: e.label for e in gold.examples}

    table = evaluate_by_discipline(gold, predictions)

    assert [row.discipline for row in table.rows] == ["OT", "Average"]
    assert table.rows[0].f1 == table.average.f1 == pytest.approx(1.0)


def test_missing_predictions_are_reported():
    gold = gold_corpus([(G, Discipline.OT), (D, Discipline.PT)])

    with pytest.raises(MissingPredictions) as raised:
        evaluate_by_discipline(gold, {"e0": G})

    assert raised.value.identifiers == ("e1",)


def test_metrics_report():
    gold = gold_corpus(
        [
            (G, Discipline.OT),
            (G, Discipline.OT),
            (D, Discipline.PT),
            (N, Discipline.PT),
        ]
    )
    predictions = {"e0": G, "e1": D, "e2": D, "e3": N, "extra": G}

    report = build_metrics_report(gold, predictions, by_discipline=True)
    document = json.loads(render_metrics(report))

    assert report.averaged_f1 == pytest.approx(7 / 9)
    assert report.error_breakdown.total == 1
    assert document["mode"] == "macro"
    assert document["confusion"]["counts"] == [[1, 1, 0], [0, 1, 0], [0, 0, 1]]
    assert [row["discipline"] for row in document["by_discipline"]["rows"]] == [
        "OT",
        "PT",
        "Average",
    ]


def test_predictions_file():
    predictions = {"a": G, "b": N}

    assert load_predictions(render_predictions(predictions)) == predictions


def test_predictions_file_errors():
    with pytest.raises(FormatError) as raised:
        load_predictions("a\tGUIDED\nb\tNONE\na\tDIRECTED\n")
    assert raised.value.line == 3
    assert "line 1" in raised.value.message

    with pytest.raises(FormatError) as raised:
        load_predictions("a\tGUIDE\n")
    assert raised.value.line == 1
    assert raised.value.field == "label"

    with pytest.raises(FormatError) as raised:
        load_predictions("a GUIDED\n")
    assert raised.value.line == 1


def test_confusion_matrix_shape_is_checked():
    with pytest.raises(ValueError):
        ConfusionMatrix(counts=((1, 0), (0, 1)))
    assert np.array_equal(
        confusion([G], [N]).as_array(), np.array([[0, 0, 1], [0, 0, 0], [0, 0, 0]])
    )


def test_scores_agree_with_f1_over_raw_labels():
    rng = random.Random(8)
    values = [label.value for label in LABEL_ORDER]

    for _ in range(200):
        size = rng.randint(1, 80)
        gold = [rng.choice(LABEL_ORDER) for _ in range(size)]
        pred = [rng.choice(LABEL_ORDER) for _ in range(size)]

        for mode in AverageMode:
            expected = f1_score(
                [label.value for label in gold],
                [label.value for label in pred],
                labels=values,
                average=mode.value,
                zero_division=0,
            )
            assert evaluate(gold, pred, mode).averaged_f1 == pytest.approx(
                expected, abs=1e-12
            )


def test_by_discipline_rejects_an_empty_corpus():
    with pytest.raises(InvalidInput):
        evaluate_by_discipline(Corpus(), {})
