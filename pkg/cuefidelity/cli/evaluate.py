from pathlib import Path
from typing import Optional

import typer
from rich import print
from rich.table import Table

from ..corpus import read_corpus
from ..evaluate import (
    AverageMode,
    MetricsReport,
    build_metrics_report,
    load_predictions,
    render_metrics,
)
from ..labels import LABEL_ORDER
from ..utils import display_error_message, read_text, write_output
from . import record_run


def metrics_table(report: MetricsReport) -> Table:
    table = Table(title=f"{report.mode.value} F1 over {report.n} examples")
    table.add_column("")
    table.add_column("Precision", justify="right")
    table.add_column("Recall", justify="right")
    table.add_column("F1", justify="right")
    table.add_column("Support", justify="right")

    for label in LABEL_ORDER:
        scores = report.per_class[label]
        table.add_row(
            label.value + (" (absent)" if scores.absent else ""),
            f"{scores.precision:.4f}",
            f"{scores.recall:.4f}",
            f"{scores.f1:.4f}",
            str(scores.support),
        )
    table.add_row("Averaged", "", "", f"{report.averaged_f1:.4f}", str(report.n))

    if report.by_discipline:
        for row in report.by_discipline.rows:
            table.add_row(row.discipline, "", "", f"{row.f1:.4f}", str(row.n))
        table.add_row(
            "Pooled", "", "", f"{report.by_discipline.pooled:.4f}", str(report.n)
        )

    return table


def evaluate(
    gold: Path = typer.Option(..., help="The gold corpus."),
    pred: Path = typer.Option(
        ..., help="Predictions, one 'example_id<TAB>LABEL' per line."
    ),
    mode: AverageMode = typer.Option(AverageMode.MACRO, help="F1 averaging mode."),
    by_discipline: bool = typer.Option(False, help="Add the per-discipline F1 table."),
    output: Optional[Path] = typer.Option(
        None, "-o", "--output", help="Where to write the metrics report (JSON)."
    ),
) -> None:
    """
    Score predictions against the gold corpus.
    """

    try:
        report = build_metrics_report(
            read_corpus(read_text(gold)),
            load_predictions(read_text(pred)),
            mode,
            by_discipline=by_discipline,
        )

        if output:
            write_output(output, render_metrics(report))
            record_run(output, [gold, pred])

        print(metrics_table(report))
    except Exception as error:
        display_error_message(error)
        raise typer.Exit(code=1)
