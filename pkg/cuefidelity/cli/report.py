from pathlib import Path
from typing import List, Optional

import typer

from ..classify import BaselineClassifier, RuleClassifier, load_model
from ..config import settings
from ..corpus import parse_transcript
from ..evaluate import load_predictions
from ..exceptions import InvalidInput
from ..lexicon import compile_lexicon, parse_lexicon
from ..report import PredictionSet, ReportFormat, assess_sessions, render_report
from ..utils import (
    display_error_message,
    display_success_message,
    read_text,
    write_output,
)
from . import record_run
from .lexicon import lexicon_source

SUFFIXES = {ReportFormat.STRUCTURED: ".json", ReportFormat.TEXT: ".txt"}


def report(
    transcript: List[Path] = typer.Option(
        ..., help="A transcript to assess. Repeat for several sessions."
    ),
    lexicon: Optional[Path] = typer.Option(None, help="Classify with this lexicon."),
    model: Optional[Path] = typer.Option(
        None, help="Classify with this trained model."
    ),
    pred: Optional[Path] = typer.Option(
        None, help="Use preloaded predictions keyed <session_id>:<utterance_index>."
    ),
    output: Path = typer.Option(
        ...,
        "-o",
        "--output",
        help="The report file, or a directory when several transcripts are given.",
    ),
    format: ReportFormat = typer.Option(ReportFormat.STRUCTURED, help="Report format."),
    workers: Optional[int] = typer.Option(
        None, help="Worker threads. Defaults to CUEFIDELITY_WORKERS."
    ),
) -> None:
    """
    Per-session fidelity report: cue counts, frequencies per minute and durations.

    Without --model or --pred the configured or shipped lexicon is used.
    """

    try:
        if sum(option is not None for option in (lexicon, model, pred)) > 1:
            raise InvalidInput("Give at most one of --lexicon, --model and --pred")

        if model:
            classifier = BaselineClassifier(load_model(read_text(model)))
        elif pred:
            classifier = PredictionSet(load_predictions(read_text(pred)))
        else:
            classifier = RuleClassifier(
                compile_lexicon(parse_lexicon(lexicon_source(lexicon)))
            )

        transcripts = [parse_transcript(read_text(path)) for path in transcript]
        reports = assess_sessions(transcripts, classifier, workers or settings.workers)

        if len(reports) == 1:
            targets = [output]
        else:
            targets = [output / f"{r.session_id}{SUFFIXES[format]}" for r in reports]

        for target, session_report in zip(targets, reports):
            write_output(target, render_report(session_report, format))
            record_run(
                target,
                [*transcript, *(path for path in (lexicon, model, pred) if path)],
                versions={classifier.classifier_id: classifier.version},
            )

        display_success_message(f"{len(reports)} report(s) written")
    except Exception as error:
        display_error_message(error)
        raise typer.Exit(code=1)
