from typing import Optional

import typer

from .cli.agreement import agreement, consensus
from .cli.classify import app as classify_app
from .cli.classify import train
from .cli.corpus import app as corpus_app
from .cli.corpus import clean
from .cli.evaluate import evaluate
from .cli.lexicon import app as lexicon_app
from .cli.report import report
from .config import settings
from .utils import configure_logging

cuefidelity = typer.Typer(pretty_exceptions_show_locals=False)

cuefidelity.add_typer(
    corpus_app, name="corpus", help="Build, balance, split and describe corpora."
)
cuefidelity.add_typer(lexicon_app, name="lexicon", help="Validate cue lexicons.")
cuefidelity.add_typer(
    classify_app, name="classify", help="Label corpora and transcripts."
)

cuefidelity.command(name="clean")(clean)
cuefidelity.command(name="train")(train)
cuefidelity.command(name="agreement")(agreement)
cuefidelity.command(name="consensus")(consensus)
cuefidelity.command(name="evaluate")(evaluate)
cuefidelity.command(name="report")(report)


@cuefidelity.callback()
def configure_cuefidelity(
    seed: Optional[int] = typer.Option(
        None, help="Default seed for every command that samples or shuffles."
    ),
    log_level: Optional[str] = typer.Option(
        None, help="Log level (DEBUG, INFO, WARNING, ERROR)."
    ),
    manifest: bool = typer.Option(
        False, help="Write a <output>.manifest.json run manifest next to each output."
    ),
) -> None:
    """
    Configures the cuefidelity toolkit.
    """

    if seed is not None:
        settings.seed: int = seed

    if log_level:
        settings.log_level: str = log_level.upper()

    settings.write_manifest = manifest

    configure_logging(settings.log_level)


if __name__ == "__main__":
    cuefidelity()
