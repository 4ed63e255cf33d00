from pathlib import Path
from typing import Optional

import typer
from rich import print

from ..config import settings
from ..labels import LABEL_ORDER
from ..lexicon import compile_lexicon, load_seed_lexicon, parse_lexicon
from ..utils import display_error_message, display_success_message, read_text

app = typer.Typer()


def lexicon_source(path: Optional[Path]) -> str:
    """
    Lexicon text from the given path, CUEFIDELITY_LEXICON, or the shipped seed lexicon.
    """

    if path:
        return read_text(path)

    if settings.lexicon:
        return read_text(settings.lexicon)

    return load_seed_lexicon()


@app.command()
def check(
    lexicon: Optional[Path] = typer.Argument(
        None, help="The lexicon file. Defaults to the configured or shipped lexicon."
    ),
) -> None:
    """
    Parse and compile a lexicon, reporting the first error with its line number.
    """

    try:
        compiled = compile_lexicon(parse_lexicon(lexicon_source(lexicon)))

        per_label = {
            label.value: sum(1 for entry in compiled.entries if entry.label is label)
            for label in LABEL_ORDER
        }
        print(
            {
                "entries": len(compiled.entries),
                "per_label": per_label,
                "version": compiled.version_hash,
            }
        )
        display_success_message("Lexicon is valid")
    except Exception as error:
        display_error_message(error)
        raise typer.Exit(code=1)
