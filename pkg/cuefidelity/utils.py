import hashlib
import logging
import threading
from pathlib import Path
from typing import Union

from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape

err_console = Console(stderr=True)

_write_lock = threading.Lock()


def display_error_message(error) -> None:
    err_console.print(f"[bold red]{escape(str(error))}[/bold red]")


def display_success_message(message) -> None:
    err_console.print(f"[bold green]{escape(str(message))}[/bold green]")


def configure_logging(level: str) -> None:
    """
    Routes every cuefidelity logger through a single rich handler on stderr.
    """

    logger = logging.getLogger("cuefidelity")
    logger.handlers.clear()
    logger.addHandler(
        RichHandler(console=err_console, show_path=False, markup=False)
    )
    logger.setLevel(level.upper())
    logger.propagate = False


def digest(content: Union[str, bytes]) -> str:
    if isinstance(content, str):
        content = content.encode("utf-8")

    return hashlib.sha256(content).hexdigest()


def read_text(path: Union[str, Path]) -> str:
    return Path(path).read_text(encoding="utf-8")


def write_output(path: Union[str, Path], content: str) -> Path:
    """
    Writes a UTF-8 document with "\\n" line endings.

    Writes from worker threads are serialised.
    """

    target = Path(path)
    with _write_lock:
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="\n") as output_fd:
            output_fd.write(content)

    return target
