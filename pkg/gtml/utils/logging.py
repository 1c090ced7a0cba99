"""
Logging setup: a RichHandler on stderr so stdout and result files stay clean.
"""
import logging
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

err_console = Console(stderr=True)


def setup_logging(level: Optional[str] = None) -> None:
    level = (level or "INFO").upper()
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    handler = RichHandler(console=err_console, show_path=False, rich_tracebacks=False)
    handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    root.addHandler(handler)
    root.setLevel(level)


def diagnostic(kind: str, detail: str) -> str:
    """One structured stderr line for a failed command."""
    line = f"error={kind} detail={detail}"
    err_console.print(line, markup=False, highlight=False, soft_wrap=True)
    return line
