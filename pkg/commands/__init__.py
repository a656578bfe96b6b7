"""
CLI subcommands.  Importing a command module registers it in
commands.registry.COMMANDS.
"""
import sys
from pathlib import Path


def emit(text: str, out: str | None) -> None:
    """Write *text* to the file *out*, or to stdout when *out* is empty."""
    if not out:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as fh:
        fh.write(text)
