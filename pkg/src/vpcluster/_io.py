from __future__ import annotations

from contextlib import contextmanager


@contextmanager
def open_text(target):
    """Yield a text stream: ``target`` itself if writable, else a new UTF-8 file."""
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="", encoding="utf-8") as fh:
            yield fh
