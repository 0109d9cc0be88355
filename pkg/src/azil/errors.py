"""Error types mapped to CLI exit codes."""

from __future__ import annotations

from typing import Optional


class ConfigError(ValueError):
    """Invalid run configuration; ``line`` points into the JSON source when known."""

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class DataError(ValueError):
    """Malformed or missing input data."""
