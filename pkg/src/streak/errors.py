"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class StreakError(Exception):
    """Base class for every error raised by the engine."""


class SpatialIdCollision(StreakError):
    pass


class UnknownId(StreakError, KeyError):
    pass


class WktSyntax(StreakError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class OutsideSpace(StreakError, ValueError):
    pass


class LocalIdOverflow(StreakError, OverflowError):
    pass


class NotSpatial(StreakError, ValueError):
    pass


class ParseError(StreakError, ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class GeometryError(ParseError):
    pass


class QuerySyntax(StreakError, ValueError):
    def __init__(self, message: str, offset: int | None = None):
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")
        self.offset = offset


class UnboundRankVariable(QuerySyntax):
    pass


class MissingGeometryBinding(QuerySyntax):
    pass


class MultipleSpatialFilters(QuerySyntax):
    pass


class NotTwoComponents(StreakError, ValueError):
    pass


class SnapshotError(StreakError, ValueError):
    pass


class ModeMismatch(StreakError, AssertionError):
    """Result checksums differ across plan modes for the same benchmark cell."""
