"""Exception hierarchy shared by the feed, book, classifier and analytics layers."""

from __future__ import annotations


class SpreadResponseError(Exception):
    """Base class for all data errors raised by this package."""


# feed


class MalformedMessage(SpreadResponseError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class UnknownSymbolLocate(SpreadResponseError):
    def __init__(self, locate: int, offset: int | None = None):
        self.locate = locate
        self.offset = offset
        where = "" if offset is None else f" (byte offset {offset})"
        super().__init__(f"no stock directory entry for locate code {locate}{where}")


class TruncatedStream(SpreadResponseError):
    def __init__(self, offset: int, needed: int, available: int):
        self.offset = offset
        super().__init__(
            f"stream ends mid-message at byte offset {offset}: "
            f"need {needed} bytes, have {available}"
        )


class SchemaMismatch(SpreadResponseError):
    pass


class ParseError(SpreadResponseError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class UnencodableEvent(SpreadResponseError):
    pass


# book


class BookError(SpreadResponseError):
    pass


class UnknownOrderId(BookError):
    pass


class Overfill(BookError):
    pass


class CrossedBookProduced(BookError):
    pass


class NoDefinedSpread(SpreadResponseError):
    pass


# classifier


class UnclassifiableDelta(SpreadResponseError):
    pass


class EmptyEventList(SpreadResponseError):
    pass


# analytics


class UndefinedMidpoint(SpreadResponseError):
    pass


class EmptyGrid(SpreadResponseError):
    pass


class NoEvents(SpreadResponseError):
    pass


class FewerThanTwoSymbols(SpreadResponseError):
    pass


# generator


class InfeasibleConfig(SpreadResponseError):
    pass
