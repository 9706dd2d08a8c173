"""In-process pipeline: decoded day files -> books -> classified events -> trajectories.

The CLI is a thin layer over these helpers, so running the subcommands one
after another through files gives the same numbers as calling them here.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .book import BookDelta, OrderBook, time_weighted_average_spread
from .classify import (
    SpreadChangeEvent,
    SpreadKind,
    aggregate_trades,
    all_event_records,
    classify_stream,
)
from .errors import BookError
from .events import NS_PER_SECOND, OrderEvent
from .feed import ParseResult, ingest_csv_by_symbol, parse_stream
from .response import MidpointTrajectory
from .synthgen import SESSION_CLOSE_NS, SESSION_OPEN_NS

DEFAULT_SESSION = (SESSION_OPEN_NS, SESSION_CLOSE_NS)

FORMATS = ("binary", "csv")


def parse_clock(text: str) -> int:
    """``HH:MM`` or ``HH:MM:SS`` -> ns since midnight."""
    parts = text.strip().split(":")
    if not 2 <= len(parts) <= 3:
        raise ValueError(f"bad time of day {text!r}, expected HH:MM[:SS]")
    h, m = int(parts[0]), int(parts[1])
    s = float(parts[2]) if len(parts) == 3 else 0.0
    if not (0 <= h < 24 and 0 <= m < 60 and 0 <= s < 60):
        raise ValueError(f"bad time of day {text!r}")
    return (h * 3600 + m * 60) * NS_PER_SECOND + round(s * NS_PER_SECOND)


def parse_session(text: str) -> tuple[int, int]:
    """``09:40-15:50`` -> (open_ns, close_ns)."""
    try:
        a, b = text.split("-")
    except ValueError:
        raise ValueError(f"bad session {text!r}, expected HH:MM-HH:MM") from None
    t0, t1 = parse_clock(a), parse_clock(b)
    if t1 <= t0:
        raise ValueError(f"session {text!r} closes before it opens")
    return t0, t1


def read_universe(path: str | Path | None) -> list[str] | None:
    """Symbols listed one per line (``#`` comments). ``nasdaq96`` names the
    bundled index list; ``None`` means no filtering."""
    if path is None:
        return None
    if str(path) == "nasdaq96":
        text = resources.files(__package__).joinpath("data/nasdaq96.txt").read_text()
    else:
        text = Path(path).read_text()
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def detect_format(path: str | Path) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "binary"


def date_label(path: str | Path) -> str:
    return Path(path).stem


def load_file(path: str | Path, fmt: str | None = None, universe: Iterable[str] | None = None) -> ParseResult:
    fmt = fmt or detect_format(path)
    if fmt == "csv":
        with open(path, newline="") as fh:
            return ingest_csv_by_symbol(fh, universe)
    if fmt != "binary":
        raise ValueError(f"unknown format {fmt!r}")
    return parse_stream(Path(path).read_bytes(), universe)


def replay_symbol(symbol: str, events: Sequence[OrderEvent]) -> tuple[OrderBook, list[BookDelta]]:
    """Replay one symbol's day; errors are re-raised with the event position."""
    book = OrderBook(symbol)
    deltas: list[BookDelta] = []
    for k, ev in enumerate(events):
        try:
            deltas.extend(book.apply(ev))
        except BookError as exc:
            raise type(exc)(f"{symbol} event {k} (t={ev.timestamp} ns): {exc}") from None
    return book, deltas


@dataclass
class SymbolDay:
    symbol: str
    date: str
    events: list[OrderEvent]
    book: OrderBook
    deltas: list[BookDelta]
    session: tuple[int, int]
    merge_trades: bool = True

    @cached_property
    def changes(self) -> list[SpreadChangeEvent]:
        """Quote-changing events inside the session."""
        evs = classify_stream(self.deltas, self.session)
        return aggregate_trades(evs) if self.merge_trades else evs

    @cached_property
    def all_events(self) -> list[SpreadChangeEvent]:
        """Every trade, full removal and placement inside the session."""
        evs = all_event_records(self.deltas, self.session)
        return aggregate_trades(evs) if self.merge_trades else evs

    @cached_property
    def trajectory(self) -> MidpointTrajectory:
        return MidpointTrajectory.from_deltas(self.symbol, self.deltas, self.session)

    def tw_spread(self) -> Fraction:
        return time_weighted_average_spread(self.deltas, self.session)

    def of_kind(self, kind: SpreadKind | str, all_events: bool = False) -> list[SpreadChangeEvent]:
        kind = SpreadKind(kind)
        src = self.all_events if all_events else self.changes
        return [e for e in src if e.kind is kind]


@dataclass
class Day:
    date: str
    symbols: dict[str, SymbolDay] = field(default_factory=dict)
    parsed: int = 0
    skipped: int = 0
    dropped: int = 0


def build_day(
    result: ParseResult,
    date: str,
    session: tuple[int, int] = DEFAULT_SESSION,
    merge_trades: bool = True,
) -> Day:
    day = Day(date, parsed=result.parsed, skipped=result.skipped, dropped=result.dropped)
    for sym in sorted(result.events):
        evs = result.events[sym]
        book, deltas = replay_symbol(sym, evs)
        day.symbols[sym] = SymbolDay(sym, date, evs, book, deltas, session, merge_trades)
    return day


def load_day(
    path: str | Path,
    fmt: str | None = None,
    universe: Iterable[str] | None = None,
    session: tuple[int, int] = DEFAULT_SESSION,
    merge_trades: bool = True,
) -> Day:
    return build_day(load_file(path, fmt, universe), date_label(path), session, merge_trades)


def day_from_bytes(
    data: bytes, date: str = "day", universe: Iterable[str] | None = None,
    session: tuple[int, int] = DEFAULT_SESSION, merge_trades: bool = True,
) -> Day:
    return build_day(parse_stream(io.BytesIO(data), universe), date, session, merge_trades)
