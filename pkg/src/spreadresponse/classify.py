"""Spread-change classification (trade / deletion / placement) and O/D/T statistics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, Iterator, Sequence, TextIO

from .book import LEG_ADD, LEG_REMOVE, BookDelta
from .errors import EmptyEventList, SchemaMismatch, UnclassifiableDelta
from .events import EventKind, Side


class SpreadKind(str, Enum):
    TRADE = "trade"
    DELETION = "deletion"
    PLACEMENT = "placement"


@dataclass(frozen=True, slots=True)
class SpreadChangeEvent:
    """A trade, deletion or placement together with its price-change sign.

    Midpoints are doubled tick prices (``bid + ask``). Records produced by
    :func:`event_record` for events that left the quotes alone carry
    ``spread_changed=False``.
    """

    timestamp: int
    symbol: str
    kind: SpreadKind
    sign: int
    mid2_before: int
    mid2_after: int | None
    event_price: int
    side: Side
    spread_changed: bool = True
    legs: int = 1

    @property
    def midpoint_before(self) -> Fraction:
        return Fraction(self.mid2_before, 2)

    @property
    def midpoint_after(self) -> Fraction | None:
        return None if self.mid2_after is None else Fraction(self.mid2_after, 2)


def price_sign(event_price: int, mid2_before: int, side: Side) -> int:
    """sgn(S - m) with S on the tick grid and m a half-tick midpoint.

    A placement exactly at the old midpoint (possible when the spread is an
    even number of ticks >= 2) has no sign from the price alone; it takes
    the sign of its book side, +1 ask / -1 bid.
    """
    diff = 2 * event_price - mid2_before
    if diff > 0:
        return 1
    if diff < 0:
        return -1
    return 1 if side is Side.ASK else -1


def _kind_of(delta: BookDelta) -> SpreadKind | None:
    k = delta.event.kind
    if k is EventKind.EXECUTE:
        return SpreadKind.TRADE
    if k is EventKind.ADD or delta.leg == LEG_ADD:
        return SpreadKind.PLACEMENT
    if k is EventKind.DELETE or delta.leg == LEG_REMOVE:
        return SpreadKind.DELETION
    if k is EventKind.CANCEL:
        return SpreadKind.DELETION if delta.removed else None
    return None


def classify(delta: BookDelta) -> SpreadChangeEvent | None:
    """Label a quote-changing delta, or return None if the quotes did not move
    or there was no two-sided book before the event."""
    if not delta.spread_changed:
        return None
    mid2 = delta.mid2_before
    if mid2 is None:
        return None
    kind = _kind_of(delta)
    price = delta.event_price
    side = delta.side
    if kind is SpreadKind.PLACEMENT:
        inside = price > delta.bid_before if side is Side.BID else price < delta.ask_before
        if not inside:
            raise UnclassifiableDelta(f"placement outside the spread moved a quote: {delta}")
    elif kind is None or not delta.removed:
        raise UnclassifiableDelta(f"quote change without an order leaving the book: {delta}")
    return SpreadChangeEvent(
        delta.timestamp, delta.event.symbol, kind, price_sign(price, mid2, side),
        mid2, delta.mid2_after, price, side,
    )


def event_record(delta: BookDelta) -> SpreadChangeEvent | None:
    """Record for any trade, full removal, or placement, quote-changing or not.

    Partial cancels are not an order leaving the book and yield None, as
    does any event seen while one side of the book was empty.
    """
    mid2 = delta.mid2_before
    if mid2 is None:
        return None
    if delta.spread_changed:
        return classify(delta)
    kind = _kind_of(delta)
    if kind is None or (kind is SpreadKind.DELETION and not delta.removed):
        return None
    price = delta.event_price
    return SpreadChangeEvent(
        delta.timestamp, delta.event.symbol, kind, price_sign(price, mid2, delta.side),
        mid2, delta.mid2_after, price, delta.side, spread_changed=False,
    )


def _in_session(t: int, session: tuple[int, int] | None) -> bool:
    return session is None or session[0] <= t <= session[1]


def classify_stream(
    deltas: Iterable[BookDelta], session: tuple[int, int] | None = None
) -> list[SpreadChangeEvent]:
    out = []
    for d in deltas:
        if not _in_session(d.timestamp, session):
            continue
        ev = classify(d)
        if ev is not None:
            out.append(ev)
    return out


def all_event_records(
    deltas: Iterable[BookDelta], session: tuple[int, int] | None = None
) -> list[SpreadChangeEvent]:
    out = []
    for d in deltas:
        if not _in_session(d.timestamp, session):
            continue
        ev = event_record(d)
        if ev is not None:
            out.append(ev)
    return out


def aggregate_trades(events: Sequence[SpreadChangeEvent]) -> list[SpreadChangeEvent]:
    """Merge runs of same-timestamp, same-sign trades into one trade.

    One aggressive order sweeping several levels shows up as a run of
    executions stamped with the same nanosecond.
    """
    out: list[SpreadChangeEvent] = []
    for ev in events:
        if out and ev.kind is SpreadKind.TRADE:
            prev = out[-1]
            if (
                prev.kind is SpreadKind.TRADE
                and prev.timestamp == ev.timestamp
                and prev.sign == ev.sign
                and prev.symbol == ev.symbol
            ):
                out[-1] = replace(
                    prev,
                    mid2_after=ev.mid2_after,
                    spread_changed=prev.spread_changed or ev.spread_changed,
                    legs=prev.legs + ev.legs,
                )
                continue
        out.append(ev)
    return out


def split_by_kind(events: Iterable[SpreadChangeEvent]) -> dict[SpreadKind, list[SpreadChangeEvent]]:
    out: dict[SpreadKind, list[SpreadChangeEvent]] = {k: [] for k in SpreadKind}
    for ev in events:
        out[ev.kind].append(ev)
    return out


@dataclass(frozen=True)
class RelativeAmounts:
    placements: int
    deletions: int
    trades: int

    @property
    def total(self) -> int:
        return self.placements + self.deletions + self.trades

    @property
    def O(self) -> Fraction:  # noqa: E743
        return Fraction(self.placements, self.total)

    @property
    def D(self) -> Fraction:
        return Fraction(self.deletions, self.total)

    @property
    def T(self) -> Fraction:
        return Fraction(self.trades, self.total)


def relative_amounts(events: Iterable[SpreadChangeEvent]) -> RelativeAmounts:
    counts = {k: 0 for k in SpreadKind}
    for ev in events:
        counts[ev.kind] += 1
    amounts = RelativeAmounts(
        counts[SpreadKind.PLACEMENT], counts[SpreadKind.DELETION], counts[SpreadKind.TRADE]
    )
    if amounts.total == 0:
        raise EmptyEventList("no spread-changing events to count")
    return amounts


def balance_deviation(amounts: RelativeAmounts) -> Fraction:
    """Distance ``T + D - 1/2`` from the line of balance; negative when
    placements into the spread outnumber exits."""
    return amounts.T + amounts.D - Fraction(1, 2)


# CSV

AMOUNTS_COLUMNS = ("symbol", "date", "O", "D", "T", "total", "deviation")
EVENT_COLUMNS = (
    "timestamp_ns", "symbol", "kind", "sign", "mid2_before", "mid2_after",
    "event_price", "side", "spread_changed", "legs",
)


def _fmt(x: Fraction) -> str:
    return repr(float(x))


def write_amounts_csv(rows: Iterable[tuple[str, str, RelativeAmounts]], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(AMOUNTS_COLUMNS)
    for symbol, date, a in rows:
        w.writerow((symbol, date, _fmt(a.O), _fmt(a.D), _fmt(a.T), a.total,
                    _fmt(balance_deviation(a))))


def write_events_csv(events: Iterable[SpreadChangeEvent], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(EVENT_COLUMNS)
    for e in events:
        w.writerow((
            e.timestamp, e.symbol, e.kind.value, e.sign, e.mid2_before,
            "" if e.mid2_after is None else e.mid2_after, e.event_price, e.side.value,
            int(e.spread_changed), e.legs,
        ))


def read_events_csv(stream: TextIO) -> Iterator[SpreadChangeEvent]:
    reader = csv.DictReader(stream)
    if tuple(reader.fieldnames or ()) != EVENT_COLUMNS:
        raise SchemaMismatch(f"header {reader.fieldnames} does not match {list(EVENT_COLUMNS)}")
    for row in reader:
        yield SpreadChangeEvent(
            int(row["timestamp_ns"]), row["symbol"], SpreadKind(row["kind"]), int(row["sign"]),
            int(row["mid2_before"]),
            int(row["mid2_after"]) if row["mid2_after"] else None,
            int(row["event_price"]), Side(row["side"]), bool(int(row["spread_changed"])),
            int(row["legs"]),
        )
