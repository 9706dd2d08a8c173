"""Per-symbol limit order book reconstruction.

The book is a reconstructor, not a matching engine: executions arrive as
explicit messages, so an add that would cross the opposite best quote is
rejected as corrupt input instead of being matched.

Midpoints are kept exact as doubled tick prices (``bid + ask``); the public
``midpoint`` accessors return :class:`fractions.Fraction` values.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import (
    BookError,
    CrossedBookProduced,
    NoDefinedSpread,
    Overfill,
    UnknownOrderId,
)
from .events import EventKind, OrderEvent, Side

TICK = Fraction(1, 100)  # currency units per tick

LEG_ADD = "add"
LEG_REMOVE = "remove"


class DuplicateOrderId(BookError):
    pass


class OutOfOrderEvent(BookError):
    pass


@dataclass(frozen=True, slots=True)
class BookDelta:
    """Quotes around one applied event (or one leg of a replace).

    ``leg`` is ``None`` for plain events and ``"remove"``/``"add"`` for the
    two halves of a replace. ``removed`` is true when the affected order
    left the book entirely.
    """

    event: OrderEvent
    leg: str | None
    side: Side
    event_price: int
    shares: int
    removed: bool
    bid_before: int | None
    ask_before: int | None
    bid_after: int | None
    ask_after: int | None

    @property
    def timestamp(self) -> int:
        return self.event.timestamp

    @property
    def spread_changed(self) -> bool:
        return self.bid_before != self.bid_after or self.ask_before != self.ask_after

    @property
    def mid2_before(self) -> int | None:
        if self.bid_before is None or self.ask_before is None:
            return None
        return self.bid_before + self.ask_before

    @property
    def mid2_after(self) -> int | None:
        if self.bid_after is None or self.ask_after is None:
            return None
        return self.bid_after + self.ask_after

    @property
    def midpoint_before(self) -> Fraction | None:
        m = self.mid2_before
        return None if m is None else Fraction(m, 2)

    @property
    def midpoint_after(self) -> Fraction | None:
        m = self.mid2_after
        return None if m is None else Fraction(m, 2)

    @property
    def spread_after(self) -> int | None:
        if self.bid_after is None or self.ask_after is None:
            return None
        return self.ask_after - self.bid_after


class OrderBook:
    """Order map plus per-side aggregated price levels.

    ``bids``/``asks`` map price -> ``[total_shares, order_count]``; the
    sorted price lists are kept ascending on both sides.
    """

    __slots__ = ("symbol", "orders", "bids", "asks", "_bid_px", "_ask_px", "last_timestamp")

    def __init__(self, symbol: str = ""):
        self.symbol = symbol
        self.orders: dict[int, list] = {}  # id -> [side, price, shares]
        self.bids: dict[int, list[int]] = {}
        self.asks: dict[int, list[int]] = {}
        self._bid_px: list[int] = []
        self._ask_px: list[int] = []
        self.last_timestamp = 0

    # quotes

    @property
    def best_bid(self) -> int | None:
        return self._bid_px[-1] if self._bid_px else None

    @property
    def best_ask(self) -> int | None:
        return self._ask_px[0] if self._ask_px else None

    def best_quotes(self) -> tuple[int | None, int | None]:
        return self.best_bid, self.best_ask

    def midpoint(self) -> Fraction | None:
        bid, ask = self.best_bid, self.best_ask
        if bid is None or ask is None:
            return None
        return Fraction(bid + ask, 2)

    def spread(self) -> int | None:
        bid, ask = self.best_bid, self.best_ask
        if bid is None or ask is None:
            return None
        return ask - bid

    # level bookkeeping

    def _levels(self, side: Side) -> tuple[dict[int, list[int]], list[int]]:
        if side is Side.BID:
            return self.bids, self._bid_px
        return self.asks, self._ask_px

    def _insert(self, order_id: int, side: Side, price: int, shares: int) -> None:
        self.orders[order_id] = [side, price, shares]
        levels, prices = self._levels(side)
        lvl = levels.get(price)
        if lvl is None:
            levels[price] = [shares, 1]
            insort(prices, price)
        else:
            lvl[0] += shares
            lvl[1] += 1

    def _reduce(self, order_id: int, order: list, shares: int) -> bool:
        side, price, resting = order
        levels, prices = self._levels(side)
        lvl = levels[price]
        if shares == resting:
            del self.orders[order_id]
            lvl[1] -= 1
        else:
            order[2] = resting - shares
        lvl[0] -= shares
        if lvl[1] == 0:
            del levels[price]
            del prices[bisect_left(prices, price)]
            return True
        return shares == resting

    def _check_add(self, order_id: int, side: Side, price: int) -> None:
        if order_id in self.orders:
            raise DuplicateOrderId(f"order {order_id} already resting")
        if side is Side.BID:
            ask = self.best_ask
            if ask is not None and price >= ask:
                raise CrossedBookProduced(f"bid {price} would cross best ask {ask}")
        else:
            bid = self.best_bid
            if bid is not None and price <= bid:
                raise CrossedBookProduced(f"ask {price} would cross best bid {bid}")

    def _resting(self, order_id: int) -> list:
        try:
            return self.orders[order_id]
        except KeyError:
            raise UnknownOrderId(f"order {order_id} is not in the {self.symbol or ''} book") from None

    # events

    def apply(self, event: OrderEvent) -> list[BookDelta]:
        """Apply one event; a replace yields two deltas (remove leg, add leg).

        Raises before mutating anything, so a rejected event leaves the book
        untouched.
        """
        if event.timestamp < self.last_timestamp:
            raise OutOfOrderEvent(
                f"event at {event.timestamp} ns precedes book time {self.last_timestamp} ns"
            )
        kind = event.kind
        bid0, ask0 = self.best_bid, self.best_ask

        if kind is EventKind.ADD:
            self._check_add(event.order_id, event.side, event.price)
            self._insert(event.order_id, event.side, event.price, event.shares)
            self.last_timestamp = event.timestamp
            return [
                BookDelta(event, None, event.side, event.price, event.shares, False,
                          bid0, ask0, self.best_bid, self.best_ask)
            ]

        order = self._resting(event.order_id)
        side, price, resting = order

        if kind is EventKind.EXECUTE or kind is EventKind.CANCEL:
            if event.shares > resting:
                raise Overfill(
                    f"{kind.value} of {event.shares} shares exceeds {resting} resting "
                    f"on order {event.order_id}"
                )
            self._reduce(event.order_id, order, event.shares)
            self.last_timestamp = event.timestamp
            return [
                BookDelta(event, None, side, price, event.shares, event.shares == resting,
                          bid0, ask0, self.best_bid, self.best_ask)
            ]

        if kind is EventKind.DELETE:
            self._reduce(event.order_id, order, resting)
            self.last_timestamp = event.timestamp
            return [
                BookDelta(event, None, side, price, resting, True,
                          bid0, ask0, self.best_bid, self.best_ask)
            ]

        if kind is EventKind.REPLACE:
            new_id = event.new_order_id
            if new_id != event.order_id and new_id in self.orders:
                raise DuplicateOrderId(f"replacement id {new_id} already resting")
            # the old order sits on the same side, so removing it cannot
            # change the opposite quote the crossing check looks at
            opp = self.best_ask if side is Side.BID else self.best_bid
            np_ = event.new_price
            if opp is not None and (np_ >= opp if side is Side.BID else np_ <= opp):
                raise CrossedBookProduced(f"replacement price {np_} crosses {opp}")
            self._reduce(event.order_id, order, resting)
            bid1, ask1 = self.best_bid, self.best_ask
            self._insert(new_id, side, np_, event.new_shares)
            self.last_timestamp = event.timestamp
            return [
                BookDelta(event, LEG_REMOVE, side, price, resting, True,
                          bid0, ask0, bid1, ask1),
                BookDelta(event, LEG_ADD, side, np_, event.new_shares, False,
                          bid1, ask1, self.best_bid, self.best_ask),
            ]

        raise BookError(f"unsupported event kind {kind!r}")

    # inspection

    def snapshot(self) -> tuple[dict, dict, dict]:
        """Hashable-friendly copy of the full state, for equality checks."""
        orders = {oid: (o[0], o[1], o[2]) for oid, o in self.orders.items()}
        bids = {p: tuple(v) for p, v in self.bids.items()}
        asks = {p: tuple(v) for p, v in self.asks.items()}
        return orders, bids, asks

    def check_invariants(self) -> None:
        """Raise AssertionError if the level aggregates disagree with the orders."""
        for side, levels, prices in (
            (Side.BID, self.bids, self._bid_px),
            (Side.ASK, self.asks, self._ask_px),
        ):
            want: dict[int, list[int]] = {}
            for s, p, q in self.orders.values():
                if s is side:
                    assert q > 0
                    lvl = want.setdefault(p, [0, 0])
                    lvl[0] += q
                    lvl[1] += 1
            assert want == levels, f"{side.name} levels disagree with orders"
            assert prices == sorted(levels), f"{side.name} price index out of sync"
        bid, ask = self.best_bid, self.best_ask
        if bid is not None and ask is not None:
            assert bid < ask, f"crossed book {bid} >= {ask}"


def apply_event(book: OrderBook, event: OrderEvent) -> list[BookDelta]:
    return book.apply(event)


def best_quotes(book: OrderBook) -> tuple[int | None, int | None]:
    return book.best_quotes()


def midpoint(book: OrderBook) -> Fraction | None:
    return book.midpoint()


def spread(book: OrderBook) -> int | None:
    return book.spread()


def replay(events: Iterable[OrderEvent], book: OrderBook | None = None) -> tuple[OrderBook, list[BookDelta]]:
    book = OrderBook() if book is None else book
    deltas: list[BookDelta] = []
    for ev in events:
        deltas.extend(book.apply(ev))
    return book, deltas


def time_weighted_average_spread(
    deltas: Sequence[BookDelta], session: tuple[int, int]
) -> Fraction:
    """Time-weighted mean spread over ``session`` in currency units.

    The spread in force after the last delta at or before a time holds until
    the next delta; spans where one side of the book is empty are left out
    of both the weighted sum and the total duration. Deltas before the
    session open only establish the opening state.
    """
    t_open, t_close = session
    if t_close <= t_open:
        raise ValueError(f"empty session {session}")
    weighted = 0
    total = 0
    current: int | None = None
    t_prev = t_open
    for d in deltas:
        t = d.timestamp
        if t > t_prev:
            t_end = min(t, t_close)
            if current is not None and t_end > t_prev:
                weighted += current * (t_end - t_prev)
                total += t_end - t_prev
            t_prev = max(t_prev, t_end)
            if t >= t_close:
                break
        current = d.spread_after
    else:
        if current is not None and t_close > t_prev:
            weighted += current * (t_close - t_prev)
            total += t_close - t_prev
    if total == 0:
        raise NoDefinedSpread(f"spread undefined over the whole session {session}")
    return Fraction(weighted, total) * TICK
