"""Canonical order-flow event shared by the binary and CSV decoders."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable


class EventKind(str, Enum):
    ADD = "add"
    EXECUTE = "execute"
    CANCEL = "cancel"
    DELETE = "delete"
    REPLACE = "replace"


class Side(str, Enum):
    BID = "B"
    ASK = "S"

    @property
    def opposite(self) -> "Side":
        return Side.ASK if self is Side.BID else Side.BID


NS_PER_SECOND = 1_000_000_000
NS_PER_MS = 1_000_000


@dataclass(frozen=True, slots=True)
class OrderEvent:
    """One decoded feed message.

    ``price`` and ``new_price`` are integer ticks of 0.01. ``side`` is only
    known on the wire for adds; for every other kind it is ``None`` and the
    book resolves it from the resting order.
    """

    timestamp: int
    symbol: str
    order_id: int
    kind: EventKind
    side: Side | None = None
    price: int | None = None
    shares: int | None = None
    new_order_id: int | None = None
    new_price: int | None = None
    new_shares: int | None = None

    def __post_init__(self) -> None:
        kind = self.kind
        if kind in (EventKind.ADD, EventKind.EXECUTE, EventKind.CANCEL):
            if self.shares is None or self.shares <= 0:
                raise ValueError(f"{kind.value} event needs positive shares: {self!r}")
        if kind is EventKind.ADD:
            if self.side is None or self.price is None or self.price <= 0:
                raise ValueError(f"add event needs a side and a positive price: {self!r}")
        if kind is EventKind.REPLACE:
            if (
                self.new_order_id is None
                or self.new_price is None
                or self.new_price <= 0
                or self.new_shares is None
                or self.new_shares <= 0
            ):
                raise ValueError(f"replace event needs new id/price/shares: {self!r}")


def partition_by_symbol(events: Iterable[OrderEvent]) -> dict[str, list[OrderEvent]]:
    out: dict[str, list[OrderEvent]] = {}
    for ev in events:
        out.setdefault(ev.symbol, []).append(ev)
    return out


def mirror_event(ev: OrderEvent, pivot: int) -> OrderEvent:
    """Swap bid/ask and reflect prices as ``pivot - price``.

    Mirroring a whole stream produces the mirror-image book: every bid
    becomes an ask at the reflected price and vice versa.
    """
    side = ev.side.opposite if ev.side is not None else None
    price = pivot - ev.price if ev.price is not None else None
    new_price = pivot - ev.new_price if ev.new_price is not None else None
    return replace(ev, side=side, price=price, new_price=new_price)
