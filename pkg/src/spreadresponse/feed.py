"""ITCH 5.0 subset decoder/encoder and the CSV fallback format.

Wire framing: every message is preceded by a big-endian uint16 giving the
number of bytes that follow (message code + payload), exactly as in the
NASDAQ binary file distribution. All layouts below are the ITCH 5.0
layouts; the table lists payload sizes, i.e. without the code byte.

    code  meaning                         payload  decoded as
    R     stock directory                 38       symbol table update
    A     add order (no MPID)             35       Add
    F     add order (MPID attribution)    39       Add
    E     order executed                  30       Execute
    C     order executed with price       35       Execute
    X     order cancel                    22       Cancel
    D     order delete                    18       Delete
    U     order replace                   34       Replace

Every other code (system events, trading actions, cross and non-cross
trades, NOII, ...) is framed and skipped. Prices arrive in 1e-4 dollars
and are stored as integer 0.01 ticks; a price that is not a whole number of
ticks is rejected.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator, Mapping, Sequence, TextIO

from .errors import (
    MalformedMessage,
    ParseError,
    SchemaMismatch,
    TruncatedStream,
    UnencodableEvent,
    UnknownSymbolLocate,
)
from .events import NS_PER_MS, EventKind, OrderEvent, Side, partition_by_symbol

PRICE_UNITS_PER_TICK = 100  # ITCH 1e-4 -> 0.01 tick

# header = locate(H) tracking(H) timestamp(6 bytes, split as H + I)
_HDR = "HHHI"
LAYOUTS: dict[bytes, struct.Struct] = {
    b"R": struct.Struct(">" + _HDR + "8sccIcc2scccccIc"),
    b"A": struct.Struct(">" + _HDR + "QcI8sI"),
    b"F": struct.Struct(">" + _HDR + "QcI8sI4s"),
    b"E": struct.Struct(">" + _HDR + "QIQ"),
    b"C": struct.Struct(">" + _HDR + "QIQcI"),
    b"X": struct.Struct(">" + _HDR + "QI"),
    b"D": struct.Struct(">" + _HDR + "Q"),
    b"U": struct.Struct(">" + _HDR + "QQII"),
}
ORDER_CODES = frozenset(b"AFECXDU")
_LEN = struct.Struct(">H")


class _Skip:
    __slots__ = ()

    def __repr__(self) -> str:
        return "Skip"

    def __bool__(self) -> bool:
        return False


Skip = _Skip()


@dataclass(frozen=True, slots=True)
class RawMessage:
    """A framed message: ``kind`` is the code byte, ``payload`` what follows it."""

    kind: bytes
    payload: bytes

    @property
    def length(self) -> int:
        return len(self.payload)

    def to_bytes(self) -> bytes:
        return _LEN.pack(1 + len(self.payload)) + self.kind + self.payload


@dataclass
class ParseResult:
    events: dict[str, list[OrderEvent]] = field(default_factory=dict)
    parsed: int = 0
    skipped: int = 0
    dropped: int = 0
    symbol_table: dict[int, str] = field(default_factory=dict)


def _ticks(raw_price: int, offset: int | None) -> int:
    ticks, rem = divmod(raw_price, PRICE_UNITS_PER_TICK)
    if rem:
        raise MalformedMessage(f"price {raw_price} is not a whole number of 0.01 ticks", offset)
    return ticks


def _side(code: bytes, offset: int | None) -> Side:
    if code == b"B":
        return Side.BID
    if code == b"S":
        return Side.ASK
    raise MalformedMessage(f"bad buy/sell indicator {code!r}", offset)


def _symbol(symbol_table: Mapping[int, str], locate: int, offset: int | None) -> str:
    try:
        return symbol_table[locate]
    except KeyError:
        raise UnknownSymbolLocate(locate, offset) from None


def parse_directory(raw: RawMessage, offset: int | None = None) -> tuple[int, str]:
    """Decode an R message into ``(locate, symbol)``."""
    layout = LAYOUTS[b"R"]
    if len(raw.payload) != layout.size:
        raise MalformedMessage(
            f"R payload is {len(raw.payload)} bytes, expected {layout.size}", offset
        )
    fields = layout.unpack(raw.payload)
    return fields[0], fields[4].decode("ascii").rstrip()


def parse_message(
    raw: RawMessage, symbol_table: Mapping[int, str], offset: int | None = None
) -> OrderEvent | _Skip:
    try:
        return _decode(raw, symbol_table, offset)
    except ValueError as exc:  # OrderEvent field invariants
        raise MalformedMessage(str(exc), offset) from None


def _decode(raw: RawMessage, symbol_table: Mapping[int, str], offset: int | None):
    kind = raw.kind
    if len(kind) != 1 or kind[0] not in ORDER_CODES:
        return Skip
    layout = LAYOUTS[kind]
    payload = raw.payload
    if len(payload) != layout.size:
        raise MalformedMessage(
            f"{kind.decode()} payload is {len(payload)} bytes, expected {layout.size}", offset
        )
    f = layout.unpack(payload)
    symbol = _symbol(symbol_table, f[0], offset)
    ts = (f[2] << 32) | f[3]
    ref = f[4]

    if kind == b"A" or kind == b"F":
        return OrderEvent(
            ts, symbol, ref, EventKind.ADD,
            side=_side(f[5], offset), price=_ticks(f[8], offset), shares=f[6],
        )
    if kind == b"E" or kind == b"C":
        return OrderEvent(ts, symbol, ref, EventKind.EXECUTE, shares=f[5])
    if kind == b"X":
        return OrderEvent(ts, symbol, ref, EventKind.CANCEL, shares=f[5])
    if kind == b"D":
        return OrderEvent(ts, symbol, ref, EventKind.DELETE)
    # U
    return OrderEvent(
        ts, symbol, ref, EventKind.REPLACE,
        new_order_id=f[5], new_shares=f[6], new_price=_ticks(f[7], offset),
    )


def iter_frames(data: bytes | bytearray | memoryview) -> Iterator[tuple[int, RawMessage]]:
    """Yield ``(offset, message)`` for every framed message in ``data``."""
    view = memoryview(data)
    n = len(view)
    pos = 0
    while pos < n:
        if n - pos < 2:
            raise TruncatedStream(pos, 2, n - pos)
        (length,) = _LEN.unpack_from(view, pos)
        if length == 0:
            raise MalformedMessage("zero-length frame", pos)
        end = pos + 2 + length
        if end > n:
            raise TruncatedStream(pos, 2 + length, n - pos)
        yield pos, RawMessage(bytes(view[pos + 2 : pos + 3]), bytes(view[pos + 3 : end]))
        pos = end


def parse_stream(
    source: bytes | bytearray | memoryview | BinaryIO,
    universe: Iterable[str] | None = None,
) -> ParseResult:
    """Decode a framed stream into per-symbol, timestamp-ordered event lists.

    ``universe=None`` keeps every symbol. Stock directory messages feed the
    locate table and count as skipped.
    """
    if hasattr(source, "read"):
        source = source.read()
    keep = None if universe is None else frozenset(universe)
    result = ParseResult()
    table = result.symbol_table
    for offset, raw in iter_frames(source):
        if raw.kind == b"R":
            locate, symbol = parse_directory(raw, offset)
            table[locate] = symbol
            result.skipped += 1
            continue
        ev = parse_message(raw, table, offset)
        if ev is Skip:
            result.skipped += 1
            continue
        if keep is not None and ev.symbol not in keep:
            result.dropped += 1
            continue
        result.parsed += 1
        result.events.setdefault(ev.symbol, []).append(ev)
    for sym, evs in result.events.items():
        if any(a.timestamp > b.timestamp for a, b in zip(evs, evs[1:])):
            evs.sort(key=lambda e: e.timestamp)  # stable
    return result


# encoding


def _hdr(locate: int, ts: int) -> tuple[int, int, int, int]:
    if not 0 <= ts < 1 << 48:
        raise UnencodableEvent(f"timestamp {ts} does not fit in 48 bits")
    return locate, 0, ts >> 32, ts & 0xFFFFFFFF


def _price(ticks: int) -> int:
    raw = ticks * PRICE_UNITS_PER_TICK
    if not 0 < raw < 1 << 32:
        raise UnencodableEvent(f"price {ticks} ticks does not fit the 32-bit price field")
    return raw


def directory_message(locate: int, symbol: str) -> RawMessage:
    sym = symbol.encode("ascii")
    if len(sym) > 8:
        raise UnencodableEvent(f"symbol {symbol!r} longer than 8 characters")
    payload = LAYOUTS[b"R"].pack(
        *_hdr(locate, 0), sym.ljust(8), b"Q", b"N", 100, b"N", b"C", b"Z ", b"P",
        b"N", b"N", b"1", b"N", 0, b"N",
    )
    return RawMessage(b"R", payload)


def encode_message(ev: OrderEvent, locate: int, match_number: int = 0) -> RawMessage:
    for name in ("order_id", "new_order_id"):
        v = getattr(ev, name)
        if v is not None and not 0 <= v < 1 << 64:
            raise UnencodableEvent(f"{name} {v} does not fit in 64 bits")
    for name in ("shares", "new_shares"):
        v = getattr(ev, name)
        if v is not None and not 0 < v < 1 << 32:
            raise UnencodableEvent(f"{name} {v} does not fit in 32 bits")
    h = _hdr(locate, ev.timestamp)
    k = ev.kind
    if k is EventKind.ADD:
        payload = LAYOUTS[b"A"].pack(
            *h, ev.order_id, ev.side.value.encode(), ev.shares,
            ev.symbol.encode("ascii").ljust(8), _price(ev.price),
        )
        return RawMessage(b"A", payload)
    if k is EventKind.EXECUTE:
        return RawMessage(b"E", LAYOUTS[b"E"].pack(*h, ev.order_id, ev.shares, match_number))
    if k is EventKind.CANCEL:
        return RawMessage(b"X", LAYOUTS[b"X"].pack(*h, ev.order_id, ev.shares))
    if k is EventKind.DELETE:
        return RawMessage(b"D", LAYOUTS[b"D"].pack(*h, ev.order_id))
    if k is EventKind.REPLACE:
        payload = LAYOUTS[b"U"].pack(
            *h, ev.order_id, ev.new_order_id, ev.new_shares, _price(ev.new_price)
        )
        return RawMessage(b"U", payload)
    raise UnencodableEvent(f"unsupported event kind {k!r}")


def _merge(streams: Mapping[str, Sequence[OrderEvent]]) -> list[OrderEvent]:
    merged = [ev for sym in sorted(streams) for ev in streams[sym]]
    merged.sort(key=lambda e: e.timestamp)  # stable: ties keep symbol order
    return merged


def encode_stream(
    events: Mapping[str, Sequence[OrderEvent]] | Sequence[OrderEvent],
) -> bytes:
    """Frame events as an ITCH byte stream, preceded by a stock directory.

    Locate codes are assigned 1..N in alphabetical symbol order.
    """
    if isinstance(events, Mapping):
        flat = _merge(events)
    else:
        flat = list(events)
    symbols = sorted({ev.symbol for ev in flat})
    locates = {sym: i for i, sym in enumerate(symbols, start=1)}
    out = bytearray()
    for sym in symbols:
        out += directory_message(locates[sym], sym).to_bytes()
    match = 0
    for ev in flat:
        if ev.kind is EventKind.EXECUTE:
            match += 1
        out += encode_message(ev, locates[ev.symbol], match).to_bytes()
    return bytes(out)


# CSV

CSV_COLUMNS = (
    "timestamp_ns",
    "symbol",
    "kind",
    "order_id",
    "side",
    "price_ticks",
    "shares",
    "new_order_id",
    "new_price_ticks",
    "new_shares",
)


def _opt(v: object) -> str:
    return "" if v is None else str(v)


def write_csv(events: Iterable[OrderEvent], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for ev in events:
        w.writerow(
            (
                ev.timestamp,
                ev.symbol,
                ev.kind.value,
                ev.order_id,
                "" if ev.side is None else ev.side.value,
                _opt(ev.price),
                _opt(ev.shares),
                _opt(ev.new_order_id),
                _opt(ev.new_price),
                _opt(ev.new_shares),
            )
        )


def events_to_csv(events: Iterable[OrderEvent]) -> str:
    buf = io.StringIO()
    write_csv(events, buf)
    return buf.getvalue()


def _int_or_none(s: str) -> int | None:
    s = s.strip()
    return int(s) if s else None


def ingest_csv(
    stream: TextIO | Iterable[str],
    schema: Sequence[str] = CSV_COLUMNS,
    time_unit: str = "ns",
) -> list[OrderEvent]:
    """Read the CSV event format. ``time_unit="ms"`` scales timestamps to ns."""
    if time_unit not in ("ns", "ms"):
        raise ValueError(f"time_unit must be 'ns' or 'ms', got {time_unit!r}")
    scale = NS_PER_MS if time_unit == "ms" else 1
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise SchemaMismatch("missing header row")
    if tuple(h.strip() for h in header) != tuple(schema):
        raise SchemaMismatch(f"header {header} does not match {list(schema)}")
    col = {name: i for i, name in enumerate(schema)}
    out: list[OrderEvent] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(schema):
            raise ParseError(f"expected {len(schema)} fields, got {len(row)}", lineno)
        try:
            side = row[col["side"]].strip()
            ev = OrderEvent(
                timestamp=int(row[col["timestamp_ns"]]) * scale,
                symbol=row[col["symbol"]].strip(),
                order_id=int(row[col["order_id"]]),
                kind=EventKind(row[col["kind"]].strip()),
                side=Side(side) if side else None,
                price=_int_or_none(row[col["price_ticks"]]),
                shares=_int_or_none(row[col["shares"]]),
                new_order_id=_int_or_none(row[col["new_order_id"]]),
                new_price=_int_or_none(row[col["new_price_ticks"]]),
                new_shares=_int_or_none(row[col["new_shares"]]),
            )
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        out.append(ev)
    out.sort(key=lambda e: e.timestamp)
    return out


def ingest_csv_by_symbol(stream: TextIO, universe: Iterable[str] | None = None) -> ParseResult:
    """CSV counterpart of :func:`parse_stream`."""
    keep = None if universe is None else frozenset(universe)
    events = ingest_csv(stream)
    result = ParseResult()
    for sym, evs in partition_by_symbol(events).items():
        if keep is not None and sym not in keep:
            result.dropped += len(evs)
            continue
        result.events[sym] = evs
        result.parsed += len(evs)
    return result
