"""Compiled parse-and-replay loop for large ITCH files.

Does the same work as ``parse_stream`` followed by one ``OrderBook`` per
symbol, but in a single numba-compiled pass over the raw bytes without
building event objects. It keeps only what the quotes need: per-order
side/price/shares and per-level order counts. The output is the sequence
of quote changes, which tests compare against the pure-Python path.

Messages are replayed in file order, so a symbol whose timestamps go
backwards is an error here; ``parse_stream`` would sort it instead.
Symbol filtering is not supported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np
from numba import types
from numba.typed import Dict

from .book import CrossedBookProduced, DuplicateOrderId, OutOfOrderEvent
from .errors import (
    MalformedMessage,
    Overfill,
    TruncatedStream,
    UnknownOrderId,
    UnknownSymbolLocate,
)

# payload sizes without the code byte, indexed by code
_SIZES = np.zeros(256, dtype=np.int64)
for _code, _size in (("R", 38), ("A", 35), ("F", 39), ("E", 30), ("C", 35), ("X", 22), ("D", 18), ("U", 34)):
    _SIZES[ord(_code)] = _size

# error codes returned by the kernel
OK = 0
E_TRUNCATED = 1
E_ZERO_LENGTH = 2
E_BAD_LENGTH = 3
E_BAD_SIDE = 4
E_BAD_PRICE = 5
E_LOCATE = 6
E_UNKNOWN_ORDER = 7
E_OVERFILL = 8
E_CROSSED = 9
E_DUPLICATE = 10
E_OUT_OF_ORDER = 11
E_BAD_FIELD = 12

NONE = -1  # missing quote


@nb.njit(inline="always")
def _u16(b, i):
    return (np.int64(b[i]) << 8) | np.int64(b[i + 1])


@nb.njit(inline="always")
def _u32(b, i):
    return (np.int64(b[i]) << 24) | (np.int64(b[i + 1]) << 16) | (np.int64(b[i + 2]) << 8) | np.int64(b[i + 3])


@nb.njit(inline="always")
def _u48(b, i):
    return (_u16(b, i) << 32) | _u32(b, i + 2)


@nb.njit(inline="always")
def _u64(b, i):
    # order references are unsigned on the wire; the bit pattern is kept
    return np.int64((np.uint64(_u32(b, i)) << np.uint64(32)) | np.uint64(_u32(b, i + 4)))


@nb.njit(inline="always")
def _lkey(sym, side, price):
    return (sym << 33) | (side << 32) | price


@nb.njit(inline="always")
def _grow(a):
    out = np.empty(2 * a.shape[0], np.int64)
    out[: a.shape[0]] = a
    return out


@nb.njit(cache=True)
def _kernel(buf, max_symbols):
    n = buf.shape[0]
    sym_of_locate = np.full(65536, -1, np.int64)
    dir_offsets = np.empty(max_symbols, np.int64)
    nsym = 0
    bid = np.full(max_symbols, NONE, np.int64)
    ask = np.full(max_symbols, NONE, np.int64)
    depth = np.zeros((max_symbols, 2), np.int64)  # resting orders per side
    last_ts = np.zeros(max_symbols, np.int64)

    cap = 1 << 16
    o_sym = np.empty(cap, np.int64)
    o_side = np.empty(cap, np.int64)
    o_price = np.empty(cap, np.int64)
    o_shares = np.empty(cap, np.int64)
    free = np.empty(cap, np.int64)
    nfree = 0
    used = 0
    orders = Dict.empty(key_type=types.int64, value_type=types.int64)
    levels = Dict.empty(key_type=types.int64, value_type=types.int64)

    qcap = 1 << 16
    q_ts = np.empty(qcap, np.int64)
    q_sym = np.empty(qcap, np.int64)
    q_bid = np.empty(qcap, np.int64)
    q_ask = np.empty(qcap, np.int64)
    nq = 0

    parsed = 0
    skipped = 0
    pos = 0
    err = OK
    err_pos = 0
    err_val = 0

    while pos < n:
        if n - pos < 2:
            err, err_pos, err_val = E_TRUNCATED, pos, 2
            break
        length = _u16(buf, pos)
        if length == 0:
            err, err_pos = E_ZERO_LENGTH, pos
            break
        end = pos + 2 + length
        if end > n:
            err, err_pos, err_val = E_TRUNCATED, pos, 2 + length
            break
        code = np.int64(buf[pos + 2])
        size = _SIZES[code]
        if size == 0:
            skipped += 1
            pos = end
            continue
        if length - 1 != size:
            err, err_pos, err_val = E_BAD_LENGTH, pos, code
            break
        p = pos + 3
        locate = _u16(buf, p)
        if code == 82:  # R
            if sym_of_locate[locate] < 0:
                if nsym == max_symbols:
                    err, err_pos, err_val = E_BAD_FIELD, pos, locate
                    break
                sym_of_locate[locate] = nsym
                dir_offsets[nsym] = pos
                nsym += 1
            else:
                dir_offsets[sym_of_locate[locate]] = pos
            skipped += 1
            pos = end
            continue
        sym = sym_of_locate[locate]
        if sym < 0:
            err, err_pos, err_val = E_LOCATE, pos, locate
            break
        ts = _u48(buf, p + 4)
        if ts < last_ts[sym]:
            err, err_pos = E_OUT_OF_ORDER, pos
            break
        ref = _u64(buf, p + 10)
        new_ref = np.int64(0)
        new_shares = np.int64(0)
        new_price = np.int64(0)
        b0 = bid[sym]
        a0 = ask[sym]

        if code == 65 or code == 70:  # A, F
            sc = buf[p + 18]
            if sc == 66:
                side = 0
            elif sc == 83:
                side = 1
            else:
                err, err_pos = E_BAD_SIDE, pos
                break
            shares = _u32(buf, p + 19)
            raw = _u32(buf, p + 31)
            if raw % 100 != 0:
                err, err_pos = E_BAD_PRICE, pos
                break
            price = raw // 100
            if shares <= 0 or price <= 0:
                err, err_pos = E_BAD_FIELD, pos
                break
            if ref in orders:
                err, err_pos = E_DUPLICATE, pos
                break
            if (side == 0 and a0 != NONE and price >= a0) or (side == 1 and b0 != NONE and price <= b0):
                err, err_pos = E_CROSSED, pos
                break
            if nfree > 0:
                nfree -= 1
                slot = free[nfree]
            else:
                if used == o_sym.shape[0]:
                    o_sym = _grow(o_sym)
                    o_side = _grow(o_side)
                    o_price = _grow(o_price)
                    o_shares = _grow(o_shares)
                    free = _grow(free)
                slot = used
                used += 1
            o_sym[slot] = sym
            o_side[slot] = side
            o_price[slot] = price
            o_shares[slot] = shares
            orders[ref] = slot
            k = _lkey(sym, side, price)
            levels[k] = levels.get(k, 0) + 1
            depth[sym, side] += 1
            if side == 0:
                if b0 == NONE or price > b0:
                    bid[sym] = price
            elif a0 == NONE or price < a0:
                ask[sym] = price
        else:
            if ref not in orders:
                err, err_pos = E_UNKNOWN_ORDER, pos
                break
            slot = orders[ref]
            if o_sym[slot] != sym:
                err, err_pos = E_UNKNOWN_ORDER, pos
                break
            side = o_side[slot]
            price = o_price[slot]
            resting = o_shares[slot]
            if code == 85:  # U
                new_ref = _u64(buf, p + 18)
                new_shares = _u32(buf, p + 26)
                raw = _u32(buf, p + 30)
                if raw % 100 != 0:
                    err, err_pos = E_BAD_PRICE, pos
                    break
                new_price = raw // 100
                if new_shares <= 0 or new_price <= 0:
                    err, err_pos = E_BAD_FIELD, pos
                    break
                if new_ref != ref and new_ref in orders:
                    err, err_pos = E_DUPLICATE, pos
                    break
                if (side == 0 and a0 != NONE and new_price >= a0) or (side == 1 and b0 != NONE and new_price <= b0):
                    err, err_pos = E_CROSSED, pos
                    break
                cut = resting
            elif code == 68:  # D
                cut = resting
            else:  # E, C, X
                cut = _u32(buf, p + 18)
                if cut <= 0:
                    err, err_pos = E_BAD_FIELD, pos
                    break
                if cut > resting:
                    err, err_pos = E_OVERFILL, pos
                    break
            if cut < resting:
                o_shares[slot] = resting - cut
            else:
                del orders[ref]
                free[nfree] = slot
                nfree += 1
                depth[sym, side] -= 1
                k = _lkey(sym, side, price)
                c = levels[k] - 1
                if c > 0:
                    levels[k] = c
                else:
                    del levels[k]
                    if side == 0 and price == bid[sym]:
                        if depth[sym, 0] == 0:
                            bid[sym] = NONE
                        else:
                            q = price - 1
                            while _lkey(sym, 0, q) not in levels:
                                q -= 1
                            bid[sym] = q
                    elif side == 1 and price == ask[sym]:
                        if depth[sym, 1] == 0:
                            ask[sym] = NONE
                        else:
                            q = price + 1
                            while _lkey(sym, 1, q) not in levels:
                                q += 1
                            ask[sym] = q
            if code == 85:
                if bid[sym] != b0 or ask[sym] != a0:
                    # remove leg moved a quote; record it separately
                    if nq == q_ts.shape[0]:
                        q_ts = _grow(q_ts)
                        q_sym = _grow(q_sym)
                        q_bid = _grow(q_bid)
                        q_ask = _grow(q_ask)
                    q_ts[nq] = ts
                    q_sym[nq] = sym
                    q_bid[nq] = bid[sym]
                    q_ask[nq] = ask[sym]
                    nq += 1
                    b0 = bid[sym]
                    a0 = ask[sym]
                if nfree > 0:
                    nfree -= 1
                    slot = free[nfree]
                else:
                    if used == o_sym.shape[0]:
                        o_sym = _grow(o_sym)
                        o_side = _grow(o_side)
                        o_price = _grow(o_price)
                        o_shares = _grow(o_shares)
                        free = _grow(free)
                    slot = used
                    used += 1
                o_sym[slot] = sym
                o_side[slot] = side
                o_price[slot] = new_price
                o_shares[slot] = new_shares
                orders[new_ref] = slot
                k = _lkey(sym, side, new_price)
                levels[k] = levels.get(k, 0) + 1
                depth[sym, side] += 1
                if side == 0:
                    if b0 == NONE or new_price > b0:
                        bid[sym] = new_price
                elif a0 == NONE or new_price < a0:
                    ask[sym] = new_price

        last_ts[sym] = ts
        parsed += 1
        if bid[sym] != b0 or ask[sym] != a0:
            if nq == q_ts.shape[0]:
                q_ts = _grow(q_ts)
                q_sym = _grow(q_sym)
                q_bid = _grow(q_bid)
                q_ask = _grow(q_ask)
            q_ts[nq] = ts
            q_sym[nq] = sym
            q_bid[nq] = bid[sym]
            q_ask[nq] = ask[sym]
            nq += 1
        pos = end

    return (err, err_pos, err_val, parsed, skipped, nsym, dir_offsets[:nsym].copy(),
            q_ts[:nq].copy(), q_sym[:nq].copy(), q_bid[:nq].copy(), q_ask[:nq].copy(),
            bid[:nsym].copy(), ask[:nsym].copy(), len(orders))


@dataclass
class FastReplay:
    """Result of :func:`parse_replay`.

    ``quotes`` rows are quote changes in stream order: timestamp, symbol
    index into ``symbols``, best bid and best ask after the change (ticks,
    -1 when that side is empty). A replace that moves the quotes on both
    legs contributes two rows.
    """

    symbols: list[str]
    parsed: int
    skipped: int
    quote_times: np.ndarray
    quote_symbols: np.ndarray
    quote_bids: np.ndarray
    quote_asks: np.ndarray
    final_bids: np.ndarray
    final_asks: np.ndarray
    resting_orders: int

    @property
    def messages(self) -> int:
        return self.parsed + self.skipped

    def quotes_for(self, symbol: str) -> np.ndarray:
        """``(n, 3)`` array of timestamp, bid, ask for one symbol."""
        i = self.symbols.index(symbol)
        m = self.quote_symbols == i
        return np.column_stack((self.quote_times[m], self.quote_bids[m], self.quote_asks[m]))


def _raise(err: int, pos: int, val: int, n: int, buf: np.ndarray) -> None:
    if err == E_TRUNCATED:
        raise TruncatedStream(pos, val, n - pos)
    if err == E_ZERO_LENGTH:
        raise MalformedMessage("zero-length frame", pos)
    if err == E_BAD_LENGTH:
        raise MalformedMessage(f"{chr(val)} payload has the wrong length", pos)
    if err == E_BAD_SIDE:
        raise MalformedMessage("bad buy/sell indicator", pos)
    if err == E_BAD_PRICE:
        raise MalformedMessage("price is not a whole number of 0.01 ticks", pos)
    if err == E_BAD_FIELD:
        raise MalformedMessage("field out of range", pos)
    if err == E_LOCATE:
        raise UnknownSymbolLocate(val, pos)
    if err == E_UNKNOWN_ORDER:
        raise UnknownOrderId(f"order reference at byte offset {pos} is not resting")
    if err == E_OVERFILL:
        raise Overfill(f"execution or cancel at byte offset {pos} exceeds resting shares")
    if err == E_CROSSED:
        raise CrossedBookProduced(f"order at byte offset {pos} would cross the book")
    if err == E_DUPLICATE:
        raise DuplicateOrderId(f"order reference at byte offset {pos} is already resting")
    if err == E_OUT_OF_ORDER:
        raise OutOfOrderEvent(f"timestamp at byte offset {pos} goes backwards for its symbol")
    raise RuntimeError(f"unexpected kernel status {err}")


def parse_replay(data: bytes | bytearray | memoryview | np.ndarray, max_symbols: int = 65536) -> FastReplay:
    buf = np.frombuffer(data, dtype=np.uint8) if not isinstance(data, np.ndarray) else data
    (err, pos, val, parsed, skipped, nsym, dirs, qt, qs, qb, qa, fb, fa, resting) = _kernel(buf, max_symbols)
    if err != OK:
        _raise(err, pos, val, len(buf), buf)
    symbols = [bytes(buf[o + 13 : o + 21]).decode("ascii").rstrip() for o in dirs]
    return FastReplay(symbols, parsed, skipped, qt, qs, qb, qa, fb, fa, resting)


# building large benchmark files


def frame_offsets(data: bytes) -> np.ndarray:
    """Byte offsets of every frame (no validation beyond the length prefix)."""
    buf = np.frombuffer(data, dtype=np.uint8)
    return _frame_offsets(buf)


@nb.njit(cache=True)
def _frame_offsets(buf):
    out = np.empty(buf.shape[0] // 3 + 1, np.int64)
    k = 0
    pos = 0
    n = buf.shape[0]
    while pos + 2 <= n:
        out[k] = pos
        k += 1
        pos += 2 + ((np.int64(buf[pos]) << 8) | np.int64(buf[pos + 1]))
    return out[:k]


def tile_stream(data: bytes, copies: int) -> bytes:
    """Concatenate ``copies`` of a framed stream as disjoint instruments.

    Copy ``k`` gets its locate codes shifted by ``k`` times the number of
    directory entries, its symbols suffixed so they stay distinct, and its
    order references offset by ``k << 48``. Symbols must leave room for the
    suffix (at most 6 characters for up to 100 copies).
    """
    base = np.frombuffer(data, dtype=np.uint8)
    offs = frame_offsets(data)
    codes = base[offs + 2]
    n_dir = int((codes == ord("R")).sum())
    if n_dir * copies > 65535:
        raise ValueError("too many locate codes for the requested number of copies")
    width = len(str(copies - 1))
    ref1 = {ord(c): 13 for c in "AFECXDU"}  # first order reference, from frame start
    ref2 = {ord("U"): 21}
    for code, at in list(ref1.items()) + list(ref2.items()):
        sel = offs[codes == code] + at
        if np.any(base[sel]) or np.any(base[sel + 1]):
            raise ValueError("order references must fit in 48 bits to be tiled")
    out = []
    for k in range(copies):
        buf = base.copy()
        loc = (buf[offs + 3].astype(np.int64) << 8 | buf[offs + 4]) + k * n_dir
        buf[offs + 3] = (loc >> 8).astype(np.uint8)
        buf[offs + 4] = (loc & 0xFF).astype(np.uint8)
        if k:
            for code, at in list(ref1.items()) + list(ref2.items()):
                sel = offs[codes == code] + at
                # top two bytes of the big-endian uint64 carry the copy number
                buf[sel] = np.uint8(k >> 8)
                buf[sel + 1] = np.uint8(k & 0xFF)
        for o in offs[codes == ord("R")]:
            name = bytes(buf[o + 13 : o + 21]).decode("ascii").rstrip()
            tagged = f"{name}{k:0{width}d}"
            if len(tagged) > 8:
                raise ValueError(f"symbol {name!r} too long to tag")
            buf[o + 13 : o + 21] = np.frombuffer(tagged.ljust(8).encode("ascii"), dtype=np.uint8)
        out.append(buf.tobytes())
    return b"".join(out)
