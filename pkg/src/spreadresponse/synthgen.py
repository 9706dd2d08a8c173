"""Zero-intelligence order-flow generator with ground-truth labels.

Each symbol runs an independent continuous-time process (Gillespie
sampling) with these channels:

* limit placements at ``placement_rate`` per second; when the spread is
  wider than one tick a placement lands inside its own half of the spread
  with probability ``improve_prob``, otherwise it rests ``behind`` ticks
  plus a geometric (``depth_p``) number of ticks behind its own best quote;
* deep placements at ``deep_rate`` per second, ``deep_offset`` ticks or more
  behind the opposite quote (background traffic that never touches the
  quotes);
* removals of resting orders at ``cancel_rate`` per second *per resting
  order* (full delete, partial cancel, or replace);
* market orders at ``market_rate`` per second, sweeping the opposite side
  in price-time priority.

The last ordinary order on a side is never fully removed, so after the
seed book is laid down both quotes always exist and deep orders never
become the best quote.

An optional market-wide shock process plants cross-symbol impact: at each
shock every symbol, with probability ``impact``, receives a market order of
the shock's sign that clears its best opposite level, the first symbol at
the shock time and the others ``impact_lag_s`` later.

The generator keeps its own book and records, from the action it took,
which events moved a quote and why. Tests compare the classifier against
these labels, never against a recomputation.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_left, insort
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InfeasibleConfig
from .events import NS_PER_SECOND, EventKind, OrderEvent, Side
from .feed import encode_stream

SESSION_OPEN_NS = (9 * 3600 + 40 * 60) * NS_PER_SECOND
SESSION_CLOSE_NS = (15 * 3600 + 50 * 60) * NS_PER_SECOND


@dataclass
class GeneratorConfig:
    seed: int = 0
    symbols: list[str] = field(default_factory=lambda: ["AAA"])
    session: tuple[int, int] = (SESSION_OPEN_NS, SESSION_CLOSE_NS)
    warmup_s: float = 60.0
    placement_rate: float = 10.0
    cancel_rate: float = 1.0  # per resting order
    market_rate: float = 1.1
    depth_p: float = 0.6
    improve_prob: float = 0.6
    behind: int = 1
    deep_rate: float = 0.0
    deep_offset: int = 50
    lot_size: int = 100
    size_p: float = 0.5
    market_size_p: float = 0.5
    partial_cancel_prob: float = 0.1
    replace_prob: float = 0.1
    initial_price: int = 10_000
    initial_levels: int = 5
    orders_per_level: int = 2
    shock_rate: float = 0.0
    impact: float = 0.0
    impact_lag_s: float = 0.0
    checkpoint_every: int = 0

    def validate(self) -> None:
        if self.placement_rate <= 0:
            raise InfeasibleConfig(
                "placement_rate must be > 0; without placements the book empties for good"
            )
        for name in ("cancel_rate", "market_rate", "shock_rate", "warmup_s", "impact_lag_s",
                     "deep_rate", "deep_offset", "behind"):
            if getattr(self, name) < 0:
                raise InfeasibleConfig(f"{name} must be >= 0")
        for name in ("depth_p", "size_p", "market_size_p"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise InfeasibleConfig(f"{name} must lie in (0, 1), got {v}")
        for name in ("partial_cancel_prob", "replace_prob", "impact", "improve_prob"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise InfeasibleConfig(f"{name} must lie in [0, 1], got {v}")
        if self.partial_cancel_prob + self.replace_prob > 1:
            raise InfeasibleConfig("partial_cancel_prob + replace_prob exceeds 1")
        if self.lot_size <= 0 or self.initial_price <= 1 or self.initial_levels < 1:
            raise InfeasibleConfig("lot_size, initial_price and initial_levels must be positive")
        if self.orders_per_level < 1:
            raise InfeasibleConfig("orders_per_level must be >= 1")
        t0, t1 = self.session
        if not 0 <= t0 - self.warmup_s * NS_PER_SECOND or t1 <= t0:
            raise InfeasibleConfig(f"bad session {self.session} for warmup {self.warmup_s}s")
        if not self.symbols or len(set(self.symbols)) != len(self.symbols):
            raise InfeasibleConfig("symbols must be a non-empty list of distinct names")


def _coerce(name: str, raw: str, default):
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if name == "symbols":
        return [s for s in raw.replace(",", " ").split() if s]
    if name == "session":
        a, b = raw.replace(",", " ").split()
        return (int(a), int(b))
    return raw


def load_config(text: str) -> GeneratorConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) into a config."""
    cfg = GeneratorConfig()
    known = {f.name for f in fields(GeneratorConfig)}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InfeasibleConfig(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise InfeasibleConfig(f"line {lineno}: unknown key {key!r}")
        try:
            setattr(cfg, key, _coerce(key, value, getattr(cfg, key)))
        except ValueError as exc:
            raise InfeasibleConfig(f"line {lineno}: {exc}") from None
    cfg.validate()
    return cfg


def dump_config(cfg: GeneratorConfig) -> str:
    lines = []
    for f in fields(GeneratorConfig):
        v = getattr(cfg, f.name)
        if f.name == "symbols":
            v = " ".join(v)
        elif f.name == "session":
            v = f"{v[0]} {v[1]}"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def load_config_file(path: str | Path) -> GeneratorConfig:
    return load_config(Path(path).read_text())


@dataclass(frozen=True, slots=True)
class Label:
    """Generator's account of one quote-changing event (or replace leg)."""

    timestamp: int
    kind: str  # "trade" | "deletion" | "placement"
    side: Side
    two_sided_before: bool
    index: int  # position of the event in its symbol's stream


@dataclass
class GroundTruth:
    labels: dict[str, list[Label]] = field(default_factory=dict)
    # per market order: (timestamp, quote-changing executions, index of its last event)
    aggressors: dict[str, list[tuple[int, int, int]]] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    # (event index after which the snapshot holds, bids, asks); levels are
    # price -> (total shares, order count)
    checkpoints: dict[str, list[tuple[int, dict, dict]]] = field(default_factory=dict)

    def quote_changing_aggressors(self, symbol: str) -> int:
        return sum(1 for _, n, _ in self.aggressors.get(symbol, []) if n > 0)


class _SymbolSim:
    def __init__(self, cfg: GeneratorConfig, symbol: str, rng: random.Random, id_base: int):
        self.cfg = cfg
        self.symbol = symbol
        self.rng = rng
        self.next_id = id_base
        # order id -> [side, price, shares]
        self.orders: dict[int, list] = {}
        self.ids: list[int] = []
        self.pos: dict[int, int] = {}
        # price -> list of order ids in time priority
        self.bid_q: dict[int, list[int]] = {}
        self.ask_q: dict[int, list[int]] = {}
        self.bid_px: list[int] = []
        self.ask_px: list[int] = []
        self.events: list[OrderEvent] = []
        self.labels: list[Label] = []
        self.aggressors: list[tuple[int, int, int]] = []
        self.checkpoints: list[tuple[int, dict, dict]] = []
        self.last_ref = cfg.initial_price
        # orders from the deep channel, and per-side counts of the others
        self.deep: set[int] = set()
        self.near = {Side.BID: 0, Side.ASK: 0}

    # book helpers

    def best(self) -> tuple[int | None, int | None]:
        return (self.bid_px[-1] if self.bid_px else None, self.ask_px[0] if self.ask_px else None)

    def _q(self, side: Side):
        return (self.bid_q, self.bid_px) if side is Side.BID else (self.ask_q, self.ask_px)

    def _rest(self, oid: int, side: Side, price: int, shares: int, deep: bool = False) -> None:
        self.orders[oid] = [side, price, shares]
        if deep:
            self.deep.add(oid)
        else:
            self.near[side] += 1
        self.pos[oid] = len(self.ids)
        self.ids.append(oid)
        q, px = self._q(side)
        if price in q:
            q[price].append(oid)
        else:
            q[price] = [oid]
            insort(px, price)

    def _unrest(self, oid: int) -> None:
        side, price, _ = self.orders.pop(oid)
        if oid in self.deep:
            self.deep.remove(oid)
        else:
            self.near[side] -= 1
        i = self.pos.pop(oid)
        last = self.ids.pop()
        if last != oid:
            self.ids[i] = last
            self.pos[last] = i
        q, px = self._q(side)
        lvl = q[price]
        lvl.remove(oid)
        if not lvl:
            del q[price]
            del px[bisect_left(px, price)]

    def _new_id(self) -> int:
        self.next_id += 1
        return self.next_id

    def _geom(self, p: float) -> int:
        """Number of failures before the first success, P(0) = p."""
        u = self.rng.random()
        return int(math.log1p(-u) / math.log1p(-p)) if u > 0 else 0

    def _shares(self) -> int:
        return self.cfg.lot_size * (1 + self._geom(self.cfg.size_p))

    def _price(self, side: Side) -> int:
        bid, ask = self.best()
        if bid is not None and ask is not None:
            self.last_ref = (bid + ask) // 2
            if ask - bid > 1 and self.rng.random() < self.cfg.improve_prob:
                # inside the own half of the spread, at most half a tick past the midpoint
                step = self.rng.randint(1, (ask - bid + 1) // 2)
                return bid + step if side is Side.BID else ask - step
        return self._rest_price(side, self.cfg.behind)

    def _rest_price(self, side: Side, offset: int) -> int:
        """``offset`` plus a geometric number of ticks behind the own best."""
        bid, ask = self.best()
        g = offset + self._geom(self.cfg.depth_p)
        if side is Side.BID:
            if bid is not None:
                return max(1, bid - g)
            anchor = ask if ask is not None else self.last_ref + 1
            return max(1, anchor - 1 - g)
        if ask is not None:
            return ask + g
        anchor = bid if bid is not None else self.last_ref - 1
        return anchor + 1 + g

    def _last_near(self, oid: int) -> bool:
        """True for the only non-deep order left on its side. Such an order
        is never fully removed, so a side can not empty down to deep orders."""
        return oid not in self.deep and self.near[self.orders[oid][0]] == 1

    def _deep_price(self, side: Side) -> int:
        # anchored on the opposite quote so deep orders stay far from the action
        bid, ask = self.best()
        g = self._geom(self.cfg.depth_p) + self.cfg.deep_offset
        if side is Side.BID:
            anchor = ask if ask is not None else (bid + 1 if bid is not None else self.last_ref + 1)
            return max(1, anchor - 1 - g)
        anchor = bid if bid is not None else (ask - 1 if ask is not None else self.last_ref - 1)
        return anchor + 1 + g

    # emission

    def _emit(self, ev: OrderEvent, labels: Sequence[tuple[str, Side, tuple, tuple]]) -> None:
        index = len(self.events)
        self.events.append(ev)
        for kind, side, before, after in labels:
            if before != after:
                two_sided = before[0] is not None and before[1] is not None
                self.labels.append(Label(ev.timestamp, kind, side, two_sided, index))
        every = self.cfg.checkpoint_every
        if every and len(self.events) % every == 0:
            self.checkpoints.append((len(self.events), *self.levels()))

    def levels(self) -> tuple[dict, dict]:
        out = []
        for q in (self.bid_q, self.ask_q):
            lv = {}
            for p, ids in q.items():
                lv[p] = (sum(self.orders[i][2] for i in ids), len(ids))
            out.append(lv)
        return out[0], out[1]

    # actions

    def place(self, t: int, side: Side | None = None, deep: bool = False) -> None:
        side = side or (Side.BID if self.rng.random() < 0.5 else Side.ASK)
        price = self._deep_price(side) if deep else self._price(side)
        shares = self._shares()
        oid = self._new_id()
        before = self.best()
        self._rest(oid, side, price, shares, deep)
        ev = OrderEvent(t, self.symbol, oid, EventKind.ADD, side=side, price=price, shares=shares)
        self._emit(ev, [("placement", side, before, self.best())])

    def _delete(self, t: int, oid: int) -> None:
        side = self.orders[oid][0]
        before = self.best()
        self._unrest(oid)
        ev = OrderEvent(t, self.symbol, oid, EventKind.DELETE)
        self._emit(ev, [("deletion", side, before, self.best())])

    def remove(self, t: int) -> bool:
        if not self.ids:
            return False
        rng = self.rng
        oid = self.ids[rng.randrange(len(self.ids))]
        side, price, shares = self.orders[oid]
        u = rng.random()
        cfg = self.cfg
        before = self.best()
        last_near = self._last_near(oid)
        if u < cfg.partial_cancel_prob and shares > cfg.lot_size:
            cut = cfg.lot_size * rng.randrange(1, shares // cfg.lot_size)
            self.orders[oid][2] -= cut
            ev = OrderEvent(t, self.symbol, oid, EventKind.CANCEL, shares=cut)
            self._emit(ev, [])
        elif last_near:
            return False
        elif u < cfg.partial_cancel_prob + cfg.replace_prob:
            deep = oid in self.deep
            self._unrest(oid)
            mid = self.best()
            new_id = self._new_id()
            new_price = self._deep_price(side) if deep else self._price(side)
            new_shares = self._shares()
            self._rest(new_id, side, new_price, new_shares, deep)
            ev = OrderEvent(
                t, self.symbol, oid, EventKind.REPLACE,
                new_order_id=new_id, new_price=new_price, new_shares=new_shares,
            )
            self._emit(ev, [("deletion", side, before, mid), ("placement", side, mid, self.best())])
        else:
            self._delete(t, oid)
        return True

    def market(self, t: int, aggressor: Side | None = None, clear_best: bool = False) -> bool:
        """Market order from ``aggressor`` (BID = buy, consumes asks)."""
        aggressor = aggressor or (Side.BID if self.rng.random() < 0.5 else Side.ASK)
        passive = aggressor.opposite
        q, px = self._q(passive)
        if not px:
            return False
        if clear_best:
            best = px[-1] if passive is Side.BID else px[0]
            size = sum(self.orders[i][2] for i in q[best])
        else:
            size = self.cfg.lot_size * (1 + self._geom(self.cfg.market_size_p))
        changed = 0
        n0 = len(self.events)
        while size > 0 and px:
            best = px[-1] if passive is Side.BID else px[0]
            oid = q[best][0]
            resting = self.orders[oid][2]
            fill = min(size, resting)
            if fill == resting and self._last_near(oid):
                fill = resting - self.cfg.lot_size
                if fill <= 0:
                    break
                size = fill
            before = self.best()
            if fill == resting:
                self._unrest(oid)
            else:
                self.orders[oid][2] -= fill
            after = self.best()
            changed += before != after
            ev = OrderEvent(t, self.symbol, oid, EventKind.EXECUTE, shares=fill)
            self._emit(ev, [("trade", passive, before, after)])
            size -= fill
        if len(self.events) == n0:
            return False
        self.aggressors.append((t, changed, len(self.events) - 1))
        return True

    def seed_book(self, t0: int) -> int:
        cfg = self.cfg
        t = t0
        for lvl in range(cfg.initial_levels):
            for side, price in (
                (Side.BID, cfg.initial_price - 1 - lvl),
                (Side.ASK, cfg.initial_price + 1 + lvl),
            ):
                for _ in range(cfg.orders_per_level):
                    oid = self._new_id()
                    before = self.best()
                    shares = self._shares()
                    self._rest(oid, side, price, shares)
                    ev = OrderEvent(t, self.symbol, oid, EventKind.ADD, side=side, price=price, shares=shares)
                    self._emit(ev, [("placement", side, before, self.best())])
                    t += 1
        return t


def _sub_seeds(seed: int, n: int) -> list[int]:
    children = np.random.SeedSequence(seed & (2**64 - 1)).spawn(n)
    return [int(c.generate_state(2, dtype=np.uint64)[0]) for c in children]


def _shock_times(cfg: GeneratorConfig, rng: random.Random, t_start: int, t_end: int) -> list[tuple[int, Side]]:
    out = []
    if cfg.shock_rate <= 0:
        return out
    t = float(t_start)
    while True:
        t += rng.expovariate(cfg.shock_rate) * NS_PER_SECOND
        if t >= t_end:
            return out
        out.append((int(t), Side.BID if rng.random() < 0.5 else Side.ASK))


def _simulate(
    cfg: GeneratorConfig, symbol: str, index: int, seed: int,
    shocks: Sequence[tuple[int, Side]],
) -> _SymbolSim:
    rng = random.Random(seed)
    # disjoint id ranges per symbol keep order references unique feed-wide
    sim = _SymbolSim(cfg, symbol, rng, id_base=(index + 1) << 40)
    t_open, t_close = cfg.session
    t_start = t_open - int(cfg.warmup_s * NS_PER_SECOND)
    t = sim.seed_book(t_start)
    lag = 0 if index == 0 else int(cfg.impact_lag_s * NS_PER_SECOND)
    pending = [(ts + lag, side) for ts, side in shocks if rng.random() < cfg.impact]
    pending.reverse()  # pop from the end in time order
    lam_p, nu, lam_m, lam_d = cfg.placement_rate, cfg.cancel_rate, cfg.market_rate, cfg.deep_rate
    now = float(t)
    last = t - 1
    while True:
        total = lam_p + lam_d + lam_m + nu * len(sim.ids)
        now += rng.expovariate(total) * NS_PER_SECOND
        while pending and pending[-1][0] <= now:
            ts, side = pending.pop()
            if ts > t_close:
                pending.clear()
                break
            ts = max(ts, last + 1)
            if sim.market(ts, aggressor=side, clear_best=True):
                last = ts
        ts = max(int(now), last + 1)
        if ts > t_close:
            break
        u = rng.random() * total
        if u < lam_p:
            sim.place(ts)
        elif u < lam_p + lam_d:
            sim.place(ts, deep=True)
        elif u < lam_p + lam_d + lam_m:
            if not sim.market(ts):
                continue
        else:
            sim.remove(ts)
        last = ts
        now = max(now, float(ts))
    return sim


def generate(cfg: GeneratorConfig) -> tuple[dict[str, list[OrderEvent]], GroundTruth]:
    """Generate one day of order flow per symbol; deterministic in ``cfg.seed``."""
    cfg.validate()
    seeds = _sub_seeds(cfg.seed, len(cfg.symbols) + 1)
    shock_rng = random.Random(seeds[-1])
    t_open, t_close = cfg.session
    shocks = _shock_times(cfg, shock_rng, t_open, t_close)
    streams: dict[str, list[OrderEvent]] = {}
    truth = GroundTruth()
    for i, sym in enumerate(cfg.symbols):
        sim = _simulate(cfg, sym, i, seeds[i], shocks)
        streams[sym] = sim.events
        truth.labels[sym] = sim.labels
        truth.aggressors[sym] = sim.aggressors
        truth.counts[sym] = len(sim.events)
        truth.checkpoints[sym] = sim.checkpoints
    return streams, truth


def generate_events(cfg: GeneratorConfig, n_events: int) -> tuple[dict[str, list[OrderEvent]], GroundTruth]:
    """Like :func:`generate` but truncated to the first ``n_events`` per symbol.

    The session is extended as needed so that each symbol produces at least
    ``n_events`` events.
    """
    from dataclasses import replace as _replace

    t_open, t_close = cfg.session
    cur = cfg
    while True:
        streams, truth = generate(cur)
        if all(len(v) >= n_events for v in streams.values()):
            break
        t_close = t_open + 2 * (t_close - t_open)
        cur = _replace(cfg, session=(t_open, t_close))
    for sym in streams:
        streams[sym] = streams[sym][:n_events]
        truth.counts[sym] = len(streams[sym])
        truth.labels[sym] = [lb for lb in truth.labels[sym] if lb.index < n_events]
        truth.aggressors[sym] = [a for a in truth.aggressors[sym] if a[2] < n_events]
        truth.checkpoints[sym] = [c for c in truth.checkpoints[sym] if c[0] <= n_events]
    return streams, truth


def encode(events: Mapping[str, Sequence[OrderEvent]] | Sequence[OrderEvent]) -> bytes:
    """Binary ITCH encoding of generated events (round-trip partner of the parser)."""
    return encode_stream(events)


def flatten(streams: Mapping[str, Iterable[OrderEvent]]) -> list[OrderEvent]:
    """All symbols merged in timestamp order (ties: alphabetical symbol)."""
    merged = [ev for sym in sorted(streams) for ev in streams[sym]]
    merged.sort(key=lambda e: e.timestamp)
    return merged
