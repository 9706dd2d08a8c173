"""Self-, cross- and market price response of spread-changing events.

Everything here works on log-midpoints. A trajectory is a right-continuous
step function of the log midpoint; an :class:`EventSeries` holds, per event,
its time, sign and the log midpoint immediately before it. The response at
lag tau is the mean of ``sign * (log m(t + tau) - log m_before(t))``.

Sums go through :func:`math.fsum`, so results do not depend on summation
order and negating all signs (or all log-midpoints) negates (or preserves)
every curve bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .book import BookDelta
from .classify import SpreadChangeEvent
from .errors import EmptyGrid, FewerThanTwoSymbols, NoEvents, UndefinedMidpoint
from .events import NS_PER_SECOND

SCALE_EVENT = "event"
SCALE_PHYSICAL = "physical"


def log_lag_grid(max_lag: int = 10_000, per_decade: int = 6) -> np.ndarray:
    """Integer lags 1..max_lag, log-spaced and deduplicated.

    The default density gives 1, 2, 3, 5, 7, 10, 15, 22, ... 10000.
    """
    if not 1 <= per_decade <= 25:
        raise ValueError("per_decade must be between 1 and 25")
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    decades = math.log10(max_lag)
    n = int(math.floor(decades * per_decade + 1e-9)) + 1
    pts = np.round(10.0 ** (np.arange(n) / per_decade)).astype(np.int64)
    return np.unique(np.append(pts, max_lag))


def log_midpoint(mid: float) -> float:
    if mid is None or mid <= 0:
        raise UndefinedMidpoint(f"midpoint {mid!r} is undefined or not positive")
    return math.log(float(mid))


def log_return(m_before, m_after) -> float:
    """Natural log of ``m_after / m_before``."""
    return log_midpoint(m_after) - log_midpoint(m_before)


@dataclass(frozen=True)
class MidpointTrajectory:
    """Right-continuous log-midpoint step function of one symbol over one day.

    ``logmid`` is NaN where the book was one-sided. Lookups before the first
    breakpoint are undefined.
    """

    symbol: str
    times: np.ndarray
    logmid: np.ndarray
    session: tuple[int, int]

    def __post_init__(self) -> None:
        if len(self.times) != len(self.logmid):
            raise ValueError("times and logmid differ in length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("trajectory breakpoints must be strictly increasing")

    @classmethod
    def from_deltas(
        cls, symbol: str, deltas: Iterable[BookDelta], session: tuple[int, int]
    ) -> "MidpointTrajectory":
        times: list[int] = []
        mids: list[int] = []
        for d in deltas:
            m = d.mid2_after
            m = 0 if m is None else m
            t = d.timestamp
            if times and times[-1] == t:
                mids[-1] = m
            else:
                times.append(t)
                mids.append(m)
        # drop breakpoints that repeat the previous value
        keep_t: list[int] = []
        keep_m: list[int] = []
        for t, m in zip(times, mids):
            if keep_m and keep_m[-1] == m:
                continue
            keep_t.append(t)
            keep_m.append(m)
        mid2 = np.asarray(keep_m, dtype=np.float64)
        with np.errstate(divide="ignore"):
            logmid = np.where(mid2 > 0, np.log(mid2 * 0.5), np.nan)
        return cls(symbol, np.asarray(keep_t, dtype=np.int64), logmid, session)

    @classmethod
    def from_midpoints(
        cls, symbol: str, times: Sequence[int], midpoints: Sequence, session: tuple[int, int]
    ) -> "MidpointTrajectory":
        logmid = np.array(
            [np.nan if m is None else math.log(float(m)) for m in midpoints], dtype=np.float64
        )
        return cls(symbol, np.asarray(times, dtype=np.int64), logmid, session)

    def lookup(self, t: int) -> float:
        """Log midpoint in force at ``t`` (NaN if undefined)."""
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.logmid[i]) if i >= 0 else math.nan

    def mirrored(self) -> "MidpointTrajectory":
        """Bid/ask mirror image: reflection of the log price through zero."""
        return MidpointTrajectory(self.symbol, self.times, -self.logmid, self.session)


@dataclass(frozen=True)
class EventSeries:
    """Array view of one symbol's events of one kind over one day."""

    symbol: str
    times: np.ndarray
    signs: np.ndarray
    logmid_before: np.ndarray

    @classmethod
    def from_events(cls, events: Sequence[SpreadChangeEvent], symbol: str | None = None) -> "EventSeries":
        if symbol is None:
            symbol = events[0].symbol if events else ""
        times = np.fromiter((e.timestamp for e in events), dtype=np.int64, count=len(events))
        signs = np.fromiter((e.sign for e in events), dtype=np.float64, count=len(events))
        mid2 = np.fromiter((e.mid2_before for e in events), dtype=np.float64, count=len(events))
        return cls(symbol, times, signs, np.log(mid2 * 0.5))

    def __len__(self) -> int:
        return len(self.times)

    def negated(self) -> "EventSeries":
        return EventSeries(self.symbol, self.times, -self.signs, self.logmid_before)

    def mirrored(self) -> "EventSeries":
        return EventSeries(self.symbol, self.times, -self.signs, -self.logmid_before)


def as_series(events) -> EventSeries:
    if isinstance(events, EventSeries):
        return events
    return EventSeries.from_events(list(events))


@dataclass
class ResponseCurve:
    """R(tau) on a lag grid. ``values`` is NaN where ``counts`` is zero."""

    lags: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    sums: np.ndarray
    scale: str
    kind: str | None = None
    boundary_skips: np.ndarray | None = None
    undefined_skips: np.ndarray | None = None
    label: str = field(default="")


def _curve(lags, sums, counts, scale, kind, boundary=None, undefined=None) -> ResponseCurve:
    sums = np.asarray(sums, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.int64)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return ResponseCurve(
        np.asarray(lags, dtype=np.int64), values, counts, sums, scale, kind,
        None if boundary is None else np.asarray(boundary, dtype=np.int64),
        None if undefined is None else np.asarray(undefined, dtype=np.int64),
    )


def pool_curves(curves: Sequence[ResponseCurve]) -> ResponseCurve:
    """Pool per-day curves so every event counts once (not day-weighted)."""
    if not curves:
        raise NoEvents("nothing to pool")
    lags = curves[0].lags
    for c in curves[1:]:
        if not np.array_equal(c.lags, lags):
            raise ValueError("cannot pool curves on different lag grids")
    sums = [math.fsum(col) for col in zip(*(c.sums for c in curves))]
    counts = np.sum([c.counts for c in curves], axis=0)
    b = u = None
    if all(c.boundary_skips is not None for c in curves):
        b = np.sum([c.boundary_skips for c in curves], axis=0)
        u = np.sum([c.undefined_skips for c in curves], axis=0)
    return _curve(lags, sums, counts, curves[0].scale, curves[0].kind, b, u)


def average_curves(curves: Sequence[ResponseCurve]) -> ResponseCurve:
    """Equal-weight mean of curves (one per stock, say), ignoring undefined
    points. ``counts`` is the total sample count behind each point."""
    if not curves:
        raise NoEvents("nothing to average")
    lags = curves[0].lags
    for c in curves[1:]:
        if not np.array_equal(c.lags, lags):
            raise ValueError("cannot average curves on different lag grids")
    vals = np.array([c.values for c in curves])
    defined = ~np.isnan(vals)
    n = defined.sum(axis=0)
    sums = [math.fsum(col[ok].tolist()) for col, ok in zip(vals.T, defined.T)]
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(n > 0, np.asarray(sums) / np.maximum(n, 1), np.nan)
    counts = np.sum([c.counts for c in curves], axis=0).astype(np.int64)
    return ResponseCurve(lags, values, counts, np.asarray(sums), curves[0].scale, curves[0].kind)


def _check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=np.int64)
    if g.size == 0:
        raise EmptyGrid("lag grid is empty")
    if np.any(g < 0) or np.any(np.diff(g) <= 0):
        raise ValueError("lag grid must be non-negative and strictly increasing")
    return g


def _physical(
    times: np.ndarray,
    signs: np.ndarray,
    before: np.ndarray,
    traj: MidpointTrajectory,
    grid: np.ndarray,
    kind: str | None,
) -> ResponseCurve:
    t_open, t_close = traj.session
    in_session = (times >= t_open) & (times <= t_close)
    ok_before = ~np.isnan(before)
    sums, counts, bskip, uskip = [], [], [], []
    for tau in grid:
        target = times + int(tau) * NS_PER_SECOND
        inside = in_session & (target <= t_close)
        idx = np.searchsorted(traj.times, target, side="right") - 1
        after = np.where(idx >= 0, traj.logmid[np.maximum(idx, 0)], np.nan)
        ok = inside & ok_before & ~np.isnan(after)
        vals = signs[ok] * (after[ok] - before[ok])
        sums.append(math.fsum(vals.tolist()))
        counts.append(int(ok.sum()))
        bskip.append(int((~inside).sum()))
        uskip.append(int((inside & ~ok).sum()))
    return _curve(grid, sums, counts, SCALE_PHYSICAL, kind, bskip, uskip)


def _kind_label(events) -> str | None:
    if isinstance(events, EventSeries) or not events:
        return None
    kinds = {e.kind.value for e in events}
    return kinds.pop() if len(kinds) == 1 else None


def self_response_physical(events, traj: MidpointTrajectory, grid) -> ResponseCurve:
    """Response of one stock's midpoint to its own events, lags in seconds.

    An event contributes to lag tau only if ``t + tau`` lies inside the
    trajectory's session and the midpoint there is defined.
    """
    grid = _check_grid(grid)
    kind = _kind_label(events)
    s = as_series(events)
    if len(s) == 0:
        raise NoEvents(f"no events for {traj.symbol}")
    return _physical(s.times, s.signs, s.logmid_before, traj, grid, kind)


def self_response_all_events(events, traj: MidpointTrajectory, grid) -> ResponseCurve:
    """Same average as :func:`self_response_physical`, over every event of a
    kind whether or not it moved the quotes (see ``classify.all_event_records``)."""
    return self_response_physical(events, traj, grid)


def self_response_event_scale(events, grid, session: tuple[int, int] | None = None) -> ResponseCurve:
    """Response on the event clock: lag n pairs event k with event k + n of
    the same kind, using the pre-event midpoints of both.

    ``events`` covers a single day; pool per-day curves with
    :func:`pool_curves` so no pair straddles two days.
    """
    grid = _check_grid(grid)
    kind = _kind_label(events)
    s = as_series(events)
    if session is not None:
        m = (s.times >= session[0]) & (s.times <= session[1])
        s = EventSeries(s.symbol, s.times[m], s.signs[m], s.logmid_before[m])
    n = len(s)
    if n == 0:
        raise NoEvents("no events")
    L = s.logmid_before
    sums, counts, bskip = [], [], []
    for lag in grid:
        lag = int(lag)
        if lag >= n:
            sums.append(0.0)
            counts.append(0)
            bskip.append(n)
            continue
        vals = s.signs[: n - lag] * (L[lag:] - L[: n - lag])
        sums.append(math.fsum(vals.tolist()))
        counts.append(n - lag)
        bskip.append(lag)
    return _curve(grid, sums, counts, SCALE_EVENT, kind, bskip, np.zeros(len(grid)))


def cross_response(events_i, traj_j: MidpointTrajectory, grid) -> ResponseCurve:
    """Response of stock j's midpoint to events in stock i (seconds).

    The reference price is j's midpoint in force just before the event
    time, i.e. at the last breakpoint strictly earlier than ``t``. For
    ``i == j`` the event's own pre-event midpoint is used, which makes this
    identical to :func:`self_response_physical`.
    """
    grid = _check_grid(grid)
    kind = _kind_label(events_i)
    s = as_series(events_i)
    if len(s) == 0:
        raise NoEvents(f"no events for {s.symbol or 'source symbol'}")
    if s.symbol == traj_j.symbol:
        return _physical(s.times, s.signs, s.logmid_before, traj_j, grid, kind)
    idx = np.searchsorted(traj_j.times, s.times, side="left") - 1
    before = np.where(idx >= 0, traj_j.logmid[np.maximum(idx, 0)], np.nan)
    return _physical(s.times, s.signs, before, traj_j, grid, kind)


@dataclass
class CrossResponseMatrix:
    """R_ij(tau): rows are the event stock i, columns the measured stock j."""

    tau: int
    symbols: list[str]
    values: np.ndarray
    counts: np.ndarray
    normalized: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.normalized = normalize(self.values)


def _offdiag_mask(n: int) -> np.ndarray:
    return ~np.eye(n, dtype=bool)


def normalize(values: np.ndarray) -> np.ndarray:
    """Divide by the largest absolute off-diagonal entry; an all-zero (or
    all-undefined) off-diagonal gives an all-zero matrix."""
    values = np.asarray(values, dtype=np.float64)
    off = np.abs(values[_offdiag_mask(len(values))])
    off = off[~np.isnan(off)]
    peak = off.max() if off.size else 0.0
    if peak == 0.0:
        return np.where(np.isnan(values), np.nan, 0.0)
    return values / peak


DayData = Mapping[str, tuple]  # symbol -> (events, trajectory)


def cross_matrices(days: Sequence[DayData], taus, symbols: Sequence[str] | None = None) -> list[CrossResponseMatrix]:
    """Cross-response matrices for every tau, pooling events across days.

    Each day maps symbol -> (events, trajectory). Symbols are ordered
    alphabetically unless given.
    """
    taus = _check_grid(taus)
    if symbols is None:
        symbols = sorted({s for day in days for s in day})
    symbols = list(symbols)
    n = len(symbols)
    if n < 2:
        raise FewerThanTwoSymbols(f"need at least two symbols, got {n}")
    sums = np.zeros((len(taus), n, n))
    counts = np.zeros((len(taus), n, n), dtype=np.int64)
    for a, si in enumerate(symbols):
        for b, sj in enumerate(symbols):
            curves = []
            for day in days:
                if si not in day or sj not in day:
                    continue
                events = day[si][0]
                if len(events) == 0:
                    continue
                curves.append(cross_response(events, day[sj][1], taus))
            if not curves:
                continue
            c = curves[0] if len(curves) == 1 else pool_curves(curves)
            sums[:, a, b] = c.sums
            counts[:, a, b] = c.counts
    out = []
    for k, tau in enumerate(taus):
        with np.errstate(invalid="ignore", divide="ignore"):
            vals = np.where(counts[k] > 0, sums[k] / np.maximum(counts[k], 1), np.nan)
        out.append(CrossResponseMatrix(int(tau), symbols, vals, counts[k]))
    return out


def cross_matrix(
    events_by_symbol: Mapping,
    trajectories: Mapping[str, MidpointTrajectory],
    tau: int,
    kind: str | None = None,
) -> CrossResponseMatrix:
    """Single-day, single-tau matrix. ``kind`` keeps only events of that kind."""
    def pick(evs):
        if kind is None:
            return evs
        return [e for e in evs if e.kind.value == str(getattr(kind, "value", kind))]

    day = {s: (pick(events_by_symbol.get(s, [])), trajectories[s]) for s in trajectories}
    return cross_matrices([day], [tau])[0]


def active_passive(matrix: CrossResponseMatrix | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means (active, per measured stock j) and row means (passive,
    per event stock i) of the off-diagonal entries."""
    values = matrix.values if isinstance(matrix, CrossResponseMatrix) else np.asarray(matrix, dtype=np.float64)
    n = len(values)
    if n < 2:
        raise FewerThanTwoSymbols(f"need at least two symbols, got {n}")
    off = np.where(_offdiag_mask(n), values, np.nan)
    defined = ~np.isnan(off)
    total = np.where(defined, off, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        active = total.sum(axis=0) / defined.sum(axis=0)
        passive = total.sum(axis=1) / defined.sum(axis=1)
    return active, passive


def market_response(matrices: Sequence[CrossResponseMatrix]) -> ResponseCurve:
    """Mean of all defined off-diagonal entries of each matrix, per tau."""
    if not matrices:
        raise EmptyGrid("no matrices")
    lags, sums, counts = [], [], []
    for m in matrices:
        n = len(m.values)
        if n < 2:
            raise FewerThanTwoSymbols(f"need at least two symbols, got {n}")
        off = m.values[_offdiag_mask(n)]
        off = off[~np.isnan(off)]
        lags.append(m.tau)
        sums.append(math.fsum(off.tolist()))
        counts.append(off.size)
    return _curve(lags, sums, counts, SCALE_PHYSICAL, None)


# CSV

CURVE_COLUMNS = ("kind", "scale", "tau", "value", "count")
MATRIX_COLUMNS = ("tau", "row_symbol", "col_symbol", "R", "rho")


def _num(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def curve_rows(curve: ResponseCurve) -> Iterable[tuple]:
    """One ``kind,scale,tau,value,count`` tuple per lag; NaN values become ''."""
    for lag, v, n in zip(curve.lags, curve.values, curve.counts):
        yield (curve.kind or curve.label, curve.scale, int(lag), _num(v), int(n))


def write_curve_csv(curves: Iterable[ResponseCurve], out: TextIO, header: bool = True) -> None:
    w = csv.writer(out, lineterminator="\n")
    if header:
        w.writerow(CURVE_COLUMNS)
    for c in curves:
        w.writerows(curve_rows(c))


def write_matrix_csv(matrices: Iterable[CrossResponseMatrix], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(MATRIX_COLUMNS)
    for m in matrices:
        for a, si in enumerate(m.symbols):
            for b, sj in enumerate(m.symbols):
                w.writerow((m.tau, si, sj, _num(m.values[a, b]), _num(m.normalized[a, b])))
