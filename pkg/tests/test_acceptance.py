"""The ten acceptance criteria, one test each.

Every test records a pass/fail line (printed at the end of the run by
conftest.pytest_terminal_summary) before asserting, so a failing criterion
still shows up in the summary with its measured numbers.
"""

import math
import os
import tempfile
import time
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from conftest import T0, n_events, record, short_config
from oracles import NaiveBook, event_response, grid_tw_spread, offdiag_mean, physical_response
from spreadresponse.book import OrderBook, replay, time_weighted_average_spread
from spreadresponse.classify import SpreadKind, aggregate_trades, all_event_records, classify_stream, relative_amounts
from spreadresponse.events import EventKind, OrderEvent, Side
from spreadresponse.fastpath import parse_replay, tile_stream
from spreadresponse.feed import parse_stream
from spreadresponse.response import (
    CrossResponseMatrix,
    EventSeries,
    MidpointTrajectory,
    cross_matrices,
    cross_response,
    log_lag_grid,
    market_response,
    normalize,
    pool_curves,
    self_response_all_events,
    self_response_event_scale,
    self_response_physical,
)
from spreadresponse.synthgen import GeneratorConfig, encode, generate

NS = 1_000_000_000
KINDS = list(SpreadKind)


def _split(events):
    out = {k: [] for k in KINDS}
    for e in events:
        out[e.kind].append(e)
    return out


# 1


@pytest.mark.slow
def test_criterion_01_book_oracle_equivalence():
    start = time.perf_counter()
    mismatches = 0
    for seed in range(50):
        _, streams, _ = n_events(1000 + seed, 10_000)
        book = OrderBook("AAA")
        naive = NaiveBook()
        for ev in streams["AAA"]:
            book.apply(ev)
            naive.apply(ev)
            if book.snapshot() != naive.state() or book.best_quotes() != naive.best():
                mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 60
    record(1, "book oracle equivalence", ok, f"50 streams x 10^4 events, {mismatches} mismatches, {elapsed:.1f}s")
    assert ok


# 2


def test_criterion_02_round_trip():
    encoded = []
    for seed in range(100):
        _, streams, _ = n_events(2000 + seed, 1_000, ("AAA", "BBB"))
        encoded.append((streams, encode(streams)))
    start = time.perf_counter()
    bad = sum(parse_stream(data).events != streams for streams, data in encoded)
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 10
    record(2, "encode/parse round trip", ok, f"100 streams, {bad} differ, parse {elapsed:.2f}s")
    assert ok


# 3


def test_criterion_03_amounts_identity():
    bad = 0
    for seed in range(100):
        cfg, streams, _ = n_events(3000 + seed, 2_000)
        _, deltas = replay(streams["AAA"])
        a = relative_amounts(aggregate_trades(classify_stream(deltas)))
        parts = (a.O, a.D, a.T)
        if not all(isinstance(x, Fraction) for x in parts) or sum(parts) != 1:
            bad += 1
    record(3, "O + D + T = 1 exactly", bad == 0, f"100 streams, {bad} violations")
    assert bad == 0


# 4


def _worst(curve, want):
    got = curve.values
    ref = np.array([v for v, _ in want])
    if list(curve.counts) != [n for _, n in want]:
        return math.inf
    if not np.array_equal(np.isnan(got), np.isnan(ref)):
        return math.inf
    m = ~np.isnan(ref)
    return float(np.max(np.abs(got[m] - ref[m]), initial=0.0))


def test_criterion_04_response_oracle_equivalence():
    start = time.perf_counter()
    worst = 0.0
    phys = log_lag_grid(60)
    lags = log_lag_grid(500)
    for seed in range(20):
        cfg, streams, _ = n_events(4000 + seed, 1_000, ("AAA", "BBB"))
        session = (T0, max(e.timestamp for s in streams.values() for e in s))
        data = {}
        for sym, evs in streams.items():
            _, deltas = replay(evs)
            sc = _split(aggregate_trades(classify_stream(deltas, session)))
            al = _split(aggregate_trades(all_event_records(deltas, session)))
            data[sym] = (deltas, sc, al, MidpointTrajectory.from_deltas(sym, deltas, session))
        for sym, (deltas, sc, al, traj) in data.items():
            for k in KINDS:
                if sc[k]:
                    worst = max(worst, _worst(self_response_physical(sc[k], traj, phys),
                                              physical_response(sc[k], deltas, session, phys)))
                    worst = max(worst, _worst(self_response_event_scale(sc[k], lags), event_response(sc[k], lags)))
                if al[k]:
                    worst = max(worst, _worst(self_response_all_events(al[k], traj, phys),
                                              physical_response(al[k], deltas, session, phys)))
        for i, j in (("AAA", "BBB"), ("BBB", "AAA")):
            for k in KINDS:
                evs = data[i][1][k]
                if evs:
                    worst = max(worst, _worst(cross_response(evs, data[j][3], phys),
                                              physical_response(evs, data[j][0], session, phys, same_symbol=False)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 120
    record(4, "response oracle equivalence", ok, f"20 seeds x 10^3 events, max |diff| {worst:.1e}, {elapsed:.1f}s")
    assert ok


# 5


def test_criterion_05_normalization():
    worst = 0.0
    checked = 0
    for seed in range(5):
        cfg = short_config(5000 + seed, 300, symbols=["AAA", "BBB", "CCC", "DDD"],
                           shock_rate=0.1, impact=1.0, impact_lag_s=1.0)
        streams, _ = generate(cfg)
        day = {}
        for sym, evs in streams.items():
            _, deltas = replay(evs)
            trades = _split(aggregate_trades(classify_stream(deltas, cfg.session)))[SpreadKind.TRADE]
            day[sym] = (trades, MidpointTrajectory.from_deltas(sym, deltas, cfg.session))
        for m in cross_matrices([day], [1, 2, 5, 10, 50, 100]):
            off = np.abs(m.normalized[~np.eye(4, dtype=bool)])
            if np.nanmax(np.abs(m.values[~np.eye(4, dtype=bool)])) > 0:
                worst = max(worst, abs(np.nanmax(off) - 1.0))
                checked += 1
    rng = np.random.default_rng(5)
    for _ in range(100):
        rho = normalize(rng.normal(0, 1e-4, (5, 5)))
        worst = max(worst, abs(np.abs(rho[~np.eye(5, dtype=bool)]).max() - 1.0))
        checked += 1
    zero = normalize(np.zeros((3, 3)))
    ok = worst <= 1e-15 and checked > 100 and np.all(zero == 0.0)
    record(5, "normalization max |rho| = 1", ok, f"{checked} nonzero matrices, worst {worst:.1e}, zero matrix ok")
    assert ok


# 6


def test_criterion_06_market_response_consistency():
    rng = np.random.default_rng(6)
    worst = 0.0
    for trial in range(100):
        vals = rng.normal(0, 1e-4, (5, 5))
        m = CrossResponseMatrix(trial + 1, list("ABCDE"), vals, np.ones((5, 5), dtype=np.int64))
        worst = max(worst, abs(market_response([m]).values[0] - offdiag_mean(vals.tolist())))
    ok = worst <= 1e-15
    record(6, "market response = mean off-diagonal", ok, f"100 random 5x5, worst {worst:.1e}")
    assert ok


# 7


def test_criterion_07_negation_and_mirror():
    neg_bad = 0
    mirror_worst = 0.0
    phys = log_lag_grid(60)
    lags = log_lag_grid(300)
    for seed in range(20):
        cfg, streams, _ = n_events(7000 + seed, 1_000, ("AAA", "BBB"))
        session = (T0, max(e.timestamp for s in streams.values() for e in s))
        per = {}
        for sym, evs in streams.items():
            _, deltas = replay(evs)
            per[sym] = (_split(aggregate_trades(classify_stream(deltas, session))),
                        _split(aggregate_trades(all_event_records(deltas, session))),
                        MidpointTrajectory.from_deltas(sym, deltas, session))
        for sym, (sc, al, traj) in per.items():
            other = per["BBB" if sym == "AAA" else "AAA"][2]
            for k in KINDS:
                for evs, fns in ((sc[k], ("phys", "event", "cross")), (al[k], ("all",))):
                    if not evs:
                        continue
                    s = EventSeries.from_events(evs)
                    for fn in fns:
                        def run(series, t, o):
                            if fn == "phys":
                                return self_response_physical(series, t, phys).values
                            if fn == "event":
                                return self_response_event_scale(series, lags).values
                            if fn == "all":
                                return self_response_all_events(series, t, phys).values
                            return cross_response(series, o, phys).values

                        base = run(s, traj, other)
                        if not np.array_equal(run(s.negated(), traj, other), -base, equal_nan=True):
                            neg_bad += 1
                        mir = run(s.mirrored(), traj.mirrored(), other.mirrored())
                        if not np.array_equal(np.isnan(mir), np.isnan(base)):
                            mirror_worst = math.inf
                        else:
                            m = ~np.isnan(base)
                            mirror_worst = max(mirror_worst, float(np.max(np.abs(mir[m] - base[m]), initial=0.0)))
    ok = neg_bad == 0 and mirror_worst <= 1e-15
    record(7, "sign negation and bid/ask mirror", ok,
           f"20 seeds, {neg_bad} non-negated curves, mirror worst {mirror_worst:.1e}")
    assert ok


# 8


def _add(oid, side, price, t):
    return OrderEvent(t, "X", oid, EventKind.ADD, side, price, 100)


def test_criterion_08_time_weighted_spread():
    fixtures = []
    # constant one-tick spread
    fixtures.append(([_add(1, Side.BID, 10010, 0), _add(2, Side.ASK, 10011, 0)], (10 * NS, 20 * NS), Fraction(1, 100)))
    # one tick for 75 s, five ticks for 25 s
    fixtures.append(([_add(1, Side.BID, 10010, 0), _add(2, Side.ASK, 10011, 0),
                      OrderEvent(75 * NS, "X", 2, EventKind.DELETE), _add(3, Side.ASK, 10015, 75 * NS)],
                     (0, 100 * NS), Fraction(2, 100)))
    # undefined for the first half
    fixtures.append(([_add(1, Side.BID, 10010, 0), _add(2, Side.ASK, 10013, 50 * NS)], (0, 100 * NS),
                     Fraction(3, 100)))
    # three steps of unequal length: 2 ticks 10 s, 4 ticks 30 s, 1 tick 60 s
    fixtures.append(([_add(1, Side.BID, 10010, 0), _add(2, Side.ASK, 10012, 0),
                      OrderEvent(10 * NS, "X", 1, EventKind.DELETE), _add(3, Side.BID, 10008, 10 * NS),
                      _add(4, Side.BID, 10011, 40 * NS)], (0, 100 * NS), Fraction(2 * 10 + 4 * 30 + 1 * 60, 100 * 100)))
    exact = sum(time_weighted_average_spread(replay(evs)[1], session) == want for evs, session, want in fixtures)
    worst = 0.0
    for seed in range(5):
        cfg = short_config(8000 + seed, 600)
        streams, _ = generate(cfg)
        snapped = [replace(ev, timestamp=ev.timestamp // NS * NS) for ev in streams["AAA"]]
        got = time_weighted_average_spread(replay(snapped)[1], cfg.session)
        want = grid_tw_spread(snapped, cfg.session)
        worst = max(worst, abs(float(got) - float(want)) / float(want))
    ok = exact == len(fixtures) and worst <= 1e-9
    record(8, "time-weighted spread", ok, f"{exact}/{len(fixtures)} closed-form exact, grid rel. diff {worst:.1e}")
    assert ok


# 9

SLOW_FLOW = dict(placement_rate=10 / 60, cancel_rate=1 / 60, market_rate=1.1 / 60, deep_rate=45.0)
COUPLED = dict(placement_rate=1.0, cancel_rate=0.1, market_rate=0.11, shock_rate=0.02, impact=1.0, impact_lag_s=1.0)
EXPECTED_SIGN = {SpreadKind.TRADE: 1, SpreadKind.DELETION: 1, SpreadKind.PLACEMENT: -1}
Z = 3.0


def _products(series, traj, tau):
    """Per-event sign times log-midpoint change, for events whose horizon is in session."""
    target = series.times + int(tau) * NS
    idx = np.searchsorted(traj.times, target, side="right") - 1
    v = series.signs * (traj.logmid[idx] - series.logmid_before)
    return v[(target <= traj.session[1]) & ~np.isnan(v)]


def _z(v):
    return v.mean() / (v.std() / math.sqrt(len(v)))


@pytest.mark.slow
def test_criterion_09_qualitative_signs():
    grid = log_lag_grid(60)
    pooled = {}
    curves = {}
    for seed in range(10):
        cfg = GeneratorConfig(seed=seed, session=(T0, T0 + 1200 * NS), **SLOW_FLOW)
        streams, _ = generate(cfg)
        _, deltas = replay(streams["AAA"])
        traj = MidpointTrajectory.from_deltas("AAA", deltas, cfg.session)
        sets = {"changing": _split(aggregate_trades(classify_stream(deltas, cfg.session))),
                "all": _split(all_event_records(deltas, cfg.session))}
        for label, by_kind in sets.items():
            for k in KINDS:
                s = EventSeries.from_events(by_kind[k])
                fn = self_response_physical if label == "changing" else self_response_all_events
                curves.setdefault((label, k), []).append(fn(s, traj, grid))
                for tau in grid:
                    pooled.setdefault((label, k, tau), []).append(_products(s, traj, tau))
    hits = total = 0
    for k in KINDS:
        for label in ("changing", "all") if k is not SpreadKind.TRADE else ("changing",):
            mean_curve = pool_curves(curves[(label, k)])
            for i, tau in enumerate(grid):
                v = np.concatenate(pooled[(label, k, tau)])
                assert abs(v.mean() - mean_curve.values[i]) < 1e-12  # same numbers as the package curve
                z = _z(v)
                good = abs(z) < Z if label == "all" else np.sign(z) == EXPECTED_SIGN[k] and abs(z) >= Z
                hits += bool(good)
                total += 1
    local = hits / total

    mkt_grid = log_lag_grid(1000)
    days = []
    for seed in range(10):
        cfg = GeneratorConfig(seed=seed, symbols=["AAA", "BBB", "CCC", "DDD"], session=(T0, T0 + 2000 * NS),
                              **COUPLED)
        streams, _ = generate(cfg)
        day = {}
        for sym, evs in streams.items():
            _, deltas = replay(evs)
            trades = _split(aggregate_trades(classify_stream(deltas, cfg.session)))[SpreadKind.TRADE]
            day[sym] = (trades, MidpointTrajectory.from_deltas(sym, deltas, cfg.session))
        days.append(day)
    market = market_response(cross_matrices(days, mkt_grid))
    positive = float(np.mean(market.values > 0))
    ok = local >= 0.95 and positive >= 0.95
    record(9, "qualitative sign checks", ok,
           f"quote-changing vs all events {hits}/{total} grid points, market trades positive at {positive:.0%}")
    assert ok


# 10


@pytest.fixture(scope="module")
def big_file():
    cfg = GeneratorConfig(seed=2, symbols=["AAA", "BBB", "CC"], session=(T0, T0 + 600 * NS), deep_rate=5.0)
    streams, _ = generate(cfg)
    base = encode(streams)
    n = parse_replay(base).messages
    copies = -(-10_000_000 // n)
    fd, path = tempfile.mkstemp(suffix=".itch")
    with os.fdopen(fd, "wb") as fh:
        fh.write(tile_stream(base, copies))
    parse_replay(base)  # compile before timing
    yield path
    os.unlink(path)


@pytest.mark.slow
def test_criterion_10_throughput(big_file):
    start = time.perf_counter()
    with open(big_file, "rb") as fh:
        data = fh.read()
    result = parse_replay(data)
    elapsed = time.perf_counter() - start
    rate = result.messages / elapsed
    ok = result.messages >= 10_000_000 and rate >= 1e6
    record(10, "parse + replay throughput", ok,
           f"{result.messages:,} messages in {elapsed:.2f}s = {rate / 1e6:.2f}M msg/s")
    assert ok
