import io
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import n_events, short_config, small_day
from spreadresponse.book import OrderBook, replay
from spreadresponse.classify import (
    RelativeAmounts,
    SpreadChangeEvent,
    SpreadKind,
    aggregate_trades,
    all_event_records,
    balance_deviation,
    classify,
    classify_stream,
    price_sign,
    read_events_csv,
    relative_amounts,
    write_amounts_csv,
    write_events_csv,
)
from spreadresponse.errors import EmptyEventList, UnclassifiableDelta
from spreadresponse.events import EventKind, OrderEvent, Side, mirror_event
from spreadresponse.synthgen import generate

P, D, T = SpreadKind.PLACEMENT, SpreadKind.DELETION, SpreadKind.TRADE


def add(oid, side, price, shares=100, t=0):
    return OrderEvent(t, "X", oid, EventKind.ADD, side, price, shares)


def two_sided(bid=10010, ask=10014):
    b = OrderBook("X")
    b.apply(add(1, Side.BID, bid))
    b.apply(add(2, Side.ASK, ask))
    return b


def ev(kind, sign=1, t=0, sym="X"):
    return SpreadChangeEvent(t, sym, kind, sign, 20020, 20021, 10011, Side.ASK)


# classify


def test_execute_consuming_best_bid_is_negative_trade():
    b = two_sided()
    (d,) = b.apply(OrderEvent(1, "X", 1, EventKind.EXECUTE, shares=100))
    e = classify(d)
    assert (e.kind, e.sign) == (T, -1)


def test_delete_sole_best_ask_is_positive_deletion():
    b = two_sided()
    (d,) = b.apply(OrderEvent(1, "X", 2, EventKind.DELETE))
    e = classify(d)
    assert (e.kind, e.sign) == (D, 1)


def test_ask_placement_inside_spread():
    b = two_sided(10010, 10014)
    (d,) = b.apply(add(3, Side.ASK, 10012, t=1))
    e = classify(d)
    assert (e.kind, e.sign) == (P, 1)
    assert e.midpoint_before == 10012 and e.midpoint_after == 10011


def test_placement_at_midpoint_takes_book_side_sign():
    b = two_sided(10010, 10014)
    (d,) = b.apply(add(3, Side.BID, 10012, t=1))
    assert classify(d).sign == -1
    assert price_sign(10012, 20024, Side.ASK) == 1


def test_partial_cancel_and_quiet_events_are_not_classified():
    b = two_sided()
    (d,) = b.apply(OrderEvent(1, "X", 1, EventKind.CANCEL, shares=10))
    assert classify(d) is None
    (d,) = b.apply(add(3, Side.BID, 10000, t=1))
    assert classify(d) is None


def test_one_sided_book_is_not_classified():
    b = OrderBook("X")
    (d,) = b.apply(add(1, Side.BID, 10010))
    assert d.spread_changed and classify(d) is None


def test_cancel_to_zero_is_deletion():
    b = two_sided()
    (d,) = b.apply(OrderEvent(1, "X", 2, EventKind.CANCEL, shares=100))
    assert classify(d).kind is D


def test_replace_legs_classified_separately():
    b = two_sided(10010, 10014)
    rm, ad = b.apply(OrderEvent(1, "X", 1, EventKind.REPLACE, new_order_id=5, new_price=10012, new_shares=10))
    # the remove leg empties the bid side, so the add leg has no midpoint before it
    assert classify(rm).kind is D and classify(ad) is None
    b2 = two_sided(10010, 10014)
    b2.apply(add(3, Side.BID, 10008, t=1))
    rm, ad = b2.apply(OrderEvent(2, "X", 1, EventKind.REPLACE, new_order_id=5, new_price=10012, new_shares=10))
    assert classify(rm).kind is D and classify(rm).sign == -1
    # after the remove leg the midpoint is 10011, so a bid at 10012 lies above it
    assert classify(ad).kind is P and classify(ad).sign == 1


def test_unclassifiable_delta():
    b = two_sided()
    (d,) = b.apply(OrderEvent(1, "X", 2, EventKind.DELETE))
    from dataclasses import replace

    bogus = replace(d, removed=False)
    with pytest.raises(UnclassifiableDelta):
        classify(bogus)


@given(st.integers(0, 4_999))
def test_quiet_deltas_never_classified(k):
    _, streams, _ = n_events(9, 5_000)
    _, deltas = replay(streams["AAA"][: k + 1])
    d = deltas[-1]
    if not d.spread_changed:
        assert classify(d) is None


# aggregate_trades


def test_merge_same_ns_same_sign():
    a = ev(T, 1, t=5)
    b = SpreadChangeEvent(5, "X", T, 1, 20021, 20024, 10012, Side.ASK)
    (m,) = aggregate_trades([a, b])
    assert m.mid2_before == a.mid2_before and m.mid2_after == 20024 and m.legs == 2


def test_no_merge_opposite_signs_or_interleaved():
    assert len(aggregate_trades([ev(T, 1, 5), ev(T, -1, 5)])) == 2
    assert len(aggregate_trades([ev(T, 1, 5), ev(D, 1, 5), ev(T, 1, 5)])) == 3
    assert len(aggregate_trades([ev(T, 1, 5), ev(T, 1, 6)])) == 2


@given(st.lists(st.tuples(st.sampled_from(list(SpreadKind)), st.sampled_from([-1, 1]), st.integers(0, 3)),
                max_size=40))
def test_aggregate_idempotent(steps):
    evs = []
    t = 0
    for kind, sign, dt in steps:
        t += dt
        evs.append(ev(kind, sign, t))
    once = aggregate_trades(evs)
    assert aggregate_trades(once) == once


def test_merged_trades_equal_quote_changing_aggressors():
    cfg = short_config(12, 300, symbols=["AAA"])
    streams, truth = generate(cfg)
    _, deltas = replay(streams["AAA"])
    merged = [e for e in aggregate_trades(classify_stream(deltas)) if e.kind is T]
    assert len(merged) == truth.quote_changing_aggressors("AAA") > 0


# relative amounts


def test_four_event_amounts():
    a = relative_amounts([ev(P), ev(T), ev(D), ev(P)])
    assert (a.O, a.D, a.T) == (Fraction(1, 2), Fraction(1, 4), Fraction(1, 4))
    assert a.O + a.D + a.T == 1


def test_all_placements():
    a = relative_amounts([ev(P)] * 3)
    assert (a.O, a.D, a.T) == (1, 0, 0)


def test_empty_amounts():
    with pytest.raises(EmptyEventList):
        relative_amounts([])


def test_balance_deviation_examples():
    assert balance_deviation(RelativeAmounts(5, 3, 2)) == 0
    assert balance_deviation(RelativeAmounts(6, 3, 1)) == Fraction(-1, 10)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_identity_holds_exactly(o, d, t):
    if o + d + t == 0:
        return
    a = RelativeAmounts(o, d, t)
    assert a.O + a.D + a.T == 1


# labels against the generator


@pytest.mark.parametrize("kw", [{}, {"deep_rate": 20.0}, {"shock_rate": 0.1, "impact": 1.0, "symbols": ["AAA", "BBB"]}])
def test_labels_agree_with_ground_truth(kw):
    cfg = short_config(5, 300, checkpoint_every=500, **kw)
    streams, truth = generate(cfg)
    for sym, evs in streams.items():
        book = OrderBook(sym)
        seen = []
        checkpoints = {k: (b, a) for k, b, a in truth.checkpoints[sym]}
        for i, e in enumerate(evs):
            for d in book.apply(e):
                if d.spread_changed:
                    c = classify(d) if d.mid2_before is not None else None
                    seen.append((e.timestamp, i, c.kind.value if c else None, d.side))
            if i + 1 in checkpoints:
                assert book.snapshot()[1:] == checkpoints[i + 1]
        want = [(lb.timestamp, lb.index, lb.kind if lb.two_sided_before else None, lb.side)
                for lb in truth.labels[sym]]
        assert seen == want
        assert len(want) > 100


def test_mirror_negates_signs_keeps_kinds():
    _, streams, _ = n_events(6, 3_000)
    evs = streams["AAA"]
    _, d1 = replay(evs)
    _, d2 = replay([mirror_event(e, 20_000) for e in evs])
    a = classify_stream(d1)
    b = classify_stream(d2)
    assert [e.kind for e in a] == [e.kind for e in b]
    assert [e.sign for e in a] == [-e.sign for e in b]


def test_all_event_records_contain_spread_changes():
    _, streams, _ = small_day(2, 120)
    _, deltas = replay(streams["AAA"])
    sc = classify_stream(deltas)
    everything = all_event_records(deltas)
    assert [e for e in everything if e.spread_changed] == sc
    assert len(everything) > 2 * len(sc)
    for e in everything:
        assert e.sign == (1 if 2 * e.event_price > e.mid2_before else -1 if 2 * e.event_price < e.mid2_before
                          else (1 if e.side is Side.ASK else -1))


# CSV


def test_events_csv_round_trip():
    _, streams, _ = small_day(2, 60)
    _, deltas = replay(streams["AAA"])
    evs = aggregate_trades(all_event_records(deltas))
    buf = io.StringIO()
    write_events_csv(evs, buf)
    buf.seek(0)
    assert list(read_events_csv(buf)) == evs


def test_amounts_csv_row():
    buf = io.StringIO()
    write_amounts_csv([("X", "d1", relative_amounts([ev(P), ev(T), ev(D), ev(P)]))], buf)
    assert buf.getvalue() == "symbol,date,O,D,T,total,deviation\nX,d1,0.5,0.25,0.25,4,0.0\n"
