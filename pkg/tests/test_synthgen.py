from dataclasses import replace
from statistics import mean

import pytest

from conftest import short_config, small_day
from spreadresponse.book import OrderBook, replay, time_weighted_average_spread
from spreadresponse.classify import (
    SpreadKind,
    aggregate_trades,
    all_event_records,
    balance_deviation,
    classify_stream,
    relative_amounts,
)
from spreadresponse.errors import InfeasibleConfig
from spreadresponse.events import EventKind
from spreadresponse.feed import parse_stream
from spreadresponse.response import MidpointTrajectory, self_response_all_events, self_response_physical
from spreadresponse.synthgen import GeneratorConfig, dump_config, encode, generate, generate_events, load_config

TARGETS = {"O": 0.5, "D": 0.34, "T": 0.14}


def test_same_seed_same_bytes():
    cfg = short_config(21, 60, symbols=["AAA", "BBB"])
    assert encode(generate(cfg)[0]) == encode(generate(replace(cfg))[0])
    assert encode(generate(replace(cfg, seed=22))[0]) != encode(generate(cfg)[0])


def test_no_market_orders_no_trades():
    cfg = short_config(1, 120, market_rate=0.0)
    streams, truth = generate(cfg)
    assert not any(e.kind is EventKind.EXECUTE for e in streams["AAA"])
    _, deltas = replay(streams["AAA"])
    assert not any(e.kind is SpreadKind.TRADE for e in classify_stream(deltas, cfg.session))
    assert truth.quote_changing_aggressors("AAA") == 0


@pytest.mark.parametrize("kw", [{}, {"deep_rate": 30.0}, {"replace_prob": 0.5, "partial_cancel_prob": 0.4},
                                {"shock_rate": 0.5, "impact": 1.0, "symbols": ["AAA", "BBB", "CCC"]}])
def test_streams_replay_cleanly(kw):
    cfg = short_config(3, 120, **kw)
    streams, truth = generate(cfg)
    for sym, evs in streams.items():
        book = OrderBook(sym)
        for ev in evs:
            book.apply(ev)
        book.check_invariants()
        assert len(evs) == truth.counts[sym]


@pytest.mark.parametrize("kw", [
    {"placement_rate": 0.0},
    {"cancel_rate": -1.0},
    {"depth_p": 1.0},
    {"replace_prob": 0.7, "partial_cancel_prob": 0.5},
    {"symbols": []},
    {"symbols": ["AAA", "AAA"]},
    {"session": (10, 5)},
])
def test_infeasible_configs(kw):
    with pytest.raises(InfeasibleConfig):
        generate(replace(short_config(0, 60), **kw))


def test_config_text_round_trip():
    cfg = short_config(9, 300, symbols=["AAA", "BBB"], deep_rate=12.5)
    again = load_config(dump_config(cfg))
    assert again == cfg
    assert load_config("# nothing but defaults\n") == GeneratorConfig()


def test_config_rejects_unknown_key_and_bad_value():
    with pytest.raises(InfeasibleConfig):
        load_config("colour = blue\n")
    with pytest.raises(InfeasibleConfig):
        load_config("seed = seven\n")


def test_generate_events_truncates_exactly():
    cfg = short_config(2, 10, symbols=["AAA", "BBB"])
    streams, truth = generate_events(cfg, 1_000)
    assert {s: len(v) for s, v in streams.items()} == {"AAA": 1_000, "BBB": 1_000}
    assert parse_stream(encode(streams)).events == streams


# calibration against the peak positions


def _amounts(seed, seconds=900):
    cfg = replace(short_config(seed, seconds), warmup_s=60.0)
    streams, _ = generate(cfg)
    _, deltas = replay(streams["AAA"])
    events = aggregate_trades(classify_stream(deltas, cfg.session))
    return relative_amounts(events), time_weighted_average_spread(deltas, cfg.session)


@pytest.fixture(scope="module")
def calibration_runs():
    return [_amounts(seed) for seed in range(10)]


def test_calibrated_means_near_targets(calibration_runs):
    for name, target in TARGETS.items():
        m = mean(float(getattr(a, name)) for a, _ in calibration_runs)
        assert abs(m - target) <= 0.05, (name, m)


def test_tight_spread_days_sit_on_balance_line(calibration_runs):
    tight = [(a, s) for a, s in calibration_runs if s < 0.02]
    assert len(tight) == len(calibration_runs)
    assert all(abs(balance_deviation(a)) < 0.02 for a, _ in tight)


def test_all_trades_respond_less_than_quote_changing_trades():
    for seed in range(3):
        cfg, streams, _ = small_day(seed, 900)
        _, deltas = replay(streams["AAA"])
        traj = MidpointTrajectory.from_deltas("AAA", deltas, cfg.session)
        sc = [e for e in aggregate_trades(classify_stream(deltas, cfg.session)) if e.kind is SpreadKind.TRADE]
        everything = [e for e in aggregate_trades(all_event_records(deltas, cfg.session))
                      if e.kind is SpreadKind.TRADE]
        r_sc = self_response_physical(sc, traj, [1]).values[0]
        r_all = self_response_all_events(everything, traj, [1]).values[0]
        assert 0 < r_sc - r_all < r_sc
