"""Command-line front end: spreadresponse <subcommand> [options].

Every subcommand writes plain CSV (stdout unless ``-o`` is given). Relative
output paths are resolved against ``$SPREADRESPONSE_OUTPUT_DIR`` when it is
set. Exit status is 0 on success, 2 on usage errors and 1 on data errors;
data errors print one JSON line on stderr, e.g.

    {"error": "MalformedMessage", "message": "...", "offset": 1234}
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .classify import (
    SpreadKind,
    balance_deviation,
    relative_amounts,
    write_amounts_csv,
    write_events_csv,
)
from .errors import EmptyEventList, NoDefinedSpread, NoEvents, SpreadResponseError
from .feed import encode_stream, write_csv
from .pipeline import (
    DEFAULT_SESSION,
    Day,
    date_label,
    load_day,
    parse_session,
    read_universe,
)
from .response import (
    CURVE_COLUMNS,
    SCALE_EVENT,
    SCALE_PHYSICAL,
    ResponseCurve,
    active_passive,
    average_curves,
    cross_matrices,
    curve_rows,
    log_lag_grid,
    market_response,
    pool_curves,
    self_response_event_scale,
    self_response_physical,
    write_matrix_csv,
)
from .synthgen import GeneratorConfig, generate, load_config_file

OUTPUT_DIR_ENV = "SPREADRESPONSE_OUTPUT_DIR"
DEFAULT_TAUS = (1, 2, 50, 500, 2000, 10000)
KINDS = tuple(k.value for k in SpreadKind)


class UsageError(Exception):
    pass


# output helpers


def _resolve(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _emit(text: str, output: str | None) -> Path | None:
    """Write the whole text at once, so a failed run leaves no partial file."""
    if output is None or output == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return None
    p = _resolve(output)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, newline="")
    return p


def _emit_bytes(data: bytes, output: str | None) -> None:
    if output is None or output == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
        return
    p = _resolve(output)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(data)


def _csv_text(write: Callable[[csv.writer], None]) -> str:
    buf = io.StringIO()
    write(csv.writer(buf, lineterminator="\n"))
    return buf.getvalue()


def _svg_path(args, default_name: str) -> Path | None:
    if not getattr(args, "svg", False):
        return None
    if args.output and args.output != "-":
        return _resolve(args.output).with_suffix(".svg")
    return _resolve(default_name)


def _num(x) -> str:
    return "" if x != x else repr(float(x))


# option parsing


def _read_cli_config(path: str) -> dict[str, str]:
    """``key = value`` lines; recognised keys are universe, session, format."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in ("universe", "session", "format"):
            raise UsageError(f"{path}:{lineno}: unknown key {k!r}")
        out[k] = v
    return out


def _settings(args) -> tuple[list[str] | None, tuple[int, int], str | None]:
    conf = _read_cli_config(args.config) if args.config else {}
    universe_src = args.universe or conf.get("universe")
    session_src = args.session or conf.get("session")
    fmt = args.format or conf.get("format")
    if fmt is not None and fmt not in ("binary", "csv"):
        raise UsageError(f"unknown format {fmt!r}")
    try:
        session = parse_session(session_src) if session_src else DEFAULT_SESSION
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        universe = read_universe(universe_src)
    except OSError as exc:
        raise UsageError(f"cannot read universe file: {exc}") from None
    return universe, session, fmt


def _load_one(job) -> Day:
    path, fmt, universe, session, merge = job
    return load_day(path, fmt, universe, session, merge)


def _load_days(args) -> list[Day]:
    universe, session, fmt = _settings(args)
    labels = [date_label(p) for p in args.input]
    if len(set(labels)) != len(labels):
        raise UsageError(f"input file stems must be distinct dates, got {labels}")
    for p in args.input:
        if not Path(p).is_file():
            raise UsageError(f"input file not found: {p}")
    merge = not getattr(args, "no_merge_trades", False)
    jobs = [(p, fmt, universe, session, merge) for p in args.input]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            days = list(pool.map(_load_one, jobs))
    else:
        days = [_load_one(j) for j in jobs]
    return sorted(days, key=lambda d: d.date)


def _symbols(days: Sequence[Day], wanted: Sequence[str] | None) -> list[str]:
    present = sorted({s for d in days for s in d.symbols})
    if not wanted:
        return present
    missing = [s for s in wanted if s not in present]
    if missing:
        raise NoEvents(f"no data for symbol(s) {', '.join(missing)}")
    return sorted(set(wanted))


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _grid(args, default_max: int):
    if args.lags:
        return sorted(set(args.lags))
    return log_lag_grid(args.max_lag or default_max, args.per_decade)


# analysis helpers shared by several subcommands


def _day_curves(days, symbol, kind, scale, all_events, grid) -> list[tuple[str, ResponseCurve]]:
    out = []
    for day in days:
        sd = day.symbols.get(symbol)
        if sd is None:
            continue
        evs = sd.of_kind(kind, all_events)
        if not evs:
            continue
        if scale == SCALE_EVENT:
            c = self_response_event_scale(evs, grid)
        else:
            c = self_response_physical(evs, sd.trajectory, grid)
        c.kind = kind
        out.append((day.date, c))
    return out


def _pooled(per_day: list[tuple[str, ResponseCurve]]) -> ResponseCurve:
    curves = [c for _, c in per_day]
    return curves[0] if len(curves) == 1 else pool_curves(curves)


def _market_matrices(days, symbols, kind, taus, all_events=False):
    data = [
        {s: (sd.of_kind(kind, all_events), sd.trajectory) for s, sd in d.symbols.items() if s in symbols}
        for d in days
    ]
    return cross_matrices(data, taus, symbols)


def _amount_rows(days, symbols):
    rows = []
    for sym in symbols:
        for day in days:
            sd = day.symbols.get(sym)
            if sd is None:
                continue
            try:
                rows.append((sym, day.date, relative_amounts(sd.changes), sd))
            except EmptyEventList:
                continue
    return rows


def _tw_spread(sd):
    try:
        return sd.tw_spread()
    except NoDefinedSpread:
        return None


# subcommands


def cmd_parse(args) -> None:
    days = _load_days(args)
    counts_by = ("add", "execute", "cancel", "delete", "replace")

    def write(w):
        w.writerow(("date", "symbol", *counts_by, "total"))
        for day in days:
            for sym, sd in day.symbols.items():
                n = {k: 0 for k in counts_by}
                for ev in sd.events:
                    n[ev.kind.value] += 1
                w.writerow((day.date, sym, *(n[k] for k in counts_by), len(sd.events)))

    _emit(_csv_text(write), args.output)
    for day in days:
        print(json.dumps({"date": day.date, "parsed": day.parsed, "skipped": day.skipped,
                          "dropped": day.dropped}), file=sys.stderr)
    if args.dump:
        for day in days:
            flat = sorted((ev for sd in day.symbols.values() for ev in sd.events),
                          key=lambda e: e.timestamp)
            if args.dump_format == "csv":
                buf = io.StringIO()
                write_csv(flat, buf)
                _emit(buf.getvalue(), str(Path(args.dump) / f"{day.date}.csv"))
            else:
                _emit_bytes(encode_stream(flat), str(Path(args.dump) / f"{day.date}.itch"))


def cmd_replay(args) -> None:
    days = _load_days(args)

    def write(w):
        w.writerow(("symbol", "date", "events", "quote_changes", "final_bid", "final_ask",
                    "resting_orders", "tw_spread"))
        for sym in _symbols(days, None):
            for day in days:
                sd = day.symbols.get(sym)
                if sd is None:
                    continue
                if args.check_invariants:
                    _check_every_step(sd)
                tw = _tw_spread(sd)
                bid, ask = sd.book.best_quotes()
                w.writerow((
                    sym, day.date, len(sd.events), sum(1 for d in sd.deltas if d.spread_changed),
                    "" if bid is None else bid, "" if ask is None else ask,
                    len(sd.book.orders), "" if tw is None else _num(tw),
                ))

    _emit(_csv_text(write), args.output)


def _check_every_step(sd) -> None:
    from .book import OrderBook

    book = OrderBook(sd.symbol)
    for k, ev in enumerate(sd.events):
        book.apply(ev)
        try:
            book.check_invariants()
        except AssertionError as exc:
            raise SpreadResponseError(f"{sd.symbol} event {k}: {exc}") from None


def cmd_classify(args) -> None:
    days = _load_days(args)
    symbols = _symbols(days, args.symbol)
    rows = _amount_rows(days, symbols)
    if not rows:
        raise EmptyEventList("no spread-changing events in any session")
    buf = io.StringIO()
    write_amounts_csv(((s, d, a) for s, d, a, _ in rows), buf)
    _emit(buf.getvalue(), args.output)
    if args.events_out:
        ev_buf = io.StringIO()
        evs = []
        for sym in symbols:
            for day in days:
                sd = day.symbols.get(sym)
                if sd is not None:
                    evs.extend(sd.all_events if args.all_events else sd.changes)
        write_events_csv(evs, ev_buf)
        _emit(ev_buf.getvalue(), args.events_out)


def cmd_respond(args) -> None:
    days = _load_days(args)
    symbols = _symbols(days, args.symbol)
    scale = args.scale
    grid = _grid(args, 10_000)
    plain = len(symbols) == 1 and not args.per_day
    results = []
    for sym in symbols:
        per_day = _day_curves(days, sym, args.kind, scale, args.all_events, grid)
        if not per_day:
            continue
        if args.per_day:
            results.extend((sym, date, c) for date, c in per_day)
        else:
            results.append((sym, None, _pooled(per_day)))
    if not results:
        raise NoEvents(f"no {args.kind} events in the session for {', '.join(symbols) or 'any symbol'}")

    def write(w):
        prefix = () if plain else (("date", "symbol") if args.per_day else ("symbol",))
        w.writerow((*prefix, *CURVE_COLUMNS))
        for sym, date, c in results:
            lead = () if plain else ((date, sym) if args.per_day else (sym,))
            for row in curve_rows(c):
                w.writerow((*lead, *row))

    _emit(_csv_text(write), args.output)
    svg = _svg_path(args, f"respond_{args.kind}_{scale}.svg")
    if svg:
        from .svgplot import curves_svg

        labels = {(f"{s} {d}" if d else s): c for s, d, c in results}
        curves_svg(labels, svg, title=f"{args.kind} ({scale} scale)",
                   xlabel="lag (events)" if scale == SCALE_EVENT else "lag (s)")


def cmd_cross(args) -> None:
    days = _load_days(args)
    symbols = _symbols(days, args.symbol)
    taus = sorted(set(args.tau_list))
    mats = _market_matrices(days, symbols, args.kind, taus, args.all_events)
    buf = io.StringIO()
    write_matrix_csv(mats, buf)
    _emit(buf.getvalue(), args.output)
    if args.active_passive:
        def write(w):
            w.writerow(("tau", "symbol", "active", "passive"))
            for m in mats:
                act, pas = active_passive(m)
                for s, a, p in zip(m.symbols, act, pas):
                    w.writerow((m.tau, s, _num(a), _num(p)))

        _emit(_csv_text(write), args.active_passive)
    svg = _svg_path(args, f"cross_{args.kind}.svg")
    if svg:
        from .svgplot import matrices_svg

        matrices_svg(mats, svg, title=args.kind)


def cmd_market(args) -> None:
    days = _load_days(args)
    symbols = _symbols(days, args.symbol)
    grid = _grid(args, 10_000)
    curves = []
    for kind in args.kind or KINDS:
        c = market_response(_market_matrices(days, symbols, kind, grid, args.all_events))
        c.kind = kind
        curves.append(c)

    def write(w):
        w.writerow(CURVE_COLUMNS)
        for c in curves:
            w.writerows(curve_rows(c))

    _emit(_csv_text(write), args.output)
    svg = _svg_path(args, "market.svg")
    if svg:
        from .svgplot import curves_svg

        curves_svg({c.kind: c for c in curves}, svg, title="market response", xlabel="lag (s)")


def cmd_generate(args) -> None:
    try:
        cfg = load_config_file(args.config) if args.config else GeneratorConfig()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.symbols:
        cfg = replace(cfg, symbols=[s for s in args.symbols.split(",") if s])
    if args.session:
        try:
            cfg = replace(cfg, session=parse_session(args.session))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if args.print_config:
        from .synthgen import dump_config

        cfg.validate()
        _emit(dump_config(cfg), args.output)
        return
    streams, truth = generate(cfg)
    fmt = args.format or ("csv" if (args.output or "").lower().endswith(".csv") else "binary")
    if fmt == "csv":
        from .synthgen import flatten

        buf = io.StringIO()
        write_csv(flatten(streams), buf)
        _emit(buf.getvalue(), args.output)
    else:
        _emit_bytes(encode_stream(streams), args.output)
    if args.labels:
        def write(w):
            w.writerow(("symbol", "index", "timestamp_ns", "kind", "side"))
            for sym in sorted(truth.labels):
                for lb in truth.labels[sym]:
                    w.writerow((sym, lb.index, lb.timestamp, lb.kind, lb.side.value))

        _emit(_csv_text(write), args.labels)


def cmd_figures(args) -> None:
    days = _load_days(args)
    symbols = _symbols(days, args.symbol)
    outdir = Path(args.outdir)
    written: list[str] = []

    def put(name: str, write) -> None:
        _emit(_csv_text(write), str(outdir / name))
        written.append(name)

    rows = _amount_rows(days, symbols)
    spreads = {(s, d): _tw_spread(sd) for s, d, _, sd in rows}

    def f(x):
        return _num(float(x))

    put("fig01_frequencies.csv", lambda w: (
        w.writerow(("symbol", "date", "O", "D", "T", "total")),
        w.writerows((s, d, f(a.O), f(a.D), f(a.T), a.total) for s, d, a, _ in rows)))
    put("fig02_trades_vs_deletions.csv", lambda w: (
        w.writerow(("symbol", "date", "T", "D", "deviation")),
        w.writerows((s, d, f(a.T), f(a.D), f(balance_deviation(a))) for s, d, a, _ in rows)))
    put("fig03_total_vs_relative.csv", lambda w: (
        w.writerow(("symbol", "date", "total", "O", "D", "T")),
        w.writerows((s, d, a.total, f(a.O), f(a.D), f(a.T)) for s, d, a, _ in rows)))

    def spread_cell(s, d):
        v = spreads[(s, d)]
        return "" if v is None else f(v)

    put("fig04_spread_vs_relative.csv", lambda w: (
        w.writerow(("symbol", "date", "tw_spread", "O", "D", "T")),
        w.writerows((s, d, spread_cell(s, d), f(a.O), f(a.D), f(a.T)) for s, d, a, _ in rows)))

    def tight(s, d):
        v = spreads[(s, d)]
        return "" if v is None else int(v < args.tight_spread)

    put("fig05_trades_vs_deletions_by_spread.csv", lambda w: (
        w.writerow(("symbol", "date", "T", "D", "tw_spread", "tight")),
        w.writerows((s, d, f(a.T), f(a.D), spread_cell(s, d), tight(s, d)) for s, d, a, _ in rows)))

    event_grid = log_lag_grid(args.max_event_lag, args.per_decade)
    phys_grid = log_lag_grid(args.max_lag, args.per_decade)
    svg_sets: dict[str, dict[str, ResponseCurve]] = {}

    for num, avg_num, scale, grid in (("06", "07", SCALE_EVENT, event_grid),
                                       ("08", "09", SCALE_PHYSICAL, phys_grid)):
        per_day_rows = []
        averages = {}
        for kind in KINDS:
            stock_curves = []
            for sym in symbols:
                per_day = _day_curves(days, sym, kind, scale, False, grid)
                per_day_rows.extend((d, sym, c) for d, c in per_day)
                if per_day:
                    stock_curves.append(_pooled(per_day))
            if stock_curves:
                averages[kind] = average_curves(stock_curves)
                averages[kind].kind = kind
        put(f"fig{num}_{scale}_scale_per_day.csv", lambda w, r=per_day_rows: (
            w.writerow(("date", "symbol", *CURVE_COLUMNS)),
            [w.writerows((d, s, *row) for row in curve_rows(c)) for d, s, c in r]))
        put(f"fig{avg_num}_{scale}_scale_average.csv", lambda w, a=averages: (
            w.writerow(CURVE_COLUMNS),
            [w.writerows(curve_rows(a[k])) for k in KINDS if k in a]))
        svg_sets[f"fig{avg_num}_{scale}_scale_average"] = averages

    subset_rows = []
    for kind in KINDS:
        for subset, flag in (("spread_changing", False), ("all", True)):
            stock_curves = [
                _pooled(pd) for sym in symbols
                if (pd := _day_curves(days, sym, kind, SCALE_PHYSICAL, flag, phys_grid))
            ]
            if stock_curves:
                c = average_curves(stock_curves)
                c.kind = kind
                subset_rows.append((subset, c))
                svg_sets.setdefault("fig10_all_events", {})[f"{kind} {subset}"] = c
    put("fig10_all_events.csv", lambda w: (
        w.writerow(("subset", *CURVE_COLUMNS)),
        [w.writerows((sub, *row) for row in curve_rows(c)) for sub, c in subset_rows]))

    taus = sorted(set(args.tau_list))
    matrices = {}
    market = {}
    if len(symbols) >= 2:
        for kind in KINDS:
            matrices[kind] = _market_matrices(days, symbols, kind, taus)
            m = market_response(_market_matrices(days, symbols, kind, phys_grid))
            m.kind = kind
            market[kind] = m

    def write_matrices(w):
        w.writerow(("kind", "tau", "row_symbol", "col_symbol", "R", "rho"))
        for kind, mats in matrices.items():
            for m in mats:
                for a, si in enumerate(m.symbols):
                    for b, sj in enumerate(m.symbols):
                        w.writerow((kind, m.tau, si, sj, _num(m.values[a, b]), _num(m.normalized[a, b])))

    put("fig11_cross_response_matrices.csv", write_matrices)
    put("fig12_market_response.csv", lambda w: (
        w.writerow(CURVE_COLUMNS), [w.writerows(curve_rows(c)) for c in market.values()]))
    svg_sets["fig12_market_response"] = market

    if args.svg:
        from .svgplot import curves_svg, matrices_svg, scatter_svg

        d_vals = [float(a.D) for _, _, a, _ in rows]
        scatter_svg(d_vals, {"T": [float(a.T) for _, _, a, _ in rows]},
                    _resolve(str(outdir / "fig02_trades_vs_deletions.svg")), xlabel="D")
        for name, curves in svg_sets.items():
            curves_svg(curves, _resolve(str(outdir / f"{name}.svg")), title=name)
        for kind, mats in matrices.items():
            matrices_svg(mats, _resolve(str(outdir / f"fig11_cross_response_{kind}.svg")), title=kind)
    for name in written:
        print(name, file=sys.stderr)


# parser


def _data_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("input")
    g.add_argument("--input", "-i", action="append", required=True, metavar="FILE",
                   help="feed file, one trading day each; the file stem is the date label (repeatable)")
    g.add_argument("--format", choices=("binary", "csv"),
                   help="input encoding (default: csv for *.csv, binary otherwise)")
    g.add_argument("--universe", metavar="FILE",
                   help="symbol list, one per line; 'nasdaq96' selects the bundled list")
    g.add_argument("--session", metavar="HH:MM-HH:MM",
                   help="analysis window (default 09:40-15:50)")
    g.add_argument("--config", metavar="FILE",
                   help="key = value defaults for universe, session and format")
    g.add_argument("--symbol", action="append", metavar="SYM",
                   help="restrict the analysis to this symbol (repeatable)")
    g.add_argument("--no-merge-trades", action="store_true",
                   help="keep every execution as its own trade instead of merging same-ns, same-sign runs")
    g.add_argument("--jobs", "-j", type=int, default=1, help="parallel worker processes for loading days")
    p.add_argument("--output", "-o", metavar="FILE", help="output file (default stdout)")
    return p


def _grid_opts(p: argparse.ArgumentParser, max_default_help: str) -> None:
    p.add_argument("--max-lag", type=int, help=f"largest lag on the log grid ({max_default_help})")
    p.add_argument("--per-decade", type=int, default=6, help="log grid density (default 6, max 25)")
    p.add_argument("--lags", type=_int_list, help="explicit comma-separated lag list")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spreadresponse",
        description="Order book replay, spread-change classification and price response.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    data = _data_parent()

    p = sub.add_parser("parse", parents=[data], help="decode feeds and count messages")
    p.add_argument("--dump", metavar="DIR", help="re-encode each day into DIR as <date>.csv or <date>.itch")
    p.add_argument("--dump-format", choices=("csv", "binary"), default="csv")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("replay", parents=[data], help="replay books; time-weighted spread per symbol and day")
    p.add_argument("--check-invariants", action="store_true",
                   help="verify level aggregates against the order map after every event")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("classify", parents=[data], help="O/D/T table and balance deviations")
    p.add_argument("--events-out", metavar="FILE", help="also dump the classified events as CSV")
    p.add_argument("--all-events", action="store_true",
                   help="with --events-out, dump every event, not only quote-changing ones")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("respond", parents=[data], help="self-response curves")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--scale", choices=(SCALE_EVENT, SCALE_PHYSICAL), default=SCALE_PHYSICAL)
    p.add_argument("--all-events", action="store_true",
                   help="average over every event of the kind, not only quote-changing ones")
    p.add_argument("--per-day", action="store_true", help="one curve per symbol and day instead of pooling days")
    p.add_argument("--svg", action="store_true", help="also write an SVG plot")
    _grid_opts(p, "default 10000")
    p.set_defaults(func=cmd_respond)

    p = sub.add_parser("cross", parents=[data], help="cross-response matrices")
    p.add_argument("--kind", choices=KINDS, default="trade")
    p.add_argument("--tau-list", type=_int_list, default=list(DEFAULT_TAUS),
                   help="comma-separated lags in seconds (default 1,2,50,500,2000,10000)")
    p.add_argument("--all-events", action="store_true")
    p.add_argument("--active-passive", metavar="FILE", help="also write active/passive responses")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_cross)

    p = sub.add_parser("market", parents=[data], help="market response (mean off-diagonal cross-response)")
    p.add_argument("--kind", choices=KINDS, action="append", help="repeatable; default all three kinds")
    p.add_argument("--all-events", action="store_true")
    p.add_argument("--svg", action="store_true")
    _grid_opts(p, "default 10000")
    p.set_defaults(func=cmd_market)

    p = sub.add_parser("generate", help="synthetic order flow")
    p.add_argument("--config", metavar="FILE", help="generator key = value file")
    p.add_argument("--seed", type=int)
    p.add_argument("--symbols", help="comma-separated symbol list")
    p.add_argument("--session", metavar="HH:MM-HH:MM")
    p.add_argument("--format", choices=("binary", "csv"),
                   help="default: csv when the output ends in .csv, binary otherwise")
    p.add_argument("--labels", metavar="FILE", help="write the generator's quote-change labels as CSV")
    p.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    p.add_argument("--output", "-o", metavar="FILE", help="output file (default stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("figures", parents=[data], help="CSV data behind each figure of the study")
    p.add_argument("--outdir", default="figures", help="output directory (default ./figures)")
    p.add_argument("--tau-list", type=_int_list, default=list(DEFAULT_TAUS))
    p.add_argument("--max-lag", type=int, default=10_000, help="physical grid end in seconds")
    p.add_argument("--max-event-lag", type=int, default=10_000, help="event grid end in events")
    p.add_argument("--per-decade", type=int, default=6)
    p.add_argument("--tight-spread", type=float, default=0.02,
                   help="spread threshold for the fig05 flag (currency units)")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_figures)
    return parser


def _error_line(exc: BaseException) -> str:
    info = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("offset", "line"):
        v = getattr(exc, attr, None)
        if v is not None:
            info[attr] = v
    return json.dumps(info)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "per_decade", 6) is not None and not 1 <= getattr(args, "per_decade", 6) <= 25:
            raise UsageError("--per-decade must be between 1 and 25")
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (SpreadResponseError, ValueError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
