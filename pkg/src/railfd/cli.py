"""Command-line front end: ``railfd <subcommand> [options]``.

Every subcommand writes into ``--out`` (CSV, SVG or both) and returns exit
code 0 only when all requested runs completed. A gridlock cell inside
``compare`` or ``sweep`` is a result, not a failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import fd, svg
from .compare import (
    DEFAULT_A2,
    DEFAULT_AP2_RATIOS,
    compare,
    micro_exit_curve,
    micro_passenger_exits,
    run_sweep,
    write_sweep_csv,
)
from .macro import Gridlock, run_macro
from .micro import run_micro, run_steady, steady_grid
from .scenario import Boundary, ConfigError, ScenarioConfig, baseline

FMT = "{:.9g}"


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    return FMT.format(float(v))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def parse_list(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def _decimate(t, x, n_max: int = 400):
    step = max(1, len(t) // n_max)
    return list(t[::step]) + [t[-1]], list(x[::step]) + [x[-1]]


def load_config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config) if args.config else baseline()
    if args.dt is not None:
        cfg = cfg.with_(dt=args.dt)
    return cfg


class Output:
    def __init__(self, out: str, fmt_: str):
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.csv = fmt_ in ("csv", "both")
        self.svg = fmt_ in ("svg", "both")

    def path(self, name: str) -> Path:
        return self.dir / name

    def json(self, name: str, obj) -> None:
        self.path(name).write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, fd.Regime):
        return o.value
    raise TypeError(f"not serialisable: {type(o)}")


def _nan_to_none(v):
    return None if isinstance(v, float) and not math.isfinite(v) else v


# fd-curve ------------------------------------------------------------------


def fd_table(q_p_levels, p: fd.OperatingParams, n_k: int = 400):
    """Rows (k, q, v_bar, regime, q_p) on a shared k-grid, plus per-level errors."""
    if not q_p_levels:
        raise ValueError("no demand levels")
    valid, errors = [], []
    for q_p in q_p_levels:
        try:
            fd.critical_point(q_p, p)
            valid.append(q_p)
        except fd.InvalidParams as exc:
            errors.append(f"q_p={q_p:g}: {exc}")
    rows = []
    if valid:
        k_max = max(fd.jam_density(q_p, p) for q_p in valid)
        ks = k_max * np.arange(1, n_k + 1) / n_k
        for q_p in valid:
            for k in ks:
                q = fd.fd_flow(k, q_p, p)
                rows.append((k, q, q / k, fd.regime(k, q_p, p).value, q_p))
    return rows, valid, errors


def cmd_fd_curve(args) -> int:
    cfg = load_config(args)
    p = cfg.params
    try:
        rows, valid, errors = fd_table(parse_list(args.qp), p, args.k_points)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    out = Output(args.out, args.format)
    if out.csv:
        write_csv(out.path("fd_curve.csv"), ("k", "q", "v_bar", "regime", "q_p"), rows)
    if out.svg and valid:
        panel = svg.Panel("Fundamental diagram", "k [train/km]", "q [train/h]")
        for q_p in valid:
            sel = [r for r in rows if r[4] == q_p]
            panel.add([r[0] for r in sel], [r[1] for r in sel], label=f"q_p={q_p:g}")
        crit = [fd.critical_point(q_p, p) for q_p in valid]
        panel.add([c[1] for c in crit], [c[0] for c in crit], label="critical points", color="black", dots=True)
        svg.save(out.path("fd_curve.svg"), [panel])
    return 1 if errors else 0


# steady --------------------------------------------------------------------


def cmd_steady(args) -> int:
    cfg = load_config(args)
    p = cfg.params
    rows = []
    for spec in steady_grid(p):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            state, _ = run_steady(spec, p, steps_per_tau=int(round(p.tau / cfg.dt)))
        ref = fd.edie_steady_state(spec, p)
        rows.append((
            spec.regime(p).value, spec.q_p, spec.H, spec.v, ref.q, ref.k, state.q, state.k,
            abs(state.q - ref.q) / ref.q, abs(state.k - ref.k) / ref.k,
        ))
        print(f"{rows[-1][0]:<10} q_p={spec.q_p:8.0f}  q: {state.q:.4f} vs {ref.q:.4f}  k: {state.k:.4f} vs {ref.k:.4f}")
    out = Output(args.out, args.format)
    header = ("regime", "q_p", "H", "v", "q_fd", "k_fd", "q_micro", "k_micro", "err_q", "err_k")
    if out.csv:
        write_csv(out.path("steady.csv"), header, rows)
    if out.svg:
        panel = svg.Panel("Steady states: FD (lines) vs micro (dots)", "k [train/km]", "q [train/h]")
        for q_p in sorted({r[1] for r in rows}):
            kj = fd.jam_density(q_p, p)
            ks = kj * np.arange(1, 201) / 200
            panel.add(ks, [fd.fd_flow(k, q_p, p) for k in ks], label=f"q_p={q_p:g}")
        panel.add([r[7] for r in rows], [r[6] for r in rows], label="micro", color="black", dots=True)
        svg.save(out.path("steady.svg"), [panel])
    return 0


# micro ---------------------------------------------------------------------


def write_micro(out: Output, res, name: str = "timespace.svg") -> None:
    if out.csv:
        write_csv(
            out.path("trajectories.csv"), ("train_id", "t", "x"),
            ((tr.id, t, x) for tr in res.trains for t, x in zip(tr.t, tr.x) if math.isfinite(t)),
        )
        write_csv(out.path("stations.csv"), ("station", "train_id", "t_arr", "t_dep", "boarded"), res.station_log())
    if out.svg:
        panel = svg.Panel("Train trajectories", "t [h]", "x [km]")
        for tr in res.trains:
            if not tr.t or not math.isfinite(tr.t[0]):
                continue
            pts = [(t, x) for t, x in zip(tr.t, tr.x) if 0.0 <= t <= res.horizon]
            if len(pts) < 2:
                continue
            ts, xs = _decimate([pt[0] for pt in pts], [pt[1] for pt in pts])
            panel.add(ts, xs, color="#1f77b4")
        svg.save(out.path(name), [panel])


def _micro(cfg: ScenarioConfig):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # leftover trains are reported below
        res = run_micro(Boundary.sample(cfg), cfg.params)
    print(
        f"trains={len(res.trains)} stops={len(res.stops)} deferred={len(res.deferred)} "
        f"in_system_at_horizon={res.horizon_exceeded} ttt={res.ttt():.6g} train-h"
    )
    return res


def cmd_micro(args) -> int:
    cfg = load_config(args)
    res = _micro(cfg)
    write_micro(Output(args.out, args.format), res)
    return 0


# macro ---------------------------------------------------------------------


def curve_rows(res):
    return zip(res.t, res.A, res.D, res.A_p, res.D_p, res.T)


CURVE_HEADER = ("t", "A", "D", "A_p", "D_p", "T")


def cmd_macro(args) -> int:
    cfg = load_config(args)
    out = Output(args.out, args.format)
    try:
        res = run_macro(cfg)
    except Gridlock as exc:
        out.json("gridlock.json", exc.report.to_dict())
        print(f"gridlock: {exc}", file=sys.stderr)
        return 1
    print(f"ttt={res.ttt:.6g} train-h  ttt_pax={res.ttt_pax:.6g} pax-h per station")
    if out.csv:
        write_csv(out.path("curves.csv"), CURVE_HEADER, curve_rows(res))
    if out.svg:
        trains = svg.Panel("Trains", "t [h]", "cumulative count").add(res.t, res.A, "A").add(res.t, res.D, "D")
        pax = svg.Panel("Passengers per station", "t [h]", "cumulative count")
        pax.add(res.t, res.A_p, "A_p").add(res.t, res.D_p, "D_p")
        svg.save(out.path("cumulative.svg"), [trains, pax])
    return 0


# compare -------------------------------------------------------------------


def cmd_compare(args) -> int:
    cfg = load_config(args)
    out = Output(args.out, args.format)
    if args.micro_only:
        write_micro(out, _micro(cfg))
        return 0
    c = compare(cfg)
    rep = c.report.to_dict()
    rep = {k: _nan_to_none(v) for k, v in rep.items()}
    out.json("report.json", rep)
    r = c.report
    if r.gridlock is not None:
        print(f"macro gridlock at t={r.gridlock.time:.4f} h; micro ttt={r.ttt_micro:.6g}")
    else:
        print(f"ttt micro={r.ttt_micro:.6g} macro={r.ttt_macro:.6g} rel_error={r.relative_error:+.4f} max|dD|={r.max_dev_D:.3f}")
    m = c.macro
    if m is not None and out.csv:
        write_csv(out.path("curves.csv"), CURVE_HEADER, curve_rows(m))
    if out.svg:
        t = c.boundary.t
        trains = svg.Panel("Trains: macro (lines), micro (dots)", "t [h]", "cumulative count")
        pax = svg.Panel("Passengers per station: macro (lines), micro (dots)", "t [h]", "cumulative count")
        ex = micro_exit_curve(c.micro)
        te = ex.t[(ex.t >= 0) & (ex.t <= t[-1])]
        trains.add(t, c.micro.A(t), "A", color=svg.PALETTE[0], dots=True)
        trains.add(te, ex(te), "D", color=svg.PALETTE[1], dots=True)
        pax.add(t[::10], c.boundary.A_p[::10], "A_p", color=svg.PALETTE[0], dots=True)
        if m is not None:
            trains.add(m.t, m.A, color=svg.PALETTE[0]).add(m.t, m.D, color=svg.PALETTE[1])
            pax.add(m.t, m.A_p, color=svg.PALETTE[0]).add(m.t, m.D_p, color=svg.PALETTE[1])
            tp, dp = micro_passenger_exits(c.micro, float(m.D_p[0]))
            pax.add(tp, dp, "D_p", color=svg.PALETTE[1], dots=True)
        svg.save(out.path("compare.svg"), [trains, pax])
    return 0


# sweep ---------------------------------------------------------------------


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    a2s = parse_list(args.grid_a2) if args.grid_a2 else list(DEFAULT_A2)
    ratios = parse_list(args.grid_ap2) if args.grid_ap2 else list(DEFAULT_AP2_RATIOS)
    if not a2s or not ratios:
        print("error: empty sweep grid", file=sys.stderr)
        return 2
    reports = run_sweep(cfg, a2s, ratios, horizon=args.horizon)
    out = Output(args.out, args.format)
    for r in reports:
        status = "gridlock" if r.gridlock else ("ok" if r.completed else "FAILED")
        err = "" if r.relative_error is None else f"{r.relative_error:+.4f}"
        print(f"a2={r.a2:g} ap2={r.ap2_ratio:g}mu  ttt_micro={r.ttt_micro:.6g}  rel_error={err}  {status}")
    if out.csv:
        write_sweep_csv(reports, out.path("sweep.csv"))
    out.json("sweep.json", [{k: _nan_to_none(v) for k, v in r.to_dict().items()} for r in reports])
    if out.svg:
        err = svg.Panel("Relative TTT error", "a_p(2) / mu_p", "(TTT_macro - TTT_micro) / TTT_micro")
        ttt = svg.Panel("Micro TTT", "a_p(2) / mu_p", "TTT [train h]")
        for a2 in a2s:
            row = [r for r in reports if r.a2 == a2]
            done = [r for r in row if r.completed]
            err.add([r.ap2_ratio for r in done], [r.relative_error for r in done], f"a2={a2:g}")
            ttt.add([r.ap2_ratio for r in row], [r.ttt_micro for r in row], f"a2={a2:g}")
        svg.save(out.path("sweep.svg"), [err, ttt])
    failed = [r for r in reports if not r.completed and r.gridlock is None]
    return 1 if failed else 0


# entry ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="railfd", description="Rail-transit FD, micro and macro corridor models.")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="scenario JSON (default: baseline)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--format", choices=("csv", "svg", "both"), default="both")
        sp.add_argument("--dt", type=float, default=None, help="time step [h]; must divide tau")
        sp.set_defaults(func=func)
        return sp

    sp = add("fd-curve", cmd_fd_curve, "tabulate the FD for several passenger flows")
    sp.add_argument("--qp", default="0,8000,16000,24000", help="comma list of passenger flows [pax/h]")
    sp.add_argument("--k-points", type=int, default=400)
    add("steady", cmd_steady, "micro steady-state runs against the analytical FD")
    add("micro", cmd_micro, "microscopic simulation: trajectories and station log")
    add("macro", cmd_macro, "macroscopic exit-flow model: cumulative curves")
    sp = add("compare", cmd_compare, "run both models on the same scenario")
    sp.add_argument("--micro-only", action="store_true", help="only write the time-space diagram")
    sp = add("sweep", cmd_sweep, "a(2) x a_p(2) sensitivity sweep")
    sp.add_argument("--grid-a2", default=None, help="comma list of peak train flows [train/h]")
    sp.add_argument("--grid-ap2", default=None, help="comma list of peak passenger flows as fractions of mu_p")
    sp.add_argument("--horizon", type=float, default=8.0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, fd.InvalidParams, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
