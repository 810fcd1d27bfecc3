"""Micro vs macro comparison on identical boundary conditions, and the a(2) x a_p(2) sweep."""

from __future__ import annotations

import csv
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .macro import CumulativeCurve, Gridlock, GridlockReport, MacroResult, run_macro
from .micro import MicroResult, run_micro
from .scenario import Boundary, ScenarioConfig

DEFAULT_A2 = (12.0, 15.0, 18.0)
DEFAULT_AP2_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
SWEEP_HEADER = ("a2", "ap2_ratio", "ttt_micro", "ttt_macro", "rel_error", "gridlock", "bunching_flag")


def micro_exit_curve(micro: MicroResult) -> CumulativeCurve:
    """Micro D(t) as a cumulative curve through the exit events (t_exit_n, n)."""
    pts = sorted((tr.exit, tr.id) for tr in micro.trains if tr.exit is not None)
    t = np.array([pt[0] for pt in pts])
    n = np.array([pt[1] for pt in pts], dtype=float)
    keep = np.append(np.diff(t) > 0, True)
    return CumulativeCurve(t[keep], n[keep])


def micro_passenger_exits(micro: MicroResult, d0: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-station passenger output as steps at train exit times within [0, horizon].

    Each exiting train delivers its total boardings divided by the number of
    stations; the count starts from ``d0`` at t=0.
    """
    n = micro.params.n_stations
    pts = sorted(
        (tr.exit, sum(ev.boarded for ev in tr.events) / n)
        for tr in micro.trains
        if tr.exit is not None and 0.0 < tr.exit <= micro.horizon
    )
    t = np.array([0.0] + [pt[0] for pt in pts])
    dp = d0 + np.concatenate([[0.0], np.cumsum([pt[1] for pt in pts])])
    return t, dp


def d_deviation(micro: MicroResult, macro: MacroResult) -> tuple[float, float]:
    """Max |D_macro - D_micro| on [0, horizon]: (exit-event curve, raw step count)."""
    t = macro.t
    step = float(np.max(np.abs(macro.D - micro.D(t))))
    curve = micro_exit_curve(micro)
    te = curve.t[(curve.t >= t[0]) & (curve.t <= t[-1])]
    # compare on the union of grid and event times, where the curve has its kinks
    ts = np.union1d(t, te)
    ts = ts[(ts >= curve.t[0]) & (ts <= curve.t[-1])]
    dmac = np.interp(ts, t, macro.D)
    return float(np.max(np.abs(dmac - curve(ts)))), step


@dataclass
class ComparisonReport:
    a2: float
    ap2_ratio: float
    ttt_micro: float
    ttt_macro: float | None
    relative_error: float | None
    gridlock: GridlockReport | None = None
    max_dev_D: float | None = None
    max_dev_D_step: float | None = None
    ttt_pax_macro: float | None = None
    micro_stops: int = 0
    micro_deferred: int = 0
    micro_horizon_exceeded: int = 0
    macro_unresolved: int = 0
    errors: list[str] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.relative_error is not None

    @property
    def bunching_flag(self) -> bool:
        """The micro queue backed up to the origin: entries had to be deferred."""
        return self.micro_deferred > 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gridlock"] = None if self.gridlock is None else self.gridlock.to_dict()
        d["bunching_flag"] = self.bunching_flag
        return d

    def csv_row(self) -> list[str]:
        fmt = lambda v: "" if v is None else f"{v:.9g}"
        return [
            fmt(self.a2), fmt(self.ap2_ratio), fmt(self.ttt_micro), fmt(self.ttt_macro),
            fmt(self.relative_error), str(int(self.gridlock is not None)), str(int(self.bunching_flag)),
        ]


@dataclass
class Comparison:
    report: ComparisonReport
    boundary: Boundary
    micro: MicroResult
    macro: MacroResult | None


def compare(cfg: ScenarioConfig, boarding: str = "clear") -> Comparison:
    """Run both models on the same sampled a(t), a_p(t)."""
    b = Boundary.sample(cfg)
    errors: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        micro = run_micro(b, cfg.params, boarding=boarding)
        try:
            macro = run_macro(cfg, b)
            grid = None
        except Gridlock as exc:
            macro, grid = None, exc.report
    errors.extend(str(w.message) for w in caught)
    ttt_micro = micro.ttt()
    rep = ComparisonReport(
        a2=cfg.a2, ap2_ratio=cfg.ap2 / cfg.params.mu_p, ttt_micro=ttt_micro, ttt_macro=None, relative_error=None,
        gridlock=grid, micro_stops=len(micro.stops), micro_deferred=len(micro.deferred),
        micro_horizon_exceeded=micro.horizon_exceeded, errors=errors,
    )
    if macro is not None:
        rep.ttt_macro = macro.ttt
        rep.relative_error = (macro.ttt - ttt_micro) / ttt_micro
        rep.max_dev_D, rep.max_dev_D_step = d_deviation(micro, macro)
        rep.ttt_pax_macro = macro.ttt_pax
        rep.macro_unresolved = macro.unresolved
    return Comparison(rep, b, micro, macro)


def run_comparison(cfg: ScenarioConfig) -> ComparisonReport:
    return compare(cfg).report


def _cell(cfg: ScenarioConfig) -> ComparisonReport:
    try:
        return run_comparison(cfg)
    except Exception as exc:  # a failing cell must not stop the sweep
        return ComparisonReport(cfg.a2, cfg.ap2 / cfg.params.mu_p, float("nan"), None, None, errors=[repr(exc)])


def sweep_threads() -> int:
    env = os.environ.get("RAILFD_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_sweep(
    base: ScenarioConfig,
    a2_values=DEFAULT_A2,
    ap2_ratios=DEFAULT_AP2_RATIOS,
    horizon: float = 8.0,
    workers: int | None = None,
) -> list[ComparisonReport]:
    """One comparison per (a2, ap2) cell, in grid order."""
    mu = base.params.mu_p
    cells = [base.with_(a2=float(a2), ap2=float(r) * mu, horizon=horizon) for a2 in a2_values for r in ap2_ratios]
    workers = sweep_threads() if workers is None else workers
    workers = min(workers, len(cells))
    if workers <= 1:
        return [_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_cell, cells))


def write_sweep_csv(reports, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for rep in reports:
            w.writerow(rep.csv_row())


def spearman(x, y) -> float:
    from scipy.stats import spearmanr

    return float(spearmanr(x, y).statistic)


def relative_jumps(reports, a2: float) -> list[tuple[float, float]]:
    """(ap2_ratio, relative increase of micro TTT from the previous grid point) for one a2 row."""
    row = sorted((r for r in reports if r.a2 == a2), key=lambda r: r.ap2_ratio)
    return [
        (cur.ap2_ratio, (cur.ttt_micro - prev.ttt_micro) / prev.ttt_micro) for prev, cur in zip(row, row[1:])
    ]


def low_demand_error_scale(reports, a2: float, n: int = 2) -> float:
    """Mean |relative error| over the n lowest completed demand levels of one a2 row."""
    row = sorted((r for r in reports if r.a2 == a2 and r.completed), key=lambda r: r.ap2_ratio)[:n]
    return float(np.mean([abs(r.relative_error) for r in row]))
