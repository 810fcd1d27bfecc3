"""Exit-flow loading of a transit line with the FD as the exit-flow function.

The line is an input-output box: trains enter at a(t), leave at
d(t) = Q(k(t), a_p(t)) with k = (A - D)/L, and the travel time T(t) is read
off the cumulative curves through A(t) = D(t + T(t)).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import fd
from .fd import OperatingParams
from .scenario import Boundary, ScenarioConfig


class Gridlock(RuntimeError):
    """The density reached the jam density; the exit-flow model has no solution."""

    def __init__(self, report: "GridlockReport"):
        super().__init__(f"gridlock at t={report.time:.4f} h: k={report.k:.4f} >= k_jam={report.k_jam:.4f}")
        self.report = report


@dataclass(frozen=True)
class GridlockReport:
    time: float
    k: float
    k_jam: float
    scenario: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"time": self.time, "k": self.k, "k_jam": self.k_jam, "scenario": self.scenario}


class CumulativeCurve:
    """Sampled non-decreasing count N(t), linear between samples."""

    def __init__(self, t, n):
        t = np.asarray(t, dtype=float)
        n = np.asarray(n, dtype=float)
        if t.ndim != 1 or t.shape != n.shape or len(t) < 2:
            raise ValueError("need matching 1-d arrays with at least two samples")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if np.any(np.diff(n) < 0):
            raise ValueError("cumulative counts must be non-decreasing")
        self.t, self.n = t, n

    def __call__(self, t):
        return np.interp(t, self.t, self.n)

    def inverse(self, value):
        """Smallest time at which the curve reaches ``value``; NaN if it never does."""
        value = np.asarray(value, dtype=float)
        j = np.searchsorted(self.n, value, side="left")
        jc = np.clip(j, 1, len(self.n) - 1)
        n0, n1 = self.n[jc - 1], self.n[jc]
        t0, t1 = self.t[jc - 1], self.t[jc]
        with np.errstate(invalid="ignore", divide="ignore"):
            s = t0 + (value - n0) / (n1 - n0) * (t1 - t0)
        s = np.where(j == 0, self.t[0], s)
        s = np.where(j >= len(self.n), np.nan, s)
        return s if s.ndim else float(s)


def free_flow_travel_time(q: float, q_p: float, p: OperatingParams) -> float:
    """L / v_bar on the free branch at train flow q and passenger flow q_p."""
    q_star, _ = fd.critical_point(q_p, p)
    if not 0 < q <= q_star * (1 + 1e-12):
        raise fd.InvalidParams(f"q={q} admits no free-flow state (q* = {q_star})")
    k = (q * (p.g_b + p.l / p.v_f) + q_p / p.mu_p) / p.l
    return p.L * k / q


def exit_flow(k: float, q_p: float, p: OperatingParams) -> float:
    return fd.fd_flow(k, q_p, p) if k > 0 else 0.0


def step_density(
    k: float,
    a: float,
    a_p: float,
    dt: float,
    p: OperatingParams,
    ap_next: float | None = None,
    arrivals: float | None = None,
) -> tuple[float, float]:
    """One explicit Euler step of L dk/dt = a - Q(k, a_p); returns (k', d).

    ``arrivals`` replaces a*dt when the caller integrates A exactly.
    Raises Gridlock when k' reaches the jam density at a_p(t + dt).
    """
    k_jam_now = fd.jam_density(a_p, p)
    if k >= k_jam_now:
        raise Gridlock(GridlockReport(float("nan"), k, k_jam_now))
    d = exit_flow(k, a_p, p)
    inflow = a * dt if arrivals is None else arrivals
    k_new = k + (inflow - d * dt) / p.L
    ap_next = a_p if ap_next is None else ap_next
    if ap_next >= p.mu_p:
        raise Gridlock(GridlockReport(float("nan"), k_new, 0.0))
    k_jam = fd.jam_density(ap_next, p)
    if k_new >= k_jam:
        raise Gridlock(GridlockReport(float("nan"), k_new, k_jam))
    return k_new, d


def invert_travel_time(A: CumulativeCurve, D: CumulativeCurve, t) -> np.ndarray:
    """T(t) with A(t) = D(t + T(t)); NaN where D never reaches A(t) in the horizon."""
    t = np.asarray(t, dtype=float)
    s = D.inverse(A(t))
    return np.maximum(s, t) - t


def passenger_output(
    t: np.ndarray, A_p: np.ndarray, T: np.ndarray, ap0: float, lam: float = 1.0
) -> tuple[CumulativeCurve, bool]:
    """Map each (t, A_p(t)) to (t + T(t)/lam, A_p(t)) and resample on ``t``.

    Passengers present before t=0 follow the steady pre-rush relation
    D_p(s) = a_p(0) (s - T(0)). Returns the curve and whether the exit-time
    mapping had to be monotonised (a FIFO violation).
    """
    ok = ~np.isnan(T)
    exits = t[ok] + T[ok] / lam
    counts = A_p[ok]
    T0 = T[0] / lam
    pre_s = np.array([t[0]])
    pre_n = np.array([A_p[0] - ap0 * T0])
    mono = np.maximum.accumulate(exits)
    fifo_violation = bool(np.any(mono > exits))
    if fifo_violation:
        warnings.warn("travel-time mapping t + T(t) is not monotone; passenger exits monotonised", stacklevel=2)
    xs = np.concatenate([pre_s, mono])
    ns = np.concatenate([pre_n, counts])
    # drop duplicate exit times, keeping the largest count
    keep = np.append(np.diff(xs) > 0, True)
    xs, ns = xs[keep], ns[keep]
    Dp = np.interp(t, xs, ns)
    return CumulativeCurve(t, Dp), fifo_violation


@dataclass
class MacroResult:
    t: np.ndarray
    k: np.ndarray
    d: np.ndarray
    A: np.ndarray
    D: np.ndarray
    A_p: np.ndarray
    D_p: np.ndarray
    T: np.ndarray
    T0: float
    ttt: float  # train TTT, integral of (A - D) over [0, horizon] [train h]
    ttt_pax: float  # passenger time per station, integral of (A_p - D_p) [pax h]
    unresolved: int = 0  # trailing grid times whose trains had not left by the horizon
    fifo_violation: bool = False

    def curves(self) -> dict[str, CumulativeCurve]:
        return {name: CumulativeCurve(self.t, getattr(self, name)) for name in ("A", "D", "A_p", "D_p")}


def run_macro(cfg: ScenarioConfig, boundary: Boundary | None = None) -> MacroResult:
    """Integrate the exit-flow model over the scenario horizon.

    The line starts in the free-flow steady state for (a(0), a_p(0)), i.e.
    k(0) = a(0) T(0) / L and D(0) = A(0) - L k(0).
    """
    p = cfg.params
    b = Boundary.sample(cfg) if boundary is None else boundary
    t, a, a_p, A = b.t, b.a, b.a_p, b.A
    dt = b.dt
    n = len(t)

    T0 = free_flow_travel_time(a[0], a_p[0], p)
    k = np.empty(n)
    d = np.empty(n)
    D = np.empty(n)
    k[0] = a[0] * T0 / p.L
    D[0] = A[0] - p.L * k[0]
    for j in range(n - 1):
        try:
            k[j + 1], d[j] = step_density(k[j], a[j], a_p[j], dt, p, ap_next=a_p[j + 1], arrivals=A[j + 1] - A[j])
        except Gridlock as exc:
            r = exc.report
            raise Gridlock(GridlockReport(float(t[j + 1]), r.k, r.k_jam, cfg.to_dict())) from None
        D[j + 1] = D[j] + d[j] * dt
    d[-1] = exit_flow(k[-1], a_p[-1], p)

    Acurve, Dcurve = CumulativeCurve(t, A), CumulativeCurve(t, D)
    T = invert_travel_time(Acurve, Dcurve, t)
    unresolved = int(np.isnan(T).sum())
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        Dp, fifo = passenger_output(t, b.A_p, T, a_p[0], cfg.lam)
    for w in caught:
        warnings.warn(w.message, stacklevel=2)

    ttt = float(np.trapezoid(A - D, t))
    ttt_pax = float(np.trapezoid(b.A_p - Dp.n, t))
    return MacroResult(
        t=t, k=k, d=d, A=np.asarray(A), D=D, A_p=np.asarray(b.A_p), D_p=Dp.n, T=T, T0=T0,
        ttt=ttt, ttt_pax=ttt_pax, unresolved=unresolved, fifo_violation=fifo,
    )
