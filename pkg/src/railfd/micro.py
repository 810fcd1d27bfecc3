"""Time-stepped microscopic simulation of a one-way rail corridor.

Trains follow Newell's lagged car-following rule between stations and dwell
at every station for queued boarding, with the headway-based holding /
speed-up control (alpha = 1) guarding against bunching.

Modelling choices:

* the interaction term uses the predecessor's position exactly tau earlier
  (tau is an integer number of steps); the free term advances from the
  previous step, so a train leaving a station accelerates instantly to its
  cruise speed instead of jumping v*tau.
* by default the doors stay open until the platform queue, including
  passengers arriving during the dwell, has cleared ("clear"). The
  alternative "snapshot" rule boards only the queue present when the doors
  open. Both give n_p = q_p H in steady operation.
* passenger counts are real-valued.
* a station visited for the first time is treated as if it had last been
  served one planned headway 1/a(t) earlier, so a simulation can start
  straight into steady operation.
* trains are labelled by the integer value of A(t) at which they are
  scheduled; a warm-up period before t=0 fills the corridor so both models
  start from the same steady pre-rush state.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .fd import (
    OperatingParams,
    SteadySpec,
    TrafficState,
    congested_speed_for_density,
    critical_point,
    jam_density,
    regime,
)
from .scenario import Boundary


class EmptyRegion(ValueError):
    pass


class SpacingViolation(AssertionError):
    pass


def newell_position(x_prev: float, speed: float, dt: float, x_pred_lagged: float, delta: float) -> float:
    """min(free advance, lagged predecessor position minus the minimum spacing)."""
    return min(x_prev + speed * dt, x_pred_lagged - delta)


def dwell_time(n_p: float, buffer: float, p: OperatingParams) -> float:
    return n_p / p.mu_p + buffer


def control_deviation(t_arr: float, t_pred_arr: float | None, a_now: float, p: OperatingParams) -> float:
    """E = mu_p (headway - 1/a); zero without a predecessor."""
    if t_pred_arr is None:
        return 0.0
    return p.mu_p * (t_arr - t_pred_arr - 1.0 / a_now)


def apply_holding(E: float, p: OperatingParams) -> float:
    """Controlled dwell buffer max(0, g_b - E/mu_p)."""
    return max(0.0, p.g_b - E / p.mu_p)


def apply_speedup(E: float, p: OperatingParams) -> float:
    """Reduction of the next interstation running time (h)."""
    return min(p.l / p.v_f - p.l / p.v_max, max(0.0, E / p.mu_p - p.g_b))


@dataclass
class StationEvent:
    station: int
    t_arr: float
    t_dep: float
    boarded: float
    E: float = 0.0


@dataclass
class TrainTrajectory:
    id: int  # label: scheduled when A(t) reaches this integer
    scheduled: float
    entry: float
    t: list[float] = field(default_factory=list)
    x: list[float] = field(default_factory=list)
    events: list[StationEvent] = field(default_factory=list)
    exit: float | None = None

    def position_at(self, t: float, v_after_exit: float, L: float) -> float:
        if self.exit is not None and t >= self.exit:
            return L + v_after_exit * (t - self.exit)
        if t <= self.t[0]:
            return self.x[0]
        i = bisect.bisect_right(self.t, t)
        if i >= len(self.t):
            return self.x[-1]
        t0, t1 = self.t[i - 1], self.t[i]
        x0, x1 = self.x[i - 1], self.x[i]
        if t1 == t0:
            return x1
        return x0 + (x1 - x0) * (t - t0) / (t1 - t0)

    def time_reaching(self, x: float) -> float | None:
        """First recorded time at which the train is at or beyond ``x``."""
        for i, xi in enumerate(self.x):
            if xi >= x:
                if i == 0:
                    return self.t[0]
                x0, t0 = self.x[i - 1], self.t[i - 1]
                return t0 + (self.t[i] - t0) * (x - x0) / (xi - x0)
        return None


@dataclass
class StationState:
    i: int
    x: float
    cumulative_boardings: float | None = None  # None until first served
    last_arrival: float | None = None

    def queue(self, Ap_now: float) -> float:
        return max(0.0, Ap_now - (self.cumulative_boardings or 0.0))


@dataclass
class MicroResult:
    trains: list[TrainTrajectory]
    stations: list[StationState]
    boundary: Boundary
    params: OperatingParams
    t_start: float
    stops: list[tuple[int, float, float]]  # (train, t, x) for standstills between stations
    deferred: list[tuple[int, float, float]]  # (train, scheduled, actual entry)
    horizon_exceeded: int  # trains still on the corridor or waiting at the horizon

    @property
    def horizon(self) -> float:
        return self.boundary.horizon

    @property
    def scheduled_times(self) -> np.ndarray:
        return np.array([tr.scheduled for tr in self.trains])

    @property
    def exit_times(self) -> np.ndarray:
        return np.array([np.inf if tr.exit is None else tr.exit for tr in self.trains])

    def _label_count(self, times: np.ndarray, t) -> np.ndarray:
        base = self.trains[0].id - 1
        return base + np.searchsorted(np.sort(times), np.asarray(t, dtype=float), side="right")

    def A(self, t) -> np.ndarray:
        """Cumulative scheduled entries, floor(A(t))."""
        return self._label_count(self.scheduled_times, t)

    def D(self, t) -> np.ndarray:
        """Cumulative exits, labelled consistently with A."""
        return self._label_count(self.exit_times, t)

    def ttt(self, t0: float = 0.0, t1: float | None = None) -> float:
        """Train hours spent between scheduled entry and exit, clipped to [t0, t1]."""
        t1 = self.horizon if t1 is None else t1
        s = np.clip(self.scheduled_times, t0, t1)
        e = np.clip(self.exit_times, t0, t1)
        return float(np.sum(np.maximum(e - s, 0.0)))

    def travel_times(self) -> np.ndarray:
        """(label, scheduled, exit - scheduled) for trains that left."""
        return np.array([(tr.id, tr.scheduled, tr.exit - tr.scheduled) for tr in self.trains if tr.exit is not None])

    def headways(self, station: int) -> np.ndarray:
        arr = [ev.t_arr for tr in self.trains for ev in tr.events if ev.station == station]
        return np.diff(np.sort(arr))

    def station_log(self):
        for tr in self.trains:
            for ev in tr.events:
                yield ev.station, tr.id, ev.t_arr, ev.t_dep, ev.boarded


class _Corridor:
    def __init__(self, boundary: Boundary, p: OperatingParams, control: bool, cruise_speed: float | None,
                 boarding: str = "clear"):
        if boarding not in ("clear", "snapshot"):
            raise ValueError(f"unknown boarding rule {boarding!r}")
        self.boarding = boarding
        self.b = boundary
        self.p = p
        self.control = control
        self.v_base = p.v_f if cruise_speed is None else cruise_speed
        if not 0 < self.v_base <= p.v_f:
            raise ValueError("cruise speed must lie in (0, v_f]")
        self.dt = boundary.dt
        nlag = p.tau / self.dt
        if abs(nlag - round(nlag)) > 1e-6 * nlag or round(nlag) < 1:
            raise ValueError(f"timestep {self.dt} h does not divide tau = {p.tau} h")
        self.nlag = int(round(nlag))
        self.stations = [StationState(i, i * p.l) for i in range(p.n_stations)]
        self.trains: list[TrainTrajectory] = []
        self.active: list[TrainTrajectory] = []
        # per-train dynamic state
        self.grid: dict[int, list[float]] = {}  # positions on the step grid since entry
        self.j0: dict[int, int] = {}
        self.status: dict[int, str] = {}
        self.stn: dict[int, int] = {}
        self.dep: dict[int, float] = {}
        self.vcap: dict[int, float] = {}
        self.pred: dict[int, TrainTrajectory | None] = {}
        self.stops: list[tuple[int, float, float]] = []
        self.deferred: list[tuple[int, float, float]] = []

    # -- lookups ---------------------------------------------------------
    def time(self, j: int) -> float:
        return j * self.dt

    def grid_pos(self, tr: TrainTrajectory, j: int) -> float | None:
        if tr.exit is not None and self.time(j) >= tr.exit:
            return self.p.L + self.p.v_f * (self.time(j) - tr.exit)
        g = j - self.j0[tr.id]
        pos = self.grid[tr.id]
        if g < 0:
            return None
        if g >= len(pos):
            return pos[-1]
        return pos[g]

    def limit(self, tr: TrainTrajectory, j: int) -> float | None:
        pred = self.pred[tr.id]
        if pred is None:
            return math.inf
        x = self.grid_pos(pred, j - self.nlag)
        return None if x is None else x - self.p.delta

    # -- events ----------------------------------------------------------
    def arrive(self, tr: TrainTrajectory, i: int, t_arr: float) -> None:
        p, b = self.p, self.b
        st = self.stations[i]
        a_now = b.a_at(t_arr)
        Ap_now = b.Ap_at(t_arr)
        ap_now = b.ap_at(t_arr)
        if st.cumulative_boardings is None:
            planned = ap_now / a_now
            if self.boarding == "clear":
                planned *= 1.0 - ap_now / p.mu_p
            st.cumulative_boardings = Ap_now - planned
        n_p = st.queue(Ap_now)
        if self.boarding == "clear":
            n_p = self.clearing_load(n_p, t_arr)
        E = 0.0
        pred = self.pred[tr.id]
        if self.control and i > 0 and pred is not None:
            pred_arr = next((ev.t_arr for ev in pred.events if ev.station == i), None)
            E = control_deviation(t_arr, pred_arr, a_now, p)
        buffer = apply_holding(E, p)
        reduction = apply_speedup(E, p)
        dep = t_arr + dwell_time(n_p, buffer, p)
        st.cumulative_boardings += n_p
        st.last_arrival = t_arr
        tr.events.append(StationEvent(i, t_arr, dep, n_p, E))
        tr.t.append(t_arr)
        tr.x.append(st.x)
        self.status[tr.id] = "dwell"
        self.stn[tr.id] = i
        self.dep[tr.id] = dep
        self.vcap[tr.id] = p.l / (p.l / self.v_base - reduction)

    def clearing_load(self, queue: float, t_arr: float) -> float:
        """Passengers boarded when the doors stay open until the platform is empty.

        Solves mu_p * b = queue + A_p(t_arr + b) - A_p(t_arr) for the boarding time b.
        """
        mu, b = self.p.mu_p, self.b
        Ap0 = b.Ap_at(t_arr)
        if b.ap_at(t_arr) >= mu:
            raise ValueError("passenger arrivals exceed the boarding rate; the platform never clears")
        s = queue / (mu - b.ap_at(t_arr))
        for _ in range(50):
            f = mu * s - queue - (b.Ap_at(t_arr + s) - Ap0)
            s_new = s - f / (mu - b.ap_at(t_arr + s))
            if abs(s_new - s) <= 1e-14 * max(1.0, s):
                s = s_new
                break
            s = s_new
        return mu * s

    def depart(self, tr: TrainTrajectory) -> None:
        i = self.stn[tr.id]
        t_dep = self.dep[tr.id]
        tr.t.append(t_dep)
        tr.x.append(self.stations[i].x)
        if i == len(self.stations) - 1:
            tr.exit = t_dep
            self.status[tr.id] = "gone"
        else:
            self.status[tr.id] = "cruise"

    # -- motion ----------------------------------------------------------
    def advance(self, tr: TrainTrajectory, j: int, t: float, x: float) -> float:
        """Move ``tr`` from (t, x) to the grid time t_j; returns its position there."""
        t_end = self.time(j)
        lim = self.limit(tr, j)
        if lim is None:
            lim = x
        lim_prev = self.limit(tr, j - 1)
        while True:
            status = self.status[tr.id]
            if status == "gone":
                return self.p.L
            if status == "dwell":
                if self.dep[tr.id] >= t_end:
                    return x
                t = self.dep[tr.id]
                self.depart(tr)
                continue
            i_next = self.stn[tr.id] + 1
            xs = self.stations[i_next].x
            v = self.vcap[tr.id]
            free = x + v * (t_end - t)
            if free >= xs and lim >= xs:
                t_arr = t + (xs - x) / v
                if lim_prev is not None and lim_prev < xs and lim > lim_prev:
                    # released by the predecessor during this step
                    t_lim = t_end - self.dt + self.dt * (xs - lim_prev) / (lim - lim_prev)
                    t_arr = max(t_arr, t_lim)
                t_arr = min(max(t_arr, t), t_end)
                x = xs
                t = t_arr
                self.arrive(tr, i_next, t_arr)
                continue
            return max(x, min(free, lim, xs))

    def try_enter(self, label: int, scheduled: float, j: int) -> bool:
        t_prev, t_end = self.time(j - 1), self.time(j)
        pred = self.trains[-1] if self.trains else None
        t_e = max(scheduled, t_prev)
        if pred is not None:
            t_c = pred.time_reaching(self.p.delta)
            if t_c is None:
                return False
            t_e = max(t_e, t_c + self.p.tau)
        if t_e > t_end:
            return False
        tr = TrainTrajectory(id=label, scheduled=scheduled, entry=t_e)
        if t_e > scheduled + 1e-12:
            self.deferred.append((label, scheduled, t_e))
        self.trains.append(tr)
        self.active.append(tr)
        self.pred[label] = pred
        self.j0[label] = j
        self.grid[label] = []
        self.arrive(tr, 0, t_e)
        return True

    def step(self, j: int) -> None:
        t_prev = self.time(j - 1)
        for tr in self.active:
            x_prev = self.grid[tr.id][-1]
            status = self.status[tr.id]
            x = self.advance(tr, j, t_prev, x_prev)
            if status == "cruise" and self.status[tr.id] == "cruise" and x - x_prev <= 1e-12:
                self.stops.append((tr.id, self.time(j), x))
            self.grid[tr.id].append(x)
        self.active = [tr for tr in self.active if self.status[tr.id] != "gone"]

    def check_spacing(self, j: int) -> None:
        for lead, follow in zip(self.active, self.active[1:]):
            xl, xf = self.grid[lead.id][-1], self.grid[follow.id][-1]
            if xl - xf < self.p.delta - 1e-9:
                raise SpacingViolation(f"trains {lead.id},{follow.id} closer than delta at t={self.time(j)}")


def warmup_duration(boundary: Boundary, p: OperatingParams) -> float:
    """Long enough that every train on the line at t=0 entered after the warm-up start."""
    a0, ap0 = float(boundary.a[0]), float(boundary.a_p[0])
    H = 1.0 / a0
    dwell = ap0 * H / p.mu_p + p.g_b
    trip = p.n_stations * dwell + p.L / p.v_f
    return trip + 3 * H


def run_micro(
    boundary: Boundary,
    p: OperatingParams,
    control: bool = True,
    cruise_speed: float | None = None,
    warmup: float | None = None,
    check_safety: bool = True,
    boarding: str = "clear",
) -> MicroResult:
    """Simulate the corridor from -warmup to the boundary horizon."""
    sim = _Corridor(boundary, p, control, cruise_speed, boarding)
    dt = sim.dt
    W = warmup_duration(boundary, p) if warmup is None else warmup
    j_start = -int(math.ceil(W / dt))
    t_start = j_start * dt
    j_end = len(boundary.t) - 1

    label = int(math.ceil(boundary.A_at(t_start)))
    next_time = boundary.count_time(label)
    # trains scheduled exactly at t_start enter on the first step
    for j in range(j_start + 1, j_end + 1):
        sim.step(j)
        t_end = sim.time(j)
        while next_time <= t_end and sim.try_enter(label, next_time, j):
            tr = sim.trains[-1]
            x = sim.advance(tr, j, tr.entry, 0.0)
            sim.grid[label].append(x)
            sim.active = [t for t in sim.active if sim.status[t.id] != "gone"]
            label += 1
            next_time = boundary.count_time(label)
        if check_safety:
            sim.check_spacing(j)
        for tr in sim.active:
            tr.t.append(t_end)
            tr.x.append(sim.grid[tr.id][-1])

    # scheduled trains that never got in before the horizon
    waiting = 0
    while next_time <= boundary.horizon:
        sim.trains.append(TrainTrajectory(id=label, scheduled=next_time, entry=math.inf, t=[math.inf], x=[0.0]))
        waiting += 1
        label += 1
        next_time = boundary.count_time(label)
    remaining = len(sim.active) + waiting
    if remaining:
        warnings.warn(f"{remaining} trains still in the system at the horizon", stacklevel=2)
    return MicroResult(
        trains=sim.trains, stations=sim.stations, boundary=boundary, params=p, t_start=t_start,
        stops=sim.stops, deferred=sim.deferred, horizon_exceeded=remaining,
    )


def _segment_occupancy(ta, xa, tb, xb, t0, t1, x0, x1) -> tuple[float, float]:
    """(time spent, distance travelled) by a linear segment inside [t0,t1] x [x0,x1)."""
    lo, hi = max(ta, t0), min(tb, t1)
    if hi <= lo:
        return 0.0, 0.0
    if xb == xa:
        return (hi - lo, 0.0) if x0 <= xa < x1 else (0.0, 0.0)
    v = (xb - xa) / (tb - ta)
    s0 = ta + (x0 - xa) / v
    s1 = ta + (x1 - xa) / v
    lo, hi = max(lo, min(s0, s1)), min(hi, max(s0, s1))
    if hi <= lo:
        return 0.0, 0.0
    return hi - lo, abs(v) * (hi - lo)


def measure_edie(result: MicroResult, t_window: tuple[float, float], x_window: tuple[float, float]) -> TrafficState:
    """Edie's generalised flow and density over a time-space rectangle.

    Passenger flow is boardings per station per hour at the stations inside
    the window (stations on the half-open range [x0, x1)).
    """
    t0, t1 = t_window
    x0, x1 = x_window
    if not (t1 > t0 and x1 > x0):
        raise EmptyRegion("degenerate measurement window")
    area = (t1 - t0) * (x1 - x0)
    total_time = total_dist = 0.0
    for tr in result.trains:
        ts, xs = tr.t, tr.x
        if not ts or not math.isfinite(ts[0]):
            continue
        for i in range(len(ts) - 1):
            dt_, dx_ = _segment_occupancy(ts[i], xs[i], ts[i + 1], xs[i + 1], t0, t1, x0, x1)
            total_time += dt_
            total_dist += dx_
    if total_time <= 0:
        raise EmptyRegion("no trajectory intersects the measurement window")
    in_window = [s.i for s in result.stations if x0 <= s.x < x1]
    boarded = sum(
        ev.boarded for tr in result.trains for ev in tr.events if ev.station in in_window and t0 <= ev.t_arr < t1
    )
    q = total_dist / area
    k = total_time / area
    q_p = boarded / (max(len(in_window), 1) * (t1 - t0))
    try:
        reg = regime(k, q_p, result.params)
    except ValueError:
        reg = None
    return TrafficState(q=q, k=k, q_p=q_p) if reg is None else TrafficState(q=q, k=k, q_p=q_p, regime=reg)


def run_steady(spec: SteadySpec, p: OperatingParams, horizon: float = 4.0, steps_per_tau: int = 10):
    """Drive the corridor at constant a = 1/H, a_p = q_p with cruise speed spec.v.

    Returns the Edie state measured over whole headways in [1 h, horizon - 1 h]
    on the interior stations, and the run itself.
    """
    from .scenario import ScenarioConfig

    cfg = ScenarioConfig(
        a0=1.0 / spec.H, a2=1.0 / spec.H, ap0=spec.q_p, ap2=spec.q_p,
        horizon=horizon, dt=p.tau / steps_per_tau, params=p,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # trains on the line at the horizon are expected here
        res = run_micro(Boundary.sample(cfg), p, cruise_speed=spec.v)
    t0 = 1.0
    t1 = t0 + math.floor((horizon - 2.0) / spec.H) * spec.H
    state = measure_edie(res, (t0, t1), (p.l, p.l * (p.n_stations - 2)))
    return state, res


def steady_grid(p: OperatingParams) -> list[SteadySpec]:
    """Two steady operations per regime."""
    mu = p.mu_p
    specs = [
        SteadySpec.build(0.44 * mu, p, h_f=0.02),
        SteadySpec.build(0.11 * mu, p, h_f=0.05),
        SteadySpec.build(0.44 * mu, p),
        SteadySpec.build(0.22 * mu, p),
    ]
    for q_p, frac in ((0.44 * mu, 0.5), (0.11 * mu, 0.5)):
        _, k_star = critical_point(q_p, p)
        k = k_star + frac * (jam_density(q_p, p) - k_star)
        specs.append(SteadySpec.build(q_p, p, v=congested_speed_for_density(k, q_p, p)))
    return specs
