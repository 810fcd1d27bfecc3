"""Closed-form fundamental diagram of a rail transit line.

Units are hours, kilometres, trains and passengers throughout:
flows in train/h or pax/h, densities in train/km, speeds in km/h.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field


class InvalidParams(ValueError):
    """Raised when an FD quantity is requested outside its domain."""


class DegenerateSlope(ValueError):
    """Raised when the critical line is vertical, (l - delta)/v_f == tau."""


class Regime(str, enum.Enum):
    FREE_FLOW = "FreeFlow"
    CRITICAL = "Critical"
    CONGESTED = "Congested"


@dataclass(frozen=True)
class OperatingParams:
    """Technical constants of a transit line."""

    mu_p: float = 36000.0  # boarding rate [pax/h]
    g_b: float = 10.0 / 3600.0  # dwell buffer [h]
    v_f: float = 70.0  # free-flow cruising speed [km/h]
    tau: float = 1.0 / 70.0  # minimum headway time [h]
    delta: float = 1.0  # minimum spacing [km]
    l: float = 3.0  # interstation distance [km]
    n_stations: int = 10
    v_max: float = 80.0  # catch-up speed cap used by the control [km/h]
    L: float | None = None  # route length; defaults to l * (n_stations - 1)

    def __post_init__(self):
        if self.L is None:
            object.__setattr__(self, "L", self.l * (self.n_stations - 1))
        for name in ("mu_p", "g_b", "v_f", "tau", "delta", "l", "L"):
            if not getattr(self, name) > 0:
                raise InvalidParams(f"{name} must be positive, got {getattr(self, name)}")
        if not self.delta < self.l:
            raise InvalidParams("delta must be smaller than the interstation distance l")
        if self.v_max < self.v_f:
            raise InvalidParams("v_max must be >= v_f")
        if self.n_stations < 2:
            raise InvalidParams("need at least two stations")

    @property
    def critical_cycle(self) -> float:
        """g_b + delta/v_f + tau: the zero-demand minimum headway [h]."""
        return self.g_b + self.delta / self.v_f + self.tau

    @property
    def congested_slope(self) -> float:
        """dq/dk on the congested branch (negative, independent of q_p)."""
        return -self.l * self.delta / ((self.l - self.delta) * self.g_b + self.tau * self.l)


DEFAULT_PARAMS = OperatingParams()


def _check_demand(q_p: float, p: OperatingParams) -> None:
    if not (0.0 <= q_p < p.mu_p):
        raise InvalidParams(f"passenger flow must satisfy 0 <= q_p < mu_p, got {q_p}")


def critical_point(q_p: float, p: OperatingParams) -> tuple[float, float]:
    """Return (q*, k*), the flow-maximising state for passenger flow q_p."""
    _check_demand(q_p, p)
    c = p.critical_cycle
    q_star = (1.0 - q_p / p.mu_p) / c
    k_star = (
        -((p.l - p.delta) / p.v_f - p.tau) / (c * p.mu_p * p.l) * q_p
        + (p.g_b + p.l / p.v_f) / (c * p.l)
    )
    return q_star, k_star


def zero_flow_density(q_p: float, p: OperatingParams) -> float:
    """k_0 = q_p / (mu_p l): below it the free branch goes negative."""
    _check_demand(q_p, p)
    return q_p / (p.mu_p * p.l)


def _raw_flow(k: float, q_p: float, p: OperatingParams) -> float:
    q_star, k_star = critical_point(q_p, p)
    if k < k_star:
        return (p.l * k - q_p / p.mu_p) / (p.g_b + p.l / p.v_f)
    return p.congested_slope * (k - k_star) + q_star


def fd_flow(k: float, q_p: float, p: OperatingParams) -> float:
    """Train flow Q(k, q_p), clamped at zero outside the feasible band."""
    if not k > 0:
        raise InvalidParams(f"train density must be positive, got {k}")
    return max(0.0, _raw_flow(k, q_p, p))


def is_infeasible_demand(k: float, q_p: float, p: OperatingParams) -> bool:
    """True where the free branch would be negative (too few trains for the demand)."""
    return k < zero_flow_density(q_p, p)


def jam_density(q_p: float, p: OperatingParams) -> float:
    """Zero-flow intercept of the congested branch."""
    q_star, k_star = critical_point(q_p, p)
    return k_star - q_star / p.congested_slope


def critical_line(p: OperatingParams) -> tuple[float, float]:
    """(slope, intercept) of the line on which every critical point lies."""
    denom = (p.l - p.delta) / p.v_f - p.tau
    if denom == 0.0:
        raise DegenerateSlope("(l - delta)/v_f == tau: the critical line is vertical")
    return p.l / denom, -1.0 / denom


def critical_line_check(q_star: float, k_star: float, p: OperatingParams, rtol: float = 1e-9) -> bool:
    slope, intercept = critical_line(p)
    expected = slope * k_star + intercept
    return abs(q_star - expected) <= rtol * max(1.0, abs(q_star), abs(expected))


def critical_line_sign(p: OperatingParams) -> int:
    """+1 if congestion sets in as demand grows at fixed density, -1 if as it falls."""
    slope, _ = critical_line(p)
    return 1 if slope > 0 else -1


def tie_tolerance(k_star: float) -> float:
    return 1e-9 * max(1.0, k_star)


def regime(k: float, q_p: float, p: OperatingParams) -> Regime:
    if not k > 0:
        raise InvalidParams(f"train density must be positive, got {k}")
    _, k_star = critical_point(q_p, p)
    if abs(k - k_star) <= tie_tolerance(k_star):
        return Regime.CRITICAL
    return Regime.FREE_FLOW if k < k_star else Regime.CONGESTED


@dataclass(frozen=True)
class TrafficState:
    """A (q, k, q_p) triple; mean speed and passenger variables are derived."""

    q: float
    k: float
    q_p: float
    regime: Regime = field(default=Regime.FREE_FLOW)

    def __post_init__(self):
        if self.q < 0 or not self.k > 0 or self.q_p < 0:
            raise InvalidParams(f"invalid traffic state q={self.q}, k={self.k}, q_p={self.q_p}")

    @property
    def v_bar(self) -> float:
        return self.q / self.k

    @property
    def v_bar_p(self) -> float:
        return self.v_bar

    @property
    def k_p(self) -> float:
        return self.q_p / self.v_bar


def fd_state(k: float, q_p: float, p: OperatingParams) -> TrafficState:
    return TrafficState(fd_flow(k, q_p, p), k, q_p, regime(k, q_p, p))


@dataclass(frozen=True)
class SteadySpec:
    """Steady operation: headway H, cruise speed v, buffer headway h_f, demand q_p."""

    H: float
    v: float
    h_f: float
    q_p: float

    def regime(self, p: OperatingParams) -> Regime:
        at_vf = math.isclose(self.v, p.v_f, rel_tol=1e-12)
        if at_vf and self.h_f > 0:
            return Regime.FREE_FLOW
        if at_vf and self.h_f == 0:
            return Regime.CRITICAL
        if self.v < p.v_f and self.h_f == 0:
            return Regime.CONGESTED
        raise InvalidParams(f"{self} is not a valid steady state")

    @classmethod
    def build(cls, q_p: float, p: OperatingParams, v: float | None = None, h_f: float = 0.0) -> "SteadySpec":
        """Construct a consistent spec, choosing H from (q_p, v, h_f)."""
        v = p.v_f if v is None else v
        return cls(steady_headway(q_p, h_f, p, v=v), v, h_f, q_p)


def steady_headway(q_p: float, h_f: float, p: OperatingParams, v: float | None = None) -> float:
    """Headway of steady operation at cruise speed v (default v_f) with buffer h_f."""
    _check_demand(q_p, p)
    if h_f < 0:
        raise InvalidParams("buffer headway must be non-negative")
    v = p.v_f if v is None else v
    if not 0 < v <= p.v_f:
        raise InvalidParams(f"cruise speed must lie in (0, v_f], got {v}")
    return (p.g_b + p.delta / v + p.tau) / (1.0 - q_p / p.mu_p) + h_f


def edie_steady_state(spec: SteadySpec, p: OperatingParams) -> TrafficState:
    """Edie-measured state of a steady operation."""
    reg = spec.regime(p)
    _check_demand(spec.q_p, p)
    if not spec.H > 0 or not 0 < spec.v <= p.v_f:
        raise InvalidParams(f"{spec} is not a valid steady state")
    cycle = spec.q_p * spec.H / p.mu_p + p.g_b + p.l / spec.v
    # H, v and h_f are tied together by the headway identity.
    if not math.isclose(spec.H, steady_headway(spec.q_p, spec.h_f, p, v=spec.v), rel_tol=1e-9):
        raise InvalidParams(f"headway {spec.H} inconsistent with v and h_f in {spec}")
    return TrafficState(q=1.0 / spec.H, k=cycle / (p.l * spec.H), q_p=spec.q_p, regime=reg)


def congested_speed_for_density(k: float, q_p: float, p: OperatingParams) -> float:
    """Cruise speed v < v_f whose critical-at-v steady state has density k.

    Inverts k(v) = k_0 + (1 - q_p/mu_p)(g_b + l/v) / ((g_b + delta/v + tau) l)
    for k on the congested branch (k* < k < jam density).
    """
    q_star, k_star = critical_point(q_p, p)
    k_jam = jam_density(q_p, p)
    if not k_star < k < k_jam:
        raise InvalidParams(f"k={k} is not strictly inside the congested branch ({k_star}, {k_jam})")
    # (k - k0) l / s = (g_b + l/v) / (g_b + delta/v + tau) with s = 1 - q_p/mu_p; solve for u = 1/v
    r = (k - zero_flow_density(q_p, p)) * p.l / (1.0 - q_p / p.mu_p)
    u = (r * (p.g_b + p.tau) - p.g_b) / (p.l - r * p.delta)
    return 1.0 / u
