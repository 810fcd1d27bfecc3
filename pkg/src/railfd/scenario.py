"""Rush-hour scenario definition and the sampled boundary conditions both models share."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .fd import DEFAULT_PARAMS, OperatingParams

PARAM_KEYS = ("mu_p", "g_b", "v_f", "tau", "delta", "l", "n_stations", "v_max")
SCENARIO_KEYS = ("a0", "a2", "ap0", "ap2", "horizon", "dt", "lambda")
CONFIG_KEYS = frozenset(PARAM_KEYS + SCENARIO_KEYS)

PEAK_TIME = 2.0
RAMP_END = 4.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    """Tent-shaped train supply a(t) and passenger demand a_p(t) peaking at t=2 h.

    ``dt`` is the shared sampling step of the boundary arrays; the micro model
    needs it to divide tau exactly.
    """

    a0: float = 10.0
    a2: float = 15.0
    ap0: float = 0.1 * 36000.0
    ap2: float = 0.5 * 36000.0
    horizon: float = 4.0
    dt: float = DEFAULT_PARAMS.tau / 10
    params: OperatingParams = field(default_factory=lambda: DEFAULT_PARAMS)
    lam: float = 1.0

    def __post_init__(self):
        if not (self.a2 >= self.a0 > 0):
            raise ConfigError("need a2 >= a0 > 0")
        if not (self.ap2 >= self.ap0 >= 0):
            raise ConfigError("need ap2 >= ap0 >= 0")
        if self.horizon < RAMP_END:
            raise ConfigError("horizon must cover the whole rush (>= 4 h)")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def feasibility_warnings(self) -> list[str]:
        out = []
        if self.ap2 >= self.params.mu_p:
            out.append(f"peak demand ap2={self.ap2} is not below mu_p={self.params.mu_p}; no steady state exists at the peak")
        return out

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = {k: getattr(self.params, k) for k in PARAM_KEYS}
        d.update(a0=self.a0, a2=self.a2, ap0=self.ap0, ap2=self.ap2, horizon=self.horizon, dt=self.dt)
        d["lambda"] = self.lam
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        keys = set(d)
        if keys != CONFIG_KEYS:
            missing = sorted(CONFIG_KEYS - keys)
            extra = sorted(keys - CONFIG_KEYS)
            raise ConfigError(f"config keys mismatch; missing={missing} unexpected={extra}")
        pd = {k: d[k] for k in PARAM_KEYS}
        pd["n_stations"] = int(pd["n_stations"])
        params = OperatingParams(**pd)
        return cls(
            a0=float(d["a0"]), a2=float(d["a2"]), ap0=float(d["ap0"]), ap2=float(d["ap2"]),
            horizon=float(d["horizon"]), dt=float(d["dt"]), params=params, lam=float(d["lambda"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(d)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def baseline(horizon: float = 4.0, **changes) -> ScenarioConfig:
    """a(0)=10, a(2)=15 train/h; a_p(0)=0.1 mu_p, a_p(2)=0.5 mu_p."""
    mu = DEFAULT_PARAMS.mu_p
    values = dict(a0=10.0, a2=15.0, ap0=0.1 * mu, ap2=0.5 * mu, horizon=horizon)
    values.update(changes)
    return ScenarioConfig(**values)


def tent(t, v0: float, v2: float):
    t = np.asarray(t, dtype=float)
    rise = v0 + (v2 - v0) * t / PEAK_TIME
    fall = v0 + (v2 - v0) * (RAMP_END - t) / PEAK_TIME
    # t < 0 is the steady pre-rush extension used for initial conditions.
    return np.where(t < 0, v0, np.where(t < PEAK_TIME, rise, np.where(t < RAMP_END, fall, v0)))


def demand_profile(cfg: ScenarioConfig):
    """Return the callables (a, a_p)."""
    return (lambda t: tent(t, cfg.a0, cfg.a2)), (lambda t: tent(t, cfg.ap0, cfg.ap2))


def _cumtrapz(y: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * dt)
    return out


@dataclass(frozen=True)
class Boundary:
    """a(t), a_p(t) sampled on t_j = j*dt with trapezoid cumulatives A, A_p.

    Before t=0 the flows are held at their t=0 values, so A(t) = a(0) t there.
    """

    t: np.ndarray
    a: np.ndarray
    a_p: np.ndarray
    A: np.ndarray
    A_p: np.ndarray

    @classmethod
    def sample(cls, cfg: ScenarioConfig) -> "Boundary":
        n = cfg.n_steps
        t = np.arange(n + 1) * cfg.dt
        a_fn, ap_fn = demand_profile(cfg)
        a, a_p = a_fn(t), ap_fn(t)
        for arr in (t, a, a_p):
            arr.setflags(write=False)
        A, A_p = _cumtrapz(a, cfg.dt), _cumtrapz(a_p, cfg.dt)
        A.setflags(write=False)
        A_p.setflags(write=False)
        return cls(t, a, a_p, A, A_p)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    def _flow(self, t: float, y: np.ndarray) -> float:
        if t < 0:
            return float(y[0])
        return float(np.interp(t, self.t, y))

    def _cumulative(self, t: float, Y: np.ndarray, y: np.ndarray) -> float:
        if t < 0:
            return float(y[0] * t)
        if t > self.t[-1]:
            return float(Y[-1] + y[-1] * (t - self.t[-1]))
        return float(np.interp(t, self.t, Y))

    def a_at(self, t: float) -> float:
        return self._flow(t, self.a)

    def ap_at(self, t: float) -> float:
        return self._flow(t, self.a_p)

    def A_at(self, t: float) -> float:
        return self._cumulative(t, self.A, self.a)

    def Ap_at(self, t: float) -> float:
        return self._cumulative(t, self.A_p, self.a_p)

    def count_time(self, n: float) -> float:
        """Time at which A(t) reaches n (A is strictly increasing)."""
        if n <= 0:
            return n / float(self.a[0])
        if n > self.A[-1]:
            return float(self.t[-1] + (n - self.A[-1]) / self.a[-1])
        return float(np.interp(n, self.A, self.t))


def check_feasible(cfg: ScenarioConfig) -> None:
    for msg in cfg.feasibility_warnings():
        warnings.warn(msg, stacklevel=2)


__all__ = [
    "Boundary", "ConfigError", "ScenarioConfig", "baseline", "check_feasible", "demand_profile", "tent",
    "CONFIG_KEYS",
]
