"""Rail-transit fundamental diagram with microscopic and macroscopic corridor models."""

from .compare import ComparisonReport, compare, run_comparison, run_sweep
from .fd import (
    DEFAULT_PARAMS,
    OperatingParams,
    Regime,
    SteadySpec,
    TrafficState,
    critical_point,
    edie_steady_state,
    fd_flow,
    fd_state,
    jam_density,
    steady_headway,
)
from .macro import Gridlock, GridlockReport, MacroResult, run_macro
from .micro import MicroResult, measure_edie, run_micro, run_steady
from .scenario import Boundary, ScenarioConfig, baseline

__all__ = [
    "DEFAULT_PARAMS", "Boundary", "ComparisonReport", "Gridlock", "GridlockReport", "MacroResult", "MicroResult",
    "OperatingParams", "Regime", "ScenarioConfig", "SteadySpec", "TrafficState", "baseline", "compare",
    "critical_point", "edie_steady_state", "fd_flow", "fd_state", "jam_density", "measure_edie", "run_comparison",
    "run_macro", "run_micro", "run_steady", "run_sweep", "steady_headway",
]
