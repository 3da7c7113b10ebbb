"""Simulation of a nonlocal von Neumann measurement of product Pauli observables."""

__version__ = "0.1.0"

from .errors import ConfigError, ImpossibleOutcome, InvariantViolation, NonlocalMeterError
from .protocol import (
    PRESETS,
    ObservableSpec,
    SystemInput,
    analytic_expected,
    rotate_observable,
    run_observable,
    run_strong,
    run_weak,
)

__all__ = [
    "ConfigError",
    "ImpossibleOutcome",
    "InvariantViolation",
    "NonlocalMeterError",
    "PRESETS",
    "ObservableSpec",
    "SystemInput",
    "analytic_expected",
    "rotate_observable",
    "run_observable",
    "run_strong",
    "run_weak",
]
