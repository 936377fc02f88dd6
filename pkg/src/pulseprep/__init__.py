"""Pulse-level quantum optimal control for lattice-model state preparation.

Subpackages build up from a lattice spin model (`schwinger`) and a coupled
transmon device description (`device`) to time evolution under piecewise
constant drives (`engine`), gradient-based pulse optimization (`optimize`),
experiment drivers (`experiments`), digital-circuit baselines (`gates`),
and thermal-state preparation (`vqt`).
"""

__version__ = "0.1.0"

from .schwinger import (
    SchwingerParams,
    SpinHamiltonian,
    build_schwinger,
    exact_spectrum,
    ground_probabilities,
    thermal_observables,
)
from .device import DeviceSpec, load_device, preset_names
from .engine import PulseSchedule, propagate, propagate_lindblad, measure_energy
from .optimize import RunResult, prepare_ground_state
from .experiments import (
    MetResult,
    coupling_scan,
    find_met,
    repeated_met,
    speedup_report,
    variance_scan,
)
from .vqt import ThermalResult, VqtConfig, prepare_thermal, thermal_curve

__all__ = [
    "SchwingerParams",
    "SpinHamiltonian",
    "build_schwinger",
    "exact_spectrum",
    "ground_probabilities",
    "thermal_observables",
    "DeviceSpec",
    "load_device",
    "preset_names",
    "PulseSchedule",
    "propagate",
    "propagate_lindblad",
    "measure_energy",
    "RunResult",
    "prepare_ground_state",
    "MetResult",
    "find_met",
    "repeated_met",
    "coupling_scan",
    "variance_scan",
    "speedup_report",
    "ThermalResult",
    "VqtConfig",
    "prepare_thermal",
    "thermal_curve",
    "__version__",
]
