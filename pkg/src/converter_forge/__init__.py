"""Sizing, loss modelling and switched state-space simulation of SEPIC and
inverting buck-boost DC-DC stages, alone or chained."""

from importlib import resources as _resources

from .quantities import (
    IDEAL, CapacitorValue, CurrentBounds, DesignResult, InductorValue, ParasiticSet,
    SpecError, StageSpec, Topology, validate_spec,
)
from .sizing import design_stage
from .losses import LossBreakdown, PowerRatio, chain_power_ratios, stage_losses
from .circuit import Config, SwitchedCircuit, build_stage_circuit
from .simulator import SimConfig, SimResult, WaveformSet, run_cycles, run_to_steady_state
from .measure import SignalStats, average_power, power_factor, stats
from .cascade import CascadeDesign, CascadeReport, compose, evaluate, evaluate_stage

__version__ = "0.1.0"


def data_path(name: str) -> str:
    """Filesystem path of a bundled example spec such as ``three_stage_chain.json``."""
    return str(_resources.files(__name__).joinpath("data", name))


__all__ = [
    "IDEAL", "CapacitorValue", "CurrentBounds", "DesignResult", "InductorValue", "ParasiticSet",
    "SpecError", "StageSpec", "Topology", "validate_spec", "design_stage", "LossBreakdown",
    "PowerRatio", "chain_power_ratios", "stage_losses", "Config", "SwitchedCircuit",
    "build_stage_circuit", "SimConfig", "SimResult", "WaveformSet", "run_cycles",
    "run_to_steady_state", "SignalStats", "average_power", "power_factor", "stats",
    "CascadeDesign", "CascadeReport", "compose", "evaluate", "evaluate_stage", "data_path",
]
