"""Lattice swarm model with mutual anticipation and collision-based logic gates."""

from .gates import (GateLayout, GateRunResult, LayoutError, bundled_layout, decide_by_difference,
                    decide_by_fraction, load_layout, parse_layout, run_gate, seed_inputs,
                    truth_table)
from .metrics import MetricsRow, density, inherent_perturbation, polarization
from .swarm import Agent, ModelParams, StepTelemetry, World, make_rng, step

__version__ = "0.1.0"

__all__ = [
    "Agent", "GateLayout", "GateRunResult", "LayoutError", "MetricsRow", "ModelParams",
    "StepTelemetry", "World", "bundled_layout", "decide_by_difference", "decide_by_fraction",
    "density", "inherent_perturbation", "load_layout", "make_rng", "parse_layout",
    "polarization", "run_gate", "seed_inputs", "step", "truth_table",
]
