"""Stochastic hybrid systems: model, file format, symbolic semantics, checks."""

from decisive.shs.model import (
    TAU, DelaySpec, Edge, HybridSystem, InitialSpec, Location, ResetSpec, State, primed,
)
from decisive.shs.modelfile import load_model, parse_model
from decisive.shs.semantics import (
    DelaySets, delay_set, delay_set_formula, enabled_edges, enabled_formula, flow_at,
    one_step_positive_formula, total_delay_formula,
)
from decisive.shs.validate import Diagnostic, is_cycle_reset, validate

__all__ = [
    "TAU", "DelaySets", "DelaySpec", "Diagnostic", "Edge", "HybridSystem", "InitialSpec",
    "Location", "ResetSpec", "State", "delay_set", "delay_set_formula", "enabled_edges",
    "enabled_formula", "flow_at", "is_cycle_reset", "load_model",
    "one_step_positive_formula", "parse_model", "primed", "total_delay_formula", "validate",
]
