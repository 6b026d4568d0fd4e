"""Two-level Bluetooth/Wi-Fi clustering: model, solvers, delay, interference and energy."""

from .exact import IlpSolution, solve_bilevel, solve_bruteforce, solve_single_level
from .heuristic import build_hierarchy, cluster_level1, cluster_level2
from .interference import FerConfig, FerCurve, FerEstimate, fer_analytic, simulate_fer
from .metrics import EnergyParams, TrafficParams, efficiency, energy_direct, throughput, total_energy
from .model import (
    Hierarchy,
    ModelParams,
    NodeSnapshot,
    ParameterError,
    StructuralError,
    Topology,
    generate_topology,
    price_hierarchy,
    validate_hierarchy,
)
from .schedule import build_slot_plan, total_delay_bilevel

__version__ = "0.1.0"

__all__ = [
    "EnergyParams", "FerConfig", "FerCurve", "FerEstimate", "Hierarchy", "IlpSolution", "ModelParams",
    "NodeSnapshot", "ParameterError", "StructuralError", "Topology", "TrafficParams", "build_hierarchy",
    "build_slot_plan", "cluster_level1", "cluster_level2", "efficiency", "energy_direct", "fer_analytic",
    "generate_topology", "price_hierarchy", "simulate_fer", "solve_bilevel", "solve_bruteforce",
    "solve_single_level", "throughput", "total_delay_bilevel", "total_energy", "validate_hierarchy",
]
