"""Two-dimensional crowd flow on a triangular mesh that moves with the pedestrians."""

from .flowmodel import ModelParams, StaticField, compose_velocity, fundamental_speed
from .mesh import CellState, Mesh, build_regular_mesh
from .scenarios import ScenarioSpec, preset
from .stepper import NumericalParams, SimulationState, remesh, remesh_needed, run, step

__version__ = "0.1.0"

__all__ = [
    "CellState",
    "Mesh",
    "ModelParams",
    "NumericalParams",
    "ScenarioSpec",
    "SimulationState",
    "StaticField",
    "build_regular_mesh",
    "compose_velocity",
    "fundamental_speed",
    "remesh",
    "remesh_needed",
    "run",
    "step",
    "preset",
]
