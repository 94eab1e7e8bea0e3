"""Discrete-event simulator of Self-aware Memory on a 2D mesh."""

from .config import SimConfig, load_config
from .experiments import economic_efficiency, run_pair, sweep
from .mesh import Mesh, NodeRef, Role, TileCoord
from .system import SamSystem, simulate

__all__ = ["Mesh", "NodeRef", "Role", "SamSystem", "SimConfig", "TileCoord",
           "economic_efficiency", "load_config", "run_pair", "simulate", "sweep"]
__version__ = "0.1.0"
