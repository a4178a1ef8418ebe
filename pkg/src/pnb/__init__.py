"""Exact sequencing solver built on relaxed and restricted decision
diagrams with a peel-and-bound search."""

from .models import (Objective, SopInstance, SopModel, TsptwInstance,
                     TsptwModel)
from .peel import PeelChoice
from .search import Mode, SolveConfig, SolveResult, optimality_gap, solve

__all__ = [
    "Mode",
    "Objective",
    "PeelChoice",
    "SolveConfig",
    "SolveResult",
    "SopInstance",
    "SopModel",
    "TsptwInstance",
    "TsptwModel",
    "optimality_gap",
    "solve",
]

__version__ = "0.1.0"
