"""Fragile Points Method for 2D flexoelectric and piezoelectric solids."""

from .assembly import BCData, EdgeBC, PenaltyParams, assemble
from .geometry import build_supports
from .material import MaterialProperties, constitutive_set
from .model import Problem
from .solver import ConstraintSet, solve

__version__ = "0.1.0"

__all__ = [
    "BCData",
    "EdgeBC",
    "PenaltyParams",
    "assemble",
    "build_supports",
    "MaterialProperties",
    "constitutive_set",
    "Problem",
    "ConstraintSet",
    "solve",
]
