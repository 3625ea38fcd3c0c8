"""Menger curvature energies, beta-numbers and van der Waerden saw graphs."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import DegenerateInputError, InputError, PreconditionError
from .geometry import (
    AffinePlane,
    BetaEstimate,
    PointTuple,
    beta_number,
    diameter,
    discrete_curvature,
    menger_curvature,
    menger_radius,
    min_height,
    simplex_measure,
    spindle_contains,
)
from .saw import SawParams, critical_alpha, graph_map, hoelder_constant, saw_antiderivative, saw_sum
from .report import ScaleReport, blowup_fit

__all__ = [
    "AffinePlane",
    "BetaEstimate",
    "DegenerateInputError",
    "InputError",
    "PointTuple",
    "PreconditionError",
    "SawParams",
    "ScaleReport",
    "beta_number",
    "blowup_fit",
    "critical_alpha",
    "diameter",
    "discrete_curvature",
    "graph_map",
    "hoelder_constant",
    "menger_curvature",
    "menger_radius",
    "min_height",
    "saw_antiderivative",
    "saw_sum",
    "simplex_measure",
    "spindle_contains",
]
