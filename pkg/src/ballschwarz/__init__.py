"""Overlapping Schwarz solvers on unions of balls, with the geometric indicators that bound them."""
from .geometry import Ball, BallUnion, GeometryError, check_assumptions, inside_ball, load_xyzr, save_xyzr
from .generators import chain, lattice, parse_geometry
from .grid import GridDomain, GridError, assemble_rhs, build_grid
from .indicators import IndicatorConfig, IndicatorReport, compute_indicators, d_F
from .schwarz import METHODS, SchwarzConfig, SolveReport, solve

__version__ = "0.1.0"

__all__ = [
    "Ball", "BallUnion", "GeometryError", "check_assumptions", "inside_ball", "load_xyzr", "save_xyzr",
    "chain", "lattice", "parse_geometry",
    "GridDomain", "GridError", "assemble_rhs", "build_grid",
    "IndicatorConfig", "IndicatorReport", "compute_indicators", "d_F",
    "METHODS", "SchwarzConfig", "SolveReport", "solve",
]
