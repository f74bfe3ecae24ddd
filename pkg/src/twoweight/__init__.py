"""Numerical laboratory for two-weight inequalities on dyadic grids."""

from .measures import Cube, CubeFamily, GridMeasure, MeasureError, MeasureSpec, cube_mass, dilate, generate

__all__ = ["Cube", "CubeFamily", "GridMeasure", "MeasureError", "MeasureSpec", "cube_mass", "dilate", "generate"]
__version__ = "0.1.0"
