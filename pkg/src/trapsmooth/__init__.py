"""Resolvent growth, quasimodes and local smoothing on surfaces of revolution
with a hyperbolic and an inflection-type trapped geodesic.

Hot loops (banded LU, Crank-Nicolson stepping, grid functionals) are compiled
with numba; set ``TRAPSMOOTH_DISABLE_NUMBA=1`` to run the numpy/LAPACK path.
"""
from ._accel import backend_name
from .geometry import SurfaceProfile, trapped_constants

__version__ = "0.1.0"

__all__ = ["SurfaceProfile", "trapped_constants", "backend_name", "__version__"]
