"""Discrete harmonic functions on orthodiagonal maps and their convergence to the
continuum Dirichlet solution."""
from . import continuum, mollify, network, odmap, rates, walk
from ._accel import HAVE_NUMBA, backend, backend_name
from .errors import OrthoLapError

__version__ = "0.1.0"

__all__ = ["odmap", "network", "walk", "continuum", "mollify", "rates",
           "HAVE_NUMBA", "backend", "backend_name", "OrthoLapError"]
