"""Symbolic corner and thin-layer expansions for the Helmholtz equation in a sector.

The package builds the graded singular series that describe a time-harmonic
field near a corner of opening Theta bordered by a thin layer of width eps,
and the matching coefficients that tie the far-field and corner-field
descriptions together.
"""
from .coeff_field import Degree, Lattice, Poly, PolyTY
from .config import ConfigError, ProblemConfig, load_config
from .formal_series import GradedSeries, Window
from .sing_spaces import PiElement, phi, sigma_d

__all__ = [
    "Degree",
    "Lattice",
    "Poly",
    "PolyTY",
    "ConfigError",
    "ProblemConfig",
    "load_config",
    "GradedSeries",
    "Window",
    "PiElement",
    "phi",
    "sigma_d",
]

__version__ = "0.1.0"
