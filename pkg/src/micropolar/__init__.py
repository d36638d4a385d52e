"""Stationary outflow profiles and decay-rate experiments for the 1-D isentropic micropolar fluid."""

from .grid import Grid
from .model import DerivedConstants, ModelParams, derive_constants
from .stationary import Regime, StationaryProfile, build_profile, classify

__all__ = [
    "DerivedConstants",
    "Grid",
    "ModelParams",
    "Regime",
    "StationaryProfile",
    "build_profile",
    "classify",
    "derive_constants",
]
