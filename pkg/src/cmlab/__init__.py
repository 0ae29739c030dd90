"""Numerical laboratory for the Calogero-Moser derivative NLS on the Hardy space."""

from .spectral import (
    FullState,
    Geometry,
    HardyState,
    constant_state,
    line_soliton,
    plane_wave,
    random_state,
    torus_soliton,
)

__all__ = [
    "FullState",
    "Geometry",
    "HardyState",
    "constant_state",
    "line_soliton",
    "plane_wave",
    "random_state",
    "torus_soliton",
]
__version__ = "0.1.0"
