"""Numerical laboratory for the fractional Schrodinger equation."""
from ._backend import backend_name
from .core import (
    Free,
    PhysicalParams,
    PotentialField,
    PowerLaw,
    SpatialGrid,
    Tabulated,
    WaveFunction,
    gaussian,
    inner_product,
    make_grid,
    normalize,
    sample_potential,
)

__version__ = "0.1.0"
