"""Spectral Galerkin solver for a coupled two-layer quasi-geostrophic
atmosphere and one-and-a-half-layer ocean channel with radiative forcing."""

__version__ = "0.1.0"

from .params import (
    PhysicalParams, DerivedParams, ShortwaveConfig, ParamError,
    NonConvergence, derive, radiative_equilibrium,
    shortwave_lipschitz_bound, determining_modes_constants,
    coalbedo, coalbedo_slope,
)
from .scales import Scales, build_scales
