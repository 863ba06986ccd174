"""Numerical laboratory for Hermite spectral projections and their localized norms."""

from .exponents import PqPoint, beta, classify, gamma
from .hermite import hermite_1d, hermite_sweep, wkb_hermite
from .kernels import EigenspaceSpec, kernel_mehler, kernel_spectral, kernel_windowed_spectral
from .opnorm import bracket, localized_projection_norms, projection_operator

__all__ = ["PqPoint", "beta", "classify", "gamma", "hermite_1d", "hermite_sweep", "wkb_hermite",
           "EigenspaceSpec", "kernel_mehler", "kernel_spectral", "kernel_windowed_spectral",
           "bracket", "localized_projection_norms", "projection_operator"]
