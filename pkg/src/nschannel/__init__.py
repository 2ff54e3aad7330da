"""Two-phase incompressible flow in a periodic channel with bulk-surface
Cahn-Hilliard dynamics on the walls, plus spectral verification kernels."""

__version__ = "0.1.0"
