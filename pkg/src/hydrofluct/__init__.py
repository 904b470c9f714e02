"""Fluctuating-hydrodynamics engine for reservoir-driven viscous fluids.

Builds the linearized compressible flow generator about a steady state,
assembles the Landau-type noise covariance, solves for the stationary
Gaussian covariance of the fluctuation field, simulates the associated
Ornstein-Uhlenbeck process, and probes for long-range spatial correlations.
"""

__version__ = "0.1.0"
