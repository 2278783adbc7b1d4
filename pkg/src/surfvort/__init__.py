"""surfvort: incompressible vorticity dynamics on curved surfaces in R^3.

Charts with exact symbolic geometry (geometry), spectral surface grids and
quadrature (grid), the normal Laplacian / Poisson solver / diffusion
operators (operators), RK4 time integration with conservation diagnostics
(dynamics), the noncanonical Poisson bracket diagnostics (hamiltonian), the
Killing-field diffusion machinery (riemannian), and closed-form diffusive
equilibria (equilibria).
"""

from . import (config, dynamics, equilibria, geometry, grid, hamiltonian,
               operators, riemannian)

__all__ = ["config", "dynamics", "equilibria", "geometry", "grid",
           "hamiltonian", "operators", "riemannian"]

__version__ = "0.1.0"
