"""2D Helmholtz with checkerboard domain decomposition and sweeping preconditioners.

The package solves the interface formulation of a non-overlapping
rectangular (checkerboard) decomposition of a 2D Helmholtz problem.
Subdomain coupling uses Pade-type high-order absorbing transmission
conditions with auxiliary edge fields and a dedicated cross-point
treatment; the resulting interface system is solved with GMRES/FGMRES,
optionally preconditioned by sequential or parallel double-sweep
block substitutions over columns, rows, or diagonals of the grid of
subdomains.
"""

__version__ = "0.1.0"
