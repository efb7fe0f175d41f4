"""Noisy and projected-noisy SGD for strict-saddle problems.

Orthogonal 4th-order tensor decomposition, a simple ICA oracle, and numeric
certificates (tangent gradients, Lagrangian Hessians, saddle eigenvalues,
local-minima counts) for the strict-saddle structure of those problems.
"""

__version__ = "0.1.0"
