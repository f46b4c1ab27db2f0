"""Numerical laboratory for quadratic quasilinear Klein-Gordon on R^2 x T.

Submodules: ``spectral`` (grid, transforms, propagator), ``dyadic``
(Littlewood-Paley and spatial shells), ``norms`` (Sobolev, Z, energy,
decay functional), ``nonlinearity`` and ``dynamics`` (time stepping,
phases), ``multiplier`` (symbolic bilinear symbols), ``kernels``
(oscillatory kernel certification) and ``harness`` / ``cli`` (runs).
"""

__version__ = "0.1.0"
