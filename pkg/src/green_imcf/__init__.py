"""Radial p-Green kernels, p-capacities, IMCF cores and the constants around them.

Subpackages and modules:

- :mod:`green_imcf.geometry`: model manifolds ``dr^2 + h(r)^2 g_S`` and volume diagnostics
- :mod:`green_imcf.kernel`: radial p-Green kernels and their Moser transforms
- :mod:`green_imcf.capacity`: radial and variational p-capacities, Sobolev decay bounds
- :mod:`green_imcf.fem`: P1 solver for the p-capacitor problem and the ``p -> 1`` continuation
- :mod:`green_imcf.imcf`: IMCF cores of models and barrier certificates
- :mod:`green_imcf.constants`: Moser/Harnack/Sobolev constants and the no-go certificate
"""
__version__ = "0.1.0"
