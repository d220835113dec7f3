"""Bulk-surface Cahn-Hilliard solver with dynamic boundary conditions.

The package splits into five parts: ``graphs`` (nonsmooth double-well
machinery), ``diskfem`` (P1 elements on the unit disk and its boundary
curve), ``stepper`` (the implicit time-discrete scheme), ``diagnostics``
(energies, masses, convergence and stability metrics) and ``cli`` (the
experiment drivers).
"""

__version__ = "0.1.0"
