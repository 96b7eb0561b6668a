"""Numerical toolkit for hypersurfaces of warped products eps*I x_a M^n_k(c).

Checks the structure conditions on chart-sampled data, assembles the
connection-form matrix and its flatness residual, integrates the frame to
rebuild an isometric immersion, and evaluates the mean-curvature norm of
pi-level leaves in Robertson-Walker spacetimes.
"""

__version__ = "0.1.0"
