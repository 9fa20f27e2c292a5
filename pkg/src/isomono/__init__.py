"""Numerics for the n-th isomonodromy equation.

Series solutions parameterized by boundary values, direct flow integration,
closed-form Stokes/connection matrices with an independent ODE oracle,
inverse monodromy reconstruction, and the Painleve VI bridge for n = 3.
"""

__version__ = "0.1.0"
