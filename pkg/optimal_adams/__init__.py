"""
Optimal explicit Adams-type finite-difference formulas in W2^(m,m-1)(0,1).

Construction of the optimal derivative coefficients, verification of their
exactness and optimality, the root-based representation of the coefficients,
and an ODE integrator that benchmarks them against Adams-Bashforth.
"""

__version__ = "0.1.0"
