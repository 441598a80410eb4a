"""
Numerical building blocks for the two-asset Kou American option engine
Grid, operators, jump integral, sparse solvers, time stepping and Greeks
"""

__version__ = "1.0.0"
