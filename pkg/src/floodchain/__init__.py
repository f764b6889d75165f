"""Markov chain models for daily threshold exceedances.

Bivariate extreme-value dependence between consecutive days, fitted by
censored likelihood, with simulation, extremal index estimation, return
levels, dependence diagnostics and an estimator benchmark.
"""

__version__ = "0.1.0"
