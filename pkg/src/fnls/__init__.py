"""Pseudospectral simulator and verification suite for the damped stochastic
fractional nonlinear Schrodinger equation with additive Q-Wiener noise."""

__version__ = "0.1.0"
