"""Likelihood-free inference for a stochastic platelet deposition model."""

__version__ = "0.1.0"
