"""Synthetic-control counterfactuals and risk-sharing channel decompositions."""

__version__ = "0.1.0"
