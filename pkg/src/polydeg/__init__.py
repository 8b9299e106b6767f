"""Degree of equilibrium components for extensive-form games in polytope form."""

__version__ = "0.1.0"
