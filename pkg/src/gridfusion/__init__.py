"""Generalized sensor fusion: encoders, backbones and heads that exchange feature grids."""

__version__ = '0.1.0'
