"""Desk-scale laboratory for classical/quantum PAC learning separations built on
discrete logs, cube roots and modular exponentiation."""

__version__ = "0.1.0"
