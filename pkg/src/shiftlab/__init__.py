"""Finite-horizon toolkit for disjoint hypercyclicity of pseudo-shifts."""

__version__ = "0.1.0"
