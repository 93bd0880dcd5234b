"""Eigenpairs as minimizers of an unconstrained functional."""
__version__ = "0.1.0"
