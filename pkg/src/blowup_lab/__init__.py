"""Numerics for log-corrected blow-up of the L2-critical NLS with a singular log potential."""

__version__ = "0.1.0"
