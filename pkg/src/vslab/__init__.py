"""Pseudo-spectral vorticity solver, time-slab averaged scheme, and estimate ledger."""

from vslab.spectral import Grid

__all__ = ["Grid"]
__version__ = "0.1.0"
