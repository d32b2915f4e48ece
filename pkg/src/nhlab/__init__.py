"""Spectral topology of the two-band non-Hermitian chain with gain and loss."""

__version__ = "0.1.0"
