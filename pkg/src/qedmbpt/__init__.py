"""Relativistic pair equations combined with one retarded photon exchange."""

__version__ = "0.1.0"
