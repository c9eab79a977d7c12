"""Passive linear-optical GKP cluster-state compilation and simulation."""

__version__ = "0.1.0"
