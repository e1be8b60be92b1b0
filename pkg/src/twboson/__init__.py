"""Treewidth-based simulation of single-photon and Gaussian boson sampling."""

__version__ = "0.1.0"
