"""Micro-motion SAR tomography: simulation, sub-aperture tracking and depth focusing."""

__version__ = "0.1.0"
